import { Api } from "./api.js";
import { App } from "./app.js";
import { DomView } from "./view.js";

const form = document.getElementById("worker-form") as HTMLFormElement;
const input = document.getElementById("worker-id") as HTMLInputElement;

form.addEventListener("submit", async (event) => {
  event.preventDefault();
  const worker = input.value.trim();
  if (!worker) return;
  form.hidden = true;
  document.getElementById("session")!.hidden = false;

  const api = new Api();
  const app = new App(api, new DomView((score) => app.rate(score)), worker);
  document.addEventListener("keydown", (e) => {
    app.handleKey(e.key);
  });
  await app.start();
});
