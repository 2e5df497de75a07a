import { Progress, SummaryRow, Task } from "./api.js";
import { View } from "./app.js";

const DIMENSION_TITLES: Record<string, string> = {
  metaphoricity: "How metaphoric is this sentence?",
  fluency: "How fluent is this sentence?",
  paraphrase: "Do these sentences mean the same thing?",
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

/** Renders into the static ids laid out in index.html. */
export class DomView implements View {
  private readonly prompt = byId<HTMLElement>("prompt");
  private readonly sentences = byId<HTMLElement>("sentences");
  private readonly guideline = byId<HTMLElement>("guideline");
  private readonly buttons = byId<HTMLElement>("buttons");
  private readonly notice = byId<HTMLElement>("notice");
  private readonly progress = byId<HTMLElement>("progress");
  private readonly summary = byId<HTMLElement>("summary");

  constructor(private readonly onScore: (score: number) => void) {}

  showTask(task: Task): void {
    this.summary.hidden = true;
    this.notice.textContent = "";
    this.prompt.textContent = DIMENSION_TITLES[task.dimension] ?? task.dimension;
    this.sentences.replaceChildren(
      ...task.display.map((text) => {
        const p = document.createElement("p");
        p.className = "sentence";
        p.textContent = text;
        return p;
      })
    );
    this.guideline.textContent = task.guideline;
    this.buttons.replaceChildren();
    for (let score = task.scale_min; score <= task.scale_max; score++) {
      const button = document.createElement("button");
      const anchor = task.anchors[score - task.scale_min] ?? "";
      button.textContent = anchor ? `${score} ${anchor}` : String(score);
      button.addEventListener("click", () => this.onScore(score));
      this.buttons.appendChild(button);
    }
  }

  showDone(summary: SummaryRow[]): void {
    this.prompt.textContent = "All done, thank you!";
    this.sentences.replaceChildren();
    this.guideline.textContent = "";
    this.buttons.replaceChildren();
    this.summary.hidden = false;
    const rows = summary
      .map(
        (row) =>
          `<tr><td>${row.system}</td><td>${row.dimension}</td>` +
          `<td>${row.comparison ?? ""}</td><td>${row.mean_score.toFixed(2)}</td></tr>`
      )
      .join("");
    this.summary.innerHTML =
      "<table><thead><tr><th>system</th><th>dimension</th>" +
      "<th>comparison</th><th>mean</th></tr></thead>" +
      `<tbody>${rows}</tbody></table>`;
  }

  showProgress(progress: Progress): void {
    this.progress.textContent =
      `${progress.submitted} submitted, ` +
      `${progress.complete_cells}/${progress.total_cells} cells complete`;
  }

  showNotice(message: string): void {
    this.notice.textContent = message;
  }

  setBusy(busy: boolean): void {
    for (const button of this.buttons.querySelectorAll("button")) {
      button.disabled = busy;
    }
  }
}
