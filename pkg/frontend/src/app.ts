import { ApiError, Progress, SummaryRow, Task } from "./api.js";

export interface View {
  showTask(task: Task): void;
  showDone(summary: SummaryRow[]): void;
  showProgress(progress: Progress): void;
  showNotice(message: string): void;
  setBusy(busy: boolean): void;
}

export interface RatingClient {
  fetchTask(worker: string): Promise<Task | null>;
  submitRating(worker: string, taskId: string, score: number): Promise<unknown>;
  fetchProgress(worker: string): Promise<Progress>;
  fetchSummary(): Promise<SummaryRow[]>;
}

export const scoreFromKey = (key: string, task: Task): number | null => {
  if (!/^[0-9]$/.test(key)) return null;
  const score = Number(key);
  return score >= task.scale_min && score <= task.scale_max ? score : null;
};

/** Drives one rating session; all rendering goes through the injected view. */
export class App {
  private task: Task | null = null;
  private busy = false;

  constructor(
    private readonly api: RatingClient,
    private readonly view: View,
    private readonly worker: string
  ) {
    if (!worker) throw new Error("worker id must be non-empty");
  }

  currentTask(): Task | null {
    return this.task;
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  async rate(score: number): Promise<void> {
    if (this.task === null || this.busy) return;
    if (score < this.task.scale_min || score > this.task.scale_max) {
      this.view.showNotice(
        `score must be between ${this.task.scale_min} and ${this.task.scale_max}`
      );
      return;
    }
    this.busy = true;
    this.view.setBusy(true);
    try {
      await this.api.submitRating(this.worker, this.task.task_id, score);
      this.view.showProgress(await this.api.fetchProgress(this.worker));
      await this.loadNext();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // the cell filled up (or this submit already landed); move on
        this.view.showNotice(err.message);
        await this.loadNext();
      } else {
        this.view.showNotice(err instanceof Error ? err.message : String(err));
      }
    } finally {
      this.busy = false;
      this.view.setBusy(false);
    }
  }

  async handleKey(key: string): Promise<void> {
    if (this.task === null) return;
    const score = scoreFromKey(key, this.task);
    if (score !== null) await this.rate(score);
  }

  private async loadNext(): Promise<void> {
    this.task = await this.api.fetchTask(this.worker);
    if (this.task === null) {
      this.view.showDone(await this.api.fetchSummary());
    } else {
      this.view.showTask(this.task);
    }
  }
}
