export interface Task {
  task_id: string;
  item_id: string;
  dimension: string;
  display: string[];
  guideline: string;
  anchors: string[];
  scale_min: number;
  scale_max: number;
}

export interface RatingAck {
  ok: boolean;
  item_id: string;
  dimension: string;
  score: number;
}

export interface Progress {
  worker_id: string;
  submitted: number;
  open_for_worker: number;
  complete_cells: number;
  total_cells: number;
}

export interface SummaryRow {
  system: string;
  dimension: string;
  comparison: string | null;
  mean_score: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function asApiError(res: Response): Promise<ApiError> {
  try {
    const body = await res.json();
    return new ApiError(res.status, body.error ?? "Unknown", body.detail ?? res.statusText);
  } catch {
    return new ApiError(res.status, "Unknown", res.statusText);
  }
}

export class Api {
  constructor(private readonly base: string = "") {}

  async fetchTask(worker: string): Promise<Task | null> {
    const res = await fetch(
      `${this.base}/api/task?worker=${encodeURIComponent(worker)}`
    );
    if (!res.ok) throw await asApiError(res);
    const body = await res.json();
    return body.task;
  }

  async submitRating(worker: string, taskId: string, score: number): Promise<RatingAck> {
    const res = await fetch(`${this.base}/api/rating`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ worker, task_id: taskId, score }),
    });
    if (!res.ok) throw await asApiError(res);
    return res.json();
  }

  async fetchProgress(worker: string): Promise<Progress> {
    const res = await fetch(
      `${this.base}/api/progress?worker=${encodeURIComponent(worker)}`
    );
    if (!res.ok) throw await asApiError(res);
    return res.json();
  }

  async fetchSummary(): Promise<SummaryRow[]> {
    const res = await fetch(`${this.base}/api/summary`);
    if (!res.ok) throw await asApiError(res);
    const body = await res.json();
    return body.rows ?? [];
  }
}
