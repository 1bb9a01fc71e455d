// Typed client for the classification service's JSON endpoints.
// The console consumes exactly these; nothing is computed server-side
// figures are always passed through untouched.

export type Diagnosis = "benign" | "malignant";
export type Verdict = "correct" | "incorrect";

export interface ClassifyResponse {
  request_id: string;
  label: Diagnosis;
  probability: number;
  model_version: number;
  elapsed_ms: number;
}

export interface FeedbackPayload {
  request_id: string;
  verdict: Verdict;
  true_label?: Diagnosis;
}

export interface QueueItem {
  request_id: string;
  label: Diagnosis;
  probability: number;
  model_version: number;
  created_at: string;
  has_feedback: boolean;
  has_image: boolean;
}

export interface PipelineStatus {
  rolling_accuracy: number | null;
  window_fill: number;
  window: number;
  triggers: { schedule: boolean; degradation: boolean };
  run_in_progress: string | null;
  last_run: {
    run_id: string;
    accepted: boolean | null;
    aborted_at: string | null;
    finished_at: string | null;
  } | null;
}

export interface ModelInfo {
  version_id: number;
  stage: string;
  created_at: string;
  eval: {
    accuracy: number;
    auc: number;
    f1: number | null;
    precision: number | null;
    recall: number | null;
  };
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await fetch(this.baseUrl + path, init);
    return response;
  }

  /** Raw GET returning both parsed JSON and the exact body text. */
  async getRaw(path: string): Promise<{ body: string; status: number }> {
    const response = await this.request(path);
    const body = await response.text();
    if (!response.ok) throw new ApiError(response.status, body);
    return { body, status: response.status };
  }

  async pipelineStatusRaw(): Promise<string> {
    return (await this.getRaw("/api/v1/pipeline/status")).body;
  }

  async modelInfoRaw(): Promise<string | null> {
    const response = await this.request("/api/v1/model");
    if (response.status === 503) return null;
    const body = await response.text();
    if (!response.ok) throw new ApiError(response.status, body);
    return body;
  }

  async reviewQueue(limit: number): Promise<QueueItem[]> {
    const { body } = await this.getRaw(
      `/api/v1/classifications?unreviewed=true&limit=${limit}`,
    );
    return (JSON.parse(body) as { items: QueueItem[] }).items;
  }

  async submitFeedback(payload: FeedbackPayload): Promise<number> {
    const response = await this.request("/api/v1/feedback", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return response.status;
  }

  async triggerPipeline(reason: string): Promise<{ status: number; runId: string | null }> {
    const response = await this.request("/api/v1/pipeline/trigger", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ reason }),
    });
    if (response.status === 202) {
      const body = (await response.json()) as { run_id: string };
      return { status: 202, runId: body.run_id };
    }
    return { status: response.status, runId: null };
  }

  thumbnailUrl(item: QueueItem): string | null {
    return item.has_image
      ? `${this.baseUrl}/api/v1/classifications/${item.request_id}/image`
      : null;
  }
}
