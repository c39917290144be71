/** Typed client for the annotation service REST API. */

export interface SessionInfo {
  session_id: string;
  n_slices: number;
  frame_height: number;
  frame_width: number;
  axis: number;
  active_slice: number;
  status: string;
  has_gt: boolean;
  prompt_count: number;
  degenerate_window: boolean;
}

export interface PredictionResponse {
  slice: number;
  round: number;
  mask_rle: number[];
  dice: number | null;
}

export interface ProgressResponse {
  status: string;
  job: "none" | "running" | "done" | "error";
  done: number;
  total: number;
  provenance: (string | null)[] | null;
  error: string | null;
}

export interface MaskResponse {
  slice: number;
  mask_rle: number[];
  provenance: string;
}

export interface MetricsResponse {
  dice: number;
  nsd: number;
  hd95: number | null;
  nsd_delta: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let body: ApiErrorBody;
    try {
      body = (await resp.json()) as ApiErrorBody;
    } catch {
      body = { code: "http_error", message: resp.statusText };
    }
    throw new ApiError(resp.status, body);
  }
  if (resp.status === 204) {
    return undefined as T;
  }
  return (await resp.json()) as T;
}

export class SessionApi {
  constructor(private baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parse<T>(resp);
  }

  private async get<T>(path: string): Promise<T> {
    return parse<T>(await fetch(`${this.baseUrl}${path}`));
  }

  createSession(body: {
    path: string;
    gt_path?: string | null;
    axis?: number;
  }): Promise<SessionInfo> {
    return this.post("/sessions", body);
  }

  info(sessionId: string): Promise<SessionInfo> {
    return this.get(`/sessions/${sessionId}`);
  }

  addClick(
    sessionId: string,
    slice: number,
    row: number,
    col: number,
    label: "foreground" | "background"
  ): Promise<PredictionResponse> {
    return this.post(`/sessions/${sessionId}/clicks`, { slice, row, col, label });
  }

  undo(sessionId: string): Promise<PredictionResponse> {
    return this.post(`/sessions/${sessionId}/undo`, {});
  }

  setMaskPrompt(sessionId: string, slice: number, maskRle: number[]): Promise<PredictionResponse> {
    return this.post(`/sessions/${sessionId}/mask-prompt`, { slice, mask_rle: maskRle });
  }

  propagate(sessionId: string, backend: "reference" | "remote", endpoint?: string): Promise<unknown> {
    return this.post(`/sessions/${sessionId}/propagate`, { backend, endpoint });
  }

  progress(sessionId: string): Promise<ProgressResponse> {
    return this.get(`/sessions/${sessionId}/progress`);
  }

  mask(sessionId: string, slice: number): Promise<MaskResponse> {
    return this.get(`/sessions/${sessionId}/masks/${slice}`);
  }

  metrics(sessionId: string): Promise<MetricsResponse> {
    return this.get(`/sessions/${sessionId}/metrics`);
  }

  frameUrl(sessionId: string, slice: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/frames/${slice}.png`;
  }

  deleteSession(sessionId: string): Promise<void> {
    return fetch(`${this.baseUrl}/sessions/${sessionId}`, { method: "DELETE" }).then((r) =>
      parse<void>(r)
    );
  }
}
