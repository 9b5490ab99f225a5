/**
 * Typed client for the correction service.
 *
 * Field names mirror the service's JSON bodies exactly; every number the UI
 * shows comes out of one of these responses. Corrections are posted as
 * pre-serialized strings (see payload.ts) so the bytes on the wire are owned
 * by a single module.
 */

export type Task = "regression" | "classification";

export interface SessionInfo {
  session_id: string;
  strategy: string;
  task: Task;
  m: number;
  feature_names: string[];
  background: number[];
  iteration: number;
  metric: number;
}

export interface CardAttribution {
  values: number[];
  available: boolean[];
}

export interface QueryCard {
  sample_id: number;
  features: number[];
  recorded_label: number;
  prediction: number;
  attribution: CardAttribution;
}

export interface QueryResponse {
  iteration: number;
  complete: boolean;
  pending: QueryCard[];
}

export interface CorrectionAck {
  sample_id: number;
  batch_size: number;
  remaining: number;
}

export interface RetrainResponse {
  iteration: number;
  metric: number;
  cumulative_samples: number;
  complete: boolean;
}

export interface MetricsResponse {
  strategy: string;
  iteration: number;
  metric: number[];
  cumulative_samples: number[];
  complete: boolean;
}

/** Minimal slice of fetch the client needs; tests inject a recorded stub. */
export interface HttpResponse {
  ok: boolean;
  status: number;
  text(): Promise<string>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<HttpResponse>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

const JSON_HEADERS = { "Content-Type": "application/json" };

async function parse<T>(resp: HttpResponse): Promise<T> {
  const body = await resp.text();
  if (!resp.ok) {
    let detail = body;
    try {
      const parsed = JSON.parse(body);
      if (typeof parsed.detail === "string") detail = parsed.detail;
    } catch {
      // non-JSON error body, keep raw text
    }
    throw new ApiError(resp.status, detail);
  }
  return JSON.parse(body) as T;
}

export interface Client {
  health(): Promise<{ status: string }>;
  createSession(strategy: string, configPath?: string): Promise<SessionInfo>;
  query(sessionId: string): Promise<QueryResponse>;
  submitCorrection(sessionId: string, payload: string): Promise<CorrectionAck>;
  retrain(sessionId: string): Promise<RetrainResponse>;
  metrics(sessionId: string): Promise<MetricsResponse>;
}

export function createClient(baseUrl: string, fetchLike?: FetchLike): Client {
  const doFetch: FetchLike = fetchLike ?? ((url, init) => globalThis.fetch(url, init));
  const url = (path: string) => `${baseUrl.replace(/\/$/, "")}${path}`;

  return {
    async health() {
      return parse(await doFetch(url("/health")));
    },
    async createSession(strategy, configPath) {
      const body: Record<string, string> = { strategy };
      if (configPath !== undefined) body.config_path = configPath;
      const resp = await doFetch(url("/sessions"), {
        method: "POST",
        headers: JSON_HEADERS,
        body: JSON.stringify(body),
      });
      return parse(resp);
    },
    async query(sessionId) {
      return parse(await doFetch(url(`/sessions/${sessionId}/query`)));
    },
    async submitCorrection(sessionId, payload) {
      const resp = await doFetch(url(`/sessions/${sessionId}/corrections`), {
        method: "POST",
        headers: JSON_HEADERS,
        body: payload,
      });
      return parse(resp);
    },
    async retrain(sessionId) {
      const resp = await doFetch(url(`/sessions/${sessionId}/retrain`), {
        method: "POST",
        headers: JSON_HEADERS,
      });
      return parse(resp);
    },
    async metrics(sessionId) {
      return parse(await doFetch(url(`/sessions/${sessionId}/metrics`)));
    },
  };
}
