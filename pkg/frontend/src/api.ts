/** Typed client for the exagree /v1 JSON API. All numbers displayed in the
 * UI come straight from these responses; the client never computes metrics. */

export interface RunSummary {
  run_id: string;
  stages: Record<string, boolean>;
  dataset: { name: string; n: number; p: number; kind: string; feature_names: string[] };
  targets: string[];
}

export interface Feature {
  index: number;
  name: string;
}

export interface AttributionRange {
  feature: string;
  min: number;
  max: number;
}

export interface CompiledTarget {
  ranking: number[];
  signs: number[] | null;
  source: string;
}

export interface TargetCreated {
  target_id: string;
  compiled_target: CompiledTarget;
}

export interface JobStatus {
  job_id: string;
  run_id: string;
  target_id: string;
  status: "queued" | "running" | "done" | "failed";
  progress: number;
  error: string | null;
}

export type MetricBlock = Record<string, number>;

export interface SearchResult {
  target_id: string;
  mask: number[];
  achieved_ranking: number[];
  true_attributions: number[];
  spearman_vs_target: number;
  reference_spearman: number;
  validation_loss: number;
  loss_in_bound: boolean;
  agreement: Record<string, { reference: MetricBlock; saem: MetricBlock }>;
}

export interface TargetPayload {
  target_id?: string;
  text?: string;
  ranking?: number[];
  signs?: number[];
}

/** Structured service error: HTTP status plus the {code, message} body. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "unreachable", String(err));
    }
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      // Service errors are flat {code, message} objects.
      const code = body?.code ?? "unknown";
      const message = body?.message ?? `HTTP ${resp.status}`;
      throw new ApiError(resp.status, code, message);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async listRuns(): Promise<RunSummary[]> {
    const body = await this.request<{ runs: RunSummary[] }>("/v1/runs");
    return body.runs;
  }

  getRun(runId: string): Promise<RunSummary> {
    return this.request(`/v1/runs/${runId}`);
  }

  async getFeatures(runId: string): Promise<Feature[]> {
    const body = await this.request<{ features: Feature[] }>(
      `/v1/runs/${runId}/features`,
    );
    return body.features;
  }

  async getAttributionRanges(runId: string): Promise<AttributionRange[]> {
    const body = await this.request<{ ranges: AttributionRange[] }>(
      `/v1/runs/${runId}/attribution-ranges`,
    );
    return body.ranges;
  }

  createTarget(runId: string, payload: TargetPayload): Promise<TargetCreated> {
    return this.post(`/v1/runs/${runId}/targets`, payload);
  }

  startSearch(
    runId: string,
    targetId: string,
    overrides: Record<string, number> = {},
  ): Promise<{ job_id: string }> {
    return this.post(`/v1/runs/${runId}/targets/${targetId}/search`, overrides);
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/v1/jobs/${jobId}`);
  }

  getResult(runId: string, targetId: string): Promise<SearchResult> {
    return this.request(`/v1/runs/${runId}/targets/${targetId}/result`);
  }
}
