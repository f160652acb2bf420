/**
 * Typed client for the qualification retrieval service.
 *
 * Every label, score, and verdict the console shows comes back from these
 * calls verbatim; nothing is recomputed on the client. Non-2xx responses
 * surface as ApiError with the server's machine-readable code; transport
 * failures surface as NetworkError so the UI can offer a retry.
 */

export interface ComponentInfo {
  part_number: string;
  package_code: string;
  subpackage_code: string;
  manufacturer: string;
  family: string;
  [extra: string]: unknown;
}

export interface DecisionAnnotation {
  decision: string;
  user: string;
  timestamp: string;
  comment: string | null;
}

export interface MatchEntry {
  number: string;
  status: string;
  match_type: string;
  package_code: string;
  subpackage_code: string;
  manufacturer_name: string;
  qualification_type: string | null;
  description: string | null;
  documentation: string | null;
  notes: string;
  part_number: string | null;
  score?: number;
  label?: string;
  decision?: DecisionAnnotation | null;
}

export interface Report {
  component: ComponentInfo;
  cascade_stage: string;
  direct: MatchEntry[];
  similarity: MatchEntry[];
  alternative: MatchEntry[];
}

export interface RuleItem {
  id: number;
  variants: string[];
  canonical: string;
  state: string;
}

export interface PnQueueItem {
  qual_number: string;
  candidate_pn: string | null;
  reason: string;
  notes: string | null;
}

export interface ReviewDecision {
  subject_type: "Rule" | "PnExtraction" | "AlternativeCandidate";
  subject_id: string;
  decision: "Accept" | "Reject" | "Edit";
  payload?: Record<string, unknown>;
}

export interface HealthInfo {
  status: string;
  build: string;
  datasets: Record<string, string>;
  decisions_applied: number;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, detail: string, status: number) {
    super(detail);
    this.code = code;
    this.status = status;
  }
}

export class NetworkError extends Error {
  readonly retryable = true;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  private readonly base: string;
  private readonly fetchFn: FetchLike;
  readonly user: string;

  constructor(base = "", fetchFn: FetchLike | null = null, user = "designer") {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    this.user = user;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (error) {
      throw new NetworkError(`service unreachable: ${String(error)}`);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const err = (body ?? {}) as { code?: string; detail?: string };
      throw new ApiError(
        err.code ?? "http_error",
        err.detail ?? `HTTP ${response.status}`,
        response.status,
      );
    }
    return body as T;
  }

  getReport(pn: string, k?: number): Promise<Report> {
    const suffix = k === undefined ? "" : `?k=${k}`;
    return this.request<Report>(
      `/api/components/${encodeURIComponent(pn)}/qualifications${suffix}`,
    );
  }

  getPendingRules(): Promise<{ items: RuleItem[] }> {
    return this.request<{ items: RuleItem[] }>("/api/rules/pending");
  }

  getPendingPn(): Promise<{ items: PnQueueItem[] }> {
    return this.request<{ type: string; items: PnQueueItem[] }>(
      "/api/reviews/pending?type=pn",
    );
  }

  postReview(decision: ReviewDecision): Promise<unknown> {
    return this.request("/api/reviews", {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-User": this.user,
      },
      body: JSON.stringify(decision),
    });
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }
}
