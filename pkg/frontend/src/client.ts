// The one typed client layer. Every view goes through ApiClient; no view
// issues raw requests, and the bearer token lives only here (never in the
// document body).

import type {
  CaseIn,
  ConsoleConfig,
  DiagnosisOutcome,
  JobStatus,
  StoredCase,
  Trace,
  VerifierVerdict,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public payload: unknown,
  ) {
    super(`service returned ${status}`);
  }

  detail(): unknown {
    if (this.payload && typeof this.payload === "object" && "detail" in this.payload) {
      return (this.payload as { detail: unknown }).detail;
    }
    return this.payload;
  }
}

export class ConsoleSession {
  activeCaseId: string | null = null;
  readonly cachedOutcomes = new Map<string, DiagnosisOutcome>();

  constructor(
    readonly baseUrl: string,
    private readonly token?: string,
  ) {}

  authHeaders(): Record<string, string> {
    return this.token ? { Authorization: `Bearer ${this.token}` } : {};
  }

  cacheOutcome(caseId: string, outcome: DiagnosisOutcome): void {
    this.cachedOutcomes.set(`${caseId}:${outcome.outcome_index}`, outcome);
  }
}

export class ApiClient {
  readonly session: ConsoleSession;

  constructor(config: ConsoleConfig) {
    this.session = new ConsoleSession(config.baseUrl.replace(/\/$/, ""), config.token);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { ...this.session.authHeaders() };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    const response = await fetch(`${this.session.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, payload);
    }
    return payload as T;
  }

  createCase(body: CaseIn): Promise<{ id: string }> {
    return this.request("POST", "/cases", body);
  }

  getCase(caseId: string): Promise<StoredCase> {
    return this.request("GET", `/cases/${caseId}`);
  }

  diagnose(caseId: string): Promise<DiagnosisOutcome> {
    return this.request("POST", `/cases/${caseId}/diagnose`);
  }

  diagnoseAsync(caseId: string): Promise<JobStatus> {
    return this.request("POST", `/cases/${caseId}/diagnose?async=true`);
  }

  prioritizeGenes(caseId: string): Promise<DiagnosisOutcome> {
    return this.request("POST", `/cases/${caseId}/prioritize-genes`);
  }

  verify(caseId: string, proposedDiagnosis: string): Promise<VerifierVerdict> {
    return this.request("POST", `/cases/${caseId}/verify`, {
      proposed_diagnosis: proposedDiagnosis,
    });
  }

  getTrace(caseId: string, outcomeIndex: number): Promise<Trace> {
    return this.request("GET", `/cases/${caseId}/trace/${outcomeIndex}`);
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  /** Poll an async job once a second until it leaves Queued/Running. */
  async waitForJob(jobId: string, intervalMs = 1000, maxPolls = 600): Promise<JobStatus> {
    for (let i = 0; i < maxPolls; i++) {
      const job = await this.getJob(jobId);
      if (job.state === "Done" || job.state === "Failed") {
        return job;
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
    throw new Error(`job ${jobId} did not finish`);
  }
}
