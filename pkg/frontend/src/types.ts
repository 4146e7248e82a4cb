// Types mirroring the service JSON schemas exactly (docs/openapi.json).

export interface GeneFindingIn {
  symbol: string;
  note?: string | null;
}

export interface CaseIn {
  id?: string;
  phenotypes: string[];
  genes?: GeneFindingIn[];
  record_text?: string | null;
  source_tag?: string | null;
}

export interface CandidateAnswer {
  label: string;
  normalized_label: string;
  confidence: number;
  rationale: string;
}

export interface TokenUsage {
  prompt_tokens: number;
  completion_tokens: number;
}

export interface TraceEvent {
  stage: string;
  agent_role: string;
  rendered_prompt: string;
  raw_response: string;
  timestamp: number;
  token_usage: TokenUsage;
}

export interface Trace {
  events: TraceEvent[];
  warnings: string[];
}

export interface DiagnosisOutcome {
  outcome_index: number;
  answers: CandidateAnswer[];
  final_confidence: number;
  route: "Common" | "Rare";
  verify_iterations_used: number;
  converged: boolean;
  per_sample_answers: CandidateAnswer[];
  trace: Trace;
}

export interface VerifierVerdict {
  outcome_index: number;
  assessment: "Correct" | "Incorrect";
  final_diagnosis: string;
  reasoning: string;
}

export interface JobStatus {
  job_id: string;
  state: "Queued" | "Running" | "Done" | "Failed";
  result_ref: number | null;
  error?: string;
}

export interface OutcomeSummary {
  index: number;
  task: string;
  completed_at: number;
  summary: Record<string, unknown>;
}

export interface StoredCase {
  id: string;
  case: CaseIn;
  created_at: number;
  outcomes: OutcomeSummary[];
}

export interface ConsoleConfig {
  baseUrl: string;
  token?: string;
}
