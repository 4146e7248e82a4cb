import type { DiagnosisOutcome, Trace } from "../src/types.js";

export const RARE_TRACE: Trace = {
  events: [
    { stage: "Route", agent_role: "Router", rendered_prompt: "p", raw_response: "label=Rare", timestamp: 1, token_usage: { prompt_tokens: 0, completion_tokens: 0 } },
    { stage: "Extract", agent_role: "KnowledgeExtractor", rendered_prompt: "p", raw_response: "terms", timestamp: 2, token_usage: { prompt_tokens: 4, completion_tokens: 2 } },
    { stage: "Summarize", agent_role: "Summary", rendered_prompt: "p", raw_response: "ANSWER: X | CONFIDENCE: 80", timestamp: 3, token_usage: { prompt_tokens: 9, completion_tokens: 5 } },
    { stage: "Verify", agent_role: "Verifier", rendered_prompt: "p", raw_response: "VERDICT: ACCEPT", timestamp: 4, token_usage: { prompt_tokens: 3, completion_tokens: 1 } },
  ],
  warnings: [],
};

export const COMMON_TRACE: Trace = {
  events: [
    { stage: "Route", agent_role: "Router", rendered_prompt: "p", raw_response: "label=Common", timestamp: 1, token_usage: { prompt_tokens: 0, completion_tokens: 0 } },
    { stage: "Summarize", agent_role: "Summary", rendered_prompt: "p", raw_response: "ANSWER: X | CONFIDENCE: 80", timestamp: 2, token_usage: { prompt_tokens: 9, completion_tokens: 5 } },
    { stage: "Aggregate", agent_role: "aggregator", rendered_prompt: "s=1", raw_response: "winner=X", timestamp: 3, token_usage: { prompt_tokens: 0, completion_tokens: 0 } },
  ],
  warnings: [],
};

export function outcomeFixture(overrides: Partial<DiagnosisOutcome> = {}): DiagnosisOutcome {
  return {
    outcome_index: 0,
    answers: [
      { label: "Distal arthrogryposis, type 10", normalized_label: "distal arthrogryposis type 10", confidence: 90, rationale: "" },
      { label: "Bethlem myopathy", normalized_label: "bethlem myopathy", confidence: 40, rationale: "" },
    ],
    final_confidence: 80,
    route: "Rare",
    verify_iterations_used: 1,
    converged: true,
    per_sample_answers: [],
    trace: RARE_TRACE,
    ...overrides,
  };
}
