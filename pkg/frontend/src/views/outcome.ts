// Outcome viewer: ranked answers, confidence gauge, route badge, and the
// ordered trace timeline fetched from the trace endpoint.

import { ApiClient, ApiError } from "../client.js";
import { el } from "../dom.js";
import type { DiagnosisOutcome } from "../types.js";

export function renderOutcome(
  client: ApiClient,
  caseId: string,
  outcome: DiagnosisOutcome,
): HTMLElement {
  const root = el("section", { class: "outcome-view" });
  root.append(el("h2", {}, `Case ${caseId}`));

  const badgeClass = outcome.route === "Rare" ? "route-badge route-rare" : "route-badge route-common";
  root.append(el("span", { class: badgeClass }, outcome.route));
  root.append(
    el(
      "span",
      { class: outcome.converged ? "converged yes" : "converged no" },
      outcome.converged
        ? `converged after ${outcome.verify_iterations_used} verification${outcome.verify_iterations_used === 1 ? "" : "s"}`
        : "did not converge (fallback answer)",
    ),
  );

  const gaugeValue = Math.round(outcome.final_confidence);
  const gauge = el(
    "div",
    {
      class: "confidence-gauge",
      role: "meter",
      "aria-valuemin": "0",
      "aria-valuemax": "100",
      "aria-valuenow": String(gaugeValue),
    },
    el("div", { class: "gauge-fill", style: `width: ${gaugeValue}%` }),
    el("span", { class: "gauge-label" }, `c_f ${gaugeValue}`),
  );
  root.append(gauge);

  const answers = el("ol", { class: "ranked-answers" });
  for (const answer of outcome.answers) {
    answers.append(
      el("li", { class: "answer" }, `${answer.label} (confidence ${answer.confidence})`),
    );
  }
  root.append(el("h3", {}, "Ranked answers"), answers);

  const timeline = el("ol", { class: "trace-timeline" });
  const traceBox = el("div", { class: "trace-box" }, el("h3", {}, "Reasoning path"), timeline);
  root.append(traceBox);

  void client
    .getTrace(caseId, outcome.outcome_index)
    .then((trace) => {
      for (const event of trace.events) {
        timeline.append(
          el(
            "li",
            { class: "trace-event", "data-stage": event.stage },
            el("span", { class: "stage-label" }, event.stage),
            el("span", { class: "agent-role" }, ` ${event.agent_role}: `),
            el("span", { class: "event-preview" }, event.raw_response.slice(0, 160)),
          ),
        );
      }
    })
    .catch((error) => {
      const friendly =
        error instanceof ApiError && error.status === 404
          ? "No trace recorded for this outcome."
          : "Trace unavailable.";
      traceBox.append(el("p", { class: "trace-missing" }, friendly));
    });

  return root;
}
