// Verify-my-diagnosis: the physician proposes a diagnosis, the service
// verifies it and either confirms or supplies a corrected diagnosis.

import { ApiClient, ApiError } from "../client.js";
import { el, clear } from "../dom.js";

export function renderVerify(client: ApiClient, caseId: string): HTMLElement {
  const root = el("section", { class: "verify-view" });
  root.append(el("h2", {}, `Verify a diagnosis for case ${caseId}`));

  const input = el("input", {
    type: "text",
    class: "proposal-input",
    placeholder: "e.g. Kabuki syndrome",
  });
  const submit = el("button", { type: "submit", class: "submit-proposal" }, "Verify");
  const form = el("form", {}, input, submit);
  const result = el("div", { class: "verdict-result" });
  const inputError = el("p", { class: "field-error", hidden: "hidden" });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void run();
  });

  async function run(): Promise<void> {
    clear(result);
    inputError.hidden = true;
    const proposal = input.value.trim();
    if (!proposal) {
      inputError.textContent = "enter a proposed diagnosis first";
      inputError.hidden = false;
      return;
    }
    submit.setAttribute("disabled", "disabled");
    try {
      const verdict = await client.verify(caseId, proposal);
      const correct = verdict.assessment === "Correct";
      result.append(
        el(
          "span",
          { class: correct ? "assessment-badge correct" : "assessment-badge incorrect" },
          verdict.assessment,
        ),
      );
      const finalLine = el(
        "p",
        { class: correct ? "final-diagnosis" : "final-diagnosis corrected" },
        correct ? `Confirmed: ${verdict.final_diagnosis}` : `Corrected diagnosis: ${verdict.final_diagnosis}`,
      );
      result.append(finalLine);
      const bullets = el("ul", { class: "reasoning-bullets" });
      for (const line of verdict.reasoning.split("\n")) {
        const cleaned = line.replace(/^[-*]\s*/, "").trim();
        if (cleaned) {
          bullets.append(el("li", {}, cleaned));
        }
      }
      result.append(bullets);
    } catch (error) {
      if (error instanceof ApiError && error.status === 502) {
        const detail = error.detail() as { error?: string; raw_text?: string } | null;
        result.append(
          el("p", { class: "verdict-error" }, "The verifier reply could not be parsed."),
          el("pre", { class: "audit-text" }, detail?.raw_text ?? ""),
        );
      } else {
        result.append(
          el(
            "p",
            { class: "verdict-error" },
            error instanceof ApiError ? `service error ${error.status}` : String(error),
          ),
        );
      }
    } finally {
      submit.removeAttribute("disabled");
    }
  }

  root.append(form, inputError, result);
  return root;
}
