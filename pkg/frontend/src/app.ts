// View wiring: case entry -> outcome viewer, plus verify-my-diagnosis.

import { ApiClient } from "./client.js";
import { el, clear } from "./dom.js";
import { renderCaseEntry } from "./views/caseEntry.js";
import { renderOutcome } from "./views/outcome.js";
import { renderVerify } from "./views/verify.js";
import type { DiagnosisOutcome } from "./types.js";

export function mountApp(root: HTMLElement, client: ApiClient): void {
  const content = el("main", { class: "content" });
  const nav = el("nav", { class: "topnav" });

  const newCaseButton = el("button", { type: "button", class: "nav-new-case" }, "New case");
  const verifyButton = el("button", { type: "button", class: "nav-verify" }, "Verify my diagnosis");
  nav.append(el("h1", {}, "hygieia console"), newCaseButton, verifyButton);

  function showCaseEntry(): void {
    clear(content);
    content.append(
      renderCaseEntry(client, {
        onOutcome: (caseId: string, outcome: DiagnosisOutcome) => showOutcome(caseId, outcome),
      }),
    );
  }

  function showOutcome(caseId: string, outcome: DiagnosisOutcome): void {
    clear(content);
    content.append(renderOutcome(client, caseId, outcome));
  }

  function showVerify(): void {
    clear(content);
    const caseId = client.session.activeCaseId;
    if (!caseId) {
      content.append(el("p", { class: "no-case" }, "Create a case first."));
      return;
    }
    content.append(renderVerify(client, caseId));
  }

  newCaseButton.addEventListener("click", showCaseEntry);
  verifyButton.addEventListener("click", showVerify);

  root.append(nav, content);
  showCaseEntry();
}
