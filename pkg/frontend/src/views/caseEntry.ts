// Case entry: dynamic phenotype rows, genes, notes; creates the case and
// kicks off diagnosis or gene prioritization.

import { ApiClient, ApiError } from "../client.js";
import { el, clear } from "../dom.js";
import type { CaseIn, DiagnosisOutcome } from "../types.js";

export interface CaseEntryHandlers {
  onOutcome: (caseId: string, outcome: DiagnosisOutcome) => void;
}

function parseGenes(raw: string): { symbol: string; note?: string }[] {
  return raw
    .split(";")
    .map((chunk) => chunk.trim())
    .filter((chunk) => chunk.length > 0)
    .map((chunk) => {
      const [symbol, ...rest] = chunk.split(":");
      const note = rest.join(":").trim();
      return note ? { symbol: symbol.trim(), note } : { symbol: symbol.trim() };
    });
}

export function renderCaseEntry(client: ApiClient, handlers: CaseEntryHandlers): HTMLElement {
  const root = el("section", { class: "case-entry" });
  const heading = el("h2", {}, "New case");
  const errorBox = el("div", { class: "field-errors", role: "alert" });
  const retryBanner = el("div", { class: "retry-banner", hidden: "hidden" });

  const phenotypeList = el("div", { class: "phenotype-list" });

  function addPhenotypeRow(value = ""): void {
    const input = el("input", {
      type: "text",
      class: "phenotype-input",
      placeholder: "e.g. toe walking",
    });
    input.value = value;
    const remove = el("button", { type: "button", class: "remove-phenotype" }, "×");
    const row = el("div", { class: "phenotype-row" }, input, remove);
    remove.addEventListener("click", () => {
      if (phenotypeList.children.length > 1) {
        row.remove();
      }
    });
    phenotypeList.append(row);
  }

  addPhenotypeRow();
  const addButton = el("button", { type: "button", class: "add-phenotype" }, "+ phenotype");
  addButton.addEventListener("click", () => addPhenotypeRow());

  const genesInput = el("input", {
    type: "text",
    class: "genes-input",
    placeholder: "TTN:truncating variant; MYH3",
  });
  const notesInput = el("textarea", { class: "notes-input", rows: "3" });

  const taskSelect = el("select", { class: "task-select" });
  taskSelect.append(new Option("Diagnose", "diagnose"), new Option("Prioritize genes", "genes"));

  const submit = el("button", { type: "submit", class: "submit-case" }, "Run");
  const form = el(
    "form",
    {},
    el("label", {}, "Phenotypes"),
    phenotypeList,
    addButton,
    el("label", {}, "Gene findings"),
    genesInput,
    el("label", {}, "Clinical notes"),
    notesInput,
    el("label", {}, "Task"),
    taskSelect,
    submit,
  );

  function phenotypes(): string[] {
    return Array.from(root.querySelectorAll<HTMLInputElement>(".phenotype-input"))
      .map((input) => input.value.trim())
      .filter((value) => value.length > 0);
  }

  function showFieldErrors(detail: unknown): void {
    clear(errorBox);
    if (detail && typeof detail === "object") {
      for (const [field, message] of Object.entries(detail as Record<string, unknown>)) {
        errorBox.append(el("p", { class: "field-error", "data-field": field }, `${field}: ${message}`));
      }
    } else {
      errorBox.append(el("p", { class: "field-error" }, String(detail)));
    }
  }

  async function run(): Promise<void> {
    clear(errorBox);
    retryBanner.hidden = true;
    const entries = phenotypes();
    if (entries.length === 0) {
      showFieldErrors({ phenotypes: "add at least one phenotype" });
      return;
    }
    const body: CaseIn = { phenotypes: entries };
    const genes = parseGenes(genesInput.value);
    if (genes.length > 0) {
      body.genes = genes;
    }
    if (notesInput.value.trim()) {
      body.record_text = notesInput.value.trim();
    }
    submit.setAttribute("disabled", "disabled");
    try {
      const created = await client.createCase(body);
      client.session.activeCaseId = created.id;
      const outcome =
        taskSelect.value === "genes"
          ? await client.prioritizeGenes(created.id)
          : await client.diagnose(created.id);
      client.session.cacheOutcome(created.id, outcome);
      handlers.onOutcome(created.id, outcome);
    } catch (error) {
      if (error instanceof ApiError && error.status === 400) {
        showFieldErrors(error.detail());
      } else if (error instanceof ApiError && error.status === 503) {
        clear(retryBanner);
        retryBanner.hidden = false;
        const again = el("button", { type: "button", class: "retry-button" }, "Retry");
        again.addEventListener("click", () => void run());
        retryBanner.append("The diagnosis backend is unavailable. ", again);
      } else {
        showFieldErrors(error instanceof ApiError ? error.detail() : String(error));
      }
    } finally {
      submit.removeAttribute("disabled");
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void run();
  });

  root.append(heading, errorBox, retryBanner, form);
  return root;
}
