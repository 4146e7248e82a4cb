"""Dataset ingestion, Recall@K computation, and benchmark reporting."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DatasetParseError, EmptyGold, PipelineError
from .model import PatientCase, PipelineConfig, TaskKind, TaskRequest
from .normalize import LabelKind, normalize_label
from .orchestrator import Pipeline

REPORT_KS = (1, 5, 10)


@dataclass(frozen=True)
class EvalRecord:
    case: PatientCase
    gold_diseases: tuple[str, ...] = ()
    gold_genes: tuple[str, ...] = ()


@dataclass
class EvalReport:
    dataset_name: str
    task: str
    per_k: dict[int, float]
    n_cases: int
    per_case_hits: list[dict]  # {case_id, k, hit, error?}
    usage_totals: dict[str, dict]
    seed: int
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "task": self.task,
            "per_k": {str(k): v for k, v in sorted(self.per_k.items())},
            "n_cases": self.n_cases,
            "per_case_hits": self.per_case_hits,
            "usage_totals": self.usage_totals,
            "seed": self.seed,
            "errors": self.errors,
        }


def recall_at_k(
    predictions: list[str],
    gold: list[str],
    k: int,
    kind: LabelKind = LabelKind.DISEASE,
    synonyms: dict[str, str] | None = None,
) -> int:
    """1 iff any of the first min(k, len(predictions)) normalized predictions
    equals any normalized gold label; 0 otherwise."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if not gold:
        raise EmptyGold("gold label list is empty")
    gold_set = {normalize_label(g, kind, synonyms) for g in gold}
    for pred in predictions[:k]:
        if normalize_label(pred, kind, synonyms) in gold_set:
            return 1
    return 0


def _parse_record(doc: dict) -> EvalRecord:
    case = PatientCase.from_dict(doc)
    if not case.phenotypes:
        raise ValueError("record has no phenotypes")
    return EvalRecord(
        case=case,
        gold_diseases=tuple(str(d) for d in doc.get("gold_diseases") or []),
        gold_genes=tuple(str(g) for g in doc.get("gold_genes") or []),
    )


def load_dataset(path: str | Path, strict: bool = True) -> list[EvalRecord]:
    """One EvalRecord per JSON line.

    Strict mode aborts on the first malformed line (reporting its number);
    lenient mode skips malformed lines.
    """
    records: list[EvalRecord] = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            record = _parse_record(doc)
            if not record.gold_diseases and not record.gold_genes:
                raise ValueError("record has no gold labels")
        except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
            if strict:
                raise DatasetParseError(line_no, str(exc)) from exc
            continue
        records.append(record)
    return records


def run_benchmark(
    records: list[EvalRecord],
    task: TaskKind,
    config: PipelineConfig,
    pipeline: Pipeline,
    ks: tuple[int, ...] = REPORT_KS,
    dataset_name: str = "dataset",
    seed: int = 0,
    synonyms: dict[str, str] | None = None,
    parallel: int = 1,
) -> EvalReport:
    """Run the task pipeline per record and score Recall@K.

    answer_top_k is widened to max(ks) so one run scores every K. Per-case
    pipeline failures count as misses flagged with an error, never aborts.
    The seed is recorded for repeatability bookkeeping under live backends.
    Results keep record order regardless of ``parallel``.
    """
    if not records:
        raise ValueError("records must be non-empty")
    kind = LabelKind.GENE if task is TaskKind.PRIORITIZE_GENES else LabelKind.DISEASE
    run_config = replace(config, answer_top_k=max(ks))

    for record in records:
        if not (record.gold_genes if kind is LabelKind.GENE else record.gold_diseases):
            raise EmptyGold(f"record {record.case.id!r} has no gold label for task {task.value}")

    usage_before = {
        role: usage.as_tuple() for role, usage in pipeline.gateway.usage_report().items()
    }

    def run_one(record: EvalRecord) -> tuple[list[str], str | None]:
        try:
            outcome = pipeline.run(TaskRequest(kind=task, case=record.case, config=run_config))
            return [a.label for a in outcome.answers], None
        except PipelineError as exc:
            return [], str(exc.cause)

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run_one, records))
    else:
        results = [run_one(record) for record in records]

    per_case_hits: list[dict] = []
    errors: list[dict] = []
    hits_by_k: dict[int, int] = {k: 0 for k in ks}
    for record, (predictions, error_text) in zip(records, results):
        gold = list(record.gold_genes if kind is LabelKind.GENE else record.gold_diseases)
        if error_text is not None:
            errors.append({"case_id": record.case.id, "error": error_text})
        for k in ks:
            hit = bool(predictions) and recall_at_k(predictions, gold, k, kind, synonyms) == 1
            hits_by_k[k] += int(hit)
            entry = {"case_id": record.case.id, "k": k, "hit": hit}
            if error_text is not None:
                entry["error"] = True
            per_case_hits.append(entry)

    usage_after = pipeline.gateway.usage_report()
    usage_totals: dict[str, dict] = {}
    for role, usage in sorted(usage_after.items(), key=lambda kv: kv[0].value):
        calls, prompt, completion = usage.as_tuple()
        b_calls, b_prompt, b_completion = usage_before.get(role, (0, 0, 0))
        usage_totals[role.value] = {
            "calls": calls - b_calls,
            "prompt_tokens": prompt - b_prompt,
            "completion_tokens": completion - b_completion,
        }

    return EvalReport(
        dataset_name=dataset_name,
        task=task.value,
        per_k={k: hits_by_k[k] / len(records) for k in ks},
        n_cases=len(records),
        per_case_hits=per_case_hits,
        usage_totals=usage_totals,
        seed=seed,
        errors=errors,
    )
