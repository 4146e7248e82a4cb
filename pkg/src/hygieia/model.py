"""Shared domain types and prompt templating. No I/O beyond template files.

Every type here is an immutable value object after construction, safe to
share between concurrent tasks. The ReasoningTrace is the one deliberate
exception: it is an append-only accumulator owned by a single pipeline run.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import EmptyCase, MissingPlaceholder
from .normalize import LabelKind, normalize_label


class TaskKind(str, Enum):
    DIAGNOSE = "Diagnose"
    PRIORITIZE_GENES = "PrioritizeGenes"
    VERIFY_DIAGNOSIS = "VerifyDiagnosis"


class Route(str, Enum):
    COMMON = "Common"
    RARE = "Rare"


@dataclass(frozen=True)
class GeneFinding:
    symbol: str
    note: str | None = None


@dataclass(frozen=True)
class PatientCase:
    """One patient: free-text phenotypes plus optional genes and notes."""

    id: str
    phenotypes: tuple[str, ...]
    genes: tuple[GeneFinding, ...] = ()
    record_text: str | None = None
    source_tag: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "phenotypes": list(self.phenotypes),
            "genes": [{"symbol": g.symbol, "note": g.note} for g in self.genes],
            "record_text": self.record_text,
            "source_tag": self.source_tag,
        }

    @staticmethod
    def from_dict(data: dict) -> "PatientCase":
        genes = tuple(
            GeneFinding(symbol=g.get("symbol", ""), note=g.get("note"))
            for g in data.get("genes") or []
        )
        return PatientCase(
            id=str(data.get("id", "")),
            phenotypes=tuple(str(p) for p in data.get("phenotypes") or []),
            genes=genes,
            record_text=data.get("record_text"),
            source_tag=data.get("source_tag"),
        )


def validate_case(case: PatientCase) -> PatientCase:
    """Trim strings, drop empty phenotype and gene entries.

    Raises EmptyCase when no phenotype survives trimming. Idempotent.
    """
    phenotypes = tuple(p.strip() for p in case.phenotypes if p.strip())
    if not phenotypes:
        raise EmptyCase(f"case {case.id!r} has no usable phenotype")
    genes = tuple(
        GeneFinding(symbol=g.symbol.strip(), note=g.note.strip() if g.note and g.note.strip() else None)
        for g in case.genes
        if g.symbol.strip()
    )
    record = case.record_text.strip() if case.record_text and case.record_text.strip() else None
    return replace(case, phenotypes=phenotypes, genes=genes, record_text=record)


@dataclass(frozen=True)
class PipelineConfig:
    """Run-time knobs: verify iterations N, confidence samples s, retrieval K."""

    max_verify_iters: int = 3
    confidence_samples: int = 3
    retrieval_top_k: int = 5
    knn_k: int = 5
    answer_top_k: int = 1
    sampling_temperature: float = 0.7

    def __post_init__(self):
        for name in ("max_verify_iters", "confidence_samples", "retrieval_top_k", "knn_k", "answer_top_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.answer_top_k > 10:
            raise ValueError("answer_top_k must be <= 10")
        if self.sampling_temperature < 0:
            raise ValueError("sampling_temperature must be >= 0")


_PLACEHOLDER_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    """Plain-text template with {name} placeholders; doubled braces are literal."""

    name: str
    template_text: str
    required_placeholders: frozenset[str]

    @staticmethod
    def from_text(name: str, text: str) -> "PromptTemplate":
        names = frozenset(m.group(1) for m in _PLACEHOLDER_RE.finditer(text) if m.group(1))
        return PromptTemplate(name=name, template_text=text, required_placeholders=names)


def render_template(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute every placeholder; pure, and total over complete bindings."""
    for required in sorted(template.required_placeholders):
        if required not in bindings:
            raise MissingPlaceholder(required)

    def _sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        name = m.group(1)
        if name not in bindings:
            raise MissingPlaceholder(name)
        return bindings[name]

    return _PLACEHOLDER_RE.sub(_sub, template.template_text)


_TEMPLATE_FILES = {
    "diagnosis": "diagnosis.txt",
    "gene_prioritization": "gene_prioritization.txt",
    "verify_diagnosis": "verify_diagnosis.txt",
    "knowledge_query": "knowledge_query.txt",
    "context_synthesis": "context_synthesis.txt",
    "summary_answer": "summary_answer.txt",
    "answer_check": "answer_check.txt",
}


def load_templates(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load the shipped template set, or an override directory with the same file names."""
    out: dict[str, PromptTemplate] = {}
    for name, filename in _TEMPLATE_FILES.items():
        if directory is not None:
            text = (Path(directory) / filename).read_text(encoding="utf-8")
        else:
            text = resources.files("hygieia.templates").joinpath(filename).read_text(encoding="utf-8")
        out[name] = PromptTemplate.from_text(name, text)
    return out


@dataclass(frozen=True)
class CandidateAnswer:
    label: str
    normalized_label: str
    confidence: float
    rationale: str = ""

    def __post_init__(self):
        if not 0 <= self.confidence <= 100:
            raise ValueError("confidence must be within [0, 100]")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "normalized_label": self.normalized_label,
            "confidence": self.confidence,
            "rationale": self.rationale,
        }


def make_answer(label: str, confidence: float, rationale: str, kind: LabelKind) -> CandidateAnswer:
    return CandidateAnswer(
        label=label,
        normalized_label=normalize_label(label, kind),
        confidence=confidence,
        rationale=rationale,
    )


class TraceStage(str, Enum):
    ROUTE = "Route"
    EXTRACT = "Extract"
    MANAGE = "Manage"
    SUMMARIZE = "Summarize"
    VERIFY = "Verify"
    FALLBACK = "Fallback"
    AGGREGATE = "Aggregate"


@dataclass(frozen=True)
class TraceEvent:
    stage: TraceStage
    agent_role: str
    rendered_prompt: str
    raw_response: str
    timestamp: float
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "agent_role": self.agent_role,
            "rendered_prompt": self.rendered_prompt,
            "raw_response": self.raw_response,
            "timestamp": self.timestamp,
            "token_usage": {
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
            },
        }


@dataclass
class ReasoningTrace:
    """Ordered record of every stage of one run; each LLM exchange appears once."""

    events: list[TraceEvent] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add(
        self,
        stage: TraceStage,
        agent_role: str,
        rendered_prompt: str,
        raw_response: str,
        prompt_tokens: int = 0,
        completion_tokens: int = 0,
    ) -> None:
        self.events.append(
            TraceEvent(
                stage=stage,
                agent_role=agent_role,
                rendered_prompt=rendered_prompt,
                raw_response=raw_response,
                timestamp=time.time(),
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
            )
        )

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def count(self, stage: TraceStage | None = None, agent_role: str | None = None) -> int:
        n = 0
        for ev in self.events:
            if stage is not None and ev.stage is not stage:
                continue
            if agent_role is not None and ev.agent_role != agent_role:
                continue
            n += 1
        return n

    def to_dict(self) -> dict:
        return {"events": [ev.to_dict() for ev in self.events], "warnings": list(self.warnings)}


@dataclass(frozen=True)
class DiagnosisOutcome:
    """Final ranked answers plus the evidence of how they were produced."""

    answers: tuple[CandidateAnswer, ...]
    final_confidence: float
    route: Route
    verify_iterations_used: int
    converged: bool
    trace: ReasoningTrace
    per_sample_answers: tuple[CandidateAnswer, ...]

    def to_dict(self) -> dict:
        return {
            "answers": [a.to_dict() for a in self.answers],
            "final_confidence": self.final_confidence,
            "route": self.route.value,
            "verify_iterations_used": self.verify_iterations_used,
            "converged": self.converged,
            "per_sample_answers": [a.to_dict() for a in self.per_sample_answers],
            "trace": self.trace.to_dict(),
        }


class Assessment(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"


@dataclass(frozen=True)
class VerifierVerdict:
    assessment: Assessment
    final_diagnosis: str
    reasoning: str

    def __post_init__(self):
        if not self.final_diagnosis.strip():
            raise ValueError("final_diagnosis must be non-empty")

    def to_dict(self) -> dict:
        return {
            "assessment": self.assessment.value,
            "final_diagnosis": self.final_diagnosis,
            "reasoning": self.reasoning,
        }


@dataclass(frozen=True)
class TaskRequest:
    kind: TaskKind
    case: PatientCase
    config: PipelineConfig = PipelineConfig()
    proposed_diagnosis: str | None = None

    def __post_init__(self):
        has_proposal = self.proposed_diagnosis is not None
        if (self.kind is TaskKind.VERIFY_DIAGNOSIS) != has_proposal:
            raise ValueError("proposed_diagnosis is required exactly for VerifyDiagnosis tasks")
