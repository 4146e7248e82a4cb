"""Agentic disease-diagnosis engine.

Routes cases between a common-disease fast path and a rare-disease
verifier-corrector pipeline, aggregates self-consistency confidence,
prioritizes risk genes, verifies physician-proposed diagnoses, and
evaluates itself with Recall@K — all runnable offline against a
deterministic scripted backend.
"""

from .model import (
    CandidateAnswer,
    DiagnosisOutcome,
    GeneFinding,
    PatientCase,
    PipelineConfig,
    PromptTemplate,
    ReasoningTrace,
    Route,
    TaskKind,
    TaskRequest,
    TraceStage,
    VerifierVerdict,
    load_templates,
    render_template,
    validate_case,
)
from .orchestrator import Pipeline, aggregate_confidence, parse_verdict

__version__ = "0.1.0"

__all__ = [
    "CandidateAnswer",
    "DiagnosisOutcome",
    "GeneFinding",
    "PatientCase",
    "Pipeline",
    "PipelineConfig",
    "PromptTemplate",
    "ReasoningTrace",
    "Route",
    "TaskKind",
    "TaskRequest",
    "TraceStage",
    "VerifierVerdict",
    "aggregate_confidence",
    "load_templates",
    "parse_verdict",
    "render_template",
    "validate_case",
    "__version__",
]
