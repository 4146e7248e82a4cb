"""Shared fixtures: scripted backends, toy routers, knowledge fixtures."""

from __future__ import annotations

import pytest

from hygieia.gateway import AgentRole, Script, ScriptRule, scripted_gateway
from hygieia.knowledge import KnowledgeService, PatientIndex, FixtureSearchProvider
from hygieia.model import PatientCase, PipelineConfig, load_templates
from hygieia.orchestrator import Pipeline
from hygieia.router import HashingEmbedder, Metric, fit_router


@pytest.fixture(scope="session")
def templates():
    return load_templates()


def rule(role=None, response="", times=1, contains=(), usage=(0, 0)) -> ScriptRule:
    return ScriptRule(
        response=response,
        role=role,
        contains=tuple(contains),
        prompt_tokens=usage[0],
        completion_tokens=usage[1],
        times=times,
    )


def summary_rule(label: str, confidence: int, times=None, alts=(), contains=()) -> ScriptRule:
    lines = [f"ANSWER: {label} | CONFIDENCE: {confidence}"]
    lines += [f"ALT: {alt_label} | CONFIDENCE: {alt_conf}" for alt_label, alt_conf in alts]
    return rule(AgentRole.SUMMARY, "\n".join(lines), times=times, contains=contains)


def extractor_rule(terms=("contractures",), times=None) -> ScriptRule:
    body = "```\n" + "\n".join(terms) + "\n```"
    return rule(AgentRole.KNOWLEDGE_EXTRACTOR, body, times=times)


def manager_rule(text="CONTEXT: synthesized evidence.", times=None) -> ScriptRule:
    return rule(AgentRole.KNOWLEDGE_MANAGER, text, times=times)


def accept_rule(times=None) -> ScriptRule:
    return rule(AgentRole.VERIFIER, "VERDICT: ACCEPT", times=times)


def reject_rule(reason="wrong subtype", times=1) -> ScriptRule:
    return rule(AgentRole.VERIFIER, f"VERDICT: REJECT - {reason}", times=times)


def router_for(phenotypes: tuple[str, ...], label: str, embedder: HashingEmbedder | None = None):
    """A 2-point router whose nearest reference to this exact case carries ``label``."""
    embedder = embedder or HashingEmbedder()
    target = embedder.embed_text(" ".join(phenotypes))
    other_label = "Rare" if label != "Rare" else "Common"
    far = embedder.embed_text("entirely unrelated sentinel corpus text zzz")
    return fit_router([(target, label), (far, other_label)], knn_k=1, metric=Metric.COSINE)


def make_pipeline(rules, phenotypes, route_label, templates, patient_index=None, corpus=None):
    gateway = scripted_gateway(Script(list(rules)))
    embedder = HashingEmbedder()
    knowledge = KnowledgeService(
        gateway,
        templates,
        search_provider=FixtureSearchProvider(corpus or []),
        patient_index=patient_index if patient_index is not None else PatientIndex([]),
        embedder=embedder,
    )
    return Pipeline(
        gateway,
        templates,
        router_model=router_for(tuple(phenotypes), route_label, embedder),
        knowledge=knowledge,
        embedder=embedder,
    )


@pytest.fixture
def case():
    return PatientCase(id="p1", phenotypes=("short stature", "seizures"))


@pytest.fixture
def config():
    return PipelineConfig()
