"""External evidence gathering and context synthesis.

Two agents live here: the knowledge extractor (asks the LLM for search
terms, then fans out to web search and similar-patient retrieval) and the
knowledge manager (one LLM call that folds the gathered bundle into a
compact context document). Sub-failures degrade into flagged partial
bundles instead of aborting the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

from .errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyResponse,
    HygieiaError,
    KnowledgeUnavailable,
    SearchProviderUnavailable,
)
from .gateway import AgentRole, ChatMessage, ChatRequest, Gateway, Speaker
from .model import (
    PatientCase,
    PipelineConfig,
    PromptTemplate,
    ReasoningTrace,
    TraceStage,
    render_template,
)
from .router import EmbeddingVector, HashingEmbedder, cosine_similarity

# Context budget: ~2000 tokens at roughly 4 chars/token.
CONTEXT_CHAR_BUDGET = 8000

MAX_QUERY_TERMS = 5


class SnippetSource(str, Enum):
    GENERAL_WEB = "GeneralWeb"
    SCHOLARLY_INDEX = "ScholarlyIndex"
    BIOMEDICAL_INDEX = "BiomedicalIndex"


@dataclass(frozen=True)
class WebSnippet:
    title: str
    url: str
    snippet_text: str
    source: SnippetSource
    fetched_at: float = 0.0


@dataclass(frozen=True)
class ReferencePatient:
    id: str
    phenotypes: tuple[str, ...]
    diagnosis: str
    embedding: EmbeddingVector


@dataclass(frozen=True)
class KnowledgeBundle:
    snippets: tuple[WebSnippet, ...]
    similar_patients: tuple[tuple[ReferencePatient, float], ...]  # descending similarity
    query_terms: tuple[str, ...]
    degradations: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.snippets and not self.similar_patients


@dataclass(frozen=True)
class ContextDoc:
    text: str
    provenance: tuple[tuple[str, str], ...]  # (source kind, id or url)
    no_evidence: bool = False


class SearchProvider(Protocol):
    def search(self, query: str, limit: int) -> list[WebSnippet]: ...


class FixtureSearchProvider:
    """Keyword match over a local JSON Lines corpus; hermetic and ordered.

    A document matches when any query term appears (case-insensitive) in
    its title or text; results keep corpus order.
    """

    def __init__(self, corpus: list[dict]):
        self._corpus = corpus

    @staticmethod
    def from_file(path: str | Path) -> "FixtureSearchProvider":
        docs = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                docs.append(json.loads(line))
        return FixtureSearchProvider(docs)

    def search(self, query: str, limit: int) -> list[WebSnippet]:
        terms = [t for t in query.lower().split() if t]
        hits: list[WebSnippet] = []
        for doc in self._corpus:
            haystack = f"{doc.get('title', '')} {doc.get('text', '')}".lower()
            if any(term in haystack for term in terms):
                hits.append(
                    WebSnippet(
                        title=doc.get("title", ""),
                        url=doc.get("url", ""),
                        snippet_text=doc.get("text", ""),
                        source=SnippetSource(doc.get("source", "GeneralWeb")),
                    )
                )
            if len(hits) == limit:
                break
        return hits


class DisabledSearchProvider:
    def search(self, query: str, limit: int) -> list[WebSnippet]:
        raise SearchProviderUnavailable("search providers are disabled")


def web_search(provider: SearchProvider, query: str, limit: int) -> list[WebSnippet]:
    """Run one query; zero hits is an empty list, not an error."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    if limit < 1:
        raise ValueError("limit must be >= 1")
    return provider.search(query, limit)


class PatientIndex:
    """Immutable cosine-similarity index over reference patients."""

    def __init__(self, records: list[ReferencePatient]):
        seen: set[str] = set()
        dim: int | None = None
        for rec in records:
            if rec.id in seen:
                raise DuplicateId(rec.id)
            seen.add(rec.id)
            if dim is None:
                dim = rec.embedding.dim
            elif rec.embedding.dim != dim:
                raise DimensionMismatch(f"{rec.embedding.dim} vs {dim}")
        self._records = tuple(records)

    def __len__(self) -> int:
        return len(self._records)

    def retrieve(self, query: EmbeddingVector, k: int) -> list[tuple[ReferencePatient, float]]:
        scored = [(cosine_similarity(query, rec.embedding), i) for i, rec in enumerate(self._records)]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [(self._records[i], sim) for sim, i in scored[:k]]


def index_reference_patients(records: list[ReferencePatient]) -> PatientIndex:
    return PatientIndex(records)


def load_reference_patients(path: str | Path, embedder: HashingEmbedder) -> list[ReferencePatient]:
    """Ingest JSON Lines records: {id, phenotypes:[...], diagnosis}."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        phenotypes = tuple(str(p) for p in doc["phenotypes"])
        out.append(
            ReferencePatient(
                id=str(doc["id"]),
                phenotypes=phenotypes,
                diagnosis=str(doc["diagnosis"]),
                embedding=embedder.embed_text(" ".join(phenotypes)),
            )
        )
    return out


def retrieve_similar_patients(
    index: PatientIndex, case: PatientCase, k: int, embedder: HashingEmbedder
) -> list[tuple[ReferencePatient, float]]:
    if k < 1:
        raise ValueError("K must be >= 1")
    return index.retrieve(embedder.embed_case(case), k)


def _parse_query_terms(text: str) -> list[str]:
    """Pull search terms out of the extractor reply, fenced block preferred."""
    lines = text.splitlines()
    fenced: list[str] = []
    inside = False
    for line in lines:
        if line.strip().startswith("```"):
            if inside:
                break
            inside = True
            continue
        if inside:
            fenced.append(line)
    candidates = fenced if fenced else lines
    terms = []
    for line in candidates:
        term = line.strip().lstrip("-*").strip()
        term = term.lstrip("0123456789.").strip()
        if term:
            terms.append(term)
        if len(terms) == MAX_QUERY_TERMS:
            break
    return terms


class KnowledgeService:
    """The extractor/manager pair behind one object, bound to a gateway."""

    def __init__(
        self,
        gateway: Gateway,
        templates: dict[str, PromptTemplate],
        search_provider: SearchProvider | None = None,
        patient_index: PatientIndex | None = None,
        embedder: HashingEmbedder | None = None,
    ):
        self.gateway = gateway
        self.templates = templates
        self.search_provider = search_provider
        self.patient_index = patient_index
        self.embedder = embedder or HashingEmbedder()

    def extract_knowledge(
        self,
        case: PatientCase,
        config: PipelineConfig,
        trace: ReasoningTrace | None = None,
        question: str | None = None,
    ) -> KnowledgeBundle:
        """One extractor LLM call for query terms, then bounded fan-out."""
        degradations: list[str] = []
        terms: list[str] = []
        llm_failed = False
        query_text = question or "; ".join(case.phenotypes)
        prompt = render_template(self.templates["knowledge_query"], {"question": query_text})
        try:
            response = self.gateway.complete(
                ChatRequest(
                    role=AgentRole.KNOWLEDGE_EXTRACTOR,
                    messages=(ChatMessage(Speaker.USER, prompt),),
                    temperature=0.0,
                ),
                trace=trace,
                stage=TraceStage.EXTRACT,
            )
            terms = _parse_query_terms(response.text)
        except (HygieiaError,) as exc:
            llm_failed = True
            degradations.append(f"knowledge-extractor-failed: {exc}")

        snippets: list[WebSnippet] = []
        search_ok = False
        if self.search_provider is None:
            degradations.append("web-search-disabled")
        else:
            for term in terms:
                try:
                    snippets.extend(web_search(self.search_provider, term, config.retrieval_top_k))
                    search_ok = True
                except SearchProviderUnavailable as exc:
                    degradations.append(f"web-search-failed: {exc}")
                    break

        patients: list[tuple[ReferencePatient, float]] = []
        retrieval_ok = False
        if self.patient_index is None:
            degradations.append("patient-retrieval-disabled")
        else:
            try:
                patients = retrieve_similar_patients(
                    self.patient_index, case, config.retrieval_top_k, self.embedder
                )
                retrieval_ok = True
            except HygieiaError as exc:
                degradations.append(f"patient-retrieval-failed: {exc}")

        if llm_failed and not search_ok and not retrieval_ok:
            raise KnowledgeUnavailable("extractor call and every evidence source failed")

        return KnowledgeBundle(
            snippets=tuple(snippets),
            similar_patients=tuple(patients),
            query_terms=tuple(terms),
            degradations=tuple(degradations),
        )

    def synthesize_context(
        self,
        bundle: KnowledgeBundle,
        config: PipelineConfig,
        trace: ReasoningTrace | None = None,
    ) -> ContextDoc:
        """One manager LLM call, unconditionally, even for an empty bundle."""
        parts: list[str] = []
        for snip in bundle.snippets:
            parts.append(f"[web] {snip.title} ({snip.url}): {snip.snippet_text}")
        for patient, sim in bundle.similar_patients:
            parts.append(
                f"[patient {patient.id}, similarity {sim:.3f}] phenotypes: "
                f"{'; '.join(patient.phenotypes)} -> diagnosis: {patient.diagnosis}"
            )
        for note in bundle.degradations:
            parts.append(f"[degraded] {note}")
        evidence = "\n".join(parts) if parts else "No external evidence was retrieved."

        prompt = render_template(self.templates["context_synthesis"], {"evidence": evidence})
        try:
            response = self.gateway.complete(
                ChatRequest(
                    role=AgentRole.KNOWLEDGE_MANAGER,
                    messages=(ChatMessage(Speaker.USER, prompt),),
                    temperature=0.0,
                ),
                trace=trace,
                stage=TraceStage.MANAGE,
            )
            text = response.text
        except EmptyResponse:
            text = "No external evidence available."

        provenance = [("web", snip.url) for snip in bundle.snippets]
        provenance += [("patient", patient.id) for patient, _ in bundle.similar_patients]
        provenance += [("degraded", note) for note in bundle.degradations]
        return ContextDoc(
            text=text[:CONTEXT_CHAR_BUDGET],
            provenance=tuple(provenance),
            no_evidence=bundle.empty,
        )
