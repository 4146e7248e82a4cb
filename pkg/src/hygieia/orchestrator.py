"""The verifier-corrector pipeline, confidence aggregation, and verdict parsing.

Control flow for a diagnosis request:

  route -> (Common) sample s summaries -> aggregate -> done
        -> (Rare)   extract -> synthesize -> sample s summaries -> aggregate
                    -> loop up to N: verify; accept => done (converged)
                                     reject => one corrective summary call
                    -> loop exhausted: one fallback summary call (not converged)

The s-fold sampling wraps only the first summary step; the majority answer
enters the verify loop; in-loop corrections are single calls. Rejection
rationales accumulate into the prompt of every later summary call.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass, replace

from .errors import (
    AnswerParseError,
    BackendUnavailable,
    EmptyResponse,
    HygieiaError,
    MalformedVerdict,
    PipelineError,
    VerdictParseError,
)
from .gateway import AgentRole, ChatMessage, ChatRequest, Gateway, Speaker
from .knowledge import ContextDoc, KnowledgeService
from .model import (
    Assessment,
    CandidateAnswer,
    DiagnosisOutcome,
    PatientCase,
    PipelineConfig,
    PromptTemplate,
    ReasoningTrace,
    Route,
    TaskKind,
    TaskRequest,
    TraceStage,
    VerifierVerdict,
    make_answer,
    render_template,
    validate_case,
)
from .normalize import LabelKind, normalize_label
from .router import HashingEmbedder, RouterModel, classify

VERIFY_TEMPERATURE = 0.0

_ANSWER_RE = re.compile(r"^\s*ANSWER\s*:\s*(?P<label>.*?)\s*\|\s*CONFIDENCE\s*:\s*(?P<conf>[+-]?\d+)\s*$", re.I)
_ALT_RE = re.compile(r"^\s*ALT\s*:\s*(?P<label>.*?)\s*\|\s*CONFIDENCE\s*:\s*(?P<conf>[+-]?\d+)\s*$", re.I)
_VERDICT_RE = re.compile(r"^\s*VERDICT\s*:\s*(?P<token>ACCEPT|REJECT)\b\s*(?P<rest>.*)$", re.I)


@dataclass(frozen=True)
class ConfidenceSample:
    answer: CandidateAnswer
    sample_index: int


@dataclass(frozen=True)
class ParsedAnswer:
    primary: CandidateAnswer
    alternates: tuple[CandidateAnswer, ...]


def _clamp_confidence(raw: int, trace: ReasoningTrace | None) -> float:
    if 0 <= raw <= 100:
        return float(raw)
    clamped = min(100.0, max(0.0, float(raw)))
    if trace is not None:
        trace.warn(f"confidence {raw} outside [0,100]; clamped to {clamped:g}")
    return clamped


def parse_answer(text: str, kind: LabelKind, trace: ReasoningTrace | None = None) -> ParsedAnswer:
    """Parse the summary agent's wire format.

    The last ANSWER line wins; ALT lines are collected in order. Confidence
    integers outside [0,100] are clamped here, with a trace warning; this
    is the only clamping boundary in the pipeline.
    """
    primary: CandidateAnswer | None = None
    alternates: list[CandidateAnswer] = []
    for line in text.splitlines():
        m = _ANSWER_RE.match(line)
        if m and m.group("label").strip():
            primary = make_answer(
                m.group("label").strip(),
                _clamp_confidence(int(m.group("conf")), trace),
                rationale=text,
                kind=kind,
            )
            continue
        m = _ALT_RE.match(line)
        if m and m.group("label").strip():
            alternates.append(
                make_answer(
                    m.group("label").strip(),
                    _clamp_confidence(int(m.group("conf")), trace),
                    rationale=text,
                    kind=kind,
                )
            )
    if primary is None:
        raise AnswerParseError(text)
    return ParsedAnswer(primary=primary, alternates=tuple(alternates))


def aggregate_confidence(samples: list[ConfidenceSample]) -> tuple[CandidateAnswer, float]:
    """Majority answer plus the mean confidence over all s samples.

    Winner = plurality over normalized labels; ties break toward the higher
    mean confidence among tied labels, then the lexicographically smaller
    normalized label. The returned answer object is the earliest sample
    carrying the winning label. c_f averages every sample's confidence,
    not only the winner's.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    by_label: dict[str, list[ConfidenceSample]] = {}
    for sample in samples:
        by_label.setdefault(sample.answer.normalized_label, []).append(sample)
    best_votes = max(len(group) for group in by_label.values())
    tied = [label for label, group in by_label.items() if len(group) == best_votes]
    if len(tied) > 1:
        mean_conf = {
            label: statistics.fmean(s.answer.confidence for s in by_label[label]) for label in tied
        }
        top = max(mean_conf.values())
        tied = sorted(label for label in tied if mean_conf[label] == top)
    winner_label = tied[0]
    winner = min(by_label[winner_label], key=lambda s: s.sample_index).answer
    c_f = statistics.fmean(s.answer.confidence for s in samples)
    return winner, c_f


def parse_verdict(text: str) -> VerifierVerdict:
    """Parse the strict three-section verification format.

    Section labels are matched case-insensitively with tolerant whitespace;
    the assessment token itself must be exactly Correct or Incorrect.
    Raises MalformedVerdict naming the first missing section.
    """
    assessment_m = re.search(r"^\s*Diagnosis\s+Assessment\s*:\s*(?P<value>.*?)\s*$", text, re.I | re.M)
    if not assessment_m:
        raise MalformedVerdict("assessment", raw_text=text)
    token = assessment_m.group("value").strip()
    if token.lower() == "correct":
        assessment = Assessment.CORRECT
    elif token.lower() == "incorrect":
        assessment = Assessment.INCORRECT
    else:
        raise MalformedVerdict("assessment", raw_text=text)

    final_m = re.search(r"^\s*Final\s+Diagnosis\s*:\s*(?P<value>.*?)\s*$", text, re.I | re.M)
    if not final_m or not final_m.group("value").strip():
        raise MalformedVerdict("final_diagnosis", raw_text=text)
    final_diagnosis = final_m.group("value").strip()

    reasoning_m = re.search(r"^\s*Reasoning\s*:\s*$|^\s*Reasoning\s*:\s*(?P<inline>.+)$", text, re.I | re.M)
    if not reasoning_m:
        raise MalformedVerdict("reasoning", raw_text=text)
    reasoning_lines: list[str] = []
    inline = reasoning_m.groupdict().get("inline")
    if inline:
        reasoning_lines.append(inline.strip())
    tail = text[reasoning_m.end():]
    reasoning_lines.extend(line.strip() for line in tail.splitlines() if line.strip())
    return VerifierVerdict(
        assessment=assessment,
        final_diagnosis=final_diagnosis,
        reasoning="\n".join(reasoning_lines),
    )


def _kind_for(task: TaskKind) -> LabelKind:
    return LabelKind.GENE if task is TaskKind.PRIORITIZE_GENES else LabelKind.DISEASE


class Pipeline:
    """Wires the gateway, router, and knowledge service into the task API."""

    def __init__(
        self,
        gateway: Gateway,
        templates: dict[str, PromptTemplate],
        router_model: RouterModel | None = None,
        knowledge: KnowledgeService | None = None,
        embedder: HashingEmbedder | None = None,
        default_route: Route = Route.RARE,
    ):
        self.gateway = gateway
        self.templates = templates
        self.router_model = router_model
        self.embedder = embedder or HashingEmbedder()
        self.knowledge = knowledge or KnowledgeService(gateway, templates, embedder=self.embedder)
        self.default_route = default_route
        self._request_counter = 0

    # -- plumbing ----------------------------------------------------------

    def _next_request_id(self) -> str:
        self._request_counter += 1
        return f"req-{self._request_counter:04d}"

    def _chat(
        self,
        role: AgentRole,
        prompt: str,
        temperature: float,
        trace: ReasoningTrace,
        stage: TraceStage,
    ):
        request = ChatRequest(
            role=role,
            messages=(ChatMessage(Speaker.USER, prompt),),
            temperature=temperature,
            request_id=self._next_request_id(),
        )
        return self.gateway.complete(request, trace=trace, stage=stage)

    def _build_question(self, case: PatientCase, kind: TaskKind) -> str:
        template = self.templates["diagnosis" if kind is TaskKind.DIAGNOSE else "gene_prioritization"]
        question = render_template(template, {"phenotype_list": "; ".join(case.phenotypes)})
        if case.genes:
            findings = ", ".join(
                f"{g.symbol} ({g.note})" if g.note else g.symbol for g in case.genes
            )
            question += f"\nKnown gene findings: {findings}"
        if case.record_text:
            question += f"\nClinical notes: {case.record_text}"
        return question

    def _route(self, case: PatientCase, trace: ReasoningTrace) -> Route:
        if self.router_model is None:
            trace.add(TraceStage.ROUTE, AgentRole.ROUTER.value, "; ".join(case.phenotypes),
                      f"no router model configured; defaulting to {self.default_route.value}")
            return self.default_route
        decision = classify(self.router_model, self.embedder.embed_case(case))
        trace.add(
            TraceStage.ROUTE,
            AgentRole.ROUTER.value,
            "; ".join(case.phenotypes),
            f"label={decision.label} score={decision.score:.3f}",
        )
        # Every non-Rare label (Common, Healthy, ...) takes the fast path.
        return Route.RARE if decision.label.lower() == "rare" else Route.COMMON

    # -- summary sampling ---------------------------------------------------

    def _summary_once(
        self,
        payload: str,
        temperature: float,
        kind: LabelKind,
        trace: ReasoningTrace,
        stage: TraceStage = TraceStage.SUMMARIZE,
    ) -> ParsedAnswer:
        """One summary call with a single re-ask on a malformed reply."""
        prompt = render_template(self.templates["summary_answer"], {"question": payload})
        response = self._chat(AgentRole.SUMMARY, prompt, temperature, trace, stage)
        try:
            return parse_answer(response.text, kind, trace)
        except AnswerParseError:
            trace.warn("summary reply unparseable; re-asking once")
            retry = self._chat(AgentRole.SUMMARY, prompt, temperature, trace, stage)
            return parse_answer(retry.text, kind, trace)

    def sample_summaries(
        self,
        question: str,
        context: ContextDoc | None,
        s: int,
        temperature: float,
        kind: LabelKind = LabelKind.DISEASE,
        trace: ReasoningTrace | None = None,
    ) -> tuple[list[ConfidenceSample], dict[int, ParsedAnswer]]:
        """Exactly s identically rendered summary calls (plus re-asks if needed)."""
        if s < 1:
            raise ValueError("s must be >= 1")
        trace = trace if trace is not None else ReasoningTrace()
        payload = question if context is None else f"{question}\n\nContext:\n{context.text}"
        samples: list[ConfidenceSample] = []
        parsed: dict[int, ParsedAnswer] = {}
        for index in range(s):
            result = self._summary_once(payload, temperature, kind, trace)
            parsed[index] = result
            samples.append(ConfidenceSample(answer=result.primary, sample_index=index))
        return samples, parsed

    def _ranked_answers(self, parsed: ParsedAnswer, top_k: int) -> tuple[CandidateAnswer, ...]:
        out = [parsed.primary]
        seen = {parsed.primary.normalized_label}
        for alt in parsed.alternates:
            if alt.normalized_label in seen:
                continue
            out.append(alt)
            seen.add(alt.normalized_label)
            if len(out) == top_k:
                break
        return tuple(out[:top_k])

    # -- verification -------------------------------------------------------

    def verify(self, question: str, answer: CandidateAnswer, trace: ReasoningTrace) -> tuple[bool, str]:
        """One verifier call on question plus answer; returns (accepted, rationale)."""
        prompt = render_template(
            self.templates["answer_check"], {"question": question, "answer": answer.label}
        )
        response = self._chat(AgentRole.VERIFIER, prompt, VERIFY_TEMPERATURE, trace, TraceStage.VERIFY)
        verdict = self._parse_verify_line(response.text)
        if verdict is None:
            trace.warn("verifier reply unparseable; re-asking once")
            retry = self._chat(AgentRole.VERIFIER, prompt, VERIFY_TEMPERATURE, trace, TraceStage.VERIFY)
            verdict = self._parse_verify_line(retry.text)
            if verdict is None:
                raise VerdictParseError(retry.text)
        return verdict

    @staticmethod
    def _parse_verify_line(text: str) -> tuple[bool, str] | None:
        for line in text.splitlines():
            m = _VERDICT_RE.match(line)
            if m:
                accepted = m.group("token").upper() == "ACCEPT"
                rationale = m.group("rest").strip().lstrip("-–—:").strip()
                return accepted, rationale
        return None

    # -- tasks ---------------------------------------------------------------

    def run(self, request: TaskRequest):
        if request.kind is TaskKind.VERIFY_DIAGNOSIS:
            return self.verify_and_correct(request.case, request.proposed_diagnosis or "")
        return self._diagnostic_task(request)

    def diagnose(self, request: TaskRequest) -> DiagnosisOutcome:
        if request.kind is not TaskKind.DIAGNOSE:
            raise ValueError("diagnose requires kind=Diagnose")
        return self._diagnostic_task(request)

    def prioritize_genes(self, request: TaskRequest) -> DiagnosisOutcome:
        if request.kind is not TaskKind.PRIORITIZE_GENES:
            raise ValueError("prioritize_genes requires kind=PrioritizeGenes")
        return self._diagnostic_task(request)

    def _diagnostic_task(self, request: TaskRequest) -> DiagnosisOutcome:
        trace = ReasoningTrace()
        try:
            return self._diagnostic_task_inner(request, trace)
        except HygieiaError as exc:
            raise PipelineError(exc, trace) from exc

    def _diagnostic_task_inner(self, request: TaskRequest, trace: ReasoningTrace) -> DiagnosisOutcome:
        case = validate_case(request.case)
        config = request.config
        kind = _kind_for(request.kind)
        s = config.confidence_samples
        question = self._build_question(case, request.kind)

        route = self._route(case, trace)
        if route is Route.COMMON:
            samples, parsed = self.sample_summaries(
                question, None, s, config.sampling_temperature, kind, trace
            )
            winner, c_f = aggregate_confidence(samples)
            winner_index = min(
                i for i, smp in enumerate(samples)
                if smp.answer.normalized_label == winner.normalized_label
            )
            trace.add(TraceStage.AGGREGATE, "aggregator", f"s={s}",
                      f"winner={winner.label} c_f={c_f:g}")
            return DiagnosisOutcome(
                answers=self._ranked_answers(parsed[winner_index], config.answer_top_k),
                final_confidence=c_f,
                route=Route.COMMON,
                verify_iterations_used=0,
                converged=True,
                trace=trace,
                per_sample_answers=tuple(smp.answer for smp in samples),
            )

        bundle = self.knowledge.extract_knowledge(case, config, trace, question=question)
        context = self.knowledge.synthesize_context(bundle, config, trace)
        samples, parsed = self.sample_summaries(
            question, context, s, config.sampling_temperature, kind, trace
        )
        winner, c_f = aggregate_confidence(samples)
        winner_index = min(
            i for i, smp in enumerate(samples)
            if smp.answer.normalized_label == winner.normalized_label
        )
        trace.add(TraceStage.AGGREGATE, "aggregator", f"s={s}", f"winner={winner.label} c_f={c_f:g}")

        current = parsed[winner_index]
        rejections: list[str] = []
        base_payload = f"{question}\n\nContext:\n{context.text}"
        for iteration in range(1, config.max_verify_iters + 1):
            try:
                accepted, rationale = self.verify(question, current.primary, trace)
            except (BackendUnavailable, EmptyResponse) as exc:
                # Availability over strictness: a dead verifier counts as a
                # rejection and the loop moves on.
                trace.warn(f"verifier unavailable at iteration {iteration}: {exc}")
                accepted, rationale = False, "verifier unavailable"
            if accepted:
                return DiagnosisOutcome(
                    answers=self._ranked_answers(current, config.answer_top_k),
                    final_confidence=c_f,
                    route=Route.RARE,
                    verify_iterations_used=iteration,
                    converged=True,
                    trace=trace,
                    per_sample_answers=tuple(smp.answer for smp in samples),
                )
            rejections.append(rationale or "rejected")
            correction_payload = base_payload + "\n\nEarlier answers were rejected by a reviewer:\n" + "\n".join(
                f"- {r}" for r in rejections
            )
            current = self._summary_once(
                correction_payload, config.sampling_temperature, kind, trace
            )

        fallback_payload = base_payload
        if rejections:
            fallback_payload += "\n\nEarlier answers were rejected by a reviewer:\n" + "\n".join(
                f"- {r}" for r in rejections
            )
        final = self._summary_once(
            fallback_payload, config.sampling_temperature, kind, trace, stage=TraceStage.FALLBACK
        )
        return DiagnosisOutcome(
            answers=self._ranked_answers(final, config.answer_top_k),
            final_confidence=c_f,
            route=Route.RARE,
            verify_iterations_used=config.max_verify_iters,
            converged=False,
            trace=trace,
            per_sample_answers=tuple(smp.answer for smp in samples),
        )

    def verify_and_correct(
        self,
        case: PatientCase,
        proposed_diagnosis: str,
        trace: ReasoningTrace | None = None,
    ) -> VerifierVerdict:
        """Check a physician-proposed diagnosis against the strict verdict format."""
        if not proposed_diagnosis.strip():
            raise ValueError("proposed_diagnosis must be non-empty")
        case = validate_case(case)
        own_trace = trace if trace is not None else ReasoningTrace()
        prompt = render_template(
            self.templates["verify_diagnosis"],
            {
                "PHENOTYPE_LIST": "; ".join(case.phenotypes),
                "PROPOSED_DIAGNOSIS": proposed_diagnosis,
            },
        )
        try:
            response = self._chat(
                AgentRole.VERIFIER, prompt, VERIFY_TEMPERATURE, own_trace, TraceStage.VERIFY
            )
            try:
                verdict = parse_verdict(response.text)
            except MalformedVerdict:
                own_trace.warn("verdict unparseable; re-asking once")
                retry = self._chat(
                    AgentRole.VERIFIER, prompt, VERIFY_TEMPERATURE, own_trace, TraceStage.VERIFY
                )
                verdict = parse_verdict(retry.text)
        except HygieiaError as exc:
            raise PipelineError(exc, own_trace) from exc

        if verdict.assessment is Assessment.CORRECT:
            if normalize_label(verdict.final_diagnosis) != normalize_label(proposed_diagnosis):
                own_trace.warn(
                    "verifier said Correct but restated a different diagnosis; keeping the proposal"
                )
                verdict = replace(verdict, final_diagnosis=proposed_diagnosis)
        return verdict
