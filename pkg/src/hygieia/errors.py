"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HygieiaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(HygieiaError):
    """A config file is missing, unreadable, or semantically invalid."""


class MissingPlaceholder(HygieiaError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing placeholder binding: {name!r}")


class EmptyCase(HygieiaError):
    """No phenotype survives trimming."""


class RoleNotConfigured(HygieiaError):
    def __init__(self, role: str):
        self.role = role
        super().__init__(f"no backend configured for role {role!r}")


class TransportFailure(HygieiaError):
    """Transient transport or 5xx-class failure; eligible for retry."""


class BackendUnavailable(HygieiaError):
    """Backend kept failing after the retry budget was spent."""


class EmptyResponse(HygieiaError):
    """Provider returned an empty completion."""


class ScriptMatchError(HygieiaError):
    """No unconsumed script rule matches the request."""


class EmptyTrainingSet(HygieiaError):
    pass


class KTooLarge(HygieiaError):
    pass


class DimensionMismatch(HygieiaError):
    pass


class DuplicateId(HygieiaError):
    def __init__(self, entity_id: str):
        self.entity_id = entity_id
        super().__init__(f"duplicate id: {entity_id!r}")


class SearchProviderUnavailable(HygieiaError):
    pass


class KnowledgeUnavailable(HygieiaError):
    """Every evidence source failed and the extractor call failed too."""


class AnswerParseError(HygieiaError):
    def __init__(self, raw_text: str, reason: str = "no ANSWER line found"):
        self.raw_text = raw_text
        super().__init__(f"unparseable summary answer: {reason}")


class VerdictParseError(HygieiaError):
    def __init__(self, raw_text: str, reason: str = "no VERDICT line found"):
        self.raw_text = raw_text
        super().__init__(f"unparseable verifier reply: {reason}")


class MalformedVerdict(HygieiaError):
    """Strict-format verdict text is missing or corrupts a section.

    ``section`` names the first missing section, in canonical order:
    assessment, final_diagnosis, reasoning.
    """

    def __init__(self, section: str, raw_text: str = ""):
        self.section = section
        self.raw_text = raw_text
        super().__init__(f"malformed verdict: missing or invalid section {section!r}")


class DatasetParseError(HygieiaError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class EmptyGold(HygieiaError):
    """A record carries no gold label for the task being evaluated."""


class PipelineError(HygieiaError):
    """A pipeline run failed part-way; carries the partial reasoning trace."""

    def __init__(self, cause: Exception, trace=None):
        self.cause = cause
        self.trace = trace
        super().__init__(f"pipeline failed: {cause}")
