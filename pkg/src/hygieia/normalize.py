"""Disease and gene label normalization.

Rules, in order: Unicode compatibility normalization, lowercasing,
punctuation to single spaces, whitespace collapse, and for gene symbols a
final strip of all spaces. An optional synonym table is applied after the
rules via exact-match lookup.
"""

from __future__ import annotations

import unicodedata
from enum import Enum
from pathlib import Path

from .errors import ConfigError


class LabelKind(str, Enum):
    DISEASE = "Disease"
    GENE = "Gene"


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_label(
    raw: str,
    kind: LabelKind = LabelKind.DISEASE,
    synonyms: dict[str, str] | None = None,
) -> str:
    """Normalize a free-text disease or gene label for exact matching.

    Empty input yields an empty string. Idempotent by construction; a
    synonym table loaded through ``load_synonyms`` preserves idempotence.
    """
    s = unicodedata.normalize("NFKC", raw)
    s = s.lower()
    s = "".join(" " if _is_punct(ch) else ch for ch in s)
    s = " ".join(s.split())
    if kind is LabelKind.GENE:
        s = s.replace(" ", "")
    # Collapsing separators can leave combining marks next to new bases;
    # a final NFKC pass keeps the output in normal form so the function
    # is idempotent.
    s = unicodedata.normalize("NFKC", s)
    if synonyms:
        s = synonyms.get(s, s)
    return s


def load_synonyms(path: str | Path, kind: LabelKind = LabelKind.DISEASE) -> dict[str, str]:
    """Load a tab-separated raw->canonical synonym table.

    Both sides are rule-normalized and chains (a->b, b->c) are resolved to
    their fixpoint so a single lookup is stable under repeated
    normalization. Cycles are a configuration error.
    """
    table: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"synonym table line {line_no}: expected two tab-separated fields")
        raw = normalize_label(parts[0], kind)
        canonical = normalize_label(parts[1], kind)
        table[raw] = canonical

    resolved: dict[str, str] = {}
    for key in table:
        seen = {key}
        value = table[key]
        while value in table and table[value] != value:
            if table[value] in seen:
                raise ConfigError(f"synonym cycle involving {key!r}")
            seen.add(value)
            value = table[value]
        resolved[key] = value
    return resolved
