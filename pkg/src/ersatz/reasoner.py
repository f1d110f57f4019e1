"""Representative models, relevance and substitute selection over a KB."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Iterable

from ersatz.core import (
    ClassConcept,
    FunctionModel,
    Kind,
    QualityLabel,
    ReasonerConfig,
    RepKind,
    RepresentativeModel,
    SubstitutionModel,
)
from ersatz.errors import UnknownClassError
from ersatz.knowledge import KnowledgeBase, extend_with_substitution_model

log = logging.getLogger(__name__)


class Verdict(str, Enum):
    SUBSTITUTE = "substitute"
    NOT_SUBSTITUTE = "not_substitute"


@dataclass(frozen=True)
class Explanation:
    relevant_functional: frozenset[QualityLabel]
    relevant_physical: frozenset[QualityLabel]
    fallback: bool
    overlaps: dict[str, frozenset[QualityLabel]]


@dataclass(frozen=True)
class QueryResult:
    missing_tool: str
    ranked_candidates: list[tuple[str, float, Verdict]]
    chosen: str | None
    explanation: Explanation
    excluded: tuple[str, ...] = ()
    cache_hit: bool = field(default=False, compare=False)

    def similarities(self) -> dict[str, float]:
        return {c: s for c, s, _ in self.ranked_candidates}

    def to_dict(self) -> dict:
        ex = self.explanation
        return {
            "missing_tool": self.missing_tool,
            "chosen": self.chosen,
            "ranked_candidates": [
                {"class": c, "similarity": s, "verdict": v.value} for c, s, v in self.ranked_candidates
            ],
            "relevant_functional": sorted(q.label for q in ex.relevant_functional),
            "relevant_physical": sorted(q.label for q in ex.relevant_physical),
            "fallback": ex.fallback,
            "overlaps": {c: sorted(q.label for q in o) for c, o in sorted(ex.overlaps.items())},
            "excluded": list(self.excluded),
            "cache_hit": self.cache_hit,
        }


def jaccard(a: AbstractSet, b: AbstractSet) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def representative_model(
    source: ClassConcept | FunctionModel, theta: float, kind: Kind = Kind.PHYSICAL
) -> RepresentativeModel:
    """Qualities whose stored proportion reaches ``theta``.

    For a class concept ``kind`` picks the physical or functional part; a
    function model only ever yields physical qualities.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    if isinstance(source, FunctionModel):
        owner, values, kind = source.functional_quality.label, source.proportions, Kind.PHYSICAL
        rep_kind = RepKind.PHYSICAL_OF_FUNCTION
    else:
        owner, values = source.class_label, source.memberships
        rep_kind = RepKind.PHYSICAL_OF_CLASS if kind is Kind.PHYSICAL else RepKind.FUNCTIONAL_OF_CLASS
    qualities = frozenset(q for q, v in values.items() if q.kind is kind and v >= theta)
    return RepresentativeModel(owner, rep_kind, qualities, theta)


def _function_rp(kb: KnowledgeBase, f: QualityLabel, theta: float) -> frozenset[QualityLabel]:
    fm = kb.function_models.get(f)
    return representative_model(fm, theta).qualities if fm is not None else frozenset()


def relevant_functional_qualities(kb: KnowledgeBase, cls: str, theta: float, phi: float) -> frozenset[QualityLabel]:
    concept = kb.concept(cls)
    o_rp = representative_model(concept, theta).qualities
    o_rf = representative_model(concept, theta, Kind.FUNCTIONAL).qualities
    return frozenset(f for f in o_rf if jaccard(o_rp, _function_rp(kb, f, theta)) > phi)


def relevant_physical_qualities(
    kb: KnowledgeBase, cls: str, theta: float, phi: float
) -> tuple[frozenset[QualityLabel], frozenset[QualityLabel], bool]:
    """Return (relevant physical, relevant functional, fallback flag) for a tool class.

    Each relevant functional quality endorses the physical qualities it shares
    with the class's representative model; the union over all of them is
    returned. A class with no representative functional quality at all falls
    back to its whole representative physical model (fallback flag set); the
    trigger depends on theta only, so raising phi can never switch it on.
    """
    concept = kb.concept(cls)
    o_rp = representative_model(concept, theta).qualities
    if not representative_model(concept, theta, Kind.FUNCTIONAL).qualities:
        return o_rp, frozenset(), True
    o_f = relevant_functional_qualities(kb, cls, theta, phi)
    o_p: set[QualityLabel] = set()
    for f in o_f:
        o_p |= o_rp & _function_rp(kb, f, theta)
    return frozenset(o_p), o_f, False


def substitutability(
    kb: KnowledgeBase,
    missing: str,
    candidate: str,
    theta: float,
    phi: float,
    relevant_physical: frozenset[QualityLabel] | None = None,
) -> tuple[float, Verdict]:
    if relevant_physical is None:
        relevant_physical = relevant_physical_qualities(kb, missing, theta, phi)[0]
    cand_rp = representative_model(kb.concept(candidate), theta).qualities
    sim = jaccard(relevant_physical, cand_rp)
    return sim, Verdict.SUBSTITUTE if sim > phi else Verdict.NOT_SUBSTITUTE


def substitution_model(kb: KnowledgeBase, missing: str, theta: float, phi: float) -> SubstitutionModel:
    """Fresh relevant-quality computation with empty substitute sets."""
    o_p, o_f, fallback = relevant_physical_qualities(kb, missing, theta, phi)
    return SubstitutionModel(missing, theta, phi, o_p, o_f, {}, {}, fallback)


def answer_query(
    kb: KnowledgeBase,
    missing: str,
    candidates: Iterable[str],
    config: ReasonerConfig | None = None,
) -> QueryResult:
    config = config or kb.config
    theta, phi = config.theta, config.phi
    kb.concept(missing)
    candidates = list(dict.fromkeys(candidates))
    for c in candidates:
        if c not in kb.classes:
            raise UnknownClassError(c)
    excluded = tuple(c for c in candidates if c == missing)
    if excluded:
        log.warning("missing tool %r listed among its own candidates; excluded", missing)
    candidates = [c for c in candidates if c != missing]
    if not candidates:
        raise ValueError("query needs at least one candidate other than the missing tool")

    cached = kb.substitution_models.get((missing, theta, phi))
    sm = cached if cached is not None else substitution_model(kb, missing, theta, phi)

    scored = []
    overlaps = {}
    for c in candidates:
        cand_rp = representative_model(kb.concept(c), theta).qualities
        sim = jaccard(sm.relevant_physical, cand_rp)
        overlaps[c] = sm.relevant_physical & cand_rp
        scored.append((c, sim, Verdict.SUBSTITUTE if sim > phi else Verdict.NOT_SUBSTITUTE))
    scored.sort(key=lambda t: (-t[1], t[0]))
    chosen = next((c for c, _, v in scored if v is Verdict.SUBSTITUTE), None)

    extend_with_substitution_model(
        kb,
        SubstitutionModel(
            missing, theta, phi, sm.relevant_physical, sm.relevant_functional,
            {c: s for c, s, v in scored if v is Verdict.SUBSTITUTE},
            {c: s for c, s, v in scored if v is Verdict.NOT_SUBSTITUTE},
            sm.fallback,
        ),
    )
    return QueryResult(
        missing,
        scored,
        chosen,
        Explanation(sm.relevant_functional, sm.relevant_physical, sm.fallback, overlaps),
        excluded,
        cache_hit=cached is not None,
    )
