"""Domain types shared by every stage of the pipeline.

Everything here is a frozen value type. The only logic is invariant checking:
field-level checks raise at construction, cross-object checks are collected
by :func:`validate_kb` and returned as data.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping

if TYPE_CHECKING:
    from ersatz.knowledge import KnowledgeBase

DEFAULT_FUNCTIONAL_PROPERTIES = ("blockage", "containment", "support")
SUM_TOLERANCE = 1e-9


class Kind(str, Enum):
    PHYSICAL = "physical"
    FUNCTIONAL = "functional"


class Source(str, Enum):
    HUMAN = "human"
    MACHINE = "machine"


class RepKind(str, Enum):
    PHYSICAL_OF_CLASS = "physical_of_class"
    FUNCTIONAL_OF_CLASS = "functional_of_class"
    PHYSICAL_OF_FUNCTION = "physical_of_function"


@dataclass(frozen=True)
class PropertyDef:
    label: str
    kind: Kind
    source: Source

    def __post_init__(self):
        if not self.label:
            raise ValueError("property label must be non-empty")


@dataclass(frozen=True, order=True)
class QualityLabel:
    """One cluster of one property; ordered by (property, cluster index)."""

    property: str
    index: int
    kind: Kind = field(default=Kind.PHYSICAL, compare=False)

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"cluster index must be >= 0, got {self.index}")

    @property
    def label(self) -> str:
        return f"{self.property}_{self.index + 1}"

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, label: str, kind: Kind = Kind.PHYSICAL) -> "QualityLabel":
        prop, _, num = label.rpartition("_")
        if not prop or not num.isdigit() or int(num) < 1:
            raise ValueError(f"not a quality label: {label!r}")
        return cls(prop, int(num) - 1, kind)


@dataclass(frozen=True)
class InstanceRecord:
    instance_id: str
    class_label: str
    measurements: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for prop, value in self.measurements.items():
            if not math.isfinite(value):
                raise ValueError(f"{self.instance_id}: non-finite value for {prop!r}: {value}")


@dataclass(frozen=True)
class HoldsSet:
    instance_id: str
    qualities: frozenset[QualityLabel] = frozenset()

    def measured_properties(self) -> set[str]:
        return {q.property for q in self.qualities}


@dataclass(frozen=True)
class ClassConcept:
    class_label: str
    memberships: Mapping[QualityLabel, float]
    instance_count: int

    def entries(self) -> list[tuple[QualityLabel, float]]:
        return sorted(self.memberships.items())


@dataclass(frozen=True)
class FunctionModel:
    functional_quality: QualityLabel
    proportions: Mapping[QualityLabel, float]
    support_count: int

    def entries(self) -> list[tuple[QualityLabel, float]]:
        return sorted(self.proportions.items())


@dataclass(frozen=True)
class RepresentativeModel:
    owner: str
    kind: RepKind
    qualities: frozenset[QualityLabel]
    theta: float


@dataclass(frozen=True)
class SubstitutionModel:
    """Cached reasoning output for one missing tool at one (theta, phi)."""

    missing_tool: str
    theta: float
    phi: float
    relevant_physical: frozenset[QualityLabel]
    relevant_functional: frozenset[QualityLabel]
    positive: Mapping[str, float] = field(default_factory=dict)
    negative: Mapping[str, float] = field(default_factory=dict)
    fallback: bool = False

    @property
    def key(self) -> tuple[str, float, float]:
        return (self.missing_tool, self.theta, self.phi)


@dataclass(frozen=True)
class ReasonerConfig:
    eta: int = 4
    theta: float = 0.35
    phi: float = 0.35
    rng_seed: int = 0

    def __post_init__(self):
        if self.eta < 2:
            raise ValueError(f"eta must be >= 2, got {self.eta}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must be in (0, 1], got {self.theta}")
        if not 0.0 <= self.phi < 1.0:
            raise ValueError(f"phi must be in [0, 1), got {self.phi}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError(f"rng_seed must fit in 64 bits, got {self.rng_seed}")


def _sum_violations(owner: str, values: Iterable[tuple[QualityLabel, float]]) -> list[str]:
    sums: dict[str, float] = defaultdict(float)
    out = []
    for q, v in values:
        sums[q.property] += v
        if not 0.0 < v <= 1.0:
            out.append(f"{owner}: proportion of {q.label} out of (0, 1]: {v}")
    for prop, total in sorted(sums.items()):
        if abs(total - 1.0) > SUM_TOLERANCE:
            out.append(f"{owner}: membership sum != 1 for property {prop!r} ({total:.12g})")
    return out


def validate_kb(kb: "KnowledgeBase") -> list[str]:
    """Return one message per broken invariant; an empty list means the KB is sound."""
    problems: list[str] = []
    functional_allowed = set(kb.functional_properties)

    for label, prop in kb.properties.items():
        if prop.label != label:
            problems.append(f"property keyed as {label!r} but labelled {prop.label!r}")
        if prop.kind is Kind.FUNCTIONAL and label not in functional_allowed:
            problems.append(f"functional property {label!r} not in configured set")

    etas = {p: len(m.centroids) for p, m in kb.cluster_models.items()}

    def check_quality(where: str, q: QualityLabel, kind: Kind | None = None):
        if q.property not in etas:
            problems.append(f"{where}: quality {q.label} has no cluster model")
        elif q.index >= etas[q.property]:
            problems.append(f"{where}: quality {q.label} exceeds eta={etas[q.property]}")
        if kind is not None and kb.kind_of(q) is not kind:
            problems.append(f"{where}: quality {q.label} is not {kind.value}")

    for hs in kb.holds.values():
        seen: set[str] = set()
        for q in hs.qualities:
            if q.property in seen:
                problems.append(f"{hs.instance_id}: more than one quality for {q.property!r}")
            seen.add(q.property)
            check_quality(hs.instance_id, q)
        if hs.instance_id not in kb.class_of:
            problems.append(f"{hs.instance_id}: instance has no class")

    for inst, cls in kb.class_of.items():
        if cls not in kb.classes:
            problems.append(f"{inst}: class {cls!r} not in class set")

    for cls, concept in kb.concepts.items():
        if concept.instance_count <= 0:
            problems.append(f"{cls}: instance_count must be > 0")
        for q in concept.memberships:
            check_quality(cls, q)
        problems.extend(_sum_violations(f"class {cls}", concept.memberships.items()))

    for f, fm in kb.function_models.items():
        check_quality(f"function {f.label}", f, Kind.FUNCTIONAL)
        for q in fm.proportions:
            check_quality(f"function {f.label}", q, Kind.PHYSICAL)
        problems.extend(_sum_violations(f"function {f.label}", fm.proportions.items()))

    for sm in kb.substitution_models.values():
        where = f"substitution model {sm.missing_tool}@theta={sm.theta},phi={sm.phi}"
        both = set(sm.positive) & set(sm.negative)
        if both:
            problems.append(f"{where}: disjointness violated for {sorted(both)}")
        for cls, score in sm.positive.items():
            if not score > sm.phi:
                problems.append(f"{where}: positive {cls} scored {score} <= phi")
        for cls, score in sm.negative.items():
            if score > sm.phi:
                problems.append(f"{where}: negative {cls} scored {score} > phi")
        concept = kb.concepts.get(sm.missing_tool)
        if concept is None:
            problems.append(f"{where}: unknown class")
            continue
        rep = {
            q
            for q, m in concept.memberships.items()
            if m >= sm.theta and kb.kind_of(q) is Kind.PHYSICAL
        }
        extra = sm.relevant_physical - rep
        if extra:
            problems.append(
                f"{where}: relevant physical qualities outside representative model: "
                f"{sorted(q.label for q in extra)}"
            )
    return problems
