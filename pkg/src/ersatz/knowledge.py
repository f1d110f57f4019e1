"""Conceptualization into class concepts and function models, and the KB store.

KB file layout: a one-line JSON header carrying the format tag, schema
version and the SHA-256 of everything after the first newline, followed by
the canonical JSON payload. See ``docs/file_formats.md``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from ersatz.core import (
    ClassConcept,
    FunctionModel,
    HoldsSet,
    InstanceRecord,
    Kind,
    PropertyDef,
    QualityLabel,
    ReasonerConfig,
    Source,
    SubstitutionModel,
)
from ersatz.errors import DegenerateProperty, KBChecksumError, KBFormatError, KBVersionError, UnknownClassError
from ersatz.grounding import ClusterModel, attribute, subcategorize
from ersatz.ingestion import Manifest, load_machine_properties, read_machine_file, sample_human_properties

log = logging.getLogger(__name__)

KB_FORMAT = "ersatz-kb"
KB_SCHEMA_VERSION = 1


def conceptualize_classes(
    holds: Iterable[HoldsSet], class_of: Mapping[str, str]
) -> dict[str, ClassConcept]:
    """Membership of each quality in each class: share of measured instances holding it."""
    members: dict[str, list[HoldsSet]] = defaultdict(list)
    for hs in holds:
        members[class_of[hs.instance_id]].append(hs)
    concepts = {}
    for cls, group in members.items():
        held = Counter(q for hs in group for q in hs.qualities)
        measured = Counter(p for hs in group for p in hs.measured_properties())
        memberships = {q: n / measured[q.property] for q, n in held.items()}
        concepts[cls] = ClassConcept(cls, memberships, len(group))
    return concepts


def conceptualize_functions(
    holds: Iterable[HoldsSet], functional_qualities: Iterable[QualityLabel] = ()
) -> dict[QualityLabel, FunctionModel]:
    """For every functional quality f, the share of f-holders showing each physical quality.

    Instances are pooled across classes. ``functional_qualities`` lists the
    full inventory so that qualities no instance holds still get an (empty)
    model.
    """
    holds = list(holds)
    inventory = set(functional_qualities)
    inventory.update(q for hs in holds for q in hs.qualities if q.kind is Kind.FUNCTIONAL)
    models = {}
    for f in sorted(inventory):
        holders = [hs for hs in holds if f in hs.qualities]
        held = Counter(q for hs in holders for q in hs.qualities if q.kind is Kind.PHYSICAL)
        measured = Counter(
            q.property for hs in holders for q in hs.qualities if q.kind is Kind.PHYSICAL
        )
        proportions = {p: n / measured[p.property] for p, n in held.items()}
        models[f] = FunctionModel(f, proportions, len(holders))
    return models


@dataclass(eq=False)
class KnowledgeBase:
    config: ReasonerConfig
    properties: dict[str, PropertyDef]
    classes: dict[str, int]
    cluster_models: dict[str, ClusterModel]
    holds: dict[str, HoldsSet]
    class_of: dict[str, str]
    concepts: dict[str, ClassConcept]
    function_models: dict[QualityLabel, FunctionModel]
    substitution_models: dict[tuple[str, float, float], SubstitutionModel] = field(default_factory=dict)
    functional_properties: tuple[str, ...] = ("blockage", "containment", "support")
    metadata: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    _COMPARED = (
        "config", "properties", "classes", "cluster_models", "holds", "class_of",
        "concepts", "function_models", "substitution_models", "functional_properties",
        "metadata",
    )

    def __eq__(self, other):
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return all(getattr(self, a) == getattr(other, a) for a in self._COMPARED)

    def kind_of(self, q: QualityLabel) -> Kind:
        prop = self.properties.get(q.property)
        return prop.kind if prop is not None else q.kind

    def concept(self, cls: str) -> ClassConcept:
        if cls not in self.classes:
            raise UnknownClassError(cls)
        return self.concepts.get(cls) or ClassConcept(cls, {}, self.classes[cls])

    def qualities(self, kind: Kind | None = None) -> list[QualityLabel]:
        out = [q for m in self.cluster_models.values() for q in m.qualities()]
        return sorted(q for q in out if kind is None or q.kind is kind)


def extend_with_substitution_model(kb: KnowledgeBase, model: SubstitutionModel) -> KnowledgeBase:
    """Insert or merge a substitution model keyed by (missing tool, theta, phi)."""
    if model.missing_tool not in kb.classes:
        raise UnknownClassError(model.missing_tool)
    with kb._lock:
        old = kb.substitution_models.get(model.key)
        if old is None:
            kb.substitution_models[model.key] = model
            return kb
        scores: dict[str, float] = {}
        for src in (old.positive, old.negative, model.positive, model.negative):
            for cls, s in src.items():
                scores[cls] = max(s, scores.get(cls, s))
        kb.substitution_models[model.key] = SubstitutionModel(
            old.missing_tool,
            old.theta,
            old.phi,
            old.relevant_physical,
            old.relevant_functional,
            {c: s for c, s in scores.items() if s > old.phi},
            {c: s for c, s in scores.items() if s <= old.phi},
            old.fallback,
        )
    return kb


def ground(
    records: list[InstanceRecord],
    properties: Mapping[str, PropertyDef],
    eta: int,
    method: str = "exact",
) -> tuple[dict[str, ClusterModel], dict[str, dict]]:
    """Cluster every measured property; returns the models and per-property degradation notes."""
    pooled: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for r in records:
        for prop, v in r.measurements.items():
            pooled[prop].append((r.instance_id, v))
    models: dict[str, ClusterModel] = {}
    degraded: dict[str, dict] = {}
    for prop in sorted(pooled):
        if prop not in properties:
            raise KeyError(f"measured property {prop!r} is not declared")
        kind = properties[prop].kind
        try:
            models[prop] = subcategorize(pooled[prop], eta, prop, kind, method)
        except DegenerateProperty as exc:
            log.warning("%s; reducing eta to %d", exc, exc.distinct)
            degraded[prop] = {"requested": eta, "used": exc.distinct}
            models[prop] = subcategorize(pooled[prop], exc.distinct, prop, kind, method)
    return models, degraded


def build_from_records(
    records: list[InstanceRecord],
    properties: Mapping[str, PropertyDef],
    classes: Mapping[str, int],
    config: ReasonerConfig,
    functional_properties: tuple[str, ...] = ("blockage", "containment", "support"),
    metadata: dict | None = None,
    method: str = "exact",
) -> KnowledgeBase:
    models, degraded = ground(records, properties, config.eta, method)
    holds = {r.instance_id: attribute(r, models) for r in records}
    class_of = {r.instance_id: r.class_label for r in records}
    inventory = [q for m in models.values() if m.kind is Kind.FUNCTIONAL for q in m.qualities()]
    meta = {
        "schema_version": KB_SCHEMA_VERSION,
        "seed": config.rng_seed,
        "cluster_method": method,
        "degraded_eta": degraded,
        "unmeasured_properties": sorted(set(properties) - set(models)),
    }
    meta.update(metadata or {})
    return KnowledgeBase(
        config=config,
        properties=dict(properties),
        classes=dict(classes),
        cluster_models=models,
        holds=holds,
        class_of=class_of,
        concepts=conceptualize_classes(holds.values(), class_of),
        function_models=conceptualize_functions(holds.values(), inventory),
        functional_properties=tuple(functional_properties),
        metadata=meta,
    )


def build_records(manifest: Manifest, seed: int, machine_file: str | Path | None = None) -> list[InstanceRecord]:
    records = sample_human_properties(manifest, seed)
    path = machine_file if machine_file is not None else manifest.machine_file
    if path is not None and manifest.machine_property_dim > 0:
        records = load_machine_properties(records, read_machine_file(path), manifest.machine_property_dim)
    return records


def build_kb(
    manifest: Manifest,
    config: ReasonerConfig | None = None,
    machine_file: str | Path | None = None,
    method: str = "exact",
) -> KnowledgeBase:
    """Run sampling, grounding and conceptualization for a manifest."""
    config = config or ReasonerConfig()
    records = build_records(manifest, config.rng_seed, machine_file)
    properties = {p.label: p for p in manifest.property_defs()}
    return build_from_records(
        records, properties, dict(manifest.classes), config, manifest.functional_properties,
        method=method,
    )


# -- serialization ---------------------------------------------------------


def _labels(qs: Iterable[QualityLabel]) -> list[str]:
    return [q.label for q in sorted(qs)]


def _scores(d: Mapping[str, float]) -> list[list]:
    return [[c, d[c]] for c in sorted(d)]


def kb_to_payload(kb: KnowledgeBase) -> dict:
    c = kb.config
    return {
        "config": {"eta": c.eta, "theta": c.theta, "phi": c.phi, "rng_seed": c.rng_seed},
        "functional_properties": sorted(kb.functional_properties),
        "properties": [
            {"label": p.label, "kind": p.kind.value, "source": p.source.value}
            for _, p in sorted(kb.properties.items())
        ],
        "classes": [{"label": k, "count": v} for k, v in sorted(kb.classes.items())],
        "cluster_models": [
            {"property": m.property, "kind": m.kind.value, "centroids": list(m.centroids)}
            for _, m in sorted(kb.cluster_models.items())
        ],
        "holds": [
            {"instance_id": i, "class": kb.class_of[i], "qualities": _labels(kb.holds[i].qualities)}
            for i in sorted(kb.holds)
        ],
        "concepts": [
            {
                "class": cls,
                "instance_count": cc.instance_count,
                "memberships": [[q.label, m] for q, m in cc.entries()],
            }
            for cls, cc in sorted(kb.concepts.items())
        ],
        "function_models": [
            {
                "quality": f.label,
                "support_count": fm.support_count,
                "proportions": [[q.label, d] for q, d in fm.entries()],
            }
            for f, fm in sorted(kb.function_models.items())
        ],
        "substitution_models": [
            {
                "missing_tool": sm.missing_tool,
                "theta": sm.theta,
                "phi": sm.phi,
                "relevant_physical": _labels(sm.relevant_physical),
                "relevant_functional": _labels(sm.relevant_functional),
                "positive": _scores(sm.positive),
                "negative": _scores(sm.negative),
                "fallback": sm.fallback,
            }
            for _, sm in sorted(kb.substitution_models.items())
        ],
        "metadata": kb.metadata,
    }


def kb_from_payload(data: dict) -> KnowledgeBase:
    props = {
        p["label"]: PropertyDef(p["label"], Kind(p["kind"]), Source(p["source"]))
        for p in data["properties"]
    }

    def q(label: str) -> QualityLabel:
        ql = QualityLabel.parse(label)
        prop = props.get(ql.property)
        return QualityLabel(ql.property, ql.index, prop.kind if prop else Kind.PHYSICAL)

    holds = {h["instance_id"]: HoldsSet(h["instance_id"], frozenset(map(q, h["qualities"]))) for h in data["holds"]}
    sms = {}
    for s in data["substitution_models"]:
        sm = SubstitutionModel(
            s["missing_tool"],
            s["theta"],
            s["phi"],
            frozenset(map(q, s["relevant_physical"])),
            frozenset(map(q, s["relevant_functional"])),
            {c: v for c, v in s["positive"]},
            {c: v for c, v in s["negative"]},
            s["fallback"],
        )
        sms[sm.key] = sm
    return KnowledgeBase(
        config=ReasonerConfig(**data["config"]),
        properties=props,
        classes={c["label"]: c["count"] for c in data["classes"]},
        cluster_models={
            m["property"]: ClusterModel(m["property"], tuple(m["centroids"]), Kind(m["kind"]))
            for m in data["cluster_models"]
        },
        holds=holds,
        class_of={h["instance_id"]: h["class"] for h in data["holds"]},
        concepts={
            c["class"]: ClassConcept(c["class"], {q(lab): m for lab, m in c["memberships"]}, c["instance_count"])
            for c in data["concepts"]
        },
        function_models={
            q(f["quality"]): FunctionModel(
                q(f["quality"]), {q(lab): d for lab, d in f["proportions"]}, f["support_count"]
            )
            for f in data["function_models"]
        },
        substitution_models=sms,
        functional_properties=tuple(data["functional_properties"]),
        metadata=data["metadata"],
    )


def dumps_kb(kb: KnowledgeBase) -> bytes:
    body = json.dumps(kb_to_payload(kb), sort_keys=True, indent=1).encode() + b"\n"
    header = {"format": KB_FORMAT, "schema_version": KB_SCHEMA_VERSION, "sha256": hashlib.sha256(body).hexdigest()}
    return json.dumps(header, sort_keys=True).encode() + b"\n" + body


def loads_kb(blob: bytes) -> KnowledgeBase:
    head, sep, body = blob.partition(b"\n")
    try:
        header = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise KBFormatError(f"corrupted KB header: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != KB_FORMAT:
        raise KBFormatError("not an ersatz KB file")
    if header.get("schema_version") != KB_SCHEMA_VERSION:
        raise KBVersionError(
            f"KB schema version {header.get('schema_version')!r} != supported {KB_SCHEMA_VERSION}"
        )
    if not sep or hashlib.sha256(body).hexdigest() != header.get("sha256"):
        raise KBChecksumError("KB checksum mismatch: file is corrupted")
    try:
        return kb_from_payload(json.loads(body))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise KBFormatError(f"malformed KB payload: {exc}") from None


def save_kb(kb: KnowledgeBase, path: str | Path):
    with kb._lock:
        blob = dumps_kb(kb)
    Path(path).write_bytes(blob)


def load_kb(path: str | Path) -> KnowledgeBase:
    return loads_kb(Path(path).read_bytes())
