"""Manifest loading, expert-distribution sampling and concept-response merging.

Manifest (JSON)::

    {"format": "ersatz-manifest", "schema_version": 1,
     "machine_property_dim": 4,
     "machine_properties": "shape_concepts.csv",      # optional, relative to manifest
     "functional_properties": ["blockage", "containment", "support"],   # optional
     "classes": [{"label": "plate", "count": 35}, ...],
     "properties": [{"label": "rigidity", "kind": "physical",
                     "distributions": {"plate": {"mean": 8, "stddev": 1, "min": 0, "max": 10},
                                       "sponge": "unmeasured"}}, ...]}

Machine property file (CSV, first line is the version header)::

    # ersatz-machine-properties v1
    instance_id,shape_concept_1,...,shape_concept_k
    plate_1,0.1,0.9,0.0,0.3
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from ersatz.core import DEFAULT_FUNCTIONAL_PROPERTIES, InstanceRecord, Kind, PropertyDef, Source
from ersatz.errors import (
    MachineFileError,
    ManifestDomainError,
    ManifestParseError,
    ManifestSchemaError,
)

MANIFEST_FORMAT = "ersatz-manifest"
MANIFEST_VERSION = 1
MACHINE_HEADER = "# ersatz-machine-properties v1"
MACHINE_PREFIX = "shape_concept_"
UNMEASURED = "unmeasured"

_REJECTION_TRIES = 64
_REJECTION_BATCH = 16


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    stddev: float
    min: float
    max: float

    def __post_init__(self):
        for name in ("mean", "stddev", "min", "max"):
            if not math.isfinite(getattr(self, name)):
                raise ManifestDomainError(f"{name} must be finite")
        if self.stddev < 0:
            raise ManifestDomainError(f"stddev must be >= 0, got {self.stddev}")
        if not self.min < self.max:
            raise ManifestDomainError(f"min must be < max, got [{self.min}, {self.max}]")

    def cdf(self, x: float) -> float:
        """CDF of the truncated distribution (used by tests and diagnostics)."""
        if x < self.min:
            return 0.0
        if x >= self.max:
            return 1.0
        if self.stddev == 0:
            return 1.0 if x >= min(max(self.mean, self.min), self.max) else 0.0
        a, b, z = ((v - self.mean) / self.stddev for v in (self.min, self.max, x))
        lo, hi = ndtr(a), ndtr(b)
        return float((ndtr(z) - lo) / (hi - lo))

    def sample(self, rng: np.random.Generator) -> float:
        if self.stddev == 0:
            return float(min(max(self.mean, self.min), self.max))
        for _ in range(_REJECTION_TRIES):
            draws = rng.normal(self.mean, self.stddev, _REJECTION_BATCH)
            ok = draws[(draws >= self.min) & (draws <= self.max)]
            if ok.size:
                return float(ok[0])
        # acceptance region carries negligible mass: invert the CDF instead
        a = ndtr((self.min - self.mean) / self.stddev)
        b = ndtr((self.max - self.mean) / self.stddev)
        u = a + rng.random() * (b - a)
        x = self.mean + self.stddev * float(ndtri(u))
        return float(min(max(x, self.min), self.max))


@dataclass(frozen=True)
class HumanPropertySpec:
    property: PropertyDef
    per_class_distribution: dict[str, TruncatedNormal | None]


@dataclass(frozen=True)
class Manifest:
    classes: list[tuple[str, int]]
    human_properties: list[HumanPropertySpec]
    machine_property_dim: int = 4
    functional_properties: tuple[str, ...] = DEFAULT_FUNCTIONAL_PROPERTIES
    machine_file: Path | None = None

    @property
    def class_labels(self) -> list[str]:
        return [c for c, _ in self.classes]

    def property_defs(self) -> list[PropertyDef]:
        defs = [spec.property for spec in self.human_properties]
        defs += [
            PropertyDef(f"{MACHINE_PREFIX}{k + 1}", Kind.PHYSICAL, Source.MACHINE)
            for k in range(self.machine_property_dim)
        ]
        return defs


@dataclass(frozen=True)
class MachinePropertyFile:
    rows: list[tuple[str, tuple[float, ...]]] = field(default_factory=list)

    @property
    def dim(self) -> int | None:
        return len(self.rows[0][1]) if self.rows else None


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ManifestSchemaError(f"{where}: missing field {key!r}")
    return obj[key]


def parse_manifest(data: dict, base_dir: Path | None = None) -> Manifest:
    if not isinstance(data, dict):
        raise ManifestSchemaError("manifest must be a JSON object")
    version = _require(data, "schema_version", "manifest")
    if version != MANIFEST_VERSION:
        raise ManifestSchemaError(f"unsupported manifest schema_version {version!r}")
    if data.get("format", MANIFEST_FORMAT) != MANIFEST_FORMAT:
        raise ManifestSchemaError(f"not a manifest: format={data.get('format')!r}")

    classes: list[tuple[str, int]] = []
    seen: set[str] = set()
    for i, entry in enumerate(_require(data, "classes", "manifest")):
        label = str(_require(entry, "label", f"classes[{i}]"))
        count = _require(entry, "count", f"classes[{i}]")
        if label in seen:
            raise ManifestSchemaError(f"duplicate class label {label!r}")
        if not isinstance(count, int) or count <= 0:
            raise ManifestDomainError(f"class {label!r}: count must be a positive integer")
        seen.add(label)
        classes.append((label, count))
    if not classes:
        raise ManifestSchemaError("manifest declares no classes")

    functional = tuple(data.get("functional_properties", DEFAULT_FUNCTIONAL_PROPERTIES))
    dim = data.get("machine_property_dim", 4)
    if not isinstance(dim, int) or dim < 0:
        raise ManifestDomainError(f"machine_property_dim must be a non-negative integer, got {dim!r}")

    specs: list[HumanPropertySpec] = []
    labels: set[str] = set()
    for i, entry in enumerate(_require(data, "properties", "manifest")):
        where = f"properties[{i}]"
        label = str(_require(entry, "label", where))
        if label in labels or label.startswith(MACHINE_PREFIX):
            raise ManifestSchemaError(f"{where}: duplicate or reserved property label {label!r}")
        labels.add(label)
        try:
            kind = Kind(_require(entry, "kind", where))
        except ValueError:
            raise ManifestSchemaError(f"{where}: kind must be 'physical' or 'functional'") from None
        if kind is Kind.FUNCTIONAL and label not in functional:
            raise ManifestSchemaError(f"{where}: functional property {label!r} not in {list(functional)}")
        dists = _require(entry, "distributions", where)
        per_class: dict[str, TruncatedNormal | None] = {}
        for cls in dists:
            if cls not in seen:
                raise ManifestSchemaError(f"{where}: distribution for undeclared class {cls!r}")
        for cls, _ in classes:
            if cls not in dists:
                raise ManifestSchemaError(f"{where}: no distribution or '{UNMEASURED}' marker for {cls!r}")
            d = dists[cls]
            if d == UNMEASURED or d is None:
                per_class[cls] = None
                continue
            try:
                per_class[cls] = TruncatedNormal(
                    float(d["mean"]), float(d["stddev"]), float(d["min"]), float(d["max"])
                )
            except (KeyError, TypeError) as exc:
                raise ManifestSchemaError(f"{where}/{cls}: bad distribution {d!r}") from exc
            except ManifestDomainError as exc:
                raise ManifestDomainError(f"{where}/{cls}: {exc}") from None
        specs.append(HumanPropertySpec(PropertyDef(label, kind, Source.HUMAN), per_class))

    machine_file = data.get("machine_properties")
    if machine_file is not None:
        machine_file = Path(machine_file)
        if base_dir is not None and not machine_file.is_absolute():
            machine_file = base_dir / machine_file
    return Manifest(classes, specs, dim, functional, machine_file)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    return parse_manifest(data, base_dir=path.parent)


def stream_for(seed: int, class_label: str, prop: str, index: int) -> np.random.Generator:
    """Independent counter-based stream for one (class, property, instance) draw."""
    digest = hashlib.sha256(f"{seed}\x1f{class_label}\x1f{prop}\x1f{index}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


def sample_human_properties(manifest: Manifest, seed: int) -> list[InstanceRecord]:
    records = []
    for cls, count in manifest.classes:
        for i in range(1, count + 1):
            values = {}
            for spec in manifest.human_properties:
                dist = spec.per_class_distribution.get(cls)
                if dist is not None:
                    values[spec.property.label] = dist.sample(stream_for(seed, cls, spec.property.label, i))
            records.append(InstanceRecord(f"{cls}_{i}", cls, values))
    return sorted(records, key=lambda r: r.instance_id)


def read_machine_file(path: str | Path) -> MachinePropertyFile:
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        if header != MACHINE_HEADER:
            raise MachineFileError(f"{path}: expected header {MACHINE_HEADER!r}, got {header!r}")
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            return MachinePropertyFile()
        if not columns or columns[0] != "instance_id":
            raise MachineFileError(f"{path}: first column must be 'instance_id'")
        width = len(columns) - 1
        rows = []
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != width + 1:
                raise MachineFileError(f"{path}:{lineno}: expected {width + 1} columns, got {len(row)}")
            try:
                vec = tuple(float(v) for v in row[1:])
            except ValueError as exc:
                raise MachineFileError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vec):
                raise MachineFileError(f"{path}:{lineno}: non-finite value")
            rows.append((row[0], vec))
    return MachinePropertyFile(rows)


def write_machine_file(path: str | Path, file: MachinePropertyFile, dim: int):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(MACHINE_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id"] + [f"{MACHINE_PREFIX}{k + 1}" for k in range(dim)])
        for inst, vec in file.rows:
            w.writerow([inst] + [repr(float(v)) for v in vec])


def load_machine_properties(
    records: list[InstanceRecord], file: MachinePropertyFile, dim: int | None = None
) -> list[InstanceRecord]:
    """Merge concept-response vectors into records as ``shape_concept_<k>`` properties."""
    by_id = {r.instance_id: r for r in records}
    vectors: dict[str, tuple[float, ...]] = {}
    for inst, vec in file.rows:
        if inst not in by_id:
            raise MachineFileError(f"unknown instance_id {inst!r} in machine property file")
        if dim is not None and len(vec) != dim:
            raise MachineFileError(f"{inst}: vector has {len(vec)} dims, manifest says {dim}")
        vectors[inst] = vec
    out = []
    for r in records:
        vec = vectors.get(r.instance_id)
        if vec is None:
            out.append(r)
            continue
        merged = dict(r.measurements)
        merged.update({f"{MACHINE_PREFIX}{k + 1}": float(v) for k, v in enumerate(vec)})
        out.append(InstanceRecord(r.instance_id, r.class_label, merged))
    return out
