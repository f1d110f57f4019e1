"""Sub-categorization of pooled property values and per-instance attribution."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ersatz.core import HoldsSet, InstanceRecord, Kind, QualityLabel
from ersatz.errors import AttributionError, DegenerateProperty

MAX_ITER = 300


@dataclass(frozen=True)
class ClusterModel:
    """Ordinal partition of one property's value axis.

    ``centroids`` are ascending, so cluster index 0 is the low end of the
    measured quantity. A value exactly on a boundary goes to the lower index.
    """

    property: str
    centroids: tuple[float, ...]
    kind: Kind = Kind.PHYSICAL

    @property
    def eta(self) -> int:
        return len(self.centroids)

    @property
    def boundaries(self) -> tuple[float, ...]:
        c = self.centroids
        return tuple((a + b) / 2.0 for a, b in zip(c, c[1:]))

    def assign(self, value: float) -> int:
        return bisect_left(self.boundaries, value)

    def quality(self, value: float) -> QualityLabel:
        return QualityLabel(self.property, self.assign(value), self.kind)

    def qualities(self) -> list[QualityLabel]:
        return [QualityLabel(self.property, i, self.kind) for i in range(self.eta)]


def _assign_all(xs: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    bounds = (centroids[:-1] + centroids[1:]) / 2.0
    return np.searchsorted(bounds, xs, side="left")


def lloyd_1d(xs: np.ndarray, eta: int, max_iter: int = MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """k-means on sorted 1-D data, quantile-seeded; returns (centroids, labels)."""
    centroids = np.quantile(xs, (np.arange(eta) + 0.5) / eta)
    labels = None
    for _ in range(max_iter):
        new = _assign_all(xs, centroids)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=eta)
        sums = np.bincount(labels, weights=xs, minlength=eta)
        for k in range(eta):
            if counts[k]:
                centroids[k] = sums[k] / counts[k]
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # move each empty cluster onto the worst-fit point
            err = np.abs(xs - centroids[labels])
            for k in empty:
                far = int(np.argmax(err))
                centroids[k] = xs[far]
                err[far] = -1.0
        order = np.argsort(centroids, kind="stable")
        centroids = centroids[order]
        if empty.size or not np.array_equal(order, np.arange(eta)):
            labels = None
    labels = _assign_all(xs, centroids)
    return centroids, labels


def exact_1d(xs: np.ndarray, eta: int) -> np.ndarray:
    """Globally optimal 1-D k-means centroids by dynamic programming.

    Runs over distinct values weighted by multiplicity so equal values never
    straddle a cluster boundary. Ties between equal-cost cuts take the lowest
    cut index, which keeps the result deterministic.
    """
    vals, counts = np.unique(xs, return_counts=True)
    n = vals.size
    w = np.concatenate(([0.0], np.cumsum(counts, dtype=float)))
    s1 = np.concatenate(([0.0], np.cumsum(counts * vals)))
    s2 = np.concatenate(([0.0], np.cumsum(counts * vals * vals)))

    def cost(j: np.ndarray, i: int) -> np.ndarray:
        # SSE of vals[j:i] for a vector of start indices j
        ww = w[i] - w[j]
        m1 = s1[i] - s1[j]
        return np.maximum(s2[i] - s2[j] - m1 * m1 / ww, 0.0)

    best = np.full((eta + 1, n + 1), np.inf)
    cut = np.zeros((eta + 1, n + 1), dtype=int)
    best[0, 0] = 0.0
    for m in range(1, eta + 1):
        for i in range(m, n - (eta - m) + 1):
            j = np.arange(m - 1, i)
            total = best[m - 1, j] + cost(j, i)
            k = int(np.argmin(total))
            best[m, i] = total[k]
            cut[m, i] = j[k]
    bounds = [n]
    for m in range(eta, 0, -1):
        bounds.append(cut[m, bounds[-1]])
    bounds.reverse()
    return np.array([(s1[b] - s1[a]) / (w[b] - w[a]) for a, b in zip(bounds, bounds[1:])])


METHODS = ("exact", "lloyd")


def subcategorize(
    values: Iterable[tuple[str, float]] | Iterable[float],
    eta: int,
    property: str = "",
    kind: Kind = Kind.PHYSICAL,
    method: str = "exact",
) -> ClusterModel:
    """Cluster a property's pooled values into ``eta`` ordinal qualities.

    ``method="exact"`` minimises the within-cluster sum of squares globally;
    ``method="lloyd"`` runs quantile-seeded Lloyd iterations, which can stop
    in a local optimum.
    """
    if eta < 1:
        raise ValueError(f"eta must be >= 1, got {eta}")
    if method not in METHODS:
        raise ValueError(f"unknown clustering method {method!r}")
    raw = [v[1] if isinstance(v, tuple) else v for v in values]
    xs = np.sort(np.asarray(raw, dtype=float))
    distinct = np.unique(xs)
    if distinct.size < eta:
        raise DegenerateProperty(property, int(distinct.size), eta)
    if distinct.size == eta:
        return ClusterModel(property, tuple(float(v) for v in distinct), kind)
    centroids = exact_1d(xs, eta) if method == "exact" else lloyd_1d(xs, eta)[0]
    return ClusterModel(property, tuple(float(c) for c in centroids), kind)


def attribute(record: InstanceRecord, models: Mapping[str, ClusterModel]) -> HoldsSet:
    qualities = set()
    for prop, value in record.measurements.items():
        model = models.get(prop)
        if model is None:
            raise AttributionError(f"{record.instance_id}: no cluster model for measured property {prop!r}")
        qualities.add(model.quality(value))
    return HoldsSet(record.instance_id, frozenset(qualities))
