"""Acceptance criteria, one test each; the terminal summary prints a PASS/FAIL line per criterion."""

import io
import logging
import random
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from ersatz.cli import main
from ersatz.core import Kind, ReasonerConfig, validate_kb
from ersatz.evaluation import monotonicity_violations
from ersatz.grounding import subcategorize
from ersatz.ingestion import load_manifest
from ersatz.knowledge import build_kb, conceptualize_classes, conceptualize_functions, dumps_kb, loads_kb
from ersatz.reasoner import answer_query, jaccard

from tests.conftest import TRAY, WASHINGTON
from tests.eval_fixture import write_fixture
from tests.oracles import best_contiguous_sse, count_memberships, count_proportions, jaccard_enumerate
from tests.test_knowledge import random_table

pytestmark = pytest.mark.acceptance
log = logging.getLogger(__name__)

GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


def test_proportion_oracle(record_property):
    record_property("criterion", "proportion-formula oracle")
    rng = random.Random(20)
    t0 = time.perf_counter()
    mismatches = checked = 0
    for _ in range(200):
        holds, class_of = random_table(rng)
        got = {(c, q): m for c, cc in conceptualize_classes(holds, class_of).items() for q, m in cc.memberships.items()}
        want = count_memberships(holds, class_of)
        fq = {q for h in holds for q in h.qualities if q.kind is Kind.FUNCTIONAL}
        pq = {q for h in holds for q in h.qualities if q.kind is Kind.PHYSICAL}
        got.update(
            {(f, p): d for f, fm in conceptualize_functions(holds).items() for p, d in fm.proportions.items()}
        )
        want.update(count_proportions(holds, fq, pq))
        checked += len(want)
        mismatches += got.keys() != want.keys()
        mismatches += sum(abs(got.get(k, -1.0) - float(v)) > 1e-12 for k, v in want.items())
    elapsed = time.perf_counter() - t0
    record_property("detail", f"200 tables, {checked} values, {mismatches} mismatches, {elapsed:.2f}s")
    assert mismatches == 0
    assert elapsed < 10.0


def test_jaccard_oracle(record_property):
    record_property("criterion", "jaccard oracle")
    rng = random.Random(21)
    alphabet = range(20)
    bad = 0
    for _ in range(1000):
        a = {x for x in alphabet if rng.random() < rng.random()}
        b = {x for x in alphabet if rng.random() < rng.random()}
        want = jaccard_enumerate(a, b, alphabet)
        bad += jaccard(a, b) != float(want)
        bad += jaccard(a, b) != jaccard(b, a)
        bad += bool(a) and jaccard(a, a) != 1.0
    record_property("detail", f"1000 pairs, {bad} failures")
    assert bad == 0


def sum_problems(kb):
    return [p for p in validate_kb(kb) if "sum" in p]


def test_sum_to_one(record_property, washington_manifest, tray_manifest):
    record_property("criterion", "sum-to-one invariants")
    kbs = []
    for seed in (0, 7, 11):
        for eta in (2, 4, 8):
            kbs.append(build_kb(washington_manifest, ReasonerConfig(eta=eta, rng_seed=seed)))
    kbs.append(build_kb(washington_manifest, ReasonerConfig(rng_seed=7), method="lloyd"))
    kbs += [build_kb(tray_manifest, ReasonerConfig(rng_seed=s)) for s in range(5)]
    problems = [p for kb in kbs for p in sum_problems(kb)]
    record_property("detail", f"{len(kbs)} KBs, {len(problems)} violations")
    assert problems == []


def test_monotonicity(record_property, washington_kb):
    record_property("criterion", "monotonicity sweeps")
    violations = monotonicity_violations(washington_kb, GRID, GRID)
    record_property("detail", f"theta x phi over {GRID}: {len(violations)} violations")
    assert violations == []


def test_tray_scenario(record_property, tray_manifest):
    record_property("criterion", "tray/plate/mousepad fixture")
    cands = ["mousepad", "plate", "bowl", "ball", "sponge"]
    wins = 0
    for seed in range(100):
        kb = build_kb(tray_manifest, ReasonerConfig(rng_seed=seed))
        wins += answer_query(kb, "tray", cands).chosen == "plate"
    record_property("detail", f"plate chosen for {wins}/100 seeds")
    assert wins == 100


def clustering_cases():
    rng = np.random.default_rng(22)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        xs = rng.uniform(0.0, 1.0, n).tolist()
        yield xs, min(int(rng.integers(1, 4)), n)


def optimal_rate(method):
    hits = 0
    for xs, eta in clustering_cases():
        m = subcategorize(xs, eta, method=method)
        c = np.asarray(m.centroids)[[m.assign(v) for v in xs]]
        got = float(np.sum((np.asarray(xs) - c) ** 2))
        best = best_contiguous_sse(xs, eta)
        if got <= best + 1e-9:
            hits += 1
        else:
            log.info("%s not optimal: eta=%d sse=%.6g optimum=%.6g values=%s", method, eta, got, best, xs)
    return hits / 1000


@pytest.mark.xfail(
    strict=True,
    reason="quantile-seeded Lloyd stalls in local optima on ~15% of tiny inputs; default method is exact",
)
def test_clustering_optimality_lloyd(record_property):
    record_property("criterion", "clustering optimality, lloyd with quantile seeding")
    rate = optimal_rate("lloyd")
    record_property("detail", f"optimal on {rate:.1%} of 1000 inputs (need >= 95%)")
    assert rate >= 0.95


def test_clustering_optimality_default(record_property):
    record_property("criterion", "clustering optimality, shipped default (exact)")
    rate = optimal_rate("exact")
    record_property("detail", f"optimal on {rate:.1%} of 1000 inputs (need >= 95%)")
    assert rate >= 0.95


def test_determinism_and_round_trip(record_property, washington_manifest):
    record_property("criterion", "end-to-end determinism and round trip")
    t0 = time.perf_counter()
    a = build_kb(load_manifest(WASHINGTON), ReasonerConfig(rng_seed=3))
    elapsed = time.perf_counter() - t0
    b = build_kb(washington_manifest, ReasonerConfig(rng_seed=3))
    blob = dumps_kb(a)
    identical = blob == dumps_kb(b)
    round_trip = loads_kb(blob) == a
    record_property(
        "detail",
        f"{len(a.holds)} instances, build {elapsed:.2f}s, byte-identical={identical}, round-trip={round_trip}",
    )
    assert identical and round_trip
    assert elapsed < 10.0


def test_eval_arithmetic(record_property, tmp_path):
    record_property("criterion", "eval-harness arithmetic")
    kb_path = tmp_path / "w.kb"
    assert main(["build", str(WASHINGTON), "-o", str(kb_path), "--seed", "7"]) == 0
    from ersatz.knowledge import load_kb

    queries, truth = write_fixture(load_kb(kb_path), tmp_path, n=22, misses=2)
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(["eval", str(kb_path), str(queries), str(truth), "-o", str(tmp_path / "report.json")])
    line = next(l for l in buf.getvalue().splitlines() if l.startswith("agreement:"))
    record_property("detail", line)
    assert code == 0
    assert line == "agreement: 20/22 (91%)"
