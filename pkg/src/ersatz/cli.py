"""Command line front end: build, query, eval, sweep.

Exit codes: 0 success (including "no substitute"), 1 data or pipeline
error, 2 query-resolution error (unknown class, nothing to compare).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ersatz.core import ReasonerConfig, validate_kb
from ersatz.errors import ErsatzError, UnknownClassError
from ersatz.evaluation import load_ground_truth, load_queries, evaluate, sweep, sweep_csv, write_report
from ersatz.grounding import METHODS
from ersatz.ingestion import load_manifest
from ersatz.knowledge import build_kb, load_kb, save_kb
from ersatz.reasoner import answer_query

log = logging.getLogger("ersatz")

EXIT_OK, EXIT_DATA, EXIT_QUERY = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _config(kb, args) -> ReasonerConfig:
    c = kb.config
    return ReasonerConfig(
        c.eta,
        c.theta if args.theta is None else args.theta,
        c.phi if args.phi is None else args.phi,
        c.rng_seed,
    )


def cmd_build(args) -> int:
    t0 = time.perf_counter()
    manifest = load_manifest(args.manifest)
    config = ReasonerConfig(args.eta, args.theta, args.phi, args.seed)
    kb = build_kb(manifest, config, machine_file=args.machine, method=args.method)
    problems = validate_kb(kb)
    if problems:
        for p in problems:
            print(f"invariant violated: {p}", file=sys.stderr)
        return EXIT_DATA
    save_kb(kb, args.out)
    print(f"classes: {len(kb.classes)}")
    print(f"instances: {len(kb.holds)}")
    print(f"properties: {len(kb.cluster_models)} ({len(kb.qualities())} qualities)")
    print(f"eta={config.eta} theta={config.theta} phi={config.phi} seed={config.rng_seed} method={args.method}")
    for prop, d in sorted(kb.metadata["degraded_eta"].items()):
        print(f"eta reduced for {prop}: {d['requested']} -> {d['used']}")
    for prop in kb.metadata["unmeasured_properties"]:
        print(f"no measurements for {prop}; not clustered")
    print(f"wrote {args.out} in {time.perf_counter() - t0:.2f}s")
    return EXIT_OK


def cmd_query(args) -> int:
    kb = load_kb(args.kb)
    config = _config(kb, args)
    if args.missing not in kb.classes:
        print(f"error: unknown class {args.missing!r}", file=sys.stderr)
        return EXIT_QUERY
    try:
        result = answer_query(kb, args.missing, args.candidates, config)
    except UnknownClassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUERY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUERY
    ex = result.explanation
    print(f"missing tool: {result.missing_tool} (theta={config.theta}, phi={config.phi})")
    print("relevant functional: " + (", ".join(sorted(q.label for q in ex.relevant_functional)) or "-"))
    print(
        "relevant physical: "
        + (", ".join(sorted(q.label for q in ex.relevant_physical)) or "-")
        + (" [fallback: representative model]" if ex.fallback else "")
    )
    for cls, sim, verdict in result.ranked_candidates:
        shared = ", ".join(sorted(q.label for q in ex.overlaps[cls])) or "-"
        print(f"  {cls:<16} {sim:.3f}  {verdict.value:<14} shared: {shared}")
    print(f"chosen: {result.chosen}" if result.chosen else "no substitute")
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=1) + "\n")
    if args.persist:
        save_kb(kb, args.kb)
    return EXIT_OK


def cmd_eval(args) -> int:
    kb = load_kb(args.kb)
    report = evaluate(kb, load_queries(args.queries), load_ground_truth(args.truth), _config(kb, args))
    matrix = write_report(report, args.out)
    for o in report.outcomes:
        flag = "match" if o.match else "MISS"
        print(f"{o.scenario.id:<6} {o.scenario.missing_tool:<16} system={o.system_choice} expert={o.expert_choice} {flag}")
    print(report.agreement_line())
    print(f"wrote {args.out} and {matrix}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    kb = load_kb(args.kb)
    etas = _ints(args.eta_grid) if args.eta_grid else []
    manifest = load_manifest(args.manifest) if args.manifest else None
    scenarios = load_queries(args.queries) if args.queries else None
    truth = load_ground_truth(args.truth) if args.truth else None
    rows, violations = sweep(
        kb, _floats(args.theta_grid), _floats(args.phi_grid), etas, manifest, scenarios, truth
    )
    table = sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    for v in violations:
        print(f"monotonicity violation: {v}", file=sys.stderr)
    print(f"monotonicity violations: {len(violations)}", file=sys.stderr)
    return EXIT_DATA if violations and args.strict else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ersatz", description="Grounded tool-substitution reasoning.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="sample, ground and conceptualize a manifest into a KB file")
    b.add_argument("manifest")
    b.add_argument("--out", "-o", required=True, help="KB file to write")
    b.add_argument("--machine", help="machine property CSV (overrides the manifest's)")
    b.add_argument("--eta", type=int, default=4)
    b.add_argument("--theta", type=float, default=0.35)
    b.add_argument("--phi", type=float, default=0.35)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--method", choices=METHODS, default="exact", help="1-D clustering algorithm")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="find a substitute for a missing tool")
    q.add_argument("kb")
    q.add_argument("missing")
    q.add_argument("candidates", nargs="+")
    q.add_argument("--theta", type=float)
    q.add_argument("--phi", type=float)
    q.add_argument("--out", help="write the QueryResult as JSON")
    q.add_argument("--persist", action="store_true", help="store the substitution model back into the KB file")
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("eval", help="score system choices against expert selections")
    e.add_argument("kb")
    e.add_argument("queries")
    e.add_argument("truth")
    e.add_argument("--out", "-o", required=True, help="report JSON (heat map goes to <stem>.heatmap.csv)")
    e.add_argument("--theta", type=float)
    e.add_argument("--phi", type=float)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="grid over theta, phi and (with --manifest) eta")
    s.add_argument("kb")
    s.add_argument("--theta-grid", default="0.1,0.3,0.5,0.7,0.9")
    s.add_argument("--phi-grid", default="0.1,0.3,0.5,0.7,0.9")
    s.add_argument("--eta-grid", help="comma-separated eta values; needs --manifest")
    s.add_argument("--manifest")
    s.add_argument("--queries")
    s.add_argument("--truth")
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true", help="exit 1 on any monotonicity violation")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UnknownClassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (ErsatzError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
