"""Write an expert-vote fixture whose agreement with a KB is known in advance.

For each scenario the system's own answer is computed; the scripted expert
modal answer agrees with it except on the last ``--misses`` scenarios.

Usage: python scripts/make_eval_fixture.py KB OUTDIR [--scenarios 22 --misses 2]
"""

import argparse
import json
from pathlib import Path

from ersatz.knowledge import load_kb
from ersatz.reasoner import answer_query

EXPERTS = 14


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("kb")
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--scenarios", type=int, default=22)
    ap.add_argument("--misses", type=int, default=2)
    args = ap.parse_args()

    kb = load_kb(args.kb)
    labels = sorted(kb.classes)
    tools = [t for t in labels if answer_query(kb, t, [c for c in labels if c != t]).chosen]
    if not tools:
        raise SystemExit("no class has a substitute at the KB's thresholds")
    scenarios, truth = [], {}
    for k in range(args.scenarios):
        missing = tools[k % len(tools)]
        others = [c for c in labels if c != missing]
        best = answer_query(kb, missing, others).chosen
        rest = [c for c in others if c != best]
        shift = (k // len(tools)) * 4
        cands = sorted([best] + [rest[(shift + 3 * j + k) % len(rest)] for j in range(4)])
        choice = answer_query(kb, missing, cands).chosen
        modal = choice if k < args.scenarios - args.misses else next(c for c in cands if c != choice)
        sid = f"s{k + 1:02d}"
        scenarios.append({"id": sid, "missing_tool": missing, "candidates": cands})
        votes = {c: 1 for c in cands}
        votes[modal] = EXPERTS - (len(cands) - 1)
        truth[sid] = {"votes": votes, "modal": modal}

    args.outdir.mkdir(parents=True, exist_ok=True)
    q = {"format": "ersatz-queries", "schema_version": 1, "scenarios": scenarios}
    t = {"format": "ersatz-ground-truth", "schema_version": 1, "scenarios": truth}
    (args.outdir / "eval_queries.json").write_text(json.dumps(q, indent=1) + "\n")
    (args.outdir / "eval_truth.json").write_text(json.dumps(t, indent=1) + "\n")
    print(f"wrote {args.scenarios} scenarios ({args.misses} scripted disagreements) to {args.outdir}")


if __name__ == "__main__":
    main()
