"""Regenerate the synthetic datasets under data/.

washington22/  22 categories with the Washington RGBD scan counts (692 total),
               expert-style property distributions, 4-dim shape-concept
               responses and 22 five-candidate queries.
tray/          the tray / plate / mouse pad scenario plus three distractors.

Usage: python scripts/make_synthetic_data.py [--out data]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from ersatz.ingestion import MachinePropertyFile, write_machine_file

# label: (scans, rigidity 0-10, weight g, hollowness, containment, support, blockage,
#         shape concept prototype)
WASHINGTON = {
    "ball": (35, 4.0, 300, 0.6, 0.10, 0.20, 0.40, (0.90, 0.10, 0.20, 0.05)),
    "binder": (30, 6.0, 500, 0.1, 0.30, 0.60, 0.60, (0.05, 0.80, 0.10, 0.70)),
    "bowl": (30, 8.0, 350, 0.8, 0.90, 0.50, 0.30, (0.60, 0.10, 0.40, 0.20)),
    "cap": (32, 2.0, 80, 0.6, 0.50, 0.10, 0.30, (0.60, 0.10, 0.20, 0.20)),
    "cereal_box": (30, 4.0, 450, 0.7, 0.80, 0.30, 0.60, (0.05, 0.90, 0.10, 0.30)),
    "coffee_mug": (32, 9.0, 350, 0.8, 0.90, 0.20, 0.20, (0.30, 0.10, 0.90, 0.10)),
    "flashlight": (30, 9.0, 250, 0.2, 0.10, 0.10, 0.20, (0.20, 0.10, 0.90, 0.05)),
    "food_bag": (32, 1.0, 200, 0.6, 0.80, 0.10, 0.20, (0.30, 0.50, 0.10, 0.30)),
    "food_box": (36, 4.0, 400, 0.7, 0.80, 0.30, 0.50, (0.05, 0.90, 0.10, 0.30)),
    "food_can": (28, 9.0, 400, 0.3, 0.70, 0.30, 0.30, (0.20, 0.10, 0.90, 0.10)),
    "food_cup": (30, 5.0, 150, 0.8, 0.80, 0.10, 0.20, (0.30, 0.10, 0.80, 0.10)),
    "food_jar": (30, 9.0, 500, 0.7, 0.90, 0.20, 0.30, (0.30, 0.20, 0.80, 0.10)),
    "hand_towel": (30, 0.5, 100, 0.05, 0.10, 0.20, 0.50, (0.10, 0.30, 0.05, 0.90)),
    "keyboard": (30, 8.0, 800, 0.2, 0.05, 0.60, 0.50, (0.05, 0.80, 0.05, 0.80)),
    "kleenex": (30, 3.0, 150, 0.6, 0.50, 0.20, 0.30, (0.10, 0.80, 0.10, 0.40)),
    "notebook": (30, 3.0, 300, 0.05, 0.10, 0.50, 0.60, (0.05, 0.70, 0.05, 0.90)),
    "pitcher": (30, 8.0, 600, 0.85, 0.95, 0.20, 0.30, (0.40, 0.10, 0.70, 0.05)),
    "plate": (35, 9.0, 400, 0.2, 0.30, 0.90, 0.30, (0.70, 0.10, 0.10, 0.90)),
    "shampoo": (30, 6.0, 400, 0.5, 0.70, 0.10, 0.20, (0.20, 0.30, 0.70, 0.10)),
    "soda_can": (30, 8.0, 370, 0.3, 0.70, 0.20, 0.20, (0.20, 0.10, 0.90, 0.10)),
    "sponge": (36, 1.0, 30, 0.4, 0.20, 0.30, 0.30, (0.05, 0.80, 0.10, 0.50)),
    "water_bottle": (36, 6.0, 500, 0.7, 0.90, 0.10, 0.20, (0.20, 0.10, 0.90, 0.05)),
}

# label: (count, rigidity 0-10, flatness, weight g, hollowness, containment, support, blockage)
# Every property has four well-separated value groups so pooled clustering
# is stable; tray and plate share the high rigidity/flatness/weight groups,
# the mouse pad only the high flatness group.
TRAY = {
    "tray": (25, 9.0, 0.90, 700, 0.30, 0.30, 0.90, 0.30),
    "plate": (25, 9.0, 0.90, 700, 0.30, 0.30, 0.90, 0.30),
    "mousepad": (25, 1.0, 0.90, 100, 0.02, 0.05, 0.50, 0.10),
    "bowl": (45, 7.0, 0.25, 400, 0.85, 0.90, 0.50, 0.50),
    "ball": (45, 4.0, 0.05, 250, 0.60, 0.05, 0.10, 0.80),
    "sponge": (45, 1.2, 0.55, 30, 0.05, 0.30, 0.25, 0.15),
}


def tn(mean, std, lo, hi):
    return {"mean": mean, "stddev": std, "min": lo, "max": hi}


def prop(label, kind, dists):
    return {"label": label, "kind": kind, "distributions": dists}


def washington(out: Path, seed: int):
    out.mkdir(parents=True, exist_ok=True)
    classes = [{"label": c, "count": v[0]} for c, v in WASHINGTON.items()]
    cols = {
        "rigidity": (1, "physical", lambda m: tn(m, 1.0, 0.0, 10.0)),
        "weight": (2, "physical", lambda m: tn(m, 0.15 * m, 0.0, 2000.0)),
        "hollowness": (3, "physical", lambda m: tn(m, 0.1, 0.0, 1.0)),
        "containment": (4, "functional", lambda m: tn(m, 0.1, 0.0, 1.0)),
        "support": (5, "functional", lambda m: tn(m, 0.1, 0.0, 1.0)),
        "blockage": (6, "functional", lambda m: tn(m, 0.1, 0.0, 1.0)),
    }
    properties = [
        prop(name, kind, {c: f(v[i]) for c, v in WASHINGTON.items()})
        for name, (i, kind, f) in cols.items()
    ]
    manifest = {
        "format": "ersatz-manifest",
        "schema_version": 1,
        "machine_property_dim": 4,
        "machine_properties": "shape_concepts.csv",
        "classes": classes,
        "properties": properties,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")

    rng = np.random.default_rng(seed)
    rows = []
    for c, v in WASHINGTON.items():
        proto = np.array(v[7])
        for i in range(1, v[0] + 1):
            vec = np.clip(proto + rng.normal(0.0, 0.08, proto.size), 0.0, 1.0)
            rows.append((f"{c}_{i}", tuple(round(float(x), 6) for x in vec)))
    write_machine_file(out / "shape_concepts.csv", MachinePropertyFile(sorted(rows)), 4)

    labels = list(WASHINGTON)
    scenarios = []
    for k, missing in enumerate(labels):
        others = [c for c in labels if c != missing]
        picks = rng.choice(len(others), size=5, replace=False)
        scenarios.append(
            {"id": f"q{k + 1:02d}", "missing_tool": missing, "candidates": sorted(others[j] for j in picks)}
        )
    queries = {"format": "ersatz-queries", "schema_version": 1, "scenarios": scenarios}
    (out / "queries.json").write_text(json.dumps(queries, indent=1) + "\n")


def tray(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    cols = {
        "rigidity": (1, "physical", lambda m: tn(m, 0.5, 0.0, 10.0)),
        "flatness": (2, "physical", lambda m: tn(m, 0.03, 0.0, 1.0)),
        "weight": (3, "physical", lambda m: tn(m, 0.1 * m, 0.0, 2000.0)),
        "hollowness": (4, "physical", lambda m: tn(m, 0.03, 0.0, 1.0)),
        "containment": (5, "functional", lambda m: tn(m, 0.03, 0.0, 1.0)),
        "support": (6, "functional", lambda m: tn(m, 0.03, 0.0, 1.0)),
        "blockage": (7, "functional", lambda m: tn(m, 0.03, 0.0, 1.0)),
    }
    manifest = {
        "format": "ersatz-manifest",
        "schema_version": 1,
        "machine_property_dim": 0,
        "classes": [{"label": c, "count": v[0]} for c, v in TRAY.items()],
        "properties": [
            prop(name, kind, {c: f(v[i]) for c, v in TRAY.items()}) for name, (i, kind, f) in cols.items()
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    ap.add_argument("--seed", type=int, default=2018)
    args = ap.parse_args()
    washington(args.out / "washington22", args.seed)
    tray(args.out / "tray")


if __name__ == "__main__":
    main()
