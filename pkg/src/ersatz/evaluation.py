"""Expert-agreement harness, heat-map export and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from ersatz.core import Kind, ReasonerConfig
from ersatz.errors import ErsatzError, UnknownClassError
from ersatz.knowledge import KnowledgeBase, build_kb
from ersatz.reasoner import answer_query, jaccard, representative_model, substitution_model

QUERIES_FORMAT = "ersatz-queries"
TRUTH_FORMAT = "ersatz-ground-truth"
REPORT_FORMAT = "ersatz-eval-report"
SCHEMA_VERSION = 1
SENTINEL = "NA"


class EvalInputError(ErsatzError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    missing_tool: str
    candidates: tuple[str, ...]


@dataclass(frozen=True)
class ExpertVotes:
    votes: dict[str, int]
    modal: str


@dataclass
class ScenarioOutcome:
    scenario: Scenario
    system_choice: str | None
    expert_choice: str
    similarities: dict[str, float]
    vote_share: float

    @property
    def match(self) -> bool:
        return self.system_choice == self.expert_choice


@dataclass
class EvalReport:
    outcomes: list[ScenarioOutcome]
    classes: list[str]
    theta: float
    phi: float
    notes: list[str] = field(default_factory=list)

    @property
    def matches(self) -> int:
        return sum(o.match for o in self.outcomes)

    @property
    def agreement(self) -> float:
        return self.matches / len(self.outcomes)

    def agreement_line(self) -> str:
        n = len(self.outcomes)
        pct = math.floor(100 * self.matches / n + 0.5)
        return f"agreement: {self.matches}/{n} ({pct}%)"

    def heatmap(self) -> list[list[float | None]]:
        """Rows follow scenario order; None marks a class absent from the query."""
        return [[o.similarities.get(c) for c in self.classes] for o in self.outcomes]

    def heatmap_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario_id", "missing_tool", *self.classes])
        for o, row in zip(self.outcomes, self.heatmap()):
            w.writerow([o.scenario.id, o.scenario.missing_tool, *(SENTINEL if v is None else repr(v) for v in row)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "schema_version": SCHEMA_VERSION,
            "theta": self.theta,
            "phi": self.phi,
            "agreement": self.agreement,
            "matches": self.matches,
            "scenarios": len(self.outcomes),
            "mean_vote_share": sum(o.vote_share for o in self.outcomes) / len(self.outcomes),
            "notes": self.notes,
            "per_scenario": [
                {
                    "id": o.scenario.id,
                    "missing_tool": o.scenario.missing_tool,
                    "system_choice": o.system_choice,
                    "expert_choice": o.expert_choice,
                    "match": o.match,
                    "vote_share": o.vote_share,
                    "similarities": {c: o.similarities[c] for c in sorted(o.similarities)},
                }
                for o in self.outcomes
            ],
        }


def _read_json(path: str | Path, fmt: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise EvalInputError(f"{path}: {exc}") from None
    if not isinstance(data, dict) or data.get("format") != fmt:
        raise EvalInputError(f"{path}: expected format {fmt!r}")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise EvalInputError(f"{path}: unsupported schema_version {data.get('schema_version')!r}")
    return data


def parse_queries(data: dict) -> list[Scenario]:
    out = []
    try:
        for s in data["scenarios"]:
            cands = tuple(s["candidates"])
            if not cands:
                raise EvalInputError(f"scenario {s['id']}: empty candidate list")
            out.append(Scenario(str(s["id"]), s["missing_tool"], cands))
    except (KeyError, TypeError) as exc:
        raise EvalInputError(f"malformed query file: {exc}") from None
    if not out:
        raise EvalInputError("query file has no scenarios")
    if len({s.id for s in out}) != len(out):
        raise EvalInputError("duplicate scenario ids")
    return out


def load_queries(path: str | Path) -> list[Scenario]:
    return parse_queries(_read_json(path, QUERIES_FORMAT))


def parse_ground_truth(data: dict) -> dict[str, ExpertVotes]:
    out = {}
    try:
        items = data["scenarios"].items()
    except (KeyError, AttributeError):
        raise EvalInputError("malformed ground-truth file: 'scenarios' must map ids to votes") from None
    for sid, entry in items:
        votes = entry.get("votes", {})
        if any(not isinstance(v, int) or v < 0 for v in votes.values()):
            raise EvalInputError(f"scenario {sid}: vote counts must be non-negative integers")
        top = max(votes.values(), default=0)
        modal = entry.get("modal")
        if modal is None:
            leaders = [c for c, v in votes.items() if v == top]
            if len(leaders) != 1:
                raise EvalInputError(f"scenario {sid}: tied vote without an explicit 'modal'")
            modal = leaders[0]
        elif votes and votes.get(modal, 0) != top:
            raise EvalInputError(f"scenario {sid}: modal {modal!r} does not have the top vote count")
        out[str(sid)] = ExpertVotes(dict(votes), modal)
    return out


def load_ground_truth(path: str | Path) -> dict[str, ExpertVotes]:
    return parse_ground_truth(_read_json(path, TRUTH_FORMAT))


def evaluate(
    kb: KnowledgeBase,
    scenarios: list[Scenario],
    truth: dict[str, ExpertVotes],
    config: ReasonerConfig | None = None,
) -> EvalReport:
    config = config or kb.config
    if not scenarios:
        raise EvalInputError("no scenarios to evaluate")
    for s in scenarios:
        if s.id not in truth:
            raise EvalInputError(f"no ground truth for scenario {s.id}")
        for label in (s.missing_tool, *s.candidates, truth[s.id].modal):
            if label not in kb.classes:
                raise UnknownClassError(label)
    outcomes = []
    for s in scenarios:
        result = answer_query(kb, s.missing_tool, s.candidates, config)
        votes = truth[s.id]
        total = sum(votes.votes.values())
        share = votes.votes.get(result.chosen, 0) / total if total and result.chosen else 0.0
        outcomes.append(ScenarioOutcome(s, result.chosen, votes.modal, result.similarities(), share))
    return EvalReport(outcomes, sorted(kb.classes), config.theta, config.phi)


def write_report(report: EvalReport, path: str | Path) -> Path:
    """Write the JSON summary to ``path`` and the heat map next to it; returns the CSV path."""
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    matrix = path.with_suffix(".heatmap.csv")
    matrix.write_text(report.heatmap_csv())
    return matrix


# -- sweeps ----------------------------------------------------------------


def positive_substitutes(kb: KnowledgeBase, missing: str, theta: float, phi: float) -> set[str]:
    """Classes judged substitutes for ``missing`` among all other classes (no caching)."""
    sm = substitution_model(kb, missing, theta, phi)
    out = set()
    for c in kb.classes:
        if c != missing and jaccard(sm.relevant_physical, representative_model(kb.concept(c), theta).qualities) > phi:
            out.add(c)
    return out


def _rep_sets(kb: KnowledgeBase, theta: float) -> dict[str, frozenset]:
    out = {}
    for cls in kb.classes:
        concept = kb.concept(cls)
        out[f"class:{cls}:physical"] = representative_model(concept, theta).qualities
        out[f"class:{cls}:functional"] = representative_model(concept, theta, Kind.FUNCTIONAL).qualities
    for f, fm in kb.function_models.items():
        out[f"function:{f.label}"] = representative_model(fm, theta).qualities
    return out


def check_grid(thetas, phis, etas=()):
    for t in thetas:
        if not 0.0 < t <= 1.0:
            raise ValueError(f"theta grid value {t} outside (0, 1]")
    for p in phis:
        if not 0.0 <= p < 1.0:
            raise ValueError(f"phi grid value {p} outside [0, 1)")
    for e in etas:
        if e < 2:
            raise ValueError(f"eta grid value {e} must be >= 2")


def monotonicity_violations(kb: KnowledgeBase, thetas, phis) -> list[str]:
    """Representative sets must shrink as theta rises; positive sets must not grow as phi rises."""
    check_grid(thetas, phis)
    thetas, phis = sorted(thetas), sorted(phis)
    out = []
    prev = None
    for t in thetas:
        cur = _rep_sets(kb, t)
        if prev is not None:
            for key, qs in cur.items():
                if not qs <= prev[1][key]:
                    out.append(f"{key}: representative set grew from theta={prev[0]} to theta={t}")
        prev = (t, cur)
    for t in thetas:
        for missing in sorted(kb.classes):
            last = None
            for p in phis:
                pos = positive_substitutes(kb, missing, t, p)
                if last is not None and not pos <= last[1]:
                    out.append(
                        f"{missing}@theta={t}: positives gained {sorted(pos - last[1])} "
                        f"from phi={last[0]} to phi={p}"
                    )
                last = (p, pos)
    return out


SWEEP_COLUMNS = (
    "eta", "theta", "phi", "qualities", "mean_rep_physical", "mean_rep_functional",
    "positives", "agreement",
)


def sweep(
    kb: KnowledgeBase,
    thetas,
    phis,
    etas=(),
    manifest=None,
    scenarios: list[Scenario] | None = None,
    truth: dict[str, ExpertVotes] | None = None,
) -> tuple[list[dict], list[str]]:
    """Grid over (eta, theta, phi); eta values other than the KB's trigger rebuilds."""
    check_grid(thetas, phis, etas)
    etas = list(etas) or [kb.config.eta]
    if any(e != kb.config.eta for e in etas) and manifest is None:
        raise ValueError("eta sweep requires the manifest to rebuild the KB")
    rows, violations = [], []
    for eta in etas:
        if eta == kb.config.eta:
            base = kb
        else:
            cfg = ReasonerConfig(eta, kb.config.theta, kb.config.phi, kb.config.rng_seed)
            base = build_kb(manifest, cfg, method=kb.metadata.get("cluster_method", "exact"))
        violations += [f"eta={eta}: {v}" for v in monotonicity_violations(base, thetas, phis)]
        n_classes = len(base.classes)
        for t, p in product(sorted(thetas), sorted(phis)):
            reps = _rep_sets(base, t)
            row = {
                "eta": eta,
                "theta": t,
                "phi": p,
                "qualities": len(base.qualities()),
                "mean_rep_physical": sum(len(reps[f"class:{c}:physical"]) for c in base.classes) / n_classes,
                "mean_rep_functional": sum(len(reps[f"class:{c}:functional"]) for c in base.classes) / n_classes,
                "positives": sum(len(positive_substitutes(base, c, t, p)) for c in base.classes),
                "agreement": None,
            }
            if scenarios and truth:
                cfg = ReasonerConfig(eta, t, p, base.config.rng_seed)
                row["agreement"] = evaluate(base, scenarios, truth, cfg).agreement
            rows.append(row)
    return rows, violations


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in SWEEP_COLUMNS})
    return buf.getvalue()
