import logging
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ersatz.core import ClassConcept, FunctionModel, HoldsSet, Kind, QualityLabel, ReasonerConfig, validate_kb
from ersatz.errors import UnknownClassError
from ersatz.grounding import ClusterModel
from ersatz.knowledge import KnowledgeBase, conceptualize_classes, conceptualize_functions
from ersatz.reasoner import (
    Verdict, answer_query, jaccard, relevant_functional_qualities, relevant_physical_qualities,
    representative_model, substitution_model,
)

from tests.oracles import jaccard_enumerate

P = lambda prop, i: QualityLabel(prop, i)
F = lambda prop, i: QualityLabel(prop, i, Kind.FUNCTIONAL)


def tiny_kb(table):
    """table: class -> list of quality tuples, one per instance."""
    holds, class_of = {}, {}
    for cls, rows in table.items():
        for i, qs in enumerate(rows, 1):
            iid = f"{cls}_{i}"
            holds[iid] = HoldsSet(iid, frozenset(qs))
            class_of[iid] = cls
    props = sorted({q.property: q.kind for h in holds.values() for q in h.qualities}.items())
    from ersatz.core import PropertyDef, Source

    models = {p: ClusterModel(p, (0.0, 1.0, 2.0, 3.0), k) for p, k in props}
    return KnowledgeBase(
        config=ReasonerConfig(),
        properties={p: PropertyDef(p, k, Source.HUMAN) for p, k in props},
        classes={c: len(r) for c, r in table.items()},
        cluster_models=models,
        holds=holds,
        class_of=class_of,
        concepts=conceptualize_classes(holds.values(), class_of),
        function_models=conceptualize_functions(holds.values()),
        functional_properties=tuple(p for p, k in props if k is Kind.FUNCTIONAL),
    )


def test_representative_model_thresholds():
    concept = ClassConcept(
        "plate", {P("rigidity", 3): 0.6, P("rigidity", 2): 0.4, P("weight", 1): 1.0, F("support", 3): 0.7}, 5
    )
    assert representative_model(concept, 0.35).qualities == {P("rigidity", 3), P("rigidity", 2), P("weight", 1)}
    assert representative_model(concept, 0.7).qualities == {P("weight", 1)}
    assert representative_model(concept, 1.0).qualities == {P("weight", 1)}
    assert representative_model(concept, 0.7, Kind.FUNCTIONAL).qualities == {F("support", 3)}


def test_representative_model_threshold_is_inclusive():
    fm = FunctionModel(F("support", 3), {P("rigidity", 3): 0.35, P("rigidity", 0): 0.65}, 20)
    assert representative_model(fm, 0.35).qualities == {P("rigidity", 3), P("rigidity", 0)}


@pytest.mark.parametrize("theta", [0.0, -0.2, 1.01])
def test_representative_model_rejects_theta(theta):
    with pytest.raises(ValueError):
        representative_model(ClassConcept("a", {}, 0), theta)


@pytest.mark.parametrize(
    "a,b,expected",
    [(set(), set(), 0.0), ({1}, set(), 0.0), ({1, 2}, {2, 3}, 1 / 3), ({1, 2}, {1, 2}, 1.0), ({1}, {2}, 0.0)],
)
def test_jaccard_examples(a, b, expected):
    assert jaccard(a, b) == expected


@settings(max_examples=200)
@given(st.sets(st.integers(0, 19)), st.sets(st.integers(0, 19)))
def test_jaccard_properties(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0.0 <= jaccard(a, b) <= 1.0
    assert Fraction(jaccard(a, b)).limit_denominator(400) == jaccard_enumerate(a, b, range(20))
    if a:
        assert jaccard(a, a) == 1.0


# tool: rigid and flat; its support comes from rigid holders
TABLE = {
    "tray": [(P("rigidity", 3), P("flatness", 3), F("support", 3))] * 4,
    "plate": [(P("rigidity", 3), P("flatness", 3), F("support", 3))] * 3,
    "mousepad": [(P("rigidity", 0), P("flatness", 3), F("support", 0))] * 3,
    "ball": [(P("rigidity", 1), P("flatness", 0), F("support", 0))] * 3,
}


def test_relevant_qualities_on_engineered_table():
    kb = tiny_kb(TABLE)
    assert relevant_functional_qualities(kb, "tray", 0.35, 0.35) == {F("support", 3)}
    o_p, o_f, fallback = relevant_physical_qualities(kb, "tray", 0.35, 0.35)
    assert o_p == {P("rigidity", 3), P("flatness", 3)}
    assert o_f == {F("support", 3)} and not fallback


def test_rejected_function_yields_empty_relevant_set():
    kb = tiny_kb(TABLE)
    # support_4 holders are all rigid and flat, so J = 1 and even phi=0.99 keeps it
    assert relevant_physical_qualities(kb, "tray", 0.35, 0.99)[0] == {P("rigidity", 3), P("flatness", 3)}
    # mousepad's support_1 model is shared with the ball, only half overlaps
    o_p, o_f, fallback = relevant_physical_qualities(kb, "mousepad", 0.35, 0.9)
    assert o_f == set() and o_p == set() and not fallback


def test_phi_zero_keeps_any_overlap():
    kb = tiny_kb(TABLE)
    assert relevant_functional_qualities(kb, "mousepad", 0.35, 0.0) == {F("support", 0)}


def test_fallback_when_no_functional_quality():
    table = dict(TABLE, stick=[(P("rigidity", 3),)] * 2)
    o_p, o_f, fallback = relevant_physical_qualities(tiny_kb(table), "stick", 0.35, 0.35)
    assert fallback and o_f == set() and o_p == {P("rigidity", 3)}


def test_similarity_fractions():
    kb = tiny_kb(TABLE)
    r = answer_query(kb, "tray", ["mousepad", "plate", "ball"])
    assert r.similarities() == {"plate": 1.0, "mousepad": 1 / 3, "ball": 0.0}
    assert r.chosen == "plate"
    assert [c for c, _, _ in r.ranked_candidates] == ["plate", "mousepad", "ball"]


# -- against the tray fixture KB ------------------------------------------------


def test_tray_relevant_set_contains_rigid_and_flat(tray_kb):
    o_p, _, _ = relevant_physical_qualities(tray_kb, "tray", 0.35, 0.35)
    assert {P("rigidity", 3), P("flatness", 3)} <= o_p


def test_tray_chooses_plate(tray_kb):
    r = answer_query(tray_kb, "tray", ["mousepad", "plate", "bowl", "ball", "sponge"])
    sims = r.similarities()
    assert r.chosen == "plate"
    assert sims["plate"] > 0.35 >= sims["mousepad"] > 0.0
    assert r.explanation.overlaps["mousepad"] == {P("flatness", 3)}
    assert not r.cache_hit


def test_second_query_uses_cache(tray_kb):
    first = answer_query(tray_kb, "tray", ["plate", "mousepad"])
    second = answer_query(tray_kb, "tray", ["plate", "mousepad"])
    assert second.cache_hit and second == first
    sm = tray_kb.substitution_models[("tray", 0.35, 0.35)]
    assert set(sm.positive) == {"plate"} and set(sm.negative) == {"mousepad"}


def test_cache_is_keyed_by_thresholds(tray_kb):
    answer_query(tray_kb, "tray", ["plate"])
    r = answer_query(tray_kb, "tray", ["plate"], ReasonerConfig(theta=0.5, phi=0.5))
    assert not r.cache_hit
    assert len(tray_kb.substitution_models) == 2


def test_cached_answer_matches_fresh(tray_kb, tray_manifest):
    from ersatz.knowledge import build_kb

    cands = ["plate", "mousepad", "bowl"]
    for _ in range(3):
        answer_query(tray_kb, "tray", ["ball", "sponge"])
    cached = answer_query(tray_kb, "tray", cands)
    fresh = answer_query(build_kb(tray_manifest, ReasonerConfig(rng_seed=0)), "tray", cands)
    assert cached.ranked_candidates == fresh.ranked_candidates
    assert validate_kb(tray_kb) == []


def test_no_substitute(tray_kb):
    r = answer_query(tray_kb, "tray", ["ball", "sponge"])
    assert r.chosen is None
    assert all(v is Verdict.NOT_SUBSTITUTE for _, _, v in r.ranked_candidates)


def test_self_exclusion(tray_kb, caplog):
    with caplog.at_level(logging.WARNING):
        r = answer_query(tray_kb, "tray", ["tray", "plate", "plate"])
    assert r.excluded == ("tray",)
    assert [c for c, _, _ in r.ranked_candidates] == ["plate"]
    assert "excluded" in caplog.text


def test_only_self_is_an_error(tray_kb):
    with pytest.raises(ValueError):
        answer_query(tray_kb, "tray", ["tray"])


def test_unknown_labels(tray_kb):
    with pytest.raises(UnknownClassError):
        answer_query(tray_kb, "anvil", ["plate"])
    with pytest.raises(UnknownClassError) as info:
        answer_query(tray_kb, "tray", ["plate", "anvil"])
    assert info.value.label == "anvil"


def test_substitution_model_is_fresh(tray_kb):
    sm = substitution_model(tray_kb, "tray", 0.35, 0.35)
    assert sm.positive == {} and sm.negative == {}
    assert tray_kb.substitution_models == {}


def test_result_serializes(tray_kb):
    import json

    d = answer_query(tray_kb, "tray", ["plate", "mousepad"]).to_dict()
    assert json.loads(json.dumps(d))["chosen"] == "plate"
