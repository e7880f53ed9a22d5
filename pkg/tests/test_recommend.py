import numpy as np
import pytest

from oracles import ap_at_k_reference, expected_random_ap_at_k
from collection_forge.coder import CollectionDescriptor
from collection_forge.errors import (EmptyEvaluation, MissingDescriptor,
                                     SchemaMismatch)
from collection_forge.metric import MetricModel
from collection_forge.recommend import (GLOBAL_CATEGORY, PreferenceTuple,
                                        ap_at_k, build_pairs, evaluate_tuples,
                                        label_relevance, map_at_k,
                                        model_selector, random_baseline_map,
                                        rank_collections, train_query_dependent)


def _desc(cid, vec, variant="avg-l1"):
    vec = np.asarray(vec, dtype=np.float64)
    return CollectionDescriptor(collection_id=cid, x=vec, variant=variant,
                                density=float(np.count_nonzero(vec)) / len(vec),
                                lam=0.1)


def _tuple(user, clicked, pos, neg, category=None):
    return PreferenceTuple(user_id=user, query=["q"], clicked_id=clicked,
                           interested=pos, disinterested=neg,
                           query_category=category)


def test_tuple_rejects_overlap():
    with pytest.raises(ValueError):
        _tuple("u", "c", ["a", "b"], ["b"])


def test_tuple_record_roundtrip():
    t = _tuple("u", "c", ["a"], ["b"], category="cat")
    assert PreferenceTuple.from_record(t.to_record()) == t


def test_build_pairs_counts():
    descs = {f"b{i}": _desc(f"b{i}", [i, 0.0]) for i in range(61)}
    pos = [f"b{i}" for i in range(1, 21)]
    neg = [f"b{i}" for i in range(21, 61)]
    pairs = build_pairs([_tuple("u", "b0", pos, neg)], descs)
    assert len(pairs.similar) == 20 and len(pairs.dissimilar) == 40
    three = [_tuple("u1", "b0", pos[:3], neg[:2]),
             _tuple("u2", "b0", pos[:5], neg[:1]),
             _tuple("u3", "b0", pos[:2], neg[:4])]
    pairs = build_pairs(three, descs)
    assert len(pairs.similar) == 3 + 5 + 2
    assert len(pairs.dissimilar) == 2 + 1 + 4


def test_build_pairs_empty_negatives_flagged_downstream():
    descs = {c: _desc(c, [1.0, float(len(c))]) for c in ("c", "p")}
    pairs = build_pairs([_tuple("u", "c", ["p"], [])], descs)
    assert pairs.dissimilar == []
    from collection_forge.metric import learn_metric
    with pytest.raises(ValueError):
        learn_metric(pairs, "diag")


def test_build_pairs_errors():
    descs = {"c": _desc("c", [1.0]), "p": _desc("p", [2.0], variant="huber-l1")}
    with pytest.raises(SchemaMismatch):
        build_pairs([_tuple("u", "c", ["p"], [])], descs)
    descs = {"c": _desc("c", [1.0])}
    with pytest.raises(MissingDescriptor):
        build_pairs([_tuple("u", "c", ["missing"], [])], descs)


def test_rank_exact_match_first():
    model = MetricModel.identity(2)
    clicked = _desc("c", [1.0, 2.0])
    cands = [_desc("far", [5.0, 5.0]), _desc("same", [1.0, 2.0])]
    ranked = rank_collections(clicked, cands, model)
    assert ranked.items[0] == ("same", 0.0)


def test_rank_ties_break_by_id():
    model = MetricModel.identity(1)
    clicked = _desc("c", [0.0])
    cands = [_desc(cid, [1.0]) for cid in ("zeta", "alpha", "mid")]
    ranked = rank_collections(clicked, cands, model)
    assert [cid for cid, _ in ranked.items] == ["alpha", "mid", "zeta"]


def test_rank_with_learned_diag_toy_metric():
    # metric trained to weight axis 2: candidates near along axis 2 win
    diag = np.array([0.01, 1.0])
    model = MetricModel(variant="diag", dim=2, diag=diag)
    clicked = _desc("c", [0.0, 0.0])
    near_axis2 = _desc("n2", [3.0, 0.1])
    near_axis1 = _desc("n1", [0.1, 3.0])
    ranked = rank_collections(clicked, [near_axis1, near_axis2], model)
    assert ranked.items[0][0] == "n2"


def test_ap_examples():
    assert ap_at_k([1, 1, 1, 1, 1], 5) == 1.0
    assert ap_at_k([0, 0, 0, 0, 0], 5) == 0.0
    assert ap_at_k([1, 0, 1], 3) == pytest.approx((1 + 2 / 3) / 3)
    assert ap_at_k([1], 5) == pytest.approx(1 / 5)  # zero-padded to K
    with pytest.raises(ValueError):
        ap_at_k([1], 0)


@pytest.mark.parametrize("seed", range(5))
def test_ap_matches_reference(seed):
    rng = np.random.default_rng(seed)
    rel = rng.integers(0, 2, size=12).tolist()
    for k in (1, 3, 5, 12):
        assert ap_at_k(rel, k) == pytest.approx(ap_at_k_reference(rel, k))


def test_map_single_and_duplicate():
    rel = [1, 0, 1, 0]
    assert map_at_k([rel], 4) == pytest.approx(ap_at_k(rel, 4))
    assert map_at_k([rel, rel], 4) == pytest.approx(ap_at_k(rel, 4))
    with pytest.raises(EmptyEvaluation):
        map_at_k([], 5)


def test_random_baseline_matches_closed_form():
    value = random_baseline_map(60, 20, 5, n_trials=100_000, seed=0)
    assert value == pytest.approx(expected_random_ap_at_k(60, 20, 5), abs=0.005)
    value = random_baseline_map(40, 20, 5, n_trials=100_000, seed=1)
    assert value == pytest.approx(expected_random_ap_at_k(40, 20, 5), abs=0.005)


def test_evaluate_tuples_tables():
    descs = {"c": _desc("c", [0.0]), "near": _desc("near", [0.1]),
             "far": _desc("far", [9.0])}
    tuples = [_tuple("u0", "c", ["near"], ["far"], category="cat-a"),
              _tuple("u1", "c", ["far"], ["near"], category="cat-b")]
    report = evaluate_tuples(tuples, descs, lambda t: MetricModel.identity(1),
                             ks=[1, 2])
    assert report["per_category"]["cat-a"]["1"] == 1.0
    assert report["per_category"]["cat-b"]["1"] == 0.0
    assert report["global"]["1"] == 0.5
    with pytest.raises(EmptyEvaluation):
        evaluate_tuples([], descs, lambda t: MetricModel.identity(1))


def test_query_dependent_training_and_selector():
    rng = np.random.default_rng(0)
    descs = {f"b{i}": _desc(f"b{i}", rng.normal(size=3)) for i in range(8)}
    tuples = [_tuple("u0", "b0", ["b1", "b2"], ["b3"], category="art"),
              _tuple("u1", "b4", ["b5"], ["b6", "b7"], category="photo")]
    models = train_query_dependent(tuples, descs, "diag", iters=50)
    assert set(models) == {GLOBAL_CATEGORY, "art", "photo"}
    select = model_selector(models)
    assert select(tuples[0]) is models["art"]
    unknown = _tuple("u9", "b0", ["b1"], ["b3"], category="unseen")
    assert select(unknown) is models[GLOBAL_CATEGORY]


def test_query_dependent_degenerate_category_falls_back():
    descs = {"c": _desc("c", [1.0, 0.0]), "p": _desc("p", [0.0, 1.0]),
             "n": _desc("n", [1.0, 0.0])}
    tuples = [_tuple("u0", "c", ["p"], ["n"], category="dup")]
    # dissimilar delta is exactly zero for category "dup" and globally
    with pytest.raises(Exception):
        train_query_dependent(tuples, descs, "diag")
    good = {"c": _desc("c", [1.0, 0.0]), "p": _desc("p", [0.0, 1.0]),
            "n": _desc("n", [3.0, 3.0])}
    tuples = [_tuple("u0", "c", ["p"], ["n"], category="ok"),
              _tuple("u1", "c", ["p"], [], category="nopairs")]
    with pytest.warns(UserWarning, match="nopairs"):
        models = train_query_dependent(tuples, good, "diag", iters=50)
    assert "nopairs" not in models and "ok" in models


def test_label_relevance():
    ranked = rank_collections(_desc("c", [0.0]),
                              [_desc("a", [1.0]), _desc("b", [2.0])],
                              MetricModel.identity(1))
    ranked = label_relevance(ranked, ["b"])
    assert ranked.rel == [0, 1]
