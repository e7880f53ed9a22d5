import numpy as np
import pytest

from oracles import diag_metric_grid_2d, diag_metric_slsqp
from collection_forge.errors import DegenerateObjective, SchemaMismatch
from collection_forge.metric import (MetricModel, PairSets,
                                     dissimilar_objective, learn_metric,
                                     mahalanobis_distance, project_feasible,
                                     similar_constraint)


def test_euclidean_distance():
    model = MetricModel.identity(2)
    assert mahalanobis_distance([0.0, 0.0], [3.0, 4.0], model) == pytest.approx(5.0)


def test_diag_distance_closed_form():
    model = MetricModel(variant="diag", dim=2, diag=np.array([4.0, 1.0]))
    d = mahalanobis_distance([1.0, 1.0], [0.0, 0.0], model)
    assert d == pytest.approx(np.sqrt(5.0))


def test_distance_of_identical_points_is_zero():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    model = MetricModel(variant="full", dim=4, matrix=A @ A.T)
    x = rng.normal(size=4)
    assert mahalanobis_distance(x, x, model) == 0.0


def test_model_validation():
    with pytest.raises(ValueError):
        MetricModel(variant="huh", dim=2)
    with pytest.raises(SchemaMismatch):
        MetricModel(variant="diag", dim=2, diag=np.array([1.0, -0.5]))
    with pytest.raises(SchemaMismatch):
        MetricModel(variant="full", dim=2, matrix=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(SchemaMismatch):
        MetricModel(variant="full", dim=2, matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SchemaMismatch):
        mahalanobis_distance([1.0], [1.0, 2.0], MetricModel.identity(2))


def _toy_pairs():
    # similar pairs differ along axis 1 only, dissimilar along axis 2 only
    similar = [(np.array([x, 0.0]), np.array([0.0, 0.0]))
               for x in (1.0, 0.8, 1.2)]
    dissimilar = [(np.array([0.0, y]), np.array([0.0, 0.0]))
                  for y in (1.0, 1.1, 0.9)]
    return PairSets(similar=similar, dissimilar=dissimilar)


def test_diag_toy_concentrates_off_constraint_axis():
    pairs = _toy_pairs()
    model = learn_metric(pairs, "diag", iters=500)
    assert model.diag[1] / max(model.diag[0], 1e-12) >= 10.0
    ds, dd = pairs.deltas()
    assert similar_constraint(model, ds) <= 1.0 + 1e-6
    # grid-search oracle agrees on where the mass goes
    a_star, g_star = diag_metric_grid_2d(ds, dd)
    assert a_star[1] > 10.0 * a_star[0]
    assert dissimilar_objective(model, dd) >= 0.98 * g_star


def test_full_metric_feasible_and_ascending():
    rng = np.random.default_rng(1)
    sim = [(rng.normal(size=4), rng.normal(size=4)) for _ in range(8)]
    dis = [(rng.normal(size=4) * 2, rng.normal(size=4)) for _ in range(8)]
    pairs = PairSets(similar=sim, dissimilar=dis)
    model = learn_metric(pairs, "full", iters=300)
    ds, dd = pairs.deltas()
    assert similar_constraint(model, ds) <= 1.0 + 1e-6
    assert float(np.linalg.eigvalsh(model.matrix)[0]) >= -1e-8
    np.testing.assert_allclose(model.matrix, model.matrix.T, atol=1e-10)
    # ascent relative to the projected identity start
    M_S = ds.T @ ds
    A0 = project_feasible(np.eye(4) / float(np.trace(M_S)), M_S)
    g0 = dissimilar_objective(MetricModel(variant="full", dim=4, matrix=A0), dd)
    assert dissimilar_objective(model, dd) >= g0 - 1e-9


def test_diag_6d_matches_constrained_oracle():
    rng = np.random.default_rng(2)
    sim = [(rng.normal(size=6), rng.normal(size=6)) for _ in range(10)]
    dis = [(rng.normal(size=6), rng.normal(size=6)) for _ in range(10)]
    pairs = PairSets(similar=sim, dissimilar=dis)
    model = learn_metric(pairs, "diag", iters=2000)
    _, dd = pairs.deltas()
    g = dissimilar_objective(model, dd)
    _, g_star = diag_metric_slsqp(*pairs.deltas())
    assert g >= 0.98 * g_star


def test_eucl_variant_is_identity():
    pairs = _toy_pairs()
    model = learn_metric(pairs, "eucl")
    assert model.variant == "eucl"
    assert mahalanobis_distance([1.0, 0.0], [0.0, 0.0], model) == 1.0


def test_degenerate_dissimilar_pairs_rejected():
    x = np.array([1.0, 2.0])
    pairs = PairSets(similar=[(x, x + 1)], dissimilar=[(x, x)])
    with pytest.raises(DegenerateObjective):
        learn_metric(pairs, "diag")
    with pytest.raises(ValueError):
        learn_metric(PairSets(similar=[], dissimilar=[(x, x + 1)]), "full")


def test_project_feasible_fixed_point():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(3, 3))
    M_S = B @ B.T
    A = np.eye(3) / (2.0 * float(np.trace(M_S)))
    out = project_feasible(A, M_S)
    assert np.abs(out - A).max() < 1e-12


def test_project_feasible_clips_negative_definite():
    M_S = np.eye(2)
    out = project_feasible(-np.eye(2), M_S)
    np.testing.assert_allclose(out, np.zeros((2, 2)), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_project_feasible_random_indefinite(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, 5))
    A = A + A.T
    B = rng.normal(size=(5, 5))
    M_S = B @ B.T
    out = project_feasible(A, M_S)
    assert float(np.linalg.eigvalsh(out)[0]) >= -1e-8
    assert float((out * M_S).sum()) <= 1.0 + 1e-8
