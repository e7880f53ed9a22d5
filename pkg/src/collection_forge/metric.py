"""Mahalanobis metric learning from similar/dissimilar descriptor pairs.

Maximizes the summed distance over dissimilar pairs subject to the
summed squared distance over similar pairs staying <= 1 and the metric
matrix staying PSD.  Optimization is gradient ascent with alternating
projections (half-space, then PSD cone).  Variants: eucl (identity,
no training), diag (diagonal matrix), full (dense symmetric PSD).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateObjective, SchemaMismatch

METRIC_VARIANTS = ("eucl", "diag", "full")

PSD_SLACK = 1e-8
SYM_SLACK = 1e-10
NORM_GUARD = 1e-9


@dataclass
class MetricModel:
    variant: str
    dim: int
    diag: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in METRIC_VARIANTS:
            raise ValueError(f"unknown metric variant {self.variant!r}")
        if self.variant == "diag":
            self.diag = np.asarray(self.diag, dtype=np.float64)
            if self.diag.shape != (self.dim,):
                raise SchemaMismatch("diag metric needs a length-dim vector")
            if self.diag.min() < -PSD_SLACK:
                raise SchemaMismatch("diag metric has negative entries")
        elif self.variant == "full":
            self.matrix = np.asarray(self.matrix, dtype=np.float64)
            if self.matrix.shape != (self.dim, self.dim):
                raise SchemaMismatch("full metric needs a dim x dim matrix")
            if np.abs(self.matrix - self.matrix.T).max() > SYM_SLACK:
                raise SchemaMismatch("full metric matrix is not symmetric")
            if float(np.linalg.eigvalsh(self.matrix)[0]) < -PSD_SLACK:
                raise SchemaMismatch("full metric matrix is not PSD")

    def quad_form(self, delta: np.ndarray) -> float:
        if delta.shape != (self.dim,):
            raise SchemaMismatch(f"delta has dim {delta.shape}, metric expects "
                                 f"{self.dim}")
        if self.variant == "eucl":
            q = float(delta @ delta)
        elif self.variant == "diag":
            q = float((self.diag * delta * delta).sum())
        else:
            q = float(delta @ (self.matrix @ delta))
        if q < -1e-10:
            raise SchemaMismatch(f"quadratic form {q} below clamping tolerance")
        return max(q, 0.0)

    @classmethod
    def identity(cls, dim: int) -> "MetricModel":
        return cls(variant="eucl", dim=dim)


@dataclass
class PairSets:
    similar: list    # list of (x, y) vector pairs
    dissimilar: list

    def deltas(self):
        ds = np.stack([np.asarray(x) - np.asarray(y) for x, y in self.similar])
        dd = np.stack([np.asarray(x) - np.asarray(y) for x, y in self.dissimilar])
        return ds, dd


def mahalanobis_distance(x, y, model: MetricModel) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise SchemaMismatch(f"point dims differ: {x.shape} vs {y.shape}")
    return float(np.sqrt(model.quad_form(x - y)))


def similar_constraint(model: MetricModel, deltas_s) -> float:
    """f(A) = sum over similar pairs of the squared metric distance."""
    return float(sum(model.quad_form(d) for d in deltas_s))


def dissimilar_objective(model: MetricModel, deltas_d) -> float:
    """g(A) = sum over dissimilar pairs of the metric distance."""
    return float(sum(np.sqrt(model.quad_form(d)) for d in deltas_d))


def project_feasible(A, M_S, tol=PSD_SLACK, max_cycles=100) -> np.ndarray:
    """Alternate half-space {<A, M_S> <= 1} and PSD-cone projections."""
    A = np.asarray(A, dtype=np.float64)
    A = 0.5 * (A + A.T)
    ms_sq = float((M_S * M_S).sum())
    for _ in range(max_cycles):
        ip = float((A * M_S).sum())
        if ms_sq > 0 and ip > 1.0:
            A = A - ((ip - 1.0) / ms_sq) * M_S
        w, V = np.linalg.eigh(0.5 * (A + A.T))
        if w[0] < 0.0:
            A = (V * np.maximum(w, 0.0)) @ V.T
            A = 0.5 * (A + A.T)
        ip = float((A * M_S).sum())
        if (ms_sq == 0 or ip <= 1.0 + tol) and \
                float(np.linalg.eigvalsh(A)[0]) >= -tol:
            return A
    # far-infeasible starts can exhaust the cycle cap: scaling a PSD matrix
    # into the half-space keeps it PSD, so feasibility always holds on return
    ip = float((A * M_S).sum())
    if ms_sq > 0 and ip > 1.0:
        A = A / ip
    return A


def _project_feasible_diag(a, w_s, tol=PSD_SLACK, max_cycles=100) -> np.ndarray:
    w_sq = float(w_s @ w_s)
    for _ in range(max_cycles):
        ip = float(a @ w_s)
        if w_sq > 0 and ip > 1.0:
            a = a - ((ip - 1.0) / w_sq) * w_s
        a = np.maximum(a, 0.0)
        if w_sq == 0 or float(a @ w_s) <= 1.0 + tol:
            return a
    ip = float(a @ w_s)
    if w_sq > 0 and ip > 1.0:
        a = a / ip
    return a


def learn_metric(pairs: PairSets, variant: str, step=0.1, iters=500, seed=0,
                 tol=1e-7) -> MetricModel:
    """Projected gradient ascent; returns the best feasible iterate."""
    if variant not in METRIC_VARIANTS:
        raise ValueError(f"unknown metric variant {variant!r}")
    if not pairs.similar or not pairs.dissimilar:
        raise ValueError("both similar and dissimilar pair sets must be non-empty")
    ds, dd = pairs.deltas()
    dim = ds.shape[1]
    if variant == "eucl":
        return MetricModel.identity(dim)
    if not np.any(dd):
        raise DegenerateObjective("every dissimilar pair has identical descriptors")

    if variant == "diag":
        w_s = (ds * ds).sum(axis=0)          # f(A) = a . w_s
        dd_sq = dd * dd
        f_ident = float(w_s.sum())
        a = np.full(dim, 1.0 / f_ident if f_ident > 0 else 1.0)
        a = _project_feasible_diag(a, w_s)

        def g_and_grad(a_vec):
            norms = np.sqrt(np.maximum(dd_sq @ a_vec, 0.0))
            safe = np.maximum(norms, NORM_GUARD)
            return float(norms.sum()), (dd_sq / (2.0 * safe[:, None])).sum(axis=0)

        best_a, best_g = a.copy(), g_and_grad(a)[0]
        prev_g = best_g
        for _ in range(iters):
            _, grad = g_and_grad(a)
            gnorm = float(np.linalg.norm(grad))
            if gnorm == 0.0:
                break
            a = _project_feasible_diag(a + (step / gnorm) * grad, w_s)
            g_val = g_and_grad(a)[0]
            if g_val > best_g:
                best_a, best_g = a.copy(), g_val
            if abs(g_val - prev_g) <= tol * max(1.0, abs(prev_g)):
                break
            prev_g = g_val
        return MetricModel(variant="diag", dim=dim, diag=best_a)

    # full
    M_S = ds.T @ ds
    f_ident = float(np.trace(M_S))
    A = np.eye(dim) / (f_ident if f_ident > 0 else 1.0)
    A = project_feasible(A, M_S)

    def g_and_grad(mat):
        quads = np.einsum("ij,jk,ik->i", dd, mat, dd)
        norms = np.sqrt(np.maximum(quads, 0.0))
        safe = np.maximum(norms, NORM_GUARD)
        grad = (dd.T * (0.5 / safe)) @ dd
        return float(norms.sum()), 0.5 * (grad + grad.T)

    best_A, best_g = A.copy(), g_and_grad(A)[0]
    prev_g = best_g
    for _ in range(iters):
        _, grad = g_and_grad(A)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            break
        A = project_feasible(A + (step / gnorm) * grad, M_S)
        g_val = g_and_grad(A)[0]
        if g_val > best_g:
            best_A, best_g = A.copy(), g_val
        if abs(g_val - prev_g) <= tol * max(1.0, abs(prev_g)):
            break
        prev_g = g_val
    return MetricModel(variant="full", dim=dim, matrix=best_A)
