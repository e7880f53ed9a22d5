"""Collection descriptors by joint sparse reconstruction.

A collection's descriptor is the coefficient vector that jointly
reconstructs all member images over the block-diagonal dictionary,
under a robust Huber or least-squares loss and an l1 or l2,1 penalty.
Variants:

  huber-l1 / huber-g : per-image Huber loss on the residual norm,
                       solved by accelerated proximal gradient with
                       backtracking and monotone restart.
  avg-l1 / avg-g     : least-squares loss, which collapses to coding
                       the member-average feature vector.
  raw-avg            : the member-average feature vector itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .dictionary import BlockDictionary
from .errors import (EmptyCollection, LayoutError, NumericError, SchemaMismatch,
                     TuningWarning)
from .features import ImageFeature

VARIANTS = ("huber-l1", "huber-g", "avg-l1", "avg-g", "raw-avg")
CODED_VARIANTS = ("huber-l1", "huber-g", "avg-l1", "avg-g")

# tiny ridge keeps the composite strictly convex so minimizers are unique
RIDGE = 1e-10


@dataclass
class ImageCollection:
    collection_id: str
    members: list
    category: str | None = None
    title_tokens: list | None = None

    def __post_init__(self):
        dims = {m.values.shape[0] for m in self.members}
        if len(dims) > 1:
            raise SchemaMismatch(f"member feature dims differ: {sorted(dims)}")

    @property
    def size(self) -> int:
        return len(self.members)

    def matrix(self) -> np.ndarray:
        """Member features as columns, shape (d, m)."""
        if not self.members:
            raise EmptyCollection(f"collection {self.collection_id!r} has no members")
        return np.stack([m.values for m in self.members], axis=1)

    @classmethod
    def from_matrix(cls, collection_id, F, category=None, title_tokens=None):
        members = [ImageFeature(image_id=f"{collection_id}/{i}", values=F[:, i])
                   for i in range(F.shape[1])]
        return cls(collection_id, members, category=category, title_tokens=title_tokens)


@dataclass
class CollectionDescriptor:
    collection_id: str
    x: np.ndarray = field(repr=False)
    variant: str = "avg-l1"
    density: float = 0.0
    lam: float = 0.0
    tau: float | None = None


@dataclass(frozen=True)
class HuberParams:
    lam: float
    tau: float | None = None  # None: median LS residual norm, per collection

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")


def huber_value_grad(eps, tau):
    """Huber applied to the l2 norm of a residual vector.

    value = ||eps||^2 / (2 tau)  if ||eps|| <= tau,  else  ||eps|| - tau/2.
    The gradient is eps/tau in the quadratic branch, eps/||eps|| in the
    linear one; its norm never exceeds 1.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    eps = np.asarray(eps, dtype=np.float64)
    norm = float(np.linalg.norm(eps))
    if norm == 0.0:
        return 0.0, np.zeros_like(eps)
    if norm <= tau:
        return norm * norm / (2.0 * tau), eps / tau
    return norm - tau / 2.0, eps / norm


def prox_l1(v, t):
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return backend.prox_l1(np.asarray(v, dtype=np.float64), float(t))


def _validate_spans(spans, n):
    spans = [(int(s), int(e)) for s, e in spans]
    covered = sorted(spans)
    pos = 0
    for s, e in covered:
        if s != pos or e <= s:
            raise LayoutError(f"group spans {spans} do not partition [0, {n})")
        pos = e
    if pos != n:
        raise LayoutError(f"group spans {spans} do not partition [0, {n})")
    return spans


def prox_group_l21(v, t, spans):
    v = np.asarray(v, dtype=np.float64)
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    spans = _validate_spans(spans, v.shape[0])
    starts = np.array([s for s, _ in spans], dtype=np.intp)
    stops = np.array([e for _, e in spans], dtype=np.intp)
    return backend.prox_group_l21(v, float(t), starts, stops)


def _penalty_fns(omega, spans, n):
    if omega == "l1":
        return (lambda u: float(np.abs(u).sum()),
                lambda u, t: backend.prox_l1(u, t))
    spans = _validate_spans(spans, n)
    starts = np.array([s for s, _ in spans], dtype=np.intp)
    stops = np.array([e for _, e in spans], dtype=np.intp)
    return (lambda u: backend.group_l21_norm(u, starts, stops),
            lambda u, t: backend.prox_group_l21(u, t, starts, stops))


def fista_composite(smooth_value_grad, prox, penalty, lam, x0, l0=1.0,
                    tol=1e-6, max_iter=1000):
    """Accelerated proximal gradient with backtracking and monotone restart.

    smooth_value_grad(x) -> (value, grad) of the smooth part.  Returns
    (x_best, objective, iterations).
    """
    x = np.array(x0, dtype=np.float64)
    y = x.copy()
    L = float(l0)
    t_mom = 1.0

    def objective(u, sval=None):
        if sval is None:
            sval, _ = smooth_value_grad(u)
        return sval + lam * penalty(u)

    obj_x = objective(x)
    it = 0
    for it in range(1, max_iter + 1):
        sy, gy = smooth_value_grad(y)
        while True:
            z = prox(y - gy / L, lam / L)
            sz, _ = smooth_value_grad(z)
            dz = z - y
            if sz <= sy + float(gy @ dz) + 0.5 * L * float(dz @ dz) + 1e-12:
                break
            L *= 2.0
        obj_z = sz + lam * penalty(z)
        if obj_z > obj_x:
            # monotone restart from the best point, no momentum
            sx, gx = smooth_value_grad(x)
            while True:
                z = prox(x - gx / L, lam / L)
                sz, _ = smooth_value_grad(z)
                dz = z - x
                if sz <= sx + float(gx @ dz) + 0.5 * L * float(dz @ dz) + 1e-12:
                    break
                L *= 2.0
            obj_z = sz + lam * penalty(z)
            t_mom = 1.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = z + ((t_mom - 1.0) / t_next) * (z - x)
        converged = abs(obj_x - obj_z) <= tol * max(1.0, abs(obj_x))
        if obj_z <= obj_x:
            x, obj_x = z, obj_z
        t_mom = t_next
        if converged:
            break
    return x, obj_x, it


def _huber_smooth(F, D, tau):
    """(value, grad) of (1/m) sum_i huber(f_i - D x; tau) + ridge/2 ||x||^2."""
    m = F.shape[1]

    def value_grad(x):
        E = F - (D @ x)[:, None]
        norms = np.linalg.norm(E, axis=0)
        quad = norms <= tau
        vals = np.where(quad, norms * norms / (2.0 * tau),
                        norms - tau / 2.0)
        scale = np.where(quad, 1.0 / tau,
                         1.0 / np.where(norms > 0, norms, 1.0))
        scale = np.where(norms > 0, scale, 0.0)
        Gmean = (E * scale).mean(axis=1)
        value = float(vals.mean()) + 0.5 * RIDGE * float(x @ x)
        grad = -(D.T @ Gmean) + RIDGE * x
        return value, grad

    return value_grad


def _ls_per_image_smooth(F, D):
    """(value, grad) of (1/m) sum_i 0.5||f_i - D x||^2 + ridge/2 ||x||^2."""
    def value_grad(x):
        E = F - (D @ x)[:, None]
        value = 0.5 * float((E * E).sum()) / F.shape[1] + 0.5 * RIDGE * float(x @ x)
        grad = -(D.T @ E.mean(axis=1)) + RIDGE * x
        return value, grad

    return value_grad


def huber_objective(F, D, x, tau, lam, omega="l1", spans=None):
    penalty, _ = _penalty_fns(omega, spans, x.shape[0])
    value, _ = _huber_smooth(F, D, tau)(x)
    return value + lam * penalty(x)


def code_averaged(f_bar, D, lam, omega="l1", spans=None, tol=1e-6, max_iter=1000,
                  x0=None):
    """Minimize 0.5||f_bar - D x||^2 + ridge/2||x||^2 + lam*Omega(x)."""
    f_bar = np.asarray(f_bar, dtype=np.float64)
    G = D.T @ D + RIDGE * np.eye(D.shape[1])
    c = D.T @ f_bar
    L = max(float(np.linalg.eigvalsh(G)[-1]), 1e-12)
    if omega == "l1":
        starts = stops = None
    else:
        spans = _validate_spans(spans, D.shape[1])
        starts = np.array([s for s, _ in spans], dtype=np.intp)
        stops = np.array([e for _, e in spans], dtype=np.intp)
    x, _, _ = backend.fista_quadratic(G, c, lam, L, x0=x0, tol=tol,
                                      max_iter=max_iter,
                                      const=0.5 * float(f_bar @ f_bar),
                                      starts=starts, stops=stops)
    return x


def code_ls_joint(F, D, lam, omega="l1", spans=None, tol=1e-6, max_iter=1000):
    """Per-image least-squares loss over all members (no averaging shortcut)."""
    F = np.asarray(F, dtype=np.float64)
    n = D.shape[1]
    penalty, prox = _penalty_fns(omega, spans, n)
    l0 = max(float(np.linalg.eigvalsh(D.T @ D)[-1]), 1e-12) + RIDGE
    x, _, _ = fista_composite(_ls_per_image_smooth(F, D), prox, penalty, lam,
                              np.zeros(n), l0=l0, tol=tol, max_iter=max_iter)
    return x


def code_huber(F, D, lam, tau, omega="l1", spans=None, tol=1e-6, max_iter=1000):
    F = np.asarray(F, dtype=np.float64)
    n = D.shape[1]
    penalty, prox = _penalty_fns(omega, spans, n)
    # in the quadratic branch the smooth part scales the LS loss by 1/tau
    l0 = (max(float(np.linalg.eigvalsh(D.T @ D)[-1]), 1e-12)) / tau + RIDGE
    x, _, _ = fista_composite(_huber_smooth(F, D, tau), prox, penalty, lam,
                              np.zeros(n), l0=l0, tol=tol, max_iter=max_iter)
    return x


def default_tau(F, D, lam, omega="l1", spans=None) -> float:
    """Median member residual norm at a cheap least-squares warm start."""
    f_bar = F.mean(axis=1)
    x_ls = code_averaged(f_bar, D, lam, omega=omega, spans=spans,
                         tol=1e-6, max_iter=500)
    resid = np.linalg.norm(F - (D @ x_ls)[:, None], axis=0)
    return max(float(np.median(resid)), 1e-6)


def _density(x) -> float:
    return float(np.count_nonzero(x)) / x.shape[0]


def encode_collection(collection: ImageCollection, dictionary: BlockDictionary,
                      params: HuberParams, variant: str, tol=1e-6,
                      max_iter=1000) -> CollectionDescriptor:
    """Descriptor for one collection under the chosen variant."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if collection.size == 0:
        raise EmptyCollection(f"collection {collection.collection_id!r} is empty")
    F = collection.matrix()
    if F.shape[0] != dictionary.total_dim:
        raise SchemaMismatch(f"features have dim {F.shape[0]}, dictionary expects "
                             f"{dictionary.total_dim}")
    if not np.all(np.isfinite(F)):
        raise NumericError("non-finite feature values")

    if variant == "raw-avg":
        x = F.mean(axis=1)
        return CollectionDescriptor(collection.collection_id, x, variant,
                                    _density(x), params.lam, None)

    D = dictionary.materialize()
    spans = dictionary.group_spans()
    omega = "group" if variant in ("huber-g", "avg-g") else "l1"
    tau = None
    if variant in ("avg-l1", "avg-g"):
        x = code_averaged(F.mean(axis=1), D, params.lam, omega=omega, spans=spans,
                          tol=tol, max_iter=max_iter)
    else:
        tau = params.tau if params.tau is not None else default_tau(
            F, D, params.lam, omega=omega, spans=spans)
        x = code_huber(F, D, params.lam, tau, omega=omega, spans=spans,
                       tol=tol, max_iter=max_iter)
    return CollectionDescriptor(collection.collection_id, x, variant,
                                _density(x), params.lam, tau)


def tune_lambda_for_density(collection, dictionary, variant, target_density=0.10,
                            window=0.05, max_probes=30, tau=None, tol=1e-6,
                            max_iter=1000):
    """Bisection over log-lambda until descriptor density lands in
    target +/- window.  Returns (lam, achieved density); warns with
    TuningWarning when the window is unreachable within the probe budget."""
    if not 0.0 < target_density < 1.0:
        raise ValueError("target density must be in (0, 1)")
    if variant == "raw-avg":
        raise ValueError("raw-avg has no sparsity to tune")

    F = collection.matrix()
    D = dictionary.materialize()
    f_bar = F.mean(axis=1)
    spans = dictionary.group_spans()
    if variant in ("huber-g", "avg-g"):
        norms = [float(np.linalg.norm((D.T @ f_bar)[s:e])) for s, e in spans]
        lam_null = max(norms)
    else:
        lam_null = float(np.abs(D.T @ f_bar).max())
    lam_null = max(lam_null, 1e-12)

    def probe(lam):
        desc = encode_collection(
            collection, dictionary, HuberParams(lam=lam, tau=tau), variant,
            tol=tol, max_iter=max_iter)
        return desc.density

    lo, hi = lam_null * 1e-4, lam_null * 1.001  # lo: dense, hi: all-zero
    # group penalties quantize density to multiples of 1/U, so the window
    # can be unreachable; track the closest nonzero probe as the fallback
    # (an all-zero descriptor carries no ranking signal)
    best = (None, float("inf"))
    for _ in range(max_probes):
        lam = math.sqrt(lo * hi)
        density = probe(lam)
        if density > 0.0 and (best[0] is None or
                              abs(density - target_density)
                              < abs(best[1] - target_density)):
            best = (lam, density)
        if abs(density - target_density) <= window and density > 0.0:
            return lam, density
        if density > target_density:
            lo = lam
        else:
            hi = lam
    if best[0] is None:
        best = (lo, probe(lo))
    warnings.warn(
        f"density tuning stopped at {best[1]:.3f} (target {target_density} "
        f"+/- {window})", TuningWarning)
    return best
