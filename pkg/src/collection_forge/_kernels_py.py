"""Pure-numpy fallback for the hot kernels.

Mirrors the compiled extension in `_kernels.pyx`; `backend` picks one
at import time.  Both implement the same algorithms so results agree
to floating-point noise.
"""

from __future__ import annotations

import math

import numpy as np

IMPLEMENTATION = "python"


def prox_l1(v: np.ndarray, t: float) -> np.ndarray:
    """Soft threshold: exact prox of t*||.||_1."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox_group_l21(v: np.ndarray, t: float, starts, stops) -> np.ndarray:
    """Blockwise shrinkage: group g is zeroed if ||v_g|| <= t, else scaled."""
    v = np.asarray(v, dtype=np.float64)
    out = v.copy()
    for s, e in zip(starts, stops):
        norm = math.sqrt(float(np.dot(v[s:e], v[s:e])))
        if norm <= t:
            out[s:e] = 0.0
        else:
            out[s:e] *= 1.0 - t / norm
    return out


def group_l21_norm(v: np.ndarray, starts, stops) -> float:
    v = np.asarray(v, dtype=np.float64)
    return float(sum(math.sqrt(float(np.dot(v[s:e], v[s:e])))
                     for s, e in zip(starts, stops)))


def fista_quadratic(G, c, lam, lipschitz, x0=None, tol=1e-8, max_iter=2000,
                    const=0.0, starts=None, stops=None):
    """Monotone FISTA for  min_x  0.5 x'Gx - c'x + const + lam*pen(x).

    pen is ||.||_1 when `starts` is None, else the l2,1 norm over the
    given group spans.  `lipschitz` must upper-bound lambda_max(G).
    Returns (x, objective, iterations).
    """
    G = np.asarray(G, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    n = c.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    L = float(lipschitz)
    step = 1.0 / L

    if starts is None:
        def pen(u):
            return float(np.abs(u).sum())

        def prox(u, t):
            return prox_l1(u, t)
    else:
        def pen(u):
            return group_l21_norm(u, starts, stops)

        def prox(u, t):
            return prox_group_l21(u, t, starts, stops)

    def objective(u):
        return 0.5 * float(u @ (G @ u)) - float(c @ u) + const + lam * pen(u)

    obj_x = objective(x)
    y = x.copy()
    t_mom = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = G @ y - c
        z = prox(y - step * grad, lam * step)
        obj_z = objective(z)
        if obj_z > obj_x:
            # monotone restart: drop momentum, step from the best point
            grad = G @ x - c
            z = prox(x - step * grad, lam * step)
            obj_z = objective(z)
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
