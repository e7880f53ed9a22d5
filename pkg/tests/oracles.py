"""Independent reference implementations used to cross-check the library.

Everything in here is deliberately written with different algorithms
than the package (coordinate descent instead of FISTA, grid search
instead of closed forms, subgradient descent instead of proximal
methods) so agreement between the two is meaningful.
"""

import numpy as np


def lasso_coordinate_descent(D, f, lam, max_sweeps=20000, tol=1e-14):
    """Cyclic coordinate descent for 0.5||f - D a||^2 + lam ||a||_1."""
    D = np.asarray(D, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    n = D.shape[1]
    col_sq = (D * D).sum(axis=0)
    a = np.zeros(n)
    r = f.copy()
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(n):
            if col_sq[j] == 0.0:
                continue
            old = a[j]
            rho = D[:, j] @ r + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
            if new != old:
                r += D[:, j] * (old - new)
                delta = max(delta, abs(new - old))
            a[j] = new
        if delta <= tol:
            break
    return a


def lasso_objective(D, f, a, lam):
    r = f - D @ a
    return 0.5 * float(r @ r) + lam * float(np.abs(a).sum())


def prox_l1_grid(v, t, points=200001):
    """Per-coordinate grid minimization of 0.5(u - v)^2 + t|u|."""
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    for i, vi in enumerate(v):
        lo, hi = (min(0.0, vi), max(0.0, vi))
        grid = np.linspace(lo, hi, points)
        obj = 0.5 * (grid - vi) ** 2 + t * np.abs(grid)
        out[i] = grid[int(np.argmin(obj))]
    return out


def prox_group_grid(v, t, spans, points=200001):
    """Per-group radial grid minimization of 0.5||u - v||^2 + t||u||.

    The minimizer is colinear with v, so a 1-D search over the radius
    along v/||v|| is exhaustive.
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    for s, e in spans:
        g = v[s:e]
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            continue
        radii = np.linspace(0.0, norm, points)
        obj = 0.5 * (radii - norm) ** 2 + t * radii
        out[s:e] = g * (radii[int(np.argmin(obj))] / norm)
    return out


def huber_objective(F, D, x, tau, lam):
    E = F - (D @ x)[:, None]
    norms = np.linalg.norm(E, axis=0)
    vals = np.where(norms <= tau, norms * norms / (2.0 * tau), norms - tau / 2.0)
    return float(vals.mean()) + lam * float(np.abs(x).sum())


def huber_l1_subgradient(F, D, lam, tau, n_steps=100_000, stages=20):
    """Subgradient descent with stagewise step halving; returns the best
    objective seen.  The constant-step neighbourhood shrinks geometrically
    with the step, so 10^5 steps reach well below 1e-6 on small problems."""
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[1]
    x = np.zeros(n)
    best = huber_objective(F, D, x, tau, lam)
    L = float(np.linalg.eigvalsh(D.T @ D)[-1]) / tau
    step0 = 1.0 / max(L, 1e-12)
    per = n_steps // stages
    for s in range(stages):
        step = step0 * 0.5 ** s
        for _ in range(per):
            E = F - (D @ x)[:, None]
            norms = np.linalg.norm(E, axis=0)
            scale = np.where(norms <= tau, 1.0 / tau,
                             1.0 / np.where(norms > 0, norms, 1.0))
            g_smooth = -(D.T @ ((E * scale).mean(axis=1)))
            g = g_smooth + lam * np.sign(x)
            zero = x == 0.0
            # minimal-norm subgradient on the zero coordinates
            g[zero] = g_smooth[zero] - np.clip(g_smooth[zero], -lam, lam)
            x = x - step * g
            obj = huber_objective(F, D, x, tau, lam)
            if obj < best:
                best = obj
    return best


def diag_metric_grid_2d(ds, dd, resolution=2001):
    """Grid search over feasible diagonal 2-D metrics maximizing g."""
    w_s = (ds * ds).sum(axis=0)
    dd_sq = dd * dd
    best_g, best_a = -1.0, None
    scale = 1.0 / max(w_s.max(), 1e-12)
    grid = np.linspace(0.0, 10.0 * scale, resolution)
    for a1 in grid:
        # the constraint a . w_s <= 1 caps a2 given a1
        rem = 1.0 - a1 * w_s[0]
        if rem < 0:
            continue
        a2 = rem / w_s[1] if w_s[1] > 0 else grid[-1]
        a = np.array([a1, a2])
        g = float(np.sqrt(np.maximum(dd_sq @ a, 0.0)).sum())
        if g > best_g:
            best_g, best_a = g, a
    return best_a, best_g


def diag_metric_slsqp(ds, dd):
    """Constrained maximizer for the diagonal metric objective via SciPy.

    A 50-per-axis dense grid is infeasible beyond a few dimensions, so
    higher-dimensional instances are checked against SLSQP instead.
    """
    from scipy.optimize import minimize

    w_s = (ds * ds).sum(axis=0)
    dd_sq = dd * dd
    dim = ds.shape[1]

    def neg_g(a):
        return -float(np.sqrt(np.maximum(dd_sq @ a, 0.0)).sum())

    cons = ({"type": "ineq", "fun": lambda a: 1.0 - float(a @ w_s)},)
    bounds = [(0.0, None)] * dim
    best_a, best_g = None, -np.inf
    for s in range(5):
        rng = np.random.default_rng(s)
        a0 = rng.uniform(0.1, 1.0, size=dim)
        a0 /= 2.0 * max(float(a0 @ w_s), 1e-12)
        res = minimize(neg_g, a0, bounds=bounds, constraints=cons,
                       method="SLSQP", options={"maxiter": 1000, "ftol": 1e-12})
        a = np.maximum(res.x, 0.0)
        # keep the best iterate that actually satisfies the constraint
        if float(a @ w_s) <= 1.0 + 1e-9 and -float(res.fun) > best_g:
            best_a, best_g = a, -float(res.fun)
    assert best_a is not None
    return best_a, best_g


def expected_random_ap_at_k(n_candidates, n_relevant, k):
    """Closed-form E[AP@K] for a uniformly random ranking.

    E[rel(i)] = R/N and, conditioned on rel(i) = 1, the expected number
    of relevant items among the first i-1 is (i-1)(R-1)/(N-1); summing
    E[P(i) rel(i)]/K over i gives the expectation exactly.
    """
    n, r = n_candidates, n_relevant
    total = 0.0
    for i in range(1, k + 1):
        total += (r / n) * (1.0 + (i - 1) * (r - 1) / (n - 1)) / i
    return total / k


def ap_at_k_reference(rel, k):
    """Direct AP@K re-implementation (precision-weighted relevance / K)."""
    rel = list(rel)[:k] + [0] * max(0, k - len(rel))
    total = 0.0
    for i in range(1, k + 1):
        if rel[i - 1]:
            total += sum(rel[:i]) / i
    return total / k


def knn_accuracy(X, labels, k=3):
    """Leave-one-out kNN accuracy with majority vote (ties by label order)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    correct = 0
    for i in range(n):
        votes = {}
        for j in np.argsort(d2[i])[:k]:
            votes[labels[j]] = votes.get(labels[j], 0) + 1
        pred = max(sorted(votes), key=lambda c: votes[c])
        correct += pred == labels[i]
    return correct / n
