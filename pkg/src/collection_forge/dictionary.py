"""Per-unit dictionary learning and block-diagonal assembly.

Each feature unit gets its own sub-dictionary, learned by alternating
l1 sparse coding and blockwise atom updates with unit-ball projection.
The sub-dictionaries are then stacked into a block-diagonal dictionary
whose coefficient blocks line up with the feature units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import InsufficientData, NumericError, SchemaMismatch
from .features import FeatureSchema

ATOM_NORM_SLACK = 1e-9
DEFAULT_ATOMS_PER_UNIT = 200


@dataclass
class SubDictionary:
    unit_name: str
    atoms: np.ndarray = field(repr=False)  # (d_k, n_atoms), columns are atoms

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 2:
            raise SchemaMismatch("atoms must be a d_k x K matrix")
        norms = np.linalg.norm(self.atoms, axis=0)
        if np.any(norms > 1.0 + ATOM_NORM_SLACK):
            raise SchemaMismatch(f"atom norms exceed the unit ball: max {norms.max()}")

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]


@dataclass
class BlockDictionary:
    subs: list
    schema: FeatureSchema

    def __post_init__(self):
        if len(self.subs) != self.schema.unit_count:
            raise SchemaMismatch("one sub-dictionary per schema unit required")
        ks = {s.n_atoms for s in self.subs}
        if len(ks) != 1:
            raise SchemaMismatch(f"unequal atom counts across units: {sorted(ks)}")
        for sub, (name, dim) in zip(self.subs, self.schema.units):
            if sub.unit_name != name:
                raise SchemaMismatch(f"sub-dictionary order {sub.unit_name!r} != "
                                     f"schema unit {name!r}")
            if sub.dim != dim:
                raise SchemaMismatch(f"unit {name!r}: atoms have dim {sub.dim}, "
                                     f"schema says {dim}")

    @property
    def atoms_per_unit(self) -> int:
        return self.subs[0].n_atoms

    @property
    def total_atoms(self) -> int:
        return self.atoms_per_unit * len(self.subs)

    @property
    def total_dim(self) -> int:
        return self.schema.total_dim

    def group_spans(self) -> list:
        return self.schema.group_spans(self.atoms_per_unit)

    def materialize(self) -> np.ndarray:
        """Dense (d, U*K) matrix; off-block entries are exactly zero."""
        D = np.zeros((self.total_dim, self.total_atoms))
        K = self.atoms_per_unit
        for k, (sub, (start, stop)) in enumerate(zip(self.subs, self.schema.spans())):
            D[start:stop, k * K : (k + 1) * K] = sub.atoms
        return D


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite values in input")


def lasso_objective(f, D, alpha, lam) -> float:
    r = f - D @ alpha
    return 0.5 * float(r @ r) + lam * float(np.abs(alpha).sum())


def sparse_code_lasso(f, D, lam, x0=None, tol=1e-8, max_iter=2000) -> np.ndarray:
    """Minimize 0.5*||f - D a||^2 + lam*||a||_1 by monotone FISTA."""
    f = np.asarray(f, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if lam <= 0:
        raise ValueError("lam must be positive")
    _check_finite(f, D)
    G = D.T @ D
    c = D.T @ f
    L = max(float(np.linalg.eigvalsh(G)[-1]), 1e-12)
    x, _, _ = backend.fista_quadratic(G, c, lam, L, x0=x0, tol=tol,
                                      max_iter=max_iter, const=0.5 * float(f @ f))
    return x


def dictionary_objective(F, atoms, codes, lam) -> float:
    """Batch objective: (1/n) sum_i [ 0.5*||f_i - D a_i||^2 + lam*||a_i||_1 ]."""
    R = F - atoms @ codes
    n = F.shape[1]
    return float(0.5 * (R * R).sum() + lam * np.abs(codes).sum()) / n


def _init_atoms(F, n_atoms, rng) -> np.ndarray:
    n = F.shape[1]
    idx = rng.choice(n, size=n_atoms, replace=False)
    atoms = F[:, idx].copy()
    norms = np.linalg.norm(atoms, axis=0)
    for j in range(n_atoms):
        if norms[j] > 0:
            atoms[:, j] /= norms[j]
        else:
            atoms[:, j] = 0.0
            atoms[j % atoms.shape[0], j] = 1.0
    return atoms


def learn_unit_dictionary(F, n_atoms=DEFAULT_ATOMS_PER_UNIT, lam=0.15, epochs=10,
                          seed=0, batch_size=None, unit_name="unit"):
    """Alternating minimization for one feature unit.

    F is (d_k, n) with samples as columns.  Per epoch: a full sparse
    coding pass (warm-started, so the batch objective cannot increase),
    then one blockwise update per atom with projection onto the unit
    ball.  Dead atoms are reseeded to the worst-reconstructed sample.
    Returns (SubDictionary, per-epoch objective trace).
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("F must be (d_k, n)")
    d, n = F.shape
    if n < n_atoms:
        raise InsufficientData(f"need at least {n_atoms} samples, got {n}")
    if lam <= 0:
        raise ValueError("lam must be positive")
    _check_finite(F)
    rng = np.random.default_rng(seed)
    atoms = _init_atoms(F, n_atoms, rng)
    codes = np.zeros((n_atoms, n))
    trace = []

    if batch_size is None:
        order_batches = [np.arange(n)]
    else:
        order_batches = None  # re-drawn per epoch below

    for _ in range(epochs):
        if batch_size is None:
            batches = order_batches
        else:
            perm = rng.permutation(n)
            batches = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
        for batch in batches:
            G = atoms.T @ atoms
            L = max(float(np.linalg.eigvalsh(G)[-1]), 1e-12)
            for i in batch:
                c = atoms.T @ F[:, i]
                codes[:, i], _, _ = backend.fista_quadratic(
                    G, c, lam, L, x0=codes[:, i], tol=1e-10, max_iter=2000,
                    const=0.5 * float(F[:, i] @ F[:, i]))
            sub = batch if batch_size is not None else slice(None)
            A = codes[:, sub] @ codes[:, sub].T
            B = F[:, sub] @ codes[:, sub].T
            atoms = _update_atoms(atoms, A, B, F, codes, rng)
        trace.append(dictionary_objective(F, atoms, codes, lam))
    return SubDictionary(unit_name=unit_name, atoms=atoms), trace


def _update_atoms(atoms, A, B, F, codes, rng) -> np.ndarray:
    atoms = atoms.copy()
    for j in range(atoms.shape[1]):
        if A[j, j] <= 1e-12:
            # dead atom: reseed with the currently worst-reconstructed sample
            resid = F - atoms @ codes
            worst = int(np.argmax((resid * resid).sum(axis=0)))
            u = F[:, worst].copy()
            norm = np.linalg.norm(u)
            atoms[:, j] = u / norm if norm > 0 else 0.0
            continue
        u = atoms[:, j] + (B[:, j] - atoms @ A[:, j]) / A[j, j]
        norm = np.linalg.norm(u)
        if norm > 1.0:
            u /= norm
        atoms[:, j] = u
    return atoms


def assemble_block_diagonal(subs, schema: FeatureSchema) -> BlockDictionary:
    """Stack per-unit sub-dictionaries; validation happens in BlockDictionary."""
    return BlockDictionary(subs=list(subs), schema=schema)
