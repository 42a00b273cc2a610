"""Low-rank recovery of a partially revealed matrix by singular value thresholding.

The iteration alternates a soft-threshold of the dual iterate's singular
values with a gradient step on the revealed-entry residual, and returns the
singular factors of the final thresholded iterate directly, so the caller
never needs the completed matrix itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["RevealedEntries", "SvtParams", "SvtResult", "svt_complete", "reveal_uniform"]


@dataclass(frozen=True)
class RevealedEntries:
    """Index set and values of the observed entries of a d x k matrix."""

    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        cols = np.asarray(self.cols, dtype=np.intp)
        vals = np.asarray(self.values, dtype=float)
        d, k = self.shape
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, values must be equal-length 1-d arrays")
        if rows.size and (rows.min() < 0 or rows.max() >= d or cols.min() < 0 or cols.max() >= k):
            raise ValueError("revealed index out of range")
        flat = rows * k + cols
        if np.unique(flat).size != flat.size:
            raise ValueError("duplicate (row, col) pairs in revealed set")
        if rows.size == 0 or np.unique(rows).size < d or np.unique(cols).size < k:
            warnings.warn(
                "some rows or columns have no revealed entry; recovery may be poor",
                RuntimeWarning,
            )
        object.__setattr__(self, "shape", (int(d), int(k)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    @property
    def count(self) -> int:
        return self.rows.size

    @classmethod
    def from_triples(cls, shape, triples) -> "RevealedEntries":
        rows, cols, vals = zip(*triples) if triples else ((), (), ())
        return cls(tuple(shape), np.array(rows), np.array(cols), np.array(vals))


@dataclass(frozen=True)
class SvtParams:
    tau: float = 100.0
    delta: float = 1.0
    tol: float = 1e-4
    eps: float = 1e-6
    max_iter: int = 1000

    def __post_init__(self):
        if self.tau <= 0 or self.delta <= 0 or self.tol <= 0:
            raise ValueError("tau, delta, tol must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass(frozen=True)
class SvtResult:
    left_vectors: np.ndarray  # (d, r)
    singular_values: np.ndarray  # (r,), positive descending
    right_vectors: np.ndarray  # (k, r)
    iterations: int
    residual: float  # relative residual on the revealed set
    converged: bool

    @property
    def rank(self) -> int:
        return self.singular_values.size


def reveal_uniform(
    J: np.ndarray, gamma: float, rng: np.random.Generator
) -> RevealedEntries:
    """Bernoulli(gamma) mask over the entries of J; gamma = 1 reveals everything."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    J = np.asarray(J, dtype=float)
    mask = rng.random(J.shape) < gamma
    rows, cols = np.nonzero(mask)
    return RevealedEntries(J.shape, rows, cols, J[rows, cols])


def _shrink(Y: np.ndarray, tau: float):
    """SVD soft-threshold: singular values at or below tau are dropped entirely."""
    U, S, Vt = np.linalg.svd(Y, full_matrices=False)
    keep = S > tau
    return U[:, keep], S[keep] - tau, Vt[keep]


def svt_complete(observed: RevealedEntries, params: SvtParams | None = None) -> SvtResult:
    """Recover singular factors of a low-rank matrix from its revealed entries.

    Stops when the relative Frobenius residual on the revealed set drops to
    params.tol, or when the absolute residual reaches params.eps (the noise
    level of the revealed values), whichever comes first. If the iteration
    budget runs out the best iterate seen is returned with converged=False.
    """
    if params is None:
        params = SvtParams()
    if observed.count < 1:
        raise ValueError("need at least one revealed entry")
    d, k = observed.shape
    rows, cols, vals = observed.rows, observed.cols, observed.values

    norm_obs = float(np.linalg.norm(vals))
    if norm_obs == 0.0:
        return SvtResult(
            np.empty((d, 0)), np.empty(0), np.empty((k, 0)), 0, 0.0, True
        )

    M0 = np.zeros((d, k))
    M0[rows, cols] = vals
    # kick-start: scale the initial dual iterate so thresholding bites immediately
    k0 = float(np.ceil(params.tau / (params.delta * np.linalg.norm(M0, 2))))
    Y = (k0 * params.delta) * M0

    best = None
    best_rel = np.inf
    converged = False
    iterations = 0
    for it in range(1, params.max_iter + 1):
        iterations = it
        U, S, Vt = _shrink(Y, params.tau)
        X_obs = np.einsum("ij,j,ji->i", U[rows], S, Vt[:, cols]) if S.size else np.zeros(rows.size)
        resid = X_obs - vals
        abs_res = float(np.linalg.norm(resid))
        rel = abs_res / norm_obs
        if rel < best_rel:
            best_rel = rel
            best = (U, S, Vt)
        if rel <= params.tol or abs_res <= params.eps:
            converged = True
            break
        Y[rows, cols] -= params.delta * resid

    U, S, Vt = best
    # report the residual recomputed from the returned factors, not a stale loop value
    X_obs = np.einsum("ij,j,ji->i", U[rows], S, Vt[:, cols]) if S.size else np.zeros(rows.size)
    final_rel = float(np.linalg.norm(X_obs - vals)) / norm_obs
    if not converged:
        warnings.warn(
            f"singular value thresholding stopped at max_iter={params.max_iter} "
            f"with relative residual {final_rel:.3e}",
            RuntimeWarning,
        )
    return SvtResult(U, S, Vt.T, iterations, final_rel, converged)
