"""k-sparse least-squares encoding with Orthogonal Matching Pursuit.

The solver runs many signals at once. Every per-signal quantity is computed
with row-wise ``einsum`` contractions and batched small solves, so a signal's
code does not depend on which batch it was encoded in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# correlations below this are treated as "nothing left to explain"
CORRELATION_FLOOR = 1e-12
# a new atom whose component orthogonal to the current support has squared
# norm below RANK_TOL * ||d||^2 makes the support rank deficient
RANK_TOL = 1e-10


class EncodingError(ValueError):
    def __init__(self, message: str, index: Optional[int] = None):
        if index is not None:
            message = f"instance {index}: {message}"
        super().__init__(message)
        self.index = index


class Dictionary:
    """An ``(n, m)`` matrix whose columns are the atoms."""

    def __init__(self, atoms):
        atoms = np.array(atoms, dtype=float)
        if atoms.ndim != 2:
            raise ValueError("dictionary atoms must form a 2-D array")
        self.atoms = atoms

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def m(self) -> int:
        return self.atoms.shape[1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.atoms, axis=0)

    def check(self, tol: float = 1e-12) -> None:
        norms = self.norms()
        if np.any(norms > 1 + tol):
            raise ValueError(f"atom norm {norms.max()} exceeds 1")
        if np.any(norms == 0):
            raise ValueError("dictionary holds a zero atom")

    def copy(self) -> "Dictionary":
        return Dictionary(self.atoms.copy())

    def __repr__(self):
        return f"Dictionary(n={self.n}, m={self.m})"


@dataclass(frozen=True, eq=False)
class SparseCode:
    indices: np.ndarray
    values: np.ndarray
    m: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.m):
            raise ValueError("indices must be strictly increasing and within range")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.m)
        out[self.indices] = self.values
        return out

    @classmethod
    def from_dense(cls, alpha) -> "SparseCode":
        alpha = np.asarray(alpha, dtype=float)
        idx = np.flatnonzero(alpha)
        return cls(idx, alpha[idx], alpha.shape[0])

    def __eq__(self, other):
        if not isinstance(other, SparseCode):
            return NotImplemented
        return (self.m == other.m and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class OmpConfig:
    k: int = 10
    tol: float = 0.01

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")

    def validate_for(self, D: Dictionary) -> None:
        if self.k > min(D.n, D.m):
            raise ValueError(f"k={self.k} exceeds min(n, m)={min(D.n, D.m)}")


@dataclass
class OmpResult:
    """Dense codes plus the greedy path of each signal.

    ``order[i, t]`` is the atom picked at step t (-1 when the signal had
    stopped); ``residuals[i, t]`` is the squared residual before step t.
    """

    codes: np.ndarray
    order: np.ndarray
    residuals: np.ndarray


def _atoms(D) -> np.ndarray:
    return D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)


def omp(X, D, k: int, tol: float = 0.0) -> OmpResult:
    """Encode each row of ``X`` (shape (N, n)) against dictionary ``D``.

    Per step: stop if the squared residual is <= tol, or the support holds
    k atoms, or no unused atom correlates with the residual above 1e-12;
    otherwise add the atom with the largest |<d_j, r>| (lowest index on
    ties) and refit all coefficients by least squares on the support.
    """
    atoms = _atoms(D)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    if atoms.shape[0] != n:
        raise EncodingError(f"signal length {n} does not match dictionary rows {atoms.shape[0]}")
    m = atoms.shape[1]
    k = min(k, n, m)

    gram = atoms.T @ atoms
    diag = np.diag(gram)
    atoms_t = np.ascontiguousarray(atoms.T)
    dtx = np.einsum("in,nm->im", X, atoms)

    codes = np.zeros((N, m))
    order = np.full((N, k), -1, dtype=np.int64)
    residuals = np.full((N, k + 1), np.nan)
    support = np.zeros((N, k), dtype=np.int64)
    used = np.zeros((N, m), dtype=bool)
    R = X.copy()
    active = np.arange(N)

    for t in range(k + 1):
        if active.size == 0:
            break
        r2 = np.einsum("in,in->i", R[active], R[active])
        residuals[active, t] = r2
        keep = r2 > tol
        if t == k:
            keep[:] = False
        corr = np.abs(np.einsum("in,nm->im", R[active], atoms))
        corr[used[active]] = -1.0
        pick = np.argmax(corr, axis=1)
        best = corr[np.arange(active.size), pick]
        keep &= best >= CORRELATION_FLOOR

        if t > 0:
            # rank check: orthogonal remainder of the candidate w.r.t. the support
            sup = support[active, :t]
            G_ss = gram[sup[:, :, None], sup[:, None, :]]
            g = gram[sup, pick[:, None]]
            w = np.linalg.solve(G_ss, g[..., None])[..., 0]
            remainder = diag[pick] - np.einsum("it,it->i", g, w)
            keep &= remainder > RANK_TOL * diag[pick]

        active, pick = active[keep], pick[keep]
        if active.size == 0:
            break
        support[active, t] = pick
        order[active, t] = pick
        used[active, pick] = True
        sup = support[active, : t + 1]
        G_ss = gram[sup[:, :, None], sup[:, None, :]]
        rhs = dtx[active[:, None], sup]
        sol = np.linalg.solve(G_ss, rhs[..., None])[..., 0]
        R[active] = X[active] - np.einsum("itn,it->in", atoms_t[sup], sol)
        codes[active[:, None], sup] = sol

    return OmpResult(codes, order, residuals)


def _check_finite(X, offset: int = 0):
    bad = ~np.all(np.isfinite(X), axis=1)
    if bad.any():
        raise EncodingError("non-finite signal value", offset + int(np.flatnonzero(bad)[0]))


def omp_encode(x, D, cfg: OmpConfig) -> SparseCode:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise EncodingError("expected a single 1-D signal")
    if not np.all(np.isfinite(x)):
        raise EncodingError("non-finite signal value")
    res = omp(x[None, :], D, cfg.k, cfg.tol)
    return SparseCode.from_dense(res.codes[0])


def encode_matrix(X, D, cfg: OmpConfig, chunk: int = 4096) -> np.ndarray:
    """Dense ``(N, m)`` code matrix for the rows of ``X``, processed in chunks."""
    X = np.asarray(X, dtype=float)
    m = _atoms(D).shape[1]
    if X.shape[0] == 0:
        return np.zeros((0, m))
    out = np.empty((X.shape[0], m))
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk]
        _check_finite(block, start)
        out[start:start + chunk] = omp(block, D, cfg.k, cfg.tol).codes
    return out


def batch_encode(X: Sequence, D, cfg: OmpConfig) -> list[SparseCode]:
    if len(X) == 0:
        return []
    X = np.vstack([np.asarray(x, dtype=float) for x in X])
    return [SparseCode.from_dense(row) for row in encode_matrix(X, D, cfg)]


def reconstruction_error(x, D, code) -> float:
    """Squared residual ||x - D alpha||^2 (twice the per-signal objective)."""
    atoms = _atoms(D)
    x = np.asarray(x, dtype=float)
    if isinstance(code, SparseCode):
        approx = atoms[:, code.indices] @ code.values
    else:
        approx = atoms @ np.asarray(code, dtype=float)
    r = x - approx
    return float(r @ r)
