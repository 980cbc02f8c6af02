"""Dictionary learning by alternating OMP coding and block-coordinate atom updates.

Codes for the whole unlabeled batch are recomputed every outer iteration and
summarized in ``A = sum(alpha alpha^T)`` and ``B = sum(x alpha^T)``. Each atom is
then moved to its coordinate minimizer and projected back onto the unit ball.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingestion import Instance, as_matrix
from .sparse_coding import Dictionary, OmpConfig, SparseCode, encode_matrix

logger = logging.getLogger(__name__)

# atoms whose usage A_jj falls below this are not updated
UNUSED_ATOM_TOL = 1e-10
# consecutive unused outer iterations before an atom is re-seeded
DEAD_ATOM_PATIENCE = 5


@dataclass(frozen=True)
class DictLearnConfig:
    m: int = 130
    k: int = 10
    tol: float = 0.01
    max_iter: int = 200
    bcd_sweeps: int = 1
    convergence_eps: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        for name in ("m", "k", "max_iter", "bcd_sweeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.tol < 0 or self.convergence_eps < 0:
            raise ValueError("tol and convergence_eps must be nonnegative")

    @property
    def omp(self) -> OmpConfig:
        return OmpConfig(self.k, self.tol)


@dataclass
class LearnerState:
    D: Dictionary
    A: np.ndarray
    B: np.ndarray
    iteration: int = 0
    unused_streak: np.ndarray = field(default=None)

    def __post_init__(self):
        m = self.D.m
        if self.A.shape != (m, m) or self.B.shape != (self.D.n, m):
            raise ValueError("accumulator shapes do not match the dictionary")
        if self.unused_streak is None:
            self.unused_streak = np.zeros(m, dtype=np.int64)


def _signals(U) -> np.ndarray:
    if isinstance(U, np.ndarray):
        return np.asarray(U, dtype=float)
    if len(U) and isinstance(U[0], Instance):
        return as_matrix(U)
    return np.asarray(U, dtype=float)


def _codes_matrix(codes, m=None) -> np.ndarray:
    if isinstance(codes, np.ndarray):
        return codes
    codes = list(codes)
    if not codes:
        return np.zeros((0, m or 0))
    return np.vstack([c.to_dense() if isinstance(c, SparseCode) else np.asarray(c, float)
                      for c in codes])


def init_dictionary(U, cfg: DictLearnConfig) -> Dictionary:
    """Pick ``cfg.m`` distinct nonzero signals at random and scale them to unit norm."""
    X = _signals(U)
    if X.shape[0] < cfg.m:
        raise ValueError(f"need at least m={cfg.m} signals, got {X.shape[0]}")
    rng = np.random.default_rng(cfg.seed)
    chosen = []
    seen = set()
    for i in rng.permutation(X.shape[0]):
        norm = np.linalg.norm(X[i])
        if norm == 0:
            continue
        atom = X[i] / norm
        key = atom.tobytes()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(atom)
        if len(chosen) == cfg.m:
            break
    if len(chosen) < cfg.m:
        raise ValueError(f"only {len(chosen)} distinct nonzero signals; {cfg.m} atoms requested")
    return Dictionary(np.column_stack(chosen))


def accumulate_stats(codes, signals):
    """Return ``(A, B)`` with ``A = sum_i a_i a_i^T`` and ``B = sum_i x_i a_i^T``."""
    X = _signals(signals)
    C = _codes_matrix(codes)
    if C.shape[0] != X.shape[0]:
        raise ValueError(f"{C.shape[0]} codes for {X.shape[0]} signals")
    if C.shape[0] == 0:
        raise ValueError("no codes to accumulate; dimensions unknown")
    return C.T @ C, X.T @ C


def project_atom(u: np.ndarray) -> np.ndarray:
    return u / max(np.linalg.norm(u), 1.0)


def bcd_update(state: LearnerState) -> Dictionary:
    """One sequential sweep over the atoms; later atoms see earlier updates."""
    D = state.D.atoms.copy()
    A, B = state.A, state.B
    for j in range(D.shape[1]):
        ajj = A[j, j]
        if ajj < UNUSED_ATOM_TOL:
            continue
        u = (B[:, j] - D @ A[:, j]) / ajj + D[:, j]
        D[:, j] = project_atom(u)
    return Dictionary(D)


def objective(X, D, codes) -> float:
    """Half the summed squared reconstruction error."""
    X = _signals(X)
    C = _codes_matrix(codes)
    atoms = D.atoms if isinstance(D, Dictionary) else D
    R = X - C @ atoms.T
    return 0.5 * float(np.sum(R * R))


def _reseed_dead_atoms(state: LearnerState, X, codes):
    dead = np.flatnonzero(state.unused_streak >= DEAD_ATOM_PATIENCE)
    if dead.size == 0:
        return
    atoms = state.D.atoms
    err = np.sum((X - codes @ atoms.T) ** 2, axis=1)
    worst = [i for i in np.argsort(-err, kind="stable") if err[i] > 0]
    for j, i in zip(dead, worst):
        atoms[:, j] = X[i] / np.linalg.norm(X[i])
        state.unused_streak[j] = 0
        logger.debug("re-seeded unused atom %d from signal %d", j, i)


@dataclass
class LearningHistory:
    objectives: list = field(default_factory=list)
    changes: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.changes)


def learn_dictionary(U, cfg: DictLearnConfig, return_history: bool = False):
    """Alternate OMP coding of ``U`` and BCD atom updates.

    Stops after ``cfg.max_iter`` outer iterations or once the relative
    Frobenius change of the dictionary drops below ``cfg.convergence_eps``.
    With ``return_history`` the objective before each dictionary update
    (and after the last one) is returned alongside the dictionary.
    """
    X = _signals(U)
    if X.shape[0] == 0:
        raise ValueError("no unlabeled signals")
    D = init_dictionary(X, cfg)
    omp_cfg = cfg.omp
    omp_cfg.validate_for(D)
    history = LearningHistory()
    state = None
    for it in range(cfg.max_iter):
        codes = encode_matrix(X, D, omp_cfg)
        history.objectives.append(objective(X, D, codes))
        A, B = accumulate_stats(codes, X)
        if state is None:
            state = LearnerState(D, A, B)
        else:
            state.D, state.A, state.B = D, A, B
        state.iteration = it + 1
        unused = np.diag(A) < UNUSED_ATOM_TOL
        state.unused_streak = np.where(unused, state.unused_streak + 1, 0)
        new = D
        for _ in range(cfg.bcd_sweeps):
            state.D = new
            new = bcd_update(state)
        state.D = new
        _reseed_dead_atoms(state, X, codes)
        new = state.D
        change = np.linalg.norm(new.atoms - D.atoms) / np.linalg.norm(D.atoms)
        history.changes.append(float(change))
        D = new
        if change < cfg.convergence_eps:
            history.converged = True
            break
    logger.info("dictionary learning: %d iterations, converged=%s",
                history.iterations, history.converged)
    if return_history:
        history.objectives.append(objective(X, D, encode_matrix(X, D, omp_cfg)))
        return D, history
    return D


def transform_labeled(L: Sequence[Instance], D, cfg: OmpConfig) -> list[tuple[SparseCode, int]]:
    """Re-encode labeled instances as sparse codes and reattach their labels."""
    if len(L) == 0:
        return []
    for i, inst in enumerate(L):
        if inst.label is None:
            raise ValueError(f"instance {i} is unlabeled")
    codes = encode_matrix(as_matrix(L), D, cfg)
    return [(SparseCode.from_dense(c), inst.label) for c, inst in zip(codes, L)]


# ---------------------------------------------------------------------------
# persistence

_BIN_HEADER = struct.Struct("<8sqq")
_BIN_MAGIC = b"SSHADDIC"


def save_dictionary(D: Dictionary, path) -> None:
    """Write ``n``, ``m`` and the column-major atom values.

    ``.txt`` files hold decimal text with 17 significant digits; anything
    else gets the little-endian binary layout. Both load back exactly.
    """
    path = Path(path)
    flat = np.asarray(D.atoms, dtype=float).flatten(order="F")
    if path.suffix == ".txt":
        lines = [f"{D.n} {D.m}"] + [format(v, ".17g") for v in flat]
        path.write_text("\n".join(lines) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(_BIN_MAGIC, D.n, D.m))
            fh.write(flat.astype("<f8").tobytes())


def load_dictionary(path) -> Dictionary:
    path = Path(path)
    if path.suffix == ".txt":
        lines = path.read_text().split()
        n, m = int(lines[0]), int(lines[1])
        flat = np.array([float(v) for v in lines[2:]])
    else:
        raw = path.read_bytes()
        magic, n, m = _BIN_HEADER.unpack_from(raw)
        if magic != _BIN_MAGIC:
            raise ValueError(f"{path} is not a dictionary file")
        flat = np.frombuffer(raw, dtype="<f8", offset=_BIN_HEADER.size).astype(float)
    if flat.size != n * m:
        raise ValueError(f"expected {n * m} values, found {flat.size}")
    return Dictionary(flat.reshape((n, m), order="F"))
