"""
Learning a dictionary from unlabeled signals
============================================

Signals are drawn as 3-sparse combinations of a hidden 20-atom dictionary.
Alternating OMP coding and block-coordinate atom updates drives the
reconstruction objective down; the learned dictionary is saved and reloaded.
"""

import tempfile
from pathlib import Path

import numpy as np

from sshad import DictLearnConfig, learn_dictionary, load_dictionary, save_dictionary
from sshad.sparse_coding import encode_matrix

rng = np.random.default_rng(1)
hidden = rng.standard_normal((10, 20))
hidden /= np.linalg.norm(hidden, axis=0)
codes = np.zeros((500, 20))
for row in codes:
    row[rng.choice(20, 3, replace=False)] = rng.standard_normal(3)
X = codes @ hidden.T

cfg = DictLearnConfig(m=20, k=3, tol=1e-6, max_iter=50, seed=0)
D, history = learn_dictionary(X, cfg, return_history=True)
print("objective per iteration:", np.round(history.objectives[:8], 2), "...")
print(f"{history.iterations} iterations, converged={history.converged}")

fitted = encode_matrix(X, D, cfg.omp)
rel = np.sum((X - fitted @ D.atoms.T) ** 2) / np.sum(X ** 2)
print(f"relative reconstruction error: {rel:.4f}")

# how many hidden atoms have a close match (|cos| > 0.95) among the learned ones
match = np.abs(hidden.T @ D.atoms).max(axis=1)
print("hidden atoms recovered:", int(np.sum(match > 0.95)), "of 20")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "dictionary.bin"
    save_dictionary(D, path)
    assert np.array_equal(load_dictionary(path).atoms, D.atoms)
    print("saved and reloaded", path.stat().st_size, "bytes")
