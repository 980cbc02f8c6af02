"""
Sparse coding with orthogonal matching pursuit
==============================================

A signal built from two atoms of a small dictionary is recovered exactly,
and a noisy signal stops early once the residual drops under ``tol``.
"""

import numpy as np

from sshad import Dictionary, OmpConfig, omp_encode, reconstruction_error

rng = np.random.default_rng(0)

# 16 random unit-norm atoms in 6 dimensions
atoms = rng.standard_normal((6, 16))
D = Dictionary(atoms / np.linalg.norm(atoms, axis=0))

alpha = np.zeros(16)
alpha[[3, 11]] = [1.5, -0.7]
x = D.atoms @ alpha

code = omp_encode(x, D, OmpConfig(k=3, tol=1e-12))
print("support:", code.indices, "values:", code.values)
print("squared residual:", reconstruction_error(x, D, code))

# with noise, tol decides how many atoms are worth paying for
noisy = x + rng.normal(0, 0.05, 6)
for tol in (0.0, 0.01, 0.1):
    c = omp_encode(noisy, D, OmpConfig(k=6, tol=tol))
    print(f"tol={tol:<5} nnz={c.nnz} residual={reconstruction_error(noisy, D, c):.4f}")
