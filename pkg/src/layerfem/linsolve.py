"""CSR storage and Jacobi-preconditioned conjugate gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    """CG did not reach the requested tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class CsrMatrix:
    """Square CSR matrix with sorted, duplicate-free column indices."""

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        self._m = m

    @classmethod
    def from_arrays(cls, indptr, indices, data, n):
        return cls(sp.csr_matrix((data, indices, indptr), shape=(n, n)))

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def indptr(self):
        return self._m.indptr

    @property
    def indices(self):
        return self._m.indices

    @property
    def data(self):
        return self._m.data

    @property
    def scipy(self) -> sp.csr_matrix:
        return self._m

    def diagonal(self):
        return self._m.diagonal()

    def __matmul__(self, x):
        return self._m @ x

    def to_dense(self):
        return self._m.toarray()

    def is_structurally_symmetric(self) -> bool:
        pattern = self._m.copy()
        pattern.data = np.ones_like(pattern.data)
        return (pattern != pattern.T).nnz == 0

    def asymmetry(self) -> float:
        """``max|A - A^T| / max|A|``."""
        d = abs(self._m - self._m.T)
        top = abs(self._m).max() if self._m.nnz else 0.0
        return float(d.max() / top) if top else 0.0


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def cg_solve(A, rhs, rel_tol: float = 1e-12, max_iter: int | None = None,
             callback=None) -> CGResult:
    """Solve the SPD system ``A x = rhs``.

    Stops when ``||A x - rhs||_2 <= rel_tol * ||rhs||_2``. ``history`` holds
    the 2-norm of the recursively updated residual per iteration.
    """
    if not isinstance(A, CsrMatrix):
        A = CsrMatrix(A)
    b = np.asarray(rhs, dtype=float)
    n = A.n
    if b.shape != (n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
    diag = A.diagonal()
    if np.any(diag == 0):
        raise ValueError(f"zero diagonal entry at row {int(np.flatnonzero(diag == 0)[0])}")
    inv_diag = 1.0 / diag
    if max_iter is None:
        max_iter = max(10 * n, 100)

    x = np.zeros(n)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(x, 0, 0.0, [0.0])
    target = rel_tol * bnorm

    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    history = [bnorm]
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError("matrix is not positive definite along a search direction",
                              history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if callback is not None:
            callback(x)
        if rn <= target:
            # recursive residual can drift; confirm with the true one
            true = float(np.linalg.norm(b - A @ x))
            if true <= target:
                return CGResult(x, it, true, history)
            r = b - A @ x
            z = inv_diag * r
            p = z.copy()
            rz = r @ z
            continue
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    true = float(np.linalg.norm(b - A @ x))
    raise SolverError(
        f"CG did not converge in {max_iter} iterations: residual {true:.3e} > {target:.3e}",
        history)
