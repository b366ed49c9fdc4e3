"""Assembly of ``a(u, v) = eps^2 (grad u, grad v) + (b u, v)`` and ``(f, v)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import FeSpace
from .linsolve import CsrMatrix


@dataclass
class SystemPair:
    matrix: CsrMatrix
    rhs: np.ndarray
    interior: np.ndarray    # global ids of the unknowns
    ndofs: int
    energy_gram: CsrMatrix | None = None  # eps^2 K + M on the unknowns

    def to_global(self, x) -> np.ndarray:
        out = np.zeros(self.ndofs)
        out[self.interior] = x
        return out


def _check_coefficient(bq, beta):
    if np.any(~np.isfinite(bq)) or np.any(bq <= 0):
        raise ValueError("reaction coefficient b must be positive at every quadrature point")
    if beta is not None and np.any(bq < 2.0 * beta ** 2):
        raise ValueError(f"reaction coefficient violates b >= 2 beta^2 = {2 * beta ** 2:g}")


def element_matrices(space: FeSpace, epsilon: float, b, nq: int | None = None, beta=None):
    """Stiffness ``K_e``, weighted mass ``M_e`` per element, shape ``(ne, nloc, nloc)``."""
    nq = space.k + 2 if nq is None else nq
    X, Y, JW, val, GX, GY = space.quadrature_points(nq)
    bq = b.value(X, Y) if b is not None else np.ones_like(X)
    _check_coefficient(bq, beta)
    K = np.einsum("eiq,ejq,eq->eij", GX, GX, JW) + np.einsum("eiq,ejq,eq->eij", GY, GY, JW)
    M = np.einsum("iq,jq,eq->eij", val, val, JW * bq)
    return K, M


def element_loads(space: FeSpace, f, nq: int | None = None):
    nq = space.k + 2 if nq is None else nq
    X, Y, JW, val, _, _ = space.quadrature_points(nq)
    return np.einsum("iq,eq->ei", val, JW * f.value(X, Y))


def scatter_matrix(space: FeSpace, Ae) -> sp.csr_matrix:
    dofs = space.element_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    A = sp.coo_matrix((Ae.ravel(), (rows, cols)), shape=(space.ndofs, space.ndofs)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def scatter_vector(space: FeSpace, be) -> np.ndarray:
    out = np.zeros(space.ndofs)
    np.add.at(out, space.element_dofs.ravel(), be.ravel())
    return out


def assemble_full(space: FeSpace, epsilon: float, b, beta=None):
    """Global matrices ``(K, M_b)`` before Dirichlet elimination."""
    K, M = element_matrices(space, epsilon, b, beta=beta)
    return scatter_matrix(space, K), scatter_matrix(space, M)


def assemble(space: FeSpace, epsilon: float, b, f, beta=None, with_gram: bool = True
             ) -> SystemPair:
    """Assemble the Dirichlet-eliminated system on the interior DoFs."""
    if space.mesh.xs.points[0] != 0.0 or space.mesh.xs.points[-1] != 1.0:
        raise ValueError("space is not defined on the unit square")
    K, M = assemble_full(space, epsilon, b, beta=beta)
    A = epsilon ** 2 * K + M
    rhs = scatter_vector(space, element_loads(space, f))
    inner = space.interior_dofs
    A_in = A[inner][:, inner]
    gram = None
    if with_gram:
        _, M1 = assemble_full(space, epsilon, None)
        gram = CsrMatrix((epsilon ** 2 * K + M1)[inner][:, inner])
    return SystemPair(CsrMatrix(A_in), rhs[inner], inner, space.ndofs, gram)


def coercivity_probe(pair: SystemPair, trials: int = 100, seed: int = 0) -> float:
    """Minimum of ``a(v, v) / ||v||_eps^2`` over random nonzero coefficient vectors."""
    if pair.energy_gram is None:
        raise ValueError("system was assembled without its energy Gram matrix")
    rng = np.random.default_rng(seed)
    n = pair.matrix.n
    best = np.inf
    for _ in range(trials):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        best = min(best, float(v @ (pair.matrix @ v)) / float(v @ (pair.energy_gram @ v)))
    return best
