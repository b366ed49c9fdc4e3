"""Interpolation operators for layer-adapted Q_k spaces.

Operators provided:

* Lagrange interpolation and a b-weighted L2 projection onto the enlarged
  coarse block ``Omega_0^*``;
* the convergence interpolant ``P_c`` built from both;
* the vertices-edges-element (VEE) interpolant and functional-wise
  corrections, which together give the supercloseness interpolant ``P_s``.

VEE functionals are indexed by the DoF lattice: the functional stored at
lattice node ``(l, m)`` is ``alpha_l (x) alpha_m`` where the 1-D functional
``alpha_l`` is the point value at ``x_{l/k}`` when ``k | l`` and otherwise the
normalised moment ``(j+1)/h_i^{j+1} int_{x_i}^{x_{i+1}} v(s) (s-x_i)^j ds``
with ``i = l // k`` and ``j = l % k - 1``. Hence "functionals attached to a
mesh line" are exactly the lattice nodes on that line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fespace import FeFunction, FeSpace, HLine, Ring, VLine, gauss_rule, region_mask
from .linsolve import cg_solve
from .meshgen import Box, SIDES, CORNERS
from .problem import LayerDecomposition, ScalarField


# --- Lagrange interpolation -----------------------------------------------

def lagrange_interp(g: ScalarField, space: FeSpace) -> FeFunction:
    X, Y = space.node_coords
    return FeFunction(space, np.asarray(g.value(X, Y), dtype=float) * np.ones(space.ndofs))


# --- lattice masks ------------------------------------------------------------

def box_mask(space: FeSpace, box: Box) -> np.ndarray:
    """DoFs whose nodes lie in the closed element box."""
    k = space.k
    l, m = space.lattice_index
    return (l >= k * box.i0) & (l <= k * (box.i1 + 1)) & (m >= k * box.j0) & (m <= k * (box.j1 + 1))


def interface_lines(box: Box, N: int) -> list:
    """Sides of a box that are not contained in the boundary of the square."""
    i0, i1, j0, j1 = box.vertex_box()
    out = []
    if j0 > 0:
        out.append(HLine(j0, i0, i1))
    if j1 < N:
        out.append(HLine(j1, i0, i1))
    if i0 > 0:
        out.append(VLine(i0, j0, j1))
    if i1 < N:
        out.append(VLine(i1, j0, j1))
    return out


def star_ring(space: FeSpace) -> Ring:
    q = space.N // 4
    return Ring(q - 1, 3 * q + 1)


# --- weighted L2 projection ---------------------------------------------------

@dataclass
class Projection:
    """Result of the b-weighted projection on an element block.

    ``function`` carries the projection on DoFs of the closed block and zeros
    elsewhere; ``dofs`` lists the block DoFs.
    """

    function: FeFunction
    dofs: np.ndarray
    mask: np.ndarray
    residual: float         # ||M c - m||_inf / ||m||_inf
    iterations: int = 0


def weighted_projection(g: ScalarField, space: FeSpace, b: ScalarField,
                        block: Box | None = None, rel_tol: float = 1e-15) -> Projection:
    """Project ``g`` onto the restriction of the space to ``block`` (default ``Omega_0^*``).

    The restricted space has no boundary condition on the block boundary.
    """
    if block is None:
        block = space.mesh.subdomains.omega0_star
    elems = block.elements(space.N)
    nq = space.k + 3
    X, Y, JW, val, _, _ = space.quadrature_points(nq)
    X, Y, JW = X[elems], Y[elems], JW[elems]
    bq = b.value(X, Y) * np.ones_like(X)
    if np.any(bq <= 0):
        raise ValueError("weighted mass matrix is indefinite: b <= 0 inside the block")
    Me = np.einsum("iq,jq,eq->eij", val, val, JW * bq)
    me = np.einsum("iq,eq->ei", val, JW * bq * g.value(X, Y))

    mask = box_mask(space, block)
    dofs = np.flatnonzero(mask)
    local = -np.ones(space.ndofs, dtype=np.int64)
    local[dofs] = np.arange(len(dofs))
    ed = local[space.element_dofs[elems]]
    nloc = ed.shape[1]
    rows = np.repeat(ed, nloc, axis=1).ravel()
    cols = np.tile(ed, (1, nloc)).ravel()
    n = len(dofs)
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    m = np.zeros(n)
    np.add.at(m, ed.ravel(), me.ravel())

    res = cg_solve(M, m, rel_tol=rel_tol)
    coeffs = np.zeros(space.ndofs)
    coeffs[dofs] = res.x
    mnorm = float(np.max(np.abs(m))) or 1.0
    resid = float(np.max(np.abs(M @ res.x - m))) / mnorm
    return Projection(FeFunction(space, coeffs), dofs, mask, resid, res.iterations)


def build_chi(space: FeSpace) -> FeFunction:
    """Nodal indicator of the lattice trace of ``partial Omega_0^*``."""
    return FeFunction(space, region_mask(space, star_ring(space)).astype(float))


def build_Pc(dec: LayerDecomposition, space: FeSpace, b: ScalarField,
             projection: Projection | None = None) -> FeFunction:
    """Convergence interpolant: ``pi v0`` on the closed block, Lagrange of ``v0 + w`` outside."""
    proj = weighted_projection(dec.v0, space, b) if projection is None else projection
    X, Y = space.node_coords
    outside = dec.v0.value(X, Y) + dec.layer_sum().value(X, Y)
    coeffs = np.where(proj.mask, proj.function.coeffs, outside)
    return FeFunction(space, coeffs)


# --- vertices-edges-element interpolation ------------------------------------

@lru_cache(maxsize=None)
def _functional_matrix_1d(k: int) -> np.ndarray:
    """``L[a, n]``: 1-D functional ``a`` applied to Lagrange basis ``n`` on [0, 1]."""
    from .fespace import ReferenceElement

    ref = ReferenceElement(k)
    t, w = gauss_rule(k + 3).on_unit()
    val, _ = ref.basis_1d_unit(t)
    L = np.zeros((k + 1, k + 1))
    ends, _ = ref.basis_1d_unit(np.array([0.0, 1.0]))
    L[0] = ends[:, 0]
    L[k] = ends[:, 1]
    for a in range(1, k):
        j = a - 1
        L[a] = (j + 1) * (val * (w * t ** j)[None, :]).sum(axis=1)
    return L


@lru_cache(maxsize=None)
def _functional_inverse_1d(k: int) -> np.ndarray:
    L = _functional_matrix_1d(k)
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError("local VEE functional matrix is singular")
    return np.linalg.inv(L)


def local_functional_matrix(k: int) -> np.ndarray:
    """Full ``(k+1)^2`` local functional matrix (row: functional, column: basis)."""
    L = _functional_matrix_1d(k)
    return np.kron(L, L)


def _functional_weights(points: np.ndarray, k: int, nq: int):
    """Sample points and a dense weight matrix realising the 1-D global functionals."""
    N = len(points) - 1
    t, w = gauss_rule(nq).on_unit()
    h = np.diff(points)
    gauss = (points[:-1, None] + h[:, None] * t[None, :]).ravel()
    samples = np.concatenate([points, gauss])
    n1 = k * N + 1
    W = np.zeros((n1, len(samples)))
    W[np.arange(0, n1, k), np.arange(N + 1)] = 1.0
    for i in range(N):
        cols = N + 1 + i * nq + np.arange(nq)
        for j in range(k - 1):
            W[k * i + 1 + j, cols] = (j + 1) * w * t ** j
    return samples, W


def vee_functionals(g: ScalarField, space: FeSpace, nq: int | None = None) -> np.ndarray:
    """All VEE functional values of ``g``, indexed like the global DoFs."""
    nq = space.k + 3 if nq is None else nq
    xs_, Wx = _functional_weights(space.mesh.xs.points, space.k, nq)
    ys_, Wy = _functional_weights(space.mesh.ys.points, space.k, nq)
    XX, YY = np.meshgrid(xs_, ys_)
    G = np.asarray(g.value(XX, YY), dtype=float) * np.ones(XX.shape)
    return (Wy @ G @ Wx.T).ravel()


@dataclass
class NodalResult:
    coeffs: np.ndarray
    defect: float    # largest disagreement between elements at a shared node


def functionals_to_nodal(space: FeSpace, F: np.ndarray) -> NodalResult:
    """Solve the local functional system on every element and assemble.

    Shared vertex and edge functionals make neighbouring local solutions
    agree on common nodes; ``defect`` measures any disagreement.
    """
    k = space.k
    Linv = _functional_inverse_1d(k)
    ed = space.element_dofs
    Floc = F[ed].reshape(-1, k + 1, k + 1)          # [e, b(y), a(x)]
    cloc = np.einsum("ab,ebc,dc->ead", Linv, Floc, Linv).reshape(len(ed), -1)
    lo = np.full(space.ndofs, np.inf)
    hi = np.full(space.ndofs, -np.inf)
    np.minimum.at(lo, ed.ravel(), cloc.ravel())
    np.maximum.at(hi, ed.ravel(), cloc.ravel())
    total = np.zeros(space.ndofs)
    count = np.zeros(space.ndofs)
    np.add.at(total, ed.ravel(), cloc.ravel())
    np.add.at(count, ed.ravel(), 1.0)
    return NodalResult(total / count, float(np.max(hi - lo)))


def nodal_to_functionals(fe: FeFunction) -> np.ndarray:
    """VEE functional values of a finite-element function (exact)."""
    sp_ = fe.space
    k = sp_.k
    L = _functional_matrix_1d(k)
    ed = sp_.element_dofs
    cloc = fe.coeffs[ed].reshape(-1, k + 1, k + 1)
    Floc = np.einsum("ab,ebc,dc->ead", L, cloc, L).reshape(len(ed), -1)
    F = np.zeros(sp_.ndofs)
    F[ed.ravel()] = Floc.ravel()
    return F


def from_functionals(space: FeSpace, F: np.ndarray) -> FeFunction:
    return FeFunction(space, functionals_to_nodal(space, F).coeffs)


def vee_interp(g: ScalarField, space: FeSpace) -> FeFunction:
    return from_functionals(space, vee_functionals(g, space))


def dof_override(base: FeFunction, dofs, values) -> FeFunction:
    """Replace the VEE functionals ``dofs`` of ``base`` by ``values`` and re-solve."""
    dofs = np.asarray(dofs, dtype=np.int64).ravel()
    if dofs.size and (dofs.min() < 0 or dofs.max() >= base.space.ndofs):
        raise IndexError("DoF index out of range")
    if dofs.size == 0:
        return FeFunction(base.space, base.coeffs.copy())
    F = nodal_to_functionals(base)
    F[dofs] = values
    return from_functionals(base.space, F)


# --- corrections and the supercloseness interpolant ----------------------------

def _mask_functionals(space, F, mask):
    return np.where(mask, F, 0.0)


def interface_mask(space: FeSpace, box: Box) -> np.ndarray:
    return region_mask(space, interface_lines(box, space.N))


def interface_correction(g: ScalarField | np.ndarray, space: FeSpace, box: Box) -> FeFunction:
    """Function whose functionals equal those of ``g`` on the interior sides of
    ``box`` and vanish elsewhere (B_1 for a strip, C_1 for a corner box)."""
    F = vee_functionals(g, space) if isinstance(g, ScalarField) else g
    return from_functionals(space, _mask_functionals(space, F, interface_mask(space, box)))


def layer_operator(g: ScalarField | np.ndarray, space: FeSpace, box: Box) -> FeFunction:
    """``A g - correction`` inside ``box`` and zero outside (S_i, T_i)."""
    F = vee_functionals(g, space) if isinstance(g, ScalarField) else g
    keep = box_mask(space, box) & ~interface_mask(space, box)
    return from_functionals(space, _mask_functionals(space, F, keep))


def boundary_correction(g: ScalarField | np.ndarray, space: FeSpace, box: Box) -> FeFunction:
    """Restore the functionals of ``g`` on the closure of the boundary part outside ``box``."""
    from .meshgen import boundary_complement

    F = vee_functionals(g, space) if isinstance(g, ScalarField) else g
    mask = region_mask(space, list(boundary_complement(box, space.N)))
    return from_functionals(space, _mask_functionals(space, F, mask))


@dataclass
class PsResult:
    function: FeFunction
    functionals: np.ndarray
    defect: float
    parts: dict = field(default_factory=dict)
    projection: Projection | None = None


def build_E(v0: ScalarField, space: FeSpace, projection: Projection):
    """Functionals of ``E v0``: ``pi v0`` on the closed block, ``A v0 + D v0`` outside.

    Returns ``(F_E, F_D)`` where ``F_D`` are the functionals of ``D v0``.
    """
    Fv0 = vee_functionals(v0, space)
    Fpi = nodal_to_functionals(projection.function)
    ring = region_mask(space, star_ring(space))
    FD = np.where(ring, Fpi - Fv0, 0.0)
    FE = np.where(projection.mask, Fpi, Fv0)
    return FE, FD


def build_Ps(dec: LayerDecomposition, space: FeSpace, b: ScalarField,
             projection: Projection | None = None, keep_parts: bool = False) -> PsResult:
    """Supercloseness interpolant ``E v0 + sum S_i w_i + sum T_i z_i + C(w)``."""
    sub = space.mesh.subdomains
    if sub.istar < 0:
        raise ValueError("mesh too coarse for layer strips")
    proj = weighted_projection(dec.v0, space, b) if projection is None else projection
    FE, FD = build_E(dec.v0, space, proj)
    total = FE.copy()
    parts = {}
    if keep_parts:
        parts["E"] = FE.copy()
        parts["D"] = FD
    pieces = [(f"S_{s}", dec.w[n], sub.strips[s]) for n, s in enumerate(SIDES)]
    pieces += [(f"T_{c}", dec.z[n], sub.corners[c]) for n, c in enumerate(CORNERS)]
    from .meshgen import boundary_complement

    for name, g, box in pieces:
        F = vee_functionals(g, space)
        keep = box_mask(space, box) & ~interface_mask(space, box)
        gamma = region_mask(space, list(boundary_complement(box, space.N)))
        total += np.where(keep, F, 0.0) + np.where(gamma, F, 0.0)
        if keep_parts:
            parts[name] = np.where(keep, F, 0.0)
            parts["C_" + name[2:]] = np.where(gamma, F, 0.0)
            parts["corr_" + name[2:]] = np.where(interface_mask(space, box), F, 0.0)
    res = functionals_to_nodal(space, total)
    out_parts = {k: from_functionals(space, v) for k, v in parts.items()}
    return PsResult(FeFunction(space, res.coeffs), total, res.defect, out_parts, proj)


# --- continuity probe -----------------------------------------------------------

def line_jump(fe: FeFunction, axis: str, m: int, samples: int = 7,
              coeffs_by_element: np.ndarray | None = None) -> float:
    """Largest jump of ``fe`` across the interior mesh line ``x = x_m`` or ``y = y_m``.

    Both one-sided traces are evaluated with the polynomial of the element on
    that side. ``coeffs_by_element`` (``(ne, nloc)``) may supply element-local
    coefficients that have not been merged into a global vector.
    """
    sp_ = fe.space
    N = sp_.N
    if not 0 < m < N:
        raise ValueError("line must be an interior mesh line")
    t = (np.arange(samples) + 0.5) / samples
    worst = 0.0
    pts = sp_.mesh.xs.points if axis == "y" else sp_.mesh.ys.points
    for cell in range(N):
        a, b = pts[cell], pts[cell + 1]
        s = a + (b - a) * t
        if axis == "y":
            lo = (m - 1) * N + cell
            hi = m * N + cell
            x, y = s, np.full_like(s, sp_.mesh.ys.points[m])
        else:
            lo = cell * N + m - 1
            hi = cell * N + m
            x, y = np.full_like(s, sp_.mesh.xs.points[m]), s
        if coeffs_by_element is None:
            v1, _ = fe.eval_in_elements(np.full(samples, lo), x, y)
            v2, _ = fe.eval_in_elements(np.full(samples, hi), x, y)
        else:
            v1 = _eval_local(sp_, coeffs_by_element[lo], lo, x, y)
            v2 = _eval_local(sp_, coeffs_by_element[hi], hi, x, y)
        worst = max(worst, float(np.max(np.abs(v1 - v2))))
    return worst


def _eval_local(space, c, e, x, y):
    x0, y0 = space.element_origin
    hx, hy = space.element_sizes
    val, _, _ = space.ref.tensor_at((x - x0[e]) / hx[e], (y - y0[e]) / hy[e])
    return c @ val


def local_coefficients(space: FeSpace, F: np.ndarray) -> np.ndarray:
    """Element-local nodal coefficients from functionals, before assembly."""
    k = space.k
    Linv = _functional_inverse_1d(k)
    Floc = F[space.element_dofs].reshape(-1, k + 1, k + 1)
    return np.einsum("ab,ebc,dc->ead", Linv, Floc, Linv).reshape(len(Floc), -1)
