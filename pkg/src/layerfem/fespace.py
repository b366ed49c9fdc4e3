"""Q_k Lagrange spaces on tensor-product rectangular meshes.

Global DoFs live on a ``(kN+1) x (kN+1)`` node lattice numbered
lexicographically, x fastest: ``dof = m*(kN+1) + l`` for lattice column
``l`` and row ``m``. Element ``(i, j)`` has flat id ``j*N + i`` and local
node ``(a, b)`` maps to local index ``b*(k+1) + a``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .meshgen import TensorMesh2D

DEGREES = (1, 2, 3)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)

    def on_unit(self):
        """Points and weights mapped to [0, 1]."""
        return 0.5 * (self.points + 1.0), 0.5 * self.weights


def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    if not 1 <= n <= 16:
        raise ValueError(f"Gauss rule size must be in 1..16, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(x, w)


class ReferenceElement:
    """1-D Lagrange basis on equispaced nodes of [-1, 1]; tensorized on demand."""

    def __init__(self, degree: int):
        if degree not in DEGREES:
            raise ValueError(f"degree must be one of {DEGREES}, got {degree}")
        self.degree = degree
        self.nodes = np.linspace(-1.0, 1.0, degree + 1)

    def basis_1d(self, t):
        """Values and derivatives, each of shape ``(k+1, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        nodes = self.nodes
        n = len(nodes)
        val = np.ones((n, t.size))
        der = np.zeros((n, t.size))
        for j in range(n):
            others = [m for m in range(n) if m != j]
            denom = np.prod([nodes[j] - nodes[m] for m in others])
            for m in others:
                rest = np.ones(t.size)
                for r in others:
                    if r != m:
                        rest *= t - nodes[r]
                der[j] += rest
                val[j] *= t - nodes[m]
            val[j] /= denom
            der[j] /= denom
        return val, der

    def basis_1d_unit(self, s):
        """Basis on [0, 1]; derivatives are with respect to ``s``."""
        v, d = self.basis_1d(2.0 * np.asarray(s, dtype=float) - 1.0)
        return v, 2.0 * d

    def tensor_at(self, s, r):
        """Tensor basis at paired unit-square points; arrays ``(nloc, npts)``.

        Returns values and the two partial derivatives on [0, 1]^2.
        """
        vx, dx = self.basis_1d_unit(s)
        vy, dy = self.basis_1d_unit(r)
        n = self.degree + 1
        val = (vy[:, None, :] * vx[None, :, :]).reshape(n * n, -1)
        gx = (vy[:, None, :] * dx[None, :, :]).reshape(n * n, -1)
        gy = (dy[:, None, :] * vx[None, :, :]).reshape(n * n, -1)
        return val, gx, gy

    def tensor_quadrature(self, nq: int):
        """Tensor Gauss rule on [0,1]^2 with basis tables at its points."""
        s, w = gauss_rule(nq).on_unit()
        ss, rr = np.meshgrid(s, s)
        ww = np.outer(w, w).ravel()
        val, gx, gy = self.tensor_at(ss.ravel(), rr.ravel())
        return ss.ravel(), rr.ravel(), ww, val, gx, gy


class FeSpace:
    def __init__(self, mesh: TensorMesh2D, degree: int):
        if degree not in DEGREES:
            raise ValueError(f"degree must be one of {DEGREES}, got {degree}")
        self.mesh = mesh
        self.k = degree
        self.ref = ReferenceElement(degree)
        self.N = mesh.N
        self.n1 = degree * self.N + 1

    @property
    def ndofs(self) -> int:
        return self.n1 * self.n1

    @cached_property
    def lattice_x(self) -> np.ndarray:
        return self._lattice(self.mesh.xs.points)

    @cached_property
    def lattice_y(self) -> np.ndarray:
        return self._lattice(self.mesh.ys.points)

    def _lattice(self, pts):
        k = self.k
        out = np.empty(self.n1)
        frac = np.arange(k) / k
        h = np.diff(pts)
        out[:-1] = (pts[:-1, None] + h[:, None] * frac[None, :]).ravel()
        out[-1] = pts[-1]
        # vertex nodes carry the mesh lines exactly
        out[::k] = pts
        return out

    @cached_property
    def node_coords(self):
        X, Y = np.meshgrid(self.lattice_x, self.lattice_y)
        return X.ravel(), Y.ravel()

    @cached_property
    def lattice_index(self):
        """Lattice column and row of every global DoF."""
        m, l = np.divmod(np.arange(self.ndofs), self.n1)
        return l, m

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        l, m = self.lattice_index
        last = self.n1 - 1
        return (l == 0) | (m == 0) | (l == last) | (m == last)

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def element_dofs(self) -> np.ndarray:
        """``(N*N, (k+1)^2)`` global DoF indices per element."""
        k, N, n1 = self.k, self.N, self.n1
        a = np.arange(k + 1)
        la = (a[None, :] + k * np.arange(N)[:, None])  # (N, k+1)
        i = np.tile(np.arange(N), N)
        j = np.repeat(np.arange(N), N)
        cols = la[i]           # (ne, k+1)
        rows = la[j]
        return (rows[:, :, None] * n1 + cols[:, None, :]).reshape(N * N, -1)

    @cached_property
    def element_origin(self):
        xs, ys = self.mesh.xs.points, self.mesh.ys.points
        N = self.N
        return np.tile(xs[:-1], N), np.repeat(ys[:-1], N)

    @cached_property
    def element_sizes(self):
        return self.mesh.element_sizes()

    def quadrature_points(self, nq: int):
        """Physical quadrature data per element.

        Returns ``(X, Y, JW, val, gx, gy)``: coordinates and Jacobian-scaled
        weights of shape ``(ne, nqp)``; basis values ``(nloc, nqp)`` and
        physical gradients ``(ne, nloc, nqp)``.
        """
        s, r, w, val, gx, gy = self.ref.tensor_quadrature(nq)
        x0, y0 = self.element_origin
        hx, hy = self.element_sizes
        X = x0[:, None] + hx[:, None] * s[None, :]
        Y = y0[:, None] + hy[:, None] * r[None, :]
        JW = (hx * hy)[:, None] * w[None, :]
        GX = gx[None, :, :] / hx[:, None, None]
        GY = gy[None, :, :] / hy[:, None, None]
        return X, Y, JW, val, GX, GY

    def locate(self, x, y):
        """Element ids containing the points; ties go to the lower-index element."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)) or np.any(np.isnan(x) | np.isnan(y)):
            raise ValueError("point outside the unit square")
        xs, ys = self.mesh.xs.points, self.mesh.ys.points
        i = np.clip(np.searchsorted(xs, x, side="left") - 1, 0, self.N - 1)
        j = np.clip(np.searchsorted(ys, y, side="left") - 1, 0, self.N - 1)
        return i, j


def build_space(mesh: TensorMesh2D, k: int) -> FeSpace:
    return FeSpace(mesh, k)


@dataclass
class FeFunction:
    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndofs,):
            raise ValueError(
                f"expected {self.space.ndofs} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, space: FeSpace) -> "FeFunction":
        return cls(space, np.zeros(space.ndofs))

    def __add__(self, other: "FeFunction") -> "FeFunction":
        return FeFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "FeFunction") -> "FeFunction":
        return FeFunction(self.space, self.coeffs - other.coeffs)

    def eval_in_elements(self, elems, x, y):
        """Value and gradient using the polynomial of the given elements."""
        sp = self.space
        elems = np.asarray(elems)
        x0, y0 = sp.element_origin
        hx, hy = sp.element_sizes
        s = (np.asarray(x, dtype=float) - x0[elems]) / hx[elems]
        r = (np.asarray(y, dtype=float) - y0[elems]) / hy[elems]
        val, gx, gy = sp.ref.tensor_at(s.ravel(), r.ravel())
        c = self.coeffs[sp.element_dofs[elems]].reshape(-1, val.shape[0])
        v = np.einsum("pn,np->p", c, val)
        dx = np.einsum("pn,np->p", c, gx) / hx[elems].ravel()
        dy = np.einsum("pn,np->p", c, gy) / hy[elems].ravel()
        return v, np.stack([dx, dy], axis=-1)

    def eval(self, x, y):
        """Value and gradient at points of the closed unit square."""
        scalar = np.ndim(x) == 0 and np.ndim(y) == 0
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        i, j = self.space.locate(x, y)
        v, g = self.eval_in_elements(j * self.space.N + i, x, y)
        if scalar:
            return float(v[0]), g[0]
        return v.reshape(shape), g.reshape(shape + (2,))

    # ScalarField-compatible accessors
    def value(self, x, y):
        return self.eval(x, y)[0]

    def gradient(self, x, y):
        g = self.eval(x, y)[1]
        return g[..., 0], g[..., 1]

    def at_quadrature(self, nq: int):
        """Values and gradients at the per-element tensor Gauss points."""
        sp = self.space
        _, _, _, val, GX, GY = sp.quadrature_points(nq)
        c = self.coeffs[sp.element_dofs]
        return c @ val, np.einsum("en,enq->eq", c, GX), np.einsum("en,enq->eq", c, GY)


# --- DoF regions ------------------------------------------------------------

@dataclass(frozen=True)
class HLine:
    """Mesh line ``y = y_m`` restricted to vertex columns ``i0..i1``."""

    m: int
    i0: int = 0
    i1: int | None = None


@dataclass(frozen=True)
class VLine:
    """Mesh line ``x = x_m`` restricted to vertex rows ``j0..j1``."""

    m: int
    j0: int = 0
    j1: int | None = None


@dataclass(frozen=True)
class Ring:
    """Boundary of the closed box with vertex indices ``lo..hi`` in both directions."""

    lo: int
    hi: int


@dataclass(frozen=True)
class Boundary:
    pass


def _on(coord, value, a, b):
    tol = 2 * np.spacing(max(abs(value), 1.0))
    return (np.abs(coord - value) <= tol) & (coord >= a - tol) & (coord <= b + tol)


def region_mask(space: FeSpace, region) -> np.ndarray:
    """Boolean mask over global DoFs whose nodes lie on ``region``."""
    from .meshgen import Segment

    xs, ys = space.mesh.xs.points, space.mesh.ys.points
    N = space.N
    X, Y = space.node_coords
    if isinstance(region, (list, tuple, set, frozenset)):
        out = np.zeros(space.ndofs, dtype=bool)
        for r in region:
            out |= region_mask(space, r)
        return out
    if isinstance(region, HLine):
        i1 = N if region.i1 is None else region.i1
        return _on(Y, ys[region.m], 0, np.inf) & (X >= xs[region.i0]) & (X <= xs[i1])
    if isinstance(region, VLine):
        j1 = N if region.j1 is None else region.j1
        return _on(X, xs[region.m], 0, np.inf) & (Y >= ys[region.j0]) & (Y <= ys[j1])
    if isinstance(region, Ring):
        lo, hi = region.lo, region.hi
        return region_mask(space, [HLine(lo, lo, hi), HLine(hi, lo, hi),
                                   VLine(lo, lo, hi), VLine(hi, lo, hi)])
    if isinstance(region, Boundary):
        return space.boundary_mask.copy()
    if isinstance(region, Segment):
        if region.side == "bottom":
            return region_mask(space, HLine(0, region.lo, region.hi))
        if region.side == "top":
            return region_mask(space, HLine(N, region.lo, region.hi))
        if region.side == "left":
            return region_mask(space, VLine(0, region.lo, region.hi))
        if region.side == "right":
            return region_mask(space, VLine(N, region.lo, region.hi))
    raise ValueError(f"region not expressible on the DoF lattice: {region!r}")


def select_dofs(space: FeSpace, region) -> np.ndarray:
    return np.flatnonzero(region_mask(space, region))
