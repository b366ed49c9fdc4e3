"""Bakhvalov-type layer-adapted meshes on the unit square.

Two generating functions are supported:

* ``roos``: logarithmic near the boundary for ``t <= 1/4``, linear in
  ``[1/4, 3/4]``.
* ``kopteva``: logarithmic up to ``theta = 1/4 - c1*eps``, linear between
  ``theta`` and ``1 - theta``.

The 1-D point distribution is tensored into a rectangular mesh, and the
subdomains used by the interpolation operators (the coarse block, its
one- and two-cell enlargements, layer strips, corner boxes) are described
by element-index boxes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("roos", "kopteva")
SIDES = ("bottom", "right", "top", "left")


class MeshParamError(ValueError):
    """Raised when mesh parameters violate a construction condition."""


class Lemma1Violation(AssertionError):
    """Raised when a mesh fails an explicit-constant mesh inequality."""


def auto_c1(sigma: float, beta: float) -> float:
    """Transition constant used in the reference experiments, 4*sigma/(3*beta)."""
    return 4.0 * sigma / (3.0 * beta)


@dataclass(frozen=True)
class MeshParams:
    N: int
    epsilon: float
    sigma: float
    beta: float = 1.0
    kind: str = "roos"
    c1: float | None = None
    # The experimental default c1 = 4*sigma/(3*beta) lies above the upper
    # admissible bound; meshes built with it only warn.
    enforce_c1_bounds: bool = True

    @classmethod
    def with_auto_c1(cls, N, epsilon, sigma, beta=1.0, kind="roos"):
        c1 = auto_c1(sigma, beta) if kind == "kopteva" else None
        return cls(N=N, epsilon=epsilon, sigma=sigma, beta=beta, kind=kind,
                   c1=c1, enforce_c1_bounds=False)

    @property
    def theta(self) -> float:
        if self.kind != "kopteva":
            raise AttributeError("theta is only defined for kind='kopteva'")
        return 0.25 - self.c1 * self.epsilon

    def c1_bounds(self) -> tuple[float, float]:
        s, b = self.sigma, self.beta
        return s / (4.0 * math.e * b), 0.5 * max(s / b, 0.25)

    def violations(self) -> list[str]:
        """Return a description of every violated condition (empty if valid)."""
        out = []
        N, eps, s, b = self.N, self.epsilon, self.sigma, self.beta
        if self.kind not in KINDS:
            out.append(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not isinstance(N, (int, np.integer)) or N <= 0 or N % 4:
            out.append(f"N must be a positive multiple of 4, got {N}")
            return out
        if not eps > 0:
            out.append(f"epsilon must be positive, got {eps}")
        if not s >= 1:
            out.append(f"sigma must be >= 1, got {s}")
        if not b > 0:
            out.append(f"beta must be positive, got {b}")
        if out:
            return out
        nmin = max(8.0, 2.0 * math.log(s / b))
        if N < nmin:
            out.append(f"N >= max(8, 2 ln(sigma/beta)) = {nmin:g} violated by N={N}")
        bound = min(b / (4.0 * s), 1.0) / N
        if eps > bound:
            out.append(
                f"eps <= min(beta/(4 sigma), 1)/N = {bound:.6g} violated by eps={eps:g}")
        if self.kind == "kopteva":
            if self.c1 is None or not self.c1 > 0:
                out.append(f"kopteva mesh needs a positive c1, got {self.c1}")
            elif self.enforce_c1_bounds:
                lo, hi = self.c1_bounds()
                if not lo <= self.c1 <= hi:
                    out.append(
                        f"sigma/(4 e beta) = {lo:.6g} <= c1 <= max(sigma/beta, 1/4)/2 = "
                        f"{hi:.6g} violated by c1={self.c1:g}")
        return out

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise MeshParamError("; ".join(problems))
        if self.kind == "kopteva" and not self.enforce_c1_bounds:
            lo, hi = self.c1_bounds()
            if not lo <= self.c1 <= hi:
                warnings.warn(
                    f"c1={self.c1:g} outside [{lo:.4g}, {hi:.4g}]; mesh built anyway",
                    stacklevel=3)


def continuity_constants(params: MeshParams) -> tuple[float, float]:
    """Slopes of the linear middle piece, ``(d1, d2)`` or ``(d3, d4)``."""
    params.validate()
    scale = params.sigma * params.epsilon / params.beta
    if params.kind == "roos":
        lam = scale * math.log(params.epsilon)
        return 2.0 * (1.0 + lam), 2.0 * lam
    theta = params.theta
    left = -scale * math.log(1.0 - 4.0 * theta)
    return (1.0 - left) / (1.0 - 2.0 * theta), left / (2.0 * theta - 1.0)


def generating_function(params: MeshParams, t):
    """Evaluate psi (roos) or phi (kopteva) at ``t`` in [0, 1]."""
    t = np.asarray(t, dtype=float)
    scale = params.sigma * params.epsilon / params.beta
    da, db = continuity_constants(params)
    out = np.empty_like(t)
    if params.kind == "roos":
        lo, hi = 0.25, 0.75
        q = 4.0 * (1.0 - params.epsilon)
        left = t <= lo
        right = t >= hi
        mid = ~left & ~right
        out[left] = -scale * np.log1p(-q * t[left])
        out[right] = 1.0 + scale * np.log1p(-q * (1.0 - t[right]))
        out[mid] = da * (t[mid] - lo) + db * (t[mid] - hi)
    else:
        theta = params.theta
        left = t <= theta
        right = t >= 1.0 - theta
        mid = ~left & ~right
        out[left] = -scale * np.log1p(-4.0 * t[left])
        out[right] = 1.0 + scale * np.log1p(-4.0 * (1.0 - t[right]))
        out[mid] = da * (t[mid] - theta) + db * (t[mid] - 1.0 + theta)
    return out


@dataclass(frozen=True)
class Mesh1D:
    """Point distribution ``0 = x_0 < ... < x_N = 1``.

    ``steps`` are the differences of the left half mirrored onto the right
    half, so ``steps[i] == steps[N-1-i]`` holds exactly.
    """

    points: np.ndarray
    steps: np.ndarray
    params: MeshParams | None = None

    @property
    def N(self) -> int:
        return len(self.points) - 1

    @classmethod
    def from_points(cls, points) -> "Mesh1D":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or len(pts) < 2 or np.any(np.diff(pts) <= 0):
            raise ValueError("points must be a strictly increasing 1-D sequence")
        return cls(points=pts, steps=np.diff(pts), params=None)


def build_mesh(params: MeshParams) -> Mesh1D:
    params.validate()
    N = params.N
    half = N // 2
    t = np.arange(half + 1) / N
    left = generating_function(params, t)
    left[0] = 0.0
    left[half] = 0.5
    pts = np.empty(N + 1)
    pts[: half + 1] = left
    pts[half + 1:] = 1.0 - left[half - 1:: -1]
    if np.any(np.diff(pts) <= 0):
        raise MeshParamError("generating function produced non-increasing points")
    hl = np.diff(left)
    steps = np.concatenate([hl, hl[::-1]])
    pts.flags.writeable = False
    steps.flags.writeable = False
    return Mesh1D(points=pts, steps=steps, params=params)


# --- structural mesh checks -------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness: int | None = None
    explicit: bool = True


@dataclass
class Lemma1Report:
    params: MeshParams
    checks: list[Check] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.explicit)

    def format(self) -> str:
        p = self.params
        lines = [f"mesh kind={p.kind} N={p.N} eps={p.epsilon:g} sigma={p.sigma:g} "
                 f"beta={p.beta:g}" + (f" c1={p.c1:g}" if p.c1 is not None else "")]
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            wit = f" (index {c.witness})" if c.witness is not None else ""
            lines.append(f"  [{tag}] {c.name}{wit} {c.detail}".rstrip())
        for k, v in self.constants.items():
            lines.append(f"  empirical {k} = {v:.6g}")
        return "\n".join(lines)


def verify_lemma1(mesh: Mesh1D, strict: bool = True) -> Lemma1Report:
    """Check the structural mesh inequalities and report empirical constants.

    With ``strict`` a failed explicit-constant check raises
    :class:`Lemma1Violation`.
    """
    p = mesh.params
    if p is None:
        raise ValueError("mesh has no generating parameters")
    N, eps, s, b = p.N, p.epsilon, p.sigma, p.beta
    x, h = mesh.points, mesh.steps
    rep = Lemma1Report(params=p)
    q = N // 4
    istar = q - 2

    d = np.diff(x)
    bad = np.flatnonzero(d <= 0)
    rep.checks.append(Check("points strictly increasing", bad.size == 0,
                            witness=int(bad[0]) if bad.size else None))

    dh = np.diff(h[: istar + 1])
    bad = np.flatnonzero(dh < 0)
    rep.checks.append(Check("h_0 <= h_1 <= ... <= h_{N/4-2}", bad.size == 0,
                            witness=int(bad[0]) if bad.size else None))

    lo, hi = s * eps / (4 * b), s * eps / b
    hs = h[istar]
    rep.checks.append(Check("sigma eps/(4 beta) <= h_{N/4-2} <= sigma eps/beta",
                            bool(lo <= hs <= hi), f"[{lo:.4g} <= {hs:.4g} <= {hi:.4g}]",
                            witness=istar))

    bad = np.flatnonzero(h != h[::-1])
    rep.checks.append(Check("h_i == h_{N-1-i}", bad.size == 0,
                            witness=int(bad[0]) if bad.size else None))

    sym = np.abs(x + x[::-1] - 1.0)
    tol = 2 * np.spacing(1.0)
    bad = np.flatnonzero(sym > tol)
    rep.checks.append(Check("x_i + x_{N-i} == 1 (2 ulps)", bad.size == 0,
                            witness=int(bad[0]) if bad.size else None))

    rep.checks.append(Check("x_{N/4} <= 1/4", bool(x[q] <= 0.25), f"x_{{N/4}}={x[q]:.6g}",
                            witness=q))
    if p.kind == "kopteva":
        th = p.theta
        rep.checks.append(Check("1/4 - 1/N <= theta < 1/4", bool(0.25 - 1.0 / N <= th < 0.25),
                                f"theta={th:.8g}"))

    mid = h[q: N // 2 + 1] * N
    rep.constants["C4 (min N h_i, N/4<=i<=N/2)"] = float(mid.min())
    rep.constants["C5 (max N h_i, N/4<=i<=N/2)"] = float(mid.max())
    rep.constants["C (h_{N/4-1} / eps)"] = float(h[q - 1] / eps)
    rep.constants["C (N h_{N/4-1})"] = float(h[q - 1] * N)
    rep.constants["c (x_{N/4-1} / (sigma eps ln N))"] = float(x[q - 1] / (s * eps * math.log(N)))
    rep.constants["c (x_{N/4} / (sigma eps ln(1/eps)))"] = float(
        x[q] / (s * eps * math.log(1.0 / eps)))
    idx = np.arange(istar + 1)
    decay = np.exp(-b * x[idx] / eps)
    for mu in (0.0, 1.0, s):
        ratio = h[idx] ** mu * decay / (eps ** mu * float(N) ** (-mu))
        rep.constants[f"C (h_i^mu e^(-beta x_i/eps) / (eps/N)^mu, mu={mu:g})"] = float(
            ratio.max())

    if strict and not rep.ok:
        failed = [c.name for c in rep.checks if c.explicit and not c.passed]
        raise Lemma1Violation(f"mesh inequalities violated: {failed}\n{rep.format()}")
    return rep


# --- 2-D tensor mesh and subdomains ---------------------------------------

@dataclass(frozen=True)
class Box:
    """Closed element-index box ``i0..i1`` x ``j0..j1`` (inclusive)."""

    i0: int
    i1: int
    j0: int
    j1: int

    def contains(self, i, j):
        return (self.i0 <= i) & (i <= self.i1) & (self.j0 <= j) & (j <= self.j1)

    def elements(self, N: int) -> np.ndarray:
        """Flat element ids ``j*N + i`` of the box, row by row."""
        ii, jj = np.meshgrid(np.arange(self.i0, self.i1 + 1),
                             np.arange(self.j0, self.j1 + 1))
        return (jj * N + ii).ravel()

    def ring(self, N: int) -> np.ndarray:
        """Elements of the box touching the closure of its complement in the square."""
        ii, jj = np.meshgrid(np.arange(self.i0, self.i1 + 1),
                             np.arange(self.j0, self.j1 + 1))
        touch = np.zeros(ii.shape, dtype=bool)
        if self.i0 > 0:
            touch |= ii == self.i0
        if self.i1 < N - 1:
            touch |= ii == self.i1
        if self.j0 > 0:
            touch |= jj == self.j0
        if self.j1 < N - 1:
            touch |= jj == self.j1
        return (jj * N + ii)[touch]

    def vertex_box(self) -> tuple[int, int, int, int]:
        """Mesh-vertex index ranges of the closed box."""
        return self.i0, self.i1 + 1, self.j0, self.j1 + 1


@dataclass(frozen=True)
class Segment:
    """Closed piece of the boundary: vertex indices ``lo..hi`` along ``side``."""

    side: str
    lo: int
    hi: int


def boundary_complement(box: Box, N: int) -> tuple[Segment, ...]:
    """Closure of the part of the square's boundary not shared with ``box``."""
    i0, i1, j0, j1 = box.vertex_box()
    covered = {
        "bottom": (i0, i1) if j0 == 0 else None,
        "top": (i0, i1) if j1 == N else None,
        "left": (j0, j1) if i0 == 0 else None,
        "right": (j0, j1) if i1 == N else None,
    }
    out = []
    for side in SIDES:
        c = covered[side]
        if c is None:
            out.append(Segment(side, 0, N))
            continue
        if c[0] > 0:
            out.append(Segment(side, 0, c[0]))
        if c[1] < N:
            out.append(Segment(side, c[1], N))
    return tuple(out)


@dataclass(frozen=True)
class SubdomainTable:
    N: int
    omega0: Box
    omega0_star: Box
    omega0_starstar: Box
    strips: dict       # side -> Box, layer strips Omega_{w_i}
    corners: dict      # corner -> Box, corner boxes Omega_{z_i}
    gamma_strips: dict  # side -> tuple[Segment]
    gamma_corners: dict  # corner -> tuple[Segment]
    istar: int

    def ring(self, box: Box) -> np.ndarray:
        return box.ring(self.N)

    def boundary_ring(self) -> np.ndarray:
        """Elements touching the boundary of the square."""
        N = self.N
        ii, jj = np.meshgrid(np.arange(N), np.arange(N))
        touch = (ii == 0) | (ii == N - 1) | (jj == 0) | (jj == N - 1)
        return (jj * N + ii)[touch]


CORNERS = ("bottom_left", "bottom_right", "top_right", "top_left")


def classify_subdomains(N: int) -> SubdomainTable:
    q = N // 4
    s = q - 2
    last = N - 1
    strips = {
        "bottom": Box(0, last, 0, s),
        "right": Box(last - s, last, 0, last),
        "top": Box(0, last, last - s, last),
        "left": Box(0, s, 0, last),
    }
    corners = {
        "bottom_left": Box(0, s, 0, s),
        "bottom_right": Box(last - s, last, 0, s),
        "top_right": Box(last - s, last, last - s, last),
        "top_left": Box(0, s, last - s, last),
    }
    return SubdomainTable(
        N=N,
        omega0=Box(q, 3 * q - 1, q, 3 * q - 1),
        omega0_star=Box(q - 1, 3 * q, q - 1, 3 * q),
        omega0_starstar=Box(q - 2, 3 * q + 1, q - 2, 3 * q + 1),
        strips=strips,
        corners=corners,
        gamma_strips={k: boundary_complement(b, N) for k, b in strips.items()},
        gamma_corners={k: boundary_complement(b, N) for k, b in corners.items()},
        istar=s,
    )


@dataclass(frozen=True)
class TensorMesh2D:
    xs: Mesh1D
    ys: Mesh1D

    @property
    def N(self) -> int:
        return self.xs.N

    @property
    def subdomains(self) -> SubdomainTable:
        return classify_subdomains(self.N)

    @classmethod
    def from_params(cls, params: MeshParams) -> "TensorMesh2D":
        m = build_mesh(params)
        return cls(m, m)

    @classmethod
    def from_points(cls, points) -> "TensorMesh2D":
        m = Mesh1D.from_points(points)
        return cls(m, m)

    def element_sizes(self):
        """Arrays ``(hx, hy)`` indexed by flat element id ``j*N + i``."""
        hx, hy = np.meshgrid(self.xs.steps, self.ys.steps)
        return hx.ravel(), hy.ravel()


# --- text dump ------------------------------------------------------------

def dump_mesh(mesh: Mesh1D, path) -> None:
    p = mesh.params
    if p is None:
        header = "# custom - - - - -"
    else:
        c1 = "none" if p.c1 is None else repr(float(p.c1))
        header = f"# {p.kind} {p.N} {p.epsilon!r} {p.sigma!r} {p.beta!r} {c1}"
    body = "\n".join(repr(float(v)) for v in mesh.points)
    Path(path).write_text(header + "\n" + body + "\n")


def load_mesh(path) -> Mesh1D:
    lines = Path(path).read_text().splitlines()
    head = lines[0].lstrip("#").split()
    pts = np.array([float(v) for v in lines[1:] if v.strip()])
    if head[0] == "custom":
        return Mesh1D.from_points(pts)
    kind, N, eps, sigma, beta, c1 = head
    params = MeshParams(N=int(N), epsilon=float(eps), sigma=float(sigma), beta=float(beta),
                        kind=kind, c1=None if c1 == "none" else float(c1),
                        enforce_c1_bounds=False)
    half = params.N // 2
    hl = np.diff(pts[: half + 1])
    return Mesh1D(points=pts, steps=np.concatenate([hl, hl[::-1]]), params=params)
