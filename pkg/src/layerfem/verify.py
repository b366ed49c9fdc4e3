"""Built-in property checks run by ``layerfem verify`` and the acceptance tests."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import assemble, coercivity_probe
from .fespace import FeFunction, build_space
from .interp import (build_E, build_Pc, build_Ps, lagrange_interp, line_jump,
                     local_coefficients, star_ring, vee_interp, weighted_projection)
from .linsolve import cg_solve
from .meshgen import MeshParams, TensorMesh2D, build_mesh, verify_lemma1
from .problem import (LayerDecomposition, ScalarField, constant_field,
                      manufactured_decomposition, reaction_coefficient)

MESH_GRID_N = (12, 24, 48, 96, 192, 384)
MESH_GRID_EPS = (1e-3, 1e-4, 1e-5, 1e-6)
MESH_GRID_SIGMA = (2.0, 2.5, 3.0, 3.5, 4.0, 4.5)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def smooth_field() -> ScalarField:
    """``cos(pi x / 2) (1 + y)^3``, a smooth non-polynomial test field."""
    def val(x, y):
        return np.cos(np.pi * x / 2) * (1 + y) ** 3

    def grad(x, y):
        return (-np.pi / 2 * np.sin(np.pi * x / 2) * (1 + y) ** 3,
                3 * np.cos(np.pi * x / 2) * (1 + y) ** 2)

    return ScalarField(val, grad, name="cos(pi x/2)(1+y)^3")


def polynomial_field(k: int, seed: int = 0) -> ScalarField:
    """Random member of Q_k on the unit square."""
    c = np.random.default_rng(seed).uniform(-1, 1, (k + 1, k + 1))

    def val(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return sum(c[a, b] * x ** a * y ** b for a in range(k + 1) for b in range(k + 1))

    def grad(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        gx = sum(a * c[a, b] * x ** max(a - 1, 0) * y ** b
                 for a in range(k + 1) for b in range(k + 1))
        gy = sum(b * c[a, b] * x ** a * y ** max(b - 1, 0)
                 for a in range(k + 1) for b in range(k + 1))
        return gx, gy

    return ScalarField(val, grad, name=f"Q{k} polynomial")


def check_mesh_grid(kinds=("roos", "kopteva"), Ns=MESH_GRID_N, eps=MESH_GRID_EPS,
                    sigmas=MESH_GRID_SIGMA) -> CheckResult:
    count = skipped = 0
    failures = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for kind, N, e, s in itertools.product(kinds, Ns, eps, sigmas):
            params = MeshParams.with_auto_c1(N, e, s, 1.0, kind)
            if params.violations():
                skipped += 1
                continue
            rep = verify_lemma1(build_mesh(params), strict=False)
            count += 1
            if not rep.ok:
                failures.append((kind, N, e, s))
    return CheckResult("mesh inequalities on the parameter grid", not failures and count > 0,
                       f"{count} meshes checked, {skipped} inadmissible pairs skipped, "
                       f"failures={failures[:5]}")


def _space(k, N=16, eps=1e-4, kind="roos"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        params = MeshParams.with_auto_c1(N, eps, k + 1.5, 1.0, kind)
        return build_space(TensorMesh2D.from_params(params), k)


def check_operators(ks=(1, 2, 3), N=16, eps=1e-4) -> list[CheckResult]:
    out = []
    b = reaction_coefficient()
    for k in ks:
        sp = _space(k, N, eps)
        X, Y = sp.node_coords

        # projection idempotence on a member of the restricted space
        rng = np.random.default_rng(k)
        member = FeFunction(sp, rng.uniform(-1, 1, sp.ndofs))
        proj = weighted_projection(member, sp, b)
        err = float(np.max(np.abs(proj.function.coeffs[proj.dofs] - member.coeffs[proj.dofs])))
        out.append(CheckResult(f"k={k} projection idempotence", err <= 1e-11, f"{err:.2e}"))

        proj = weighted_projection(smooth_field(), sp, b)
        out.append(CheckResult(f"k={k} projection orthogonality residual",
                               proj.residual <= 1e-11, f"{proj.residual:.2e}"))

        q = polynomial_field(k, seed=k)
        exact = q.value(X, Y)
        e1 = float(np.max(np.abs(lagrange_interp(q, sp).coeffs - exact)))
        e2 = float(np.max(np.abs(vee_interp(q, sp).coeffs - exact)))
        out.append(CheckResult(f"k={k} Lagrange reproduces Q_k", e1 <= 1e-12, f"{e1:.2e}"))
        out.append(CheckResult(f"k={k} VEE reproduces Q_k", e2 <= 1e-12, f"{e2:.2e}"))

        # E v0 continuity across the enlarged coarse block boundary
        FE, _ = build_E(smooth_field(), sp, proj)
        loc = local_coefficients(sp, FE)
        ring = star_ring(sp)
        Ef = FeFunction(sp, np.zeros(sp.ndofs))
        jumpE = max(line_jump(Ef, ax, m, coeffs_by_element=loc)
                    for ax in ("x", "y") for m in (ring.lo, ring.hi))
        out.append(CheckResult(f"k={k} E v0 continuous across the block boundary",
                               jumpE <= 1e-11, f"{jumpE:.2e}"))

        dec = manufactured_decomposition(eps)
        ps = build_Ps(dec, sp, b)
        loc = local_coefficients(sp, ps.functionals)
        jumpP = max(line_jump(ps.function, ax, m, coeffs_by_element=loc)
                    for ax in ("x", "y") for m in range(1, N))
        out.append(CheckResult(f"k={k} P_s u continuous across every mesh line",
                               jumpP <= 1e-11, f"{jumpP:.2e}"))

        # a general decomposition: E v0 nontrivial
        dec2 = LayerDecomposition(smooth_field(), dec.w, dec.z)
        ps2 = build_Ps(dec2, sp, b)
        loc = local_coefficients(sp, ps2.functionals)
        jump2 = max(line_jump(ps2.function, ax, m, coeffs_by_element=loc)
                    for ax in ("x", "y") for m in range(1, N))
        out.append(CheckResult(f"k={k} P_s continuous for a non-constant regular part",
                               jump2 <= 1e-11, f"{jump2:.2e}"))

        bmask = sp.boundary_mask
        pc = build_Pc(dec, sp, b)
        bc = float(np.max(np.abs(pc.coeffs[bmask])))
        bs = float(np.max(np.abs(ps.function.coeffs[bmask])))
        out.append(CheckResult(f"k={k} P_c u vanishes on the boundary", bc <= 1e-11, f"{bc:.2e}"))
        out.append(CheckResult(f"k={k} P_s u vanishes on the boundary", bs <= 1e-11, f"{bs:.2e}"))

        pair = assemble(sp, eps, b, constant_field(1.0), beta=1.0)
        ratio = coercivity_probe(pair, trials=100, seed=k)
        out.append(CheckResult(f"k={k} coercivity a(v,v)/||v||_eps^2 >= min(2 beta^2, 1)",
                               ratio >= 1.0 - 1e-10, f"min ratio {ratio:.12f}"))
    return out


def random_spd_tridiagonal(n: int, rng) -> np.ndarray:
    off = rng.uniform(-1, 1, n - 1)
    diag = np.abs(np.concatenate([[0], off])) + np.abs(np.concatenate([off, [0]]))
    diag += rng.uniform(0.1, 2.0, n)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def check_solver(systems: int = 50, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(systems):
        n = int(rng.integers(1, 51))
        if rng.random() < 0.5 and n > 1:
            A = random_spd_tridiagonal(n, rng)
        else:
            B = rng.standard_normal((n, n))
            A = B @ B.T + n * np.eye(n)
        rhs = rng.standard_normal(n)
        x = cg_solve(A, rhs, rel_tol=1e-14).x
        ref = np.linalg.solve(A, rhs)
        worst = max(worst, float(np.linalg.norm(x - ref) / np.linalg.norm(ref)))
    return CheckResult(f"CG vs dense solve on {systems} random SPD systems", worst <= 1e-10,
                       f"max relative error {worst:.2e}")


def run_all() -> list[CheckResult]:
    return [check_mesh_grid(), *check_operators(), check_solver()]
