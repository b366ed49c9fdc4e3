import math

import numpy as np
import pytest

from layerfem.fespace import Boundary, FeFunction, HLine, build_space, gauss_rule, select_dofs
from layerfem.harness import fitted_slope
from layerfem.interp import (box_mask, build_chi, build_E, build_Pc, build_Ps, dof_override,
                             functionals_to_nodal, interface_correction, interface_lines,
                             lagrange_interp, layer_operator, line_jump, local_coefficients,
                             local_functional_matrix, nodal_to_functionals, star_ring,
                             vee_functionals, vee_interp, weighted_projection)
from layerfem.meshgen import Box, MeshParams, TensorMesh2D
from layerfem.problem import (LayerDecomposition, ScalarField, constant_field,
                              manufactured_decomposition, reaction_coefficient, separable_field,
                              zero_field)
from layerfem.verify import polynomial_field, smooth_field

B = reaction_coefficient()


def uniform(N, k):
    return build_space(TensorMesh2D.from_points(np.linspace(0, 1, N + 1)), k)


def roos(N=16, k=1, eps=1e-4, sigma=None):
    sigma = k + 1.0 if sigma is None else sigma
    return build_space(TensorMesh2D.from_params(MeshParams(N=N, epsilon=eps, sigma=sigma)), k)


def field_xy(f, dfx, dfy):
    return ScalarField(f, lambda x, y: (dfx(x, y), dfy(x, y)))


def sup_on(fe, elems, n=5, space=None):
    """Sampled sup-norm over the given elements; ``fe`` may be an analytic field."""
    t = (np.arange(n) + 0.5) / n
    s, r = np.meshgrid(t, t)
    sp = fe.space if isinstance(fe, FeFunction) else space
    x0, y0 = sp.element_origin
    hx, hy = sp.element_sizes
    e = np.repeat(elems, n * n)
    x = x0[e] + hx[e] * np.tile(s.ravel(), len(elems))
    y = y0[e] + hy[e] * np.tile(r.ravel(), len(elems))
    v = fe.eval_in_elements(e, x, y)[0] if isinstance(fe, FeFunction) else fe.value(x, y)
    return float(np.max(np.abs(v)))


# --- Lagrange ----------------------------------------------------------------

def test_lagrange_constant_and_midpoint():
    sp = uniform(8, 1)
    assert np.all(lagrange_interp(constant_field(1.0), sp).coeffs == 1.0)
    g = field_xy(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), None, None)
    fe = lagrange_interp(g, sp)
    # linear interpolation of sin(pi x) between 0 and 1/8, at x = 1/16, y = 1/2
    assert fe.value(1 / 16, 0.5) == pytest.approx(0.5 * math.sin(math.pi / 8), rel=1e-14)


# --- projection --------------------------------------------------------------

def test_projection_one_dimensional_oracle():
    sp = uniform(2, 1)
    g = field_xy(lambda x, y: x ** 2 + 0 * y, None, None)
    p = weighted_projection(g, sp, B, block=Box(0, 1, 0, 1))
    # 3x3 normal equations of x^2 against hats on {0, 1/2, 1}
    expect = np.array([-1 / 24, 5 / 24, 23 / 24])
    for row in range(3):
        assert np.allclose(p.function.coeffs[3 * row: 3 * row + 3], expect, atol=1e-13)
    assert p.residual <= 1e-11


@pytest.mark.parametrize("k", [1, 2, 3])
def test_projection_reproduces_block_functions(k):
    sp = roos(16, k)
    p = weighted_projection(constant_field(3.0), sp, B)
    assert np.allclose(p.function.coeffs[p.dofs], 3.0, atol=1e-12)
    X, Y = sp.node_coords
    lin = field_xy(lambda x, y: x + 0 * y, None, None)
    q = weighted_projection(lin, sp, constant_field(5.0))
    assert np.allclose(q.function.coeffs[q.dofs], X[q.dofs], atol=1e-11)
    assert not np.any(p.function.coeffs[~p.mask])


def test_projection_rejects_nonpositive_weight():
    with pytest.raises(ValueError, match="indefinite"):
        weighted_projection(constant_field(1.0), roos(), constant_field(-1.0))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_projection_close_to_interpolant(k):
    # sup over the block of I v0 - pi v0 decays at order about k+1
    errs = {}
    for N in (12, 24, 48, 96):
        sp = roos(N, k)
        p = weighted_projection(smooth_field(), sp, B)
        diff = lagrange_interp(smooth_field(), sp) - p.function
        errs[N] = sup_on(diff, sp.mesh.subdomains.omega0_star.elements(N))
    assert fitted_slope(errs) >= k + 0.7


# --- chi and P_c ----------------------------------------------------------------

def test_chi_counts():
    sp = roos(16, 1)
    chi = build_chi(sp)
    assert chi.coeffs.sum() == 40
    assert not np.any(chi.coeffs[sp.boundary_mask])
    assert not np.any(chi.coeffs[box_mask(sp, Box(4, 11, 4, 11)) & ~box_mask(sp, Box(3, 12, 3, 12))])
    assert len(select_dofs(build_space(sp.mesh, 2), star_ring(sp))) == 80


@pytest.mark.parametrize("k", [1, 2])
def test_Pc_properties(k):
    eps = 1e-4
    sp = roos(16, k, eps)
    dec = manufactured_decomposition(eps)
    p = weighted_projection(dec.v0, sp, B)
    pc = build_Pc(dec, sp, B, p)
    assert np.max(np.abs(pc.coeffs[sp.boundary_mask])) <= 1e-11
    assert np.array_equal(pc.coeffs[p.mask], p.function.coeffs[p.mask])
    X, Y = sp.node_coords
    out = ~p.mask
    assert np.allclose(pc.coeffs[out], dec.total().value(X[out], Y[out]), atol=1e-14)


def test_Pc_reproduces_polynomial_regular_part():
    sp = roos(16, 2)
    q = polynomial_field(2, seed=4)
    dec = LayerDecomposition(q, (zero_field(),) * 4, (zero_field(),) * 4)
    X, Y = sp.node_coords
    assert np.allclose(build_Pc(dec, sp, B).coeffs, q.value(X, Y), atol=1e-11)


# --- VEE -----------------------------------------------------------------------

def test_vee_k1_is_vertex_interpolation():
    sp = roos(12, 1, 1e-3)
    g = smooth_field()
    assert np.allclose(vee_interp(g, sp).coeffs, lagrange_interp(g, sp).coeffs, atol=1e-15)


def test_vee_edge_moment_k2():
    sp = uniform(1, 2)
    cube = field_xy(lambda x, y: x ** 3 + 0 * y, None, None)
    F = vee_functionals(cube, sp)
    assert F[1] == pytest.approx(0.25, abs=1e-15)
    fe = vee_interp(cube, sp)
    s, w = gauss_rule(6).on_unit()
    assert np.sum(w * fe.value(s, 0 * s)) == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_vee_idempotent_and_functional_roundtrip(k):
    sp = roos(12, k, 1e-3)
    fe = vee_interp(smooth_field(), sp)
    again = vee_interp(fe, sp)
    assert np.allclose(again.coeffs, fe.coeffs, atol=1e-12)
    F = nodal_to_functionals(fe)
    res = functionals_to_nodal(sp, F)
    assert res.defect <= 1e-12 and np.allclose(res.coeffs, fe.coeffs, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_local_functional_matrix_unit_element(k):
    L = local_functional_matrix(k)
    assert L.shape == ((k + 1) ** 2,) * 2
    assert np.linalg.cond(L) < 1e4
    # a constant function has all functionals equal to 1
    assert np.allclose(L @ np.ones((k + 1) ** 2), 1.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_vee_superconvergence(k):
    # |int (A v - v)_x q_x| with q = A v decays like h^(k+1) on uniform meshes
    v = ScalarField(lambda x, y: np.sin(x) * np.exp(y),
                    lambda x, y: (np.cos(x) * np.exp(y), np.sin(x) * np.exp(y)))
    errs = {}
    for N in (4, 8, 16, 32):
        sp = uniform(N, k)
        q = vee_interp(v, sp)
        X, Y, JW, _, _, _ = sp.quadrature_points(k + 4)
        _, qx, _ = q.at_quadrature(k + 4)
        vx, _ = v.gradient(X, Y)
        errs[N] = abs(float(np.sum((qx - vx) * qx * JW)))
    assert fitted_slope(errs) >= k + 0.7


# --- overrides and corrections ---------------------------------------------------

def test_dof_override_examples():
    sp = roos(16, 2)
    base = vee_interp(smooth_field(), sp)
    same = dof_override(base, [], [])
    assert np.array_equal(same.coeffs, base.coeffs)
    zero = FeFunction.zeros(sp)
    bd = select_dofs(sp, Boundary())
    one = dof_override(zero, bd, 1.0)
    F = nodal_to_functionals(one)
    assert np.allclose(F[bd], 1.0) and np.allclose(np.delete(F, bd), 0.0, atol=1e-14)
    with pytest.raises(IndexError):
        dof_override(zero, [sp.ndofs], 1.0)


def test_dof_override_k1_touches_only_its_row():
    sp = roos(16, 1)
    base = vee_interp(smooth_field(), sp)
    row = select_dofs(sp, HLine(3))
    new = dof_override(base, row, 0.0)
    changed = np.flatnonzero(new.coeffs != base.coeffs)
    assert set(changed) <= set(row)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_layer_operator_vanishes_on_interface(k):
    eps = 1e-4
    sp = roos(16, k, eps)
    strip = sp.mesh.subdomains.strips["bottom"]
    w1 = manufactured_decomposition(eps).w[0]
    S = layer_operator(w1, sp, strip)
    y = sp.mesh.ys.points[strip.j1 + 1]
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(S.value(x, 0 * x + y))) <= 1e-14
    # outside the strip the operator is zero
    above = ~box_mask(sp, strip)
    assert not np.any(S.coeffs[above])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_interface_correction_stability(k):
    sp = roos(16, k)
    strip = sp.mesh.subdomains.strips["bottom"]
    ring = strip.ring(sp.N)
    rng = np.random.default_rng(k)
    worst = 0.0
    for _ in range(20):
        a, b, c = rng.uniform(-3, 3, 3)
        g = ScalarField(lambda x, y: np.sin(a * x + b * y + c),
                        lambda x, y: (a * np.cos(a * x + b * y + c), b * np.cos(a * x + b * y + c)))
        corr = interface_correction(g, sp, strip)
        ref = sup_on(g, ring, space=sp)
        worst = max(worst, sup_on(corr, ring) / ref)
    assert worst <= 5.0


def test_interface_lines_of_boxes():
    assert interface_lines(Box(0, 15, 0, 2), 16) == [HLine(3, 0, 16)]
    assert len(interface_lines(Box(3, 12, 3, 12), 16)) == 4


# --- P_s ----------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_Ps_manufactured(k):
    eps = 1e-5
    sp = roos(16, k, eps)
    dec = manufactured_decomposition(eps)
    ps = build_Ps(dec, sp, B, keep_parts=True)
    assert np.max(np.abs(ps.function.coeffs[sp.boundary_mask])) <= 1e-11
    assert ps.defect <= 1e-11
    for m in range(1, 16):
        assert line_jump(ps.function, "x", m) <= 1e-11
        assert line_jump(ps.function, "y", m) <= 1e-11
    # S_1 w_1 + C(S_1 w_1) has the boundary functionals of A w_1
    bd = sp.boundary_mask
    Fw = vee_functionals(dec.w[0], sp)
    Fs = nodal_to_functionals(ps.parts["S_bottom"]) + nodal_to_functionals(ps.parts["C_bottom"])
    assert np.allclose(Fs[bd], Fw[bd], atol=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_Ps_reproduces_polynomial_regular_part(k):
    sp = roos(16, k)
    q = polynomial_field(k, seed=9)
    dec = LayerDecomposition(q, (zero_field(),) * 4, (zero_field(),) * 4)
    X, Y = sp.node_coords
    assert np.allclose(build_Ps(dec, sp, B).function.coeffs, q.value(X, Y), atol=1e-11)


def test_E_continuity_and_D_support():
    sp = roos(16, 2)
    p = weighted_projection(smooth_field(), sp, B)
    FE, FD = build_E(smooth_field(), sp, p)
    ring = star_ring(sp)
    loc = local_coefficients(sp, FE)
    dummy = FeFunction.zeros(sp)
    for m in (ring.lo, ring.hi):
        assert line_jump(dummy, "x", m, coeffs_by_element=loc) <= 1e-11
        assert line_jump(dummy, "y", m, coeffs_by_element=loc) <= 1e-11
    chi = build_chi(sp).coeffs.astype(bool)
    assert not np.any(FD[~chi]) and np.any(FD[chi])


def test_line_jump_detects_discontinuity():
    sp = roos(16, 1)
    loc = np.zeros((256, 4))
    loc[16 * 5: 16 * 6] = 1.0  # element row 5 only
    assert line_jump(FeFunction.zeros(sp), "y", 5, coeffs_by_element=loc) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        line_jump(FeFunction.zeros(sp), "y", 0)
