import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layerfem.fespace import (Boundary, FeFunction, HLine, Ring, VLine, build_space, gauss_rule,
                              region_mask, select_dofs)
from layerfem.meshgen import MeshParams, Segment, TensorMesh2D


def uniform(N):
    return TensorMesh2D.from_points(np.linspace(0, 1, N + 1))


def graded(N=16, eps=1e-4):
    return TensorMesh2D.from_params(MeshParams(N=N, epsilon=eps, sigma=2.5))


@pytest.mark.parametrize("N,k,total,inner", [(2, 2, 25, 9), (4, 2, 81, 49), (12, 3, 1369, 1225),
                                             (3, 1, 16, 4)])
def test_dof_counts(N, k, total, inner):
    sp = build_space(uniform(N), k)
    assert sp.ndofs == total
    assert len(sp.interior_dofs) == inner
    assert sp.element_dofs.shape == (N * N, (k + 1) ** 2)


def test_gauss_rule_exactness():
    s, w = gauss_rule(3).points, gauss_rule(3).weights
    assert np.sum(w * s ** 4) == pytest.approx(2 / 5, abs=1e-15)
    for n in range(1, 8):
        r = gauss_rule(n)
        for p in range(2 * n):
            exact = 0.0 if p % 2 else 2.0 / (p + 1)
            assert np.sum(r.weights * r.points ** p) == pytest.approx(exact, abs=1e-14)
    with pytest.raises(ValueError):
        gauss_rule(0)


def test_unit_rule():
    s, w = gauss_rule(2).on_unit()
    assert np.sum(w) == pytest.approx(1.0)
    assert np.sum(w * s ** 3) == pytest.approx(0.25)


def test_element_dofs_layout():
    sp = build_space(uniform(2), 2)
    # element (1, 0): lattice columns 2..4, rows 0..2
    assert sp.element_dofs[1].tolist() == [2, 3, 4, 7, 8, 9, 12, 13, 14]
    assert sp.element_dofs[2].tolist() == [10, 11, 12, 15, 16, 17, 20, 21, 22]


def test_lattice_vertices_are_mesh_points():
    m = graded()
    sp = build_space(m, 3)
    assert np.array_equal(sp.lattice_x[::3], m.xs.points)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_partition_of_unity_and_derivatives(k):
    sp = build_space(graded(), k)
    one = FeFunction(sp, np.ones(sp.ndofs))
    v, gx, gy = one.at_quadrature(k + 2)
    assert np.allclose(v, 1, atol=1e-13)
    assert np.max(np.abs(gx)) < 1e-7 and np.max(np.abs(gy)) < 1e-7


@pytest.mark.parametrize("k", [1, 2, 3])
def test_reproduces_tensor_polynomials(k):
    sp = build_space(graded(12, 1e-3), k)
    X, Y = sp.node_coords
    fe = FeFunction(sp, X ** k * Y ** k - 2 * X)
    rng = np.random.default_rng(1)
    x, y = rng.random(50), rng.random(50)
    v, g = fe.eval(x, y)
    assert np.allclose(v, x ** k * y ** k - 2 * x, atol=1e-12)
    assert np.allclose(g[:, 0], k * x ** (k - 1) * y ** k - 2, atol=1e-8)
    assert np.allclose(g[:, 1], k * x ** k * y ** (k - 1), atol=1e-8)


def test_eval_example():
    sp = build_space(uniform(4), 1)
    X, Y = sp.node_coords
    v, g = FeFunction(sp, X * Y).eval(0.5, 0.5)
    assert v == pytest.approx(0.25)
    assert np.allclose(g, [0.5, 0.5])


def test_eval_preserves_shape_and_rejects_outside():
    sp = build_space(uniform(4), 2)
    fe = FeFunction.zeros(sp)
    assert fe.value(np.zeros((3, 2)), np.zeros((3, 2))).shape == (3, 2)
    with pytest.raises(ValueError):
        fe.eval(1.5, 0.2)


def test_quadrature_integrates_area():
    sp = build_space(graded(), 2)
    _, _, JW, _, _, _ = sp.quadrature_points(3)
    assert JW.sum() == pytest.approx(1.0, abs=1e-14)


def test_region_counts():
    assert len(select_dofs(build_space(uniform(4), 1), HLine(0))) == 5
    assert len(select_dofs(build_space(uniform(8), 1), Boundary())) == 32
    sp = build_space(graded(16), 1)
    assert len(select_dofs(sp, Ring(3, 13))) == 40
    sp2 = build_space(graded(16), 2)
    assert len(select_dofs(sp2, VLine(3, 0, 4))) == 9
    assert len(select_dofs(sp2, Segment("left", 3, 16))) == 27
    both = region_mask(sp2, [HLine(0), VLine(0)])
    assert both.sum() == 2 * 33 - 1


def test_boundary_mask_matches_coordinates():
    sp = build_space(graded(), 3)
    X, Y = sp.node_coords
    on = (X == 0) | (X == 1) | (Y == 0) | (Y == 1)
    assert np.array_equal(on, sp.boundary_mask)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(0, 1), y=st.floats(0, 1))
def test_locate_contains_point(x, y):
    sp = build_space(graded(), 1)
    i, j = sp.locate(np.array([x]), np.array([y]))
    xs, ys = sp.mesh.xs.points, sp.mesh.ys.points
    assert xs[i[0]] <= x <= xs[i[0] + 1] and ys[j[0]] <= y <= ys[j[0] + 1]


def test_function_arithmetic():
    sp = build_space(uniform(2), 1)
    a = FeFunction(sp, np.arange(9.0))
    b = FeFunction(sp, np.ones(9))
    assert np.array_equal((a + b).coeffs, np.arange(9.0) + 1)
    assert np.array_equal((a - a).coeffs, np.zeros(9))
