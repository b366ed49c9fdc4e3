import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layerfem.meshgen import (Box, Lemma1Violation, Mesh1D, MeshParamError, MeshParams, Segment,
                              TensorMesh2D, auto_c1, boundary_complement, build_mesh,
                              classify_subdomains, continuity_constants, dump_mesh,
                              generating_function, load_mesh, verify_lemma1)


def roos(N=16, eps=1e-3, sigma=2.0, beta=1.0):
    return build_mesh(MeshParams(N=N, epsilon=eps, sigma=sigma, beta=beta))


def kopteva(N=16, eps=1e-3, sigma=2.0, beta=1.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return build_mesh(MeshParams.with_auto_c1(N, eps, sigma, beta, "kopteva"))


def test_roos_first_points_closed_form():
    x = roos().points
    # -sigma eps ln(1 - 4 (1 - eps) t) at t = 1/16 and t = 1/4
    assert x[1] == pytest.approx(-0.002 * math.log(1 - 0.999 / 4), rel=1e-13)
    assert x[1] == pytest.approx(5.747e-4, rel=1e-3)
    assert x[4] == pytest.approx(2e-3 * math.log(1e3), rel=1e-13)
    assert x[4] == pytest.approx(1.3816e-2, rel=1e-4)


def test_endpoints_and_midpoint_exact():
    for m in (roos(), kopteva(), roos(96, 1e-6, 3.5)):
        x = m.points
        assert x[0] == 0.0 and x[-1] == 1.0 and x[m.N // 2] == 0.5


def test_roos_slopes_formula():
    p = MeshParams(N=16, epsilon=1e-4, sigma=2.5)
    d1, d2 = continuity_constants(p)
    lam = 2.5e-4 * math.log(1e-4)
    assert d1 == pytest.approx(2 * (1 + lam), rel=1e-15)
    assert d2 == pytest.approx(2 * lam, rel=1e-15)


@pytest.mark.parametrize("kind", ["roos", "kopteva"])
def test_generating_function_continuous_at_breakpoints(kind):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        p = MeshParams.with_auto_c1(32, 1e-4, 2.0, 1.0, kind)
    t0 = p.theta if kind == "kopteva" else 0.25
    # the left breakpoint feeds the mesh; the mirrored one only needs roundoff accuracy
    for t, tol in ((t0, 4 * np.spacing(1.0)), (1 - t0, 1e-14)):
        a, b = generating_function(p, np.array([np.nextafter(t, 0), np.nextafter(t, 1)]))
        assert abs(a - b) <= tol


def test_generating_function_is_increasing_onto_unit_interval():
    p = MeshParams(N=64, epsilon=1e-5, sigma=3.0)
    t = np.linspace(0, 1, 2001)
    v = generating_function(p, t)
    assert np.all(np.diff(v) > 0)
    assert abs(v[0]) < 1e-15 and abs(v[-1] - 1) < 1e-12


def test_steps_mirror_exactly():
    m = kopteva(48, 1e-5, 3.0)
    assert np.array_equal(m.steps, m.steps[::-1])
    assert np.allclose(np.diff(m.points), m.steps, atol=1e-16)


def test_auto_c1_and_bounds():
    assert auto_c1(3.0, 1.0) == pytest.approx(4.0)
    p = MeshParams(N=16, epsilon=1e-4, sigma=2.0, kind="kopteva", c1=auto_c1(2.0, 1.0))
    lo, hi = p.c1_bounds()
    assert lo == pytest.approx(2 / (4 * math.e)) and hi == pytest.approx(1.0)
    # the experimental value exceeds the admissible upper bound
    with pytest.raises(MeshParamError, match="c1"):
        p.validate()
    with pytest.warns(UserWarning):
        MeshParams.with_auto_c1(16, 1e-4, 2.0, 1.0, "kopteva").validate()


@pytest.mark.parametrize("kw,needle", [
    (dict(N=18), "multiple of 4"),
    (dict(N=4), "max(8"),
    (dict(epsilon=1e-2), "eps <="),
    (dict(epsilon=-1.0), "epsilon must be positive"),
    (dict(sigma=0.5), "sigma"),
    (dict(kind="shishkin"), "kind"),
])
def test_invalid_parameters_named(kw, needle):
    base = dict(N=16, epsilon=1e-4, sigma=2.0)
    base.update(kw)
    with pytest.raises(MeshParamError, match=needle.replace("(", r"\(")):
        build_mesh(MeshParams(**base))


def test_eps_bound_boundary_case():
    # eps = beta / (4 sigma N) is admissible, slightly above is not
    N, s = 96, 3.0
    edge = 1.0 / (4 * s * N)
    assert MeshParams(N=N, epsilon=edge, sigma=s).violations() == []
    assert MeshParams(N=N, epsilon=edge * 1.001, sigma=s).violations()


def test_lemma1_h_bounds_oracle():
    rep = verify_lemma1(roos())
    assert rep.ok
    h2 = roos().steps[2]
    assert 5e-4 <= h2 <= 2e-3
    assert "C4 (min N h_i, N/4<=i<=N/2)" in rep.constants
    assert "PASS" in rep.format()


def test_lemma1_strict_raises_on_tampered_mesh():
    good = roos(32, 1e-4, 2.0)
    pts = good.points.copy()
    steps = good.steps.copy()
    steps[1], steps[2] = steps[2] * 1.5, steps[1]
    bad = Mesh1D(points=pts, steps=steps, params=good.params)
    assert not verify_lemma1(bad, strict=False).ok
    with pytest.raises(Lemma1Violation):
        verify_lemma1(bad)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["roos", "kopteva"]),
       N=st.sampled_from([12, 24, 48, 96, 192]),
       exp=st.integers(3, 8),
       sigma=st.sampled_from([2.0, 2.5, 3.0, 3.5, 4.0, 4.5]))
def test_lemma1_holds_on_admissible_meshes(kind, N, exp, sigma):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        p = MeshParams.with_auto_c1(N, 10.0 ** -exp, sigma, 1.0, kind)
        if p.violations():
            return
        assert verify_lemma1(build_mesh(p)).ok


def test_subdomains_N16():
    t = classify_subdomains(16)
    assert t.omega0 == Box(4, 11, 4, 11)
    assert t.omega0_star == Box(3, 12, 3, 12)
    assert t.omega0_starstar == Box(2, 13, 2, 13)
    assert t.istar == 2
    assert t.strips["bottom"] == Box(0, 15, 0, 2)
    assert t.strips["right"] == Box(13, 15, 0, 15)
    assert t.corners["top_left"] == Box(0, 2, 13, 15)
    assert len(t.omega0.elements(16)) == 64
    assert len(t.boundary_ring()) == 60


def test_subdomain_elements_disjoint_cover():
    t = classify_subdomains(24)
    N = 24
    strips = set()
    for b in t.strips.values():
        strips |= set(b.elements(N))
    inner = set(Box(t.istar + 1, N - t.istar - 2, t.istar + 1, N - t.istar - 2).elements(N))
    assert strips.isdisjoint(inner) and len(strips | inner) == N * N
    assert inner == set(t.omega0_star.elements(N))


def test_boundary_complement_of_strip_and_corner():
    t = classify_subdomains(16)
    g = t.gamma_strips["bottom"]
    assert Segment("bottom", 0, 16) not in g
    assert Segment("left", 3, 16) in g and Segment("right", 3, 16) in g
    assert Segment("top", 0, 16) in g
    gc = t.gamma_corners["bottom_left"]
    assert Segment("bottom", 3, 16) in gc and Segment("left", 3, 16) in gc
    assert boundary_complement(Box(3, 12, 3, 12), 16) == tuple(
        Segment(s, 0, 16) for s in ("bottom", "right", "top", "left"))


def test_box_ring_excludes_square_boundary_sides():
    N = 16
    ring = set(Box(0, 2, 0, 15).ring(N))
    assert ring == {j * N + 2 for j in range(N)}


def test_tensor_mesh_sizes():
    m = TensorMesh2D.from_params(MeshParams(N=16, epsilon=1e-3, sigma=2.0))
    hx, hy = m.element_sizes()
    assert hx.shape == (256,) and m.N == 16
    assert np.allclose(hx.reshape(16, 16)[0], np.diff(m.xs.points))
    assert np.allclose(hy.reshape(16, 16)[:, 0], np.diff(m.ys.points))
    assert m.subdomains.istar == 2


def test_dump_load_roundtrip(tmp_path):
    m = kopteva(24, 1e-4, 2.0)
    path = tmp_path / "mesh.txt"
    dump_mesh(m, path)
    back = load_mesh(path)
    assert np.array_equal(back.points, m.points)
    assert back.params.kind == "kopteva" and back.params.c1 == m.params.c1


def test_from_points_rejects_unsorted():
    with pytest.raises(ValueError):
        Mesh1D.from_points([0, 0.5, 0.4, 1])
