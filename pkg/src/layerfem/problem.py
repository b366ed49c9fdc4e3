"""Analytic fields and the manufactured reaction-diffusion test problem.

The test problem is ``-eps^2 Lap u + 2u = f`` on the unit square with

    u = X(x) X(y),   X(t) = 1 - a(t) - abar(t),
    a(t) = exp(-t/eps) / (1 + exp(-1/eps)),  abar(t) = a(1 - t).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    value: Callable
    gradient: Callable
    laplacian: Optional[Callable] = None
    name: str = ""

    def __add__(self, other: "ScalarField") -> "ScalarField":
        lap = None
        if self.laplacian is not None and other.laplacian is not None:
            def lap(x, y):
                return self.laplacian(x, y) + other.laplacian(x, y)

        def grad(x, y):
            gx1, gy1 = self.gradient(x, y)
            gx2, gy2 = other.gradient(x, y)
            return gx1 + gx2, gy1 + gy2

        return ScalarField(lambda x, y: self.value(x, y) + other.value(x, y), grad, lap,
                           name=f"({self.name}+{other.name})")


def constant_field(c: float) -> ScalarField:
    def val(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(c))

    def grad(x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy()

    def lap(x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    return ScalarField(val, grad, lap, name=f"const({c:g})")


def zero_field() -> ScalarField:
    return constant_field(0.0)


def reaction_coefficient() -> ScalarField:
    """The reaction coefficient ``b = 2`` of the test problem (beta = 1)."""
    return constant_field(2.0)


def separable_field(fx, dfx, d2fx, fy, dfy, d2fy, name="") -> ScalarField:
    """Field ``F(x) G(y)`` from 1-D profiles and their first two derivatives."""
    def val(x, y):
        return fx(x) * fy(y)

    def grad(x, y):
        return dfx(x) * fy(y), fx(x) * dfy(y)

    def lap(x, y):
        return d2fx(x) * fy(y) + fx(x) * d2fy(y)

    return ScalarField(val, grad, lap, name=name)


class _Profiles:
    """1-D layer profiles for a given eps, with first and second derivatives."""

    def __init__(self, eps: float):
        if not eps > 0:
            raise ValueError("epsilon must be positive")
        self.eps = eps
        self.norm = 1.0 + np.exp(-1.0 / eps)

    def a(self, t):
        return np.exp(-np.asarray(t, dtype=float) / self.eps) / self.norm

    def da(self, t):
        return -self.a(t) / self.eps

    def d2a(self, t):
        return self.a(t) / self.eps ** 2

    def abar(self, t):
        return self.a(1.0 - np.asarray(t, dtype=float))

    def dabar(self, t):
        return self.abar(t) / self.eps

    def d2abar(self, t):
        return self.abar(t) / self.eps ** 2

    def X(self, t):
        return 1.0 - self.a(t) - self.abar(t)

    def dX(self, t):
        return -self.da(t) - self.dabar(t)

    def d2X(self, t):
        return -self.d2a(t) - self.d2abar(t)


def _one(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _nil(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _neg(f):
    return lambda t: -f(t)


def manufactured_solution(epsilon: float) -> ScalarField:
    p = _Profiles(epsilon)
    return separable_field(p.X, p.dX, p.d2X, p.X, p.dX, p.d2X, name="u")


def manufactured_rhs(epsilon: float) -> ScalarField:
    p = _Profiles(epsilon)

    def f(x, y):
        X, Y = p.X(x), p.X(y)
        return (p.a(x) + p.abar(x)) * Y + X * (p.a(y) + p.abar(y)) + 2.0 * X * Y

    def grad(x, y):
        X, Y, dX, dY = p.X(x), p.X(y), p.dX(x), p.dX(y)
        sx = p.a(x) + p.abar(x)
        sy = p.a(y) + p.abar(y)
        dsx = p.da(x) + p.dabar(x)
        dsy = p.da(y) + p.dabar(y)
        return dsx * Y + dX * sy + 2.0 * dX * Y, sx * dY + X * dsy + 2.0 * X * dY

    return ScalarField(f, grad, None, name="f")


@dataclass(frozen=True)
class LayerDecomposition:
    """Regular part, four edge layers and four corner layers.

    Edge layers are ordered bottom, right, top, left; corner layers
    bottom-left, bottom-right, top-right, top-left.
    """

    v0: ScalarField
    w: tuple
    z: tuple

    def __post_init__(self):
        if len(self.w) != 4 or len(self.z) != 4:
            raise ValueError("need exactly four edge and four corner layer fields")

    def layer_sum(self) -> ScalarField:
        total = self.w[0]
        for f in list(self.w[1:]) + list(self.z):
            total = total + f
        return total

    def total(self) -> ScalarField:
        return self.v0 + self.layer_sum()

    def max_mismatch(self, target: ScalarField, n: int = 200, seed: int = 0) -> float:
        """Largest relative deviation of the sum from ``target`` at random points."""
        rng = np.random.default_rng(seed)
        x, y = rng.random(n), rng.random(n)
        got = self.total().value(x, y)
        want = target.value(x, y)
        return float(np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-300)))


def manufactured_decomposition(epsilon: float) -> LayerDecomposition:
    p = _Profiles(epsilon)
    a, da, d2a = p.a, p.da, p.d2a
    ab, dab, d2ab = p.abar, p.dabar, p.d2abar
    one = (_one, _nil, _nil)
    w = (
        separable_field(*one, _neg(a), _neg(da), _neg(d2a), name="w_bottom"),
        separable_field(_neg(ab), _neg(dab), _neg(d2ab), *one, name="w_right"),
        separable_field(*one, _neg(ab), _neg(dab), _neg(d2ab), name="w_top"),
        separable_field(_neg(a), _neg(da), _neg(d2a), *one, name="w_left"),
    )
    z = (
        separable_field(a, da, d2a, a, da, d2a, name="z_bottom_left"),
        separable_field(ab, dab, d2ab, a, da, d2a, name="z_bottom_right"),
        separable_field(ab, dab, d2ab, ab, dab, d2ab, name="z_top_right"),
        separable_field(a, da, d2a, ab, dab, d2ab, name="z_top_left"),
    )
    return LayerDecomposition(v0=constant_field(1.0), w=w, z=z)
