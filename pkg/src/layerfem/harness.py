"""Error norms, single-case solves and convergence sweeps."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import assemble
from .fespace import FeFunction, FeSpace, build_space
from .interp import build_Ps
from .linsolve import cg_solve
from .meshgen import MeshParams, MeshParamError, TensorMesh2D
from .problem import (manufactured_decomposition, manufactured_rhs, manufactured_solution,
                      reaction_coefficient)

log = logging.getLogger(__name__)

NORMS = ("L2", "H1semi", "energy", "balanced")
ERROR_KINDS = ("balanced", "energy", "supercloseness")
DEFAULT_EPS = (1e-3, 1e-4, 1e-5, 1e-6)
CSV_HEADER = ["kind", "k", "sigma", "epsilon", "N", "dofs",
              "err_balanced", "err_energy", "err_superclose"]
AGG_HEADER = ["N", "e_c", "p_c", "e_s", "p_s"]


def _values_at_quadrature(obj, space: FeSpace, nq: int):
    if isinstance(obj, FeFunction):
        if obj.space is not space:
            raise ValueError("finite-element functions live on different spaces")
        return obj.at_quadrature(nq)
    X, Y, _, _, _, _ = space.quadrature_points(nq)
    v = np.asarray(obj.value(X, Y), dtype=float) * np.ones_like(X)
    gx, gy = obj.gradient(X, Y)
    return v, np.asarray(gx) * np.ones_like(X), np.asarray(gy) * np.ones_like(X)


def norm_error(exact, fe: FeFunction, mode: str = "balanced", epsilon: float | None = None,
               nq: int | None = None) -> float:
    """``||exact - fe||`` in the L2, H1-seminorm, energy or balanced norm.

    ``exact`` is a :class:`ScalarField` or a :class:`FeFunction` on the same
    space. Integrals use a tensor Gauss rule with ``k+3`` points per direction.
    """
    if mode not in NORMS:
        raise ValueError(f"mode must be one of {NORMS}")
    if mode in ("energy", "balanced") and epsilon is None:
        raise ValueError(f"mode {mode!r} needs epsilon")
    space = fe.space
    nq = space.k + 3 if nq is None else nq
    _, _, JW, _, _, _ = space.quadrature_points(nq)
    ev, egx, egy = _values_at_quadrature(exact, space, nq)
    fv, fgx, fgy = fe.at_quadrature(nq)
    l2 = float(np.sum(np.sum((ev - fv) ** 2 * JW, axis=1)))
    h1 = float(np.sum(np.sum(((egx - fgx) ** 2 + (egy - fgy) ** 2) * JW, axis=1)))
    if mode == "L2":
        return math.sqrt(l2)
    if mode == "H1semi":
        return math.sqrt(h1)
    if mode == "energy":
        return math.sqrt(epsilon ** 2 * h1 + l2)
    return math.sqrt(epsilon * h1 + l2)


@dataclass(frozen=True)
class Case:
    kind: str
    k: int
    sigma: float
    epsilon: float
    N: int
    beta: float = 1.0
    c1: float | None = None   # None -> 4 sigma / (3 beta) for kopteva

    def mesh_params(self) -> MeshParams:
        if self.kind == "kopteva" and self.c1 is not None:
            return MeshParams(N=self.N, epsilon=self.epsilon, sigma=self.sigma,
                              beta=self.beta, kind=self.kind, c1=self.c1)
        return MeshParams.with_auto_c1(self.N, self.epsilon, self.sigma, self.beta, self.kind)


@dataclass
class Row:
    kind: str
    k: int
    sigma: float
    epsilon: float
    N: int
    dofs: int
    err_balanced: float | None = None
    err_energy: float | None = None
    err_superclose: float | None = None
    iterations: int = 0


@dataclass
class CaseResult:
    solution: FeFunction
    row: Row
    space: FeSpace


def solve_case(case: Case, errors=("balanced",), tol: float = 1e-12) -> CaseResult:
    """Mesh, assemble, solve and measure the requested errors for one case."""
    params = case.mesh_params()
    mesh = TensorMesh2D.from_params(params)
    space = build_space(mesh, case.k)
    eps = case.epsilon
    b = reaction_coefficient()
    u = manufactured_solution(eps)
    pair = assemble(space, eps, b, manufactured_rhs(eps), beta=case.beta, with_gram=False)
    res = cg_solve(pair.matrix, pair.rhs, rel_tol=tol)
    uN = FeFunction(space, pair.to_global(res.x))
    row = Row(case.kind, case.k, case.sigma, eps, case.N, space.ndofs, iterations=res.iterations)
    if "balanced" in errors:
        row.err_balanced = norm_error(u, uN, "balanced", eps)
    if "energy" in errors:
        row.err_energy = norm_error(u, uN, "energy", eps)
    if "supercloseness" in errors:
        ps = build_Ps(manufactured_decomposition(eps), space, b)
        row.err_superclose = norm_error(ps.function, uN, "balanced", eps)
    log.info("case %s: %s", case, row)
    return CaseResult(uN, row, space)


# --- sweeps -------------------------------------------------------------------------

@dataclass
class RunConfig:
    kind: str = "roos"
    k: int = 1
    sigma: float = 2.0
    beta: float = 1.0
    c1: float | None = None
    eps: tuple = DEFAULT_EPS
    Ns: tuple = (12, 24, 48, 96)
    errors: tuple = ("balanced",)
    tol: float = 1e-12

    def validate(self) -> None:
        if self.k not in (1, 2, 3):
            raise MeshParamError(f"k must be 1, 2 or 3, got {self.k}")
        if any(e not in ERROR_KINDS for e in self.errors):
            raise MeshParamError(f"errors must be drawn from {ERROR_KINDS}")
        Ns = list(self.Ns)
        if any(b <= a for a, b in zip(Ns, Ns[1:])):
            raise MeshParamError("N list must be strictly increasing")
        for N in Ns:
            MeshParams(N=N, epsilon=min(self.eps), sigma=self.sigma, beta=self.beta,
                       kind="roos").validate()

    def cases(self):
        """Admissible cases in ``(N, eps)`` order, and the excluded pairs."""
        ok, excluded = [], []
        for N in self.Ns:
            for eps in self.eps:
                case = Case(self.kind, self.k, self.sigma, eps, N, self.beta, self.c1)
                problems = case.mesh_params().violations()
                if problems:
                    excluded.append((N, eps, "; ".join(problems)))
                else:
                    ok.append(case)
        return ok, excluded


def rate(e_coarse: float, e_fine: float) -> float:
    return (math.log(e_coarse) - math.log(e_fine)) / math.log(2.0)


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    def aggregate(self, attr: str) -> dict:
        """Maximum over epsilon of an error column, per N."""
        out = {}
        for r in self.rows:
            v = getattr(r, attr)
            if v is None:
                continue
            out[r.N] = max(out.get(r.N, -np.inf), v)
        return dict(sorted(out.items()))

    def orders(self, attr: str) -> dict:
        agg = self.aggregate(attr)
        Ns = list(agg)
        return {a: rate(agg[a], agg[b]) for a, b in zip(Ns, Ns[1:]) if b == 2 * a}

    @property
    def e_c(self):
        return self.aggregate("err_balanced")

    @property
    def e_s(self):
        return self.aggregate("err_superclose")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        fmt = _fmt
        for r in self.rows:
            w.writerow([r.kind, r.k, fmt(r.sigma), fmt(r.epsilon), r.N, r.dofs,
                        fmt(r.err_balanced), fmt(r.err_energy), fmt(r.err_superclose)])
        w.writerow([])
        w.writerow(AGG_HEADER)
        ec, es = self.e_c, self.e_s
        pc, ps = self.orders("err_balanced"), self.orders("err_superclose")
        for N in sorted({r.N for r in self.rows}):
            w.writerow([N, fmt(ec.get(N)), fmt(pc.get(N)), fmt(es.get(N)), fmt(ps.get(N))])
        return buf.getvalue()

    def plot_data(self, attr: str) -> str:
        lines = ["log10(N),log10(err)"]
        for N, e in self.aggregate(attr).items():
            lines.append(f"{math.log10(N)!r},{math.log10(e)!r}")
        return "\n".join(lines) + "\n"

    def format(self) -> str:
        out = []
        ec, es = self.e_c, self.e_s
        pc, ps = self.orders("err_balanced"), self.orders("err_superclose")
        out.append(f"{'N':>6} {'e_c':>11} {'p_c':>6} {'e_s':>11} {'p_s':>6}")
        for N in sorted({r.N for r in self.rows}):
            out.append(f"{N:>6} {_fmt(ec.get(N), '.3e'):>11} {_fmt(pc.get(N), '.2f'):>6} "
                       f"{_fmt(es.get(N), '.3e'):>11} {_fmt(ps.get(N), '.2f'):>6}")
        for N, eps, why in self.excluded:
            out.append(f"excluded N={N} eps={eps:g}: {why}")
        return "\n".join(out)


def _fmt(v, spec=None):
    if v is None:
        return ""
    return format(v, spec) if spec else repr(float(v))


def run_convergence(cfg: RunConfig) -> ConvergenceTable:
    cfg.validate()
    cases, excluded = cfg.cases()
    for N, eps, why in excluded:
        log.warning("excluding N=%d eps=%g: %s", N, eps, why)
    table = ConvergenceTable(excluded=excluded)
    for case in cases:
        table.rows.append(solve_case(case, cfg.errors, cfg.tol).row)
    return table


def fitted_slope(agg: dict) -> float:
    """Least-squares slope of ``-log e`` against ``log N``."""
    Ns = np.array(list(agg), dtype=float)
    es = np.array(list(agg.values()), dtype=float)
    return float(-np.polyfit(np.log(Ns), np.log(es), 1)[0])


def write_outputs(table: ConvergenceTable, path, errors) -> list:
    path = Path(path)
    path.write_text(table.to_csv())
    written = [path]
    attrs = {"balanced": "err_balanced", "energy": "err_energy",
             "supercloseness": "err_superclose"}
    for e in errors:
        p = path.with_name(f"{path.stem}_{e}_loglog.csv")
        p.write_text(table.plot_data(attrs[e]))
        written.append(p)
    return written
