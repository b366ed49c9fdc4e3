"""Command line entry point ``layerfem``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from .harness import ERROR_KINDS, RunConfig, run_convergence, write_outputs
from .linsolve import SolverError
from .meshgen import MeshParamError, MeshParams, build_mesh, dump_mesh, verify_lemma1

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v)


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v)


def _errors(text):
    out = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [v for v in out if v not in ERROR_KINDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown error kind(s) {bad}; choose from {ERROR_KINDS}")
    return out


def _c1(text):
    return None if text == "auto" else float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="layerfem",
                                description="Q_k FEM on Bakhvalov-type meshes for "
                                            "-eps^2 Lap u + b u = f")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def mesh_opts(q):
        q.add_argument("--mesh", choices=("roos", "kopteva"), default="roos")
        q.add_argument("--sigma", type=float, default=None,
                       help="grading exponent (default k+1)")
        q.add_argument("--beta", type=float, default=1.0)
        q.add_argument("--c1", type=_c1, default=None, help="'auto' or a value")
        q.add_argument("--eps", type=_floats, default=(1e-3, 1e-4, 1e-5, 1e-6))
        q.add_argument("--N", type=_ints, default=(12, 24, 48, 96))

    run = sub.add_parser("run", help="convergence sweep, writes CSV")
    mesh_opts(run)
    run.add_argument("--k", type=int, default=1)
    run.add_argument("--errors", type=_errors, default=("balanced",))
    run.add_argument("--tol", type=float, default=1e-12)
    run.add_argument("--out", default="convergence.csv")

    chk = sub.add_parser("check-mesh", help="report mesh inequalities")
    mesh_opts(chk)
    chk.add_argument("--k", type=int, default=1)
    chk.add_argument("--dump", default=None, help="write the 1-D points of the first mesh")

    sub.add_parser("verify", help="run the built-in property checks")
    return p


def _cmd_run(args) -> int:
    sigma = args.sigma if args.sigma is not None else args.k + 1.0
    cfg = RunConfig(kind=args.mesh, k=args.k, sigma=sigma, beta=args.beta, c1=args.c1,
                    eps=args.eps, Ns=args.N, errors=args.errors, tol=args.tol)
    table = run_convergence(cfg)
    for path in write_outputs(table, args.out, cfg.errors):
        print(f"wrote {path}")
    print(table.format())
    return EXIT_OK


def _cmd_check_mesh(args) -> int:
    sigma = args.sigma if args.sigma is not None else args.k + 1.0
    status = EXIT_OK
    first = True
    for N in args.N:
        for eps in args.eps:
            if args.mesh == "kopteva" and args.c1 is not None:
                params = MeshParams(N=N, epsilon=eps, sigma=sigma, beta=args.beta,
                                    kind="kopteva", c1=args.c1)
            else:
                params = MeshParams.with_auto_c1(N, eps, sigma, args.beta, args.mesh)
            problems = params.violations()
            if problems:
                print(f"skip N={N} eps={eps:g}: {'; '.join(problems)}")
                continue
            mesh = build_mesh(params)
            rep = verify_lemma1(mesh, strict=False)
            print(rep.format())
            if not rep.ok:
                status = EXIT_CONFIG
            if first and args.dump:
                dump_mesh(mesh, args.dump)
                first = False
    return status


def _cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", UserWarning)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check-mesh":
            return _cmd_check_mesh(args)
        return _cmd_verify(args)
    except MeshParamError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
