"""``spectral-dc`` command-line front end.

Exit codes: 0 success, 2 bad input or parse error, 3 numerical-contract
failure, 4 precision floor.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import bench, mmio
from .errors import InvalidInputError, SpectralError
from .spectral_apps import (
    condition_number,
    hermitian_diagonalize,
    hermitian_eigenvalues,
    spectral_gap,
    svd,
)

THREADS_ENV = "SPECTRAL_DC_THREADS"


class ContractFailure(SpectralError):
    """A recomputed residual exceeded its certified bound."""


def _threads(arg):
    env = os.environ.get(THREADS_ENV)
    raw = env if env not in (None, "") else arg
    if raw is None:
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise InvalidInputError(f"thread count {raw!r} is not an integer") from None
    if k < 1:
        raise InvalidInputError(f"thread count must be positive, got {k}")
    return k


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _norm2(a):
    return float(np.linalg.norm(a, 2))


def cmd_eig(args):
    a = mmio.read(args.input)
    out = _out_dir(args)
    if args.values_only:
        lam = hermitian_eigenvalues(a, args.eps, args.backend)
        mmio.write_vector_csv(out / "eigenvalues.csv", lam)
        print(f"wrote {lam.size} eigenvalues to {out / 'eigenvalues.csv'}")
        return 0
    d = hermitian_diagonalize(a, args.eps, args.backend)
    mmio.write_vector_csv(out / "eigenvalues.csv", d.lambdas)
    mmio.write(out / "eigenvectors.mtx", d.U)
    n = a.shape[0]
    scale = max(_norm2(a), np.finfo(float).tiny)
    res = _norm2(a - (d.U * d.lambdas) @ d.U.conj().T) / scale
    orth = _norm2(d.U.conj().T @ d.U - np.eye(n))
    print(f"residual |A - Q L Q^*| / |A| = {res:.3e} (bound {args.eps:.3e})")
    print(f"orthogonality |Q^* Q - I| = {orth:.3e} (bound {d.orth_bound:.3e})")
    if res > args.eps or orth > d.orth_bound:
        raise ContractFailure("recomputed residuals exceed the certified bounds")
    return 0


def cmd_svd(args):
    a = mmio.read(args.input)
    out = _out_dir(args)
    r = svd(a, args.eps, args.backend)
    mmio.write_vector_csv(out / "singular_values.csv", r.Sigma)
    if args.vectors:
        mmio.write(out / "U.mtx", r.U)
        mmio.write(out / "V.mtx", r.V)
    ou, ov, res = r.residuals(a)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    print(f"residual |A - U S V^*| / |A|_F = {res / scale:.3e} (bound {args.eps:.3e})")
    print(f"orthogonality |U^*U - I| = {ou:.3e}, |V^*V - I| = {ov:.3e}")
    return 0


def _emit_json(args, name, payload):
    text = json.dumps(payload)
    print(text)
    if args.out is not None:
        out = _out_dir(args)
        (out / name).write_text(text + "\n")


def cmd_gap(args):
    a = mmio.read(args.input)
    g = spectral_gap(a, args.k, args.eps, backend=args.backend)
    _emit_json(args, "gap.json", {"mu": g.mu_k, "gap": g.gap_k, "iterations": g.iterations})
    return 0


def cmd_cond(args):
    a = mmio.read(args.input)
    _emit_json(args, "cond.json", {"kappa": condition_number(a, args.backend)})
    return 0


def _sizes(text):
    if text is None:
        return None
    text = text.strip()
    if not text:
        return []
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InvalidInputError(f"--sizes expects comma-separated integers, got {text!r}") from None


def cmd_bench(args):
    report = bench.run([args.suite], _sizes(args.sizes), args.eps, args.backend, args.seed)
    if args.out is not None:
        bench.write_report(report, args.out, plots=not args.no_plots)
    print(json.dumps(report, indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="spectral-dc", description="Hermitian eigensolvers and spectral utilities.")
    p.add_argument("--threads", type=int, default=None,
                   help=f"BLAS threads (default: all cores; {THREADS_ENV} overrides)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, eps):
        sp.add_argument("input", help="MatrixMarket file")
        sp.add_argument("--eps", type=float, default=eps)
        sp.add_argument("--backend", choices=("exact", "fmm"), default="fmm")

    e = sub.add_parser("eig", help="eigenvalues and eigenvectors of a Hermitian matrix")
    common(e, 1e-10)
    e.add_argument("--values-only", action="store_true")
    e.add_argument("--out", default=".")
    e.set_defaults(func=cmd_eig)

    s = sub.add_parser("svd", help="singular value decomposition")
    common(s, 1e-6)
    s.add_argument("--vectors", action="store_true", help="also write U.mtx and V.mtx")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_svd)

    g = sub.add_parser("gap", help="spectral gap between eigenvalues k and k+1")
    common(g, 1e-2)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gap)

    c = sub.add_parser("cond", help="condition number estimate")
    c.add_argument("input", help="MatrixMarket file")
    c.add_argument("--backend", choices=("exact", "fmm"), default="fmm")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_cond)

    b = sub.add_parser("bench", help="flop-count scaling benchmarks")
    b.add_argument("--suite", choices=("fmm", "dc", "reduce", "all"), default="all")
    b.add_argument("--sizes", default=None, help="comma-separated sizes; empty runs nothing")
    b.add_argument("--eps", type=float, default=1e-6)
    b.add_argument("--backend", choices=("exact", "fmm"), default="fmm")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="directory for report.json, .dat files and plots")
    b.add_argument("--no-plots", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with threadpool_limits(limits=_threads(args.threads)):
            return args.func(args)
    except SpectralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InvalidInputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
