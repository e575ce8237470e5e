"""Command-line front end.

Subcommands:
    bound          entropy bound for one (X, Y) pair, optionally certified
    sweep          CSV map of the bound vs the CHSH bound over the quantum set
    keyrate-curve  CSV of optimized key rates vs detection efficiency
    thresholds     CSV of critical detection efficiencies (Table-style rows)
    certify        certified bound at one operating point

CSV files start with '#'-prefixed manifest comments (inputs, seed, version,
wall time); numeric cells use 17 significant digits so re-runs with the
same seed are byte-identical in the body.

Exit codes: 0 ok, 2 validation error, 3 work budget exceeded, 4 I/O error.
"""

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .correlators import Correlators, normalize_signs
from .easy_bound import chsh_entropy_bound
from .certify import certify_point
from .errors import BudgetExceeded, DiqkdError
from .hard_bound import entropy_bound_xy
from .keyrate import METHODS, critical_efficiency, optimize_rate

DEFAULT_SEED = 20210412
FMT = "%.17g"


@dataclass
class RunManifest:
    subcommand: str
    inputs: dict
    seed: int
    version: str = __version__
    wall_time: float = 0.0

    def header_lines(self):
        lines = [
            f"# diqkd-xy {self.version}",
            f"# subcommand: {self.subcommand}",
            f"# seed: {self.seed}",
        ]
        for k in sorted(self.inputs):
            lines.append(f"# {k}: {self.inputs[k]}")
        lines.append(f"# wall_time_s: {self.wall_time:.3f}")
        return lines


def _write_csv(path, manifest, columns, rows):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for line in manifest.header_lines():
                fh.write(line + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(FMT % v if isinstance(v, float) else str(v)
                                  for v in row) + "\n")
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc


class _IOFailure(Exception):
    pass


def _q_of(args):
    if getattr(args, "p", None) is not None:
        return (1.0 - 2.0 * args.p) ** 2
    if getattr(args, "q", None) is not None:
        return args.q
    return 1.0


def cmd_bound(args):
    corr = normalize_signs(args.X, args.Y)
    q = _q_of(args)
    res = entropy_bound_xy(corr, q)
    print(f"H(A0|E) >= {res.value:.6f}   method={res.method} "
          f"omega={res.omega:.6f} beta={res.beta:.6f} q={q:g}")
    if args.certify:
        cert = certify_point(corr, q, res.omega, precision=args.precision,
                             seed=args.seed)
        print(cert.to_text())
        print(f"certified H(A0|E) >= {cert.entropy_lower_bound:.6f}")
    return 0


def cmd_certify(args):
    corr = normalize_signs(args.X, args.Y)
    q = _q_of(args)
    omega = args.omega if args.omega is not None else entropy_bound_xy(corr, q).omega
    cert = certify_point(corr, q, omega, precision=args.precision, seed=args.seed)
    print(cert.to_text())
    print(f"certified H(A0|E) >= {cert.entropy_lower_bound:.6f}")
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(cert.to_text() + "\n")
        except OSError as exc:
            raise _IOFailure(str(exc)) from exc
    return 0


def cmd_sweep(args):
    if not 0.005 <= args.step <= 0.2:
        raise DiqkdError(f"step must lie in [0.005, 0.2], got {args.step}")
    q = _q_of(args)
    t0 = time.perf_counter()
    rows = []
    grid = np.arange(args.step, 2.0 + 1e-12, args.step)
    for X in grid:
        for Y in grid:
            if X + Y <= 2.0 or X * X + Y * Y > 4.0:
                continue
            bxy = entropy_bound_xy(Correlators(float(X), float(Y)), q).value
            bchsh = chsh_entropy_bound(float(X + Y), q)
            rows.append((float(X), float(Y), bxy, bchsh, bxy - bchsh))
    manifest = RunManifest("sweep", {"step": args.step, "q": q}, args.seed)
    manifest.wall_time = time.perf_counter() - t0
    _write_csv(args.out, manifest, ["X", "Y", "bound_xy", "bound_chsh", "advantage"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_keyrate_curve(args):
    t0 = time.perf_counter()
    rows = []
    etas = np.arange(args.eta_min, args.eta_max + 1e-12, args.eta_step)
    warm_c, warm_x = None, None
    for eta in etas[::-1]:
        pc = optimize_rate(float(eta), args.model, "chsh-noisy", starts=args.starts,
                           seed=args.seed, warm=warm_c)
        px = optimize_rate(float(eta), args.model, "xy-noisy", starts=args.starts,
                           seed=args.seed, warm=warm_x)
        s = pc.setup
        warm_c = [[s.a0, s.a1, s.b0, s.b1, s.b2]
                  + ([s.theta] if args.model == "qubit" else []) + [s.p]]
        s = px.setup
        warm_x = [[s.a0, s.a1, s.b0, s.b1, s.b2]
                  + ([s.theta] if args.model == "qubit" else []) + [s.p]]
        # the xy rate dominates the chsh one; report the dominated pair as-is
        rows.append((float(eta), pc.rate, max(px.rate, pc.rate)))
    rows = rows[::-1]
    manifest = RunManifest(
        "keyrate-curve",
        {"model": args.model, "eta_min": args.eta_min, "eta_max": args.eta_max,
         "eta_step": args.eta_step, "starts": args.starts},
        args.seed,
    )
    manifest.wall_time = time.perf_counter() - t0
    _write_csv(args.out, manifest, ["eta", "r_chsh", "r_xy"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_thresholds(args):
    t0 = time.perf_counter()
    methods = args.methods.split(",") if args.methods else list(METHODS)
    for m in methods:
        if m not in METHODS:
            raise DiqkdError(f"unknown method {m!r}; choose from {METHODS}")
    rows = []
    for m in methods:
        eta_c = critical_efficiency(args.model, m, tol_eta=args.tol_eta, seed=args.seed)
        rows.append((m, float(eta_c)))
        print(f"{args.model} {m}: eta_critical = {eta_c:.4f}")
    manifest = RunManifest(
        "thresholds",
        {"model": args.model, "tol_eta": args.tol_eta, "methods": ",".join(methods)},
        args.seed,
    )
    manifest.wall_time = time.perf_counter() - t0
    _write_csv(args.out, manifest, ["method", "eta_critical"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="diqkd-xy",
        description="DIQKD security bounds from the correlator pair (X, Y)",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_noise(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--q", type=float, help="noise parameter q = (1-2p)^2")
        g.add_argument("--p", type=float, help="flip probability p")

    sp = sub.add_parser("bound", help="entropy bound for one (X, Y) pair")
    sp.add_argument("X", type=float)
    sp.add_argument("Y", type=float)
    add_noise(sp)
    sp.add_argument("--certify", action="store_true")
    sp.add_argument("--precision", type=float, default=1e-2)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("certify", help="certified bound at one operating point")
    sp.add_argument("X", type=float)
    sp.add_argument("Y", type=float)
    add_noise(sp)
    sp.add_argument("--omega", type=float, default=None)
    sp.add_argument("--precision", type=float, default=1e-2)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("sweep", help="grid sweep of bound_xy vs bound_chsh")
    sp.add_argument("--step", type=float, required=True)
    add_noise(sp)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("keyrate-curve", help="optimized key rates vs efficiency")
    sp.add_argument("--model", choices=("singlet", "qubit"), required=True)
    sp.add_argument("--eta-min", type=float, default=0.85)
    sp.add_argument("--eta-max", type=float, default=1.0)
    sp.add_argument("--eta-step", type=float, default=0.01)
    sp.add_argument("--starts", type=int, default=8)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_keyrate_curve)

    sp = sub.add_parser("thresholds", help="critical detection efficiencies")
    sp.add_argument("--model", choices=("singlet", "qubit"), required=True)
    sp.add_argument("--tol-eta", type=float, default=1e-3)
    sp.add_argument("--methods", default=None,
                    help="comma-separated subset of " + ",".join(METHODS))
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_thresholds)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (DiqkdError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
