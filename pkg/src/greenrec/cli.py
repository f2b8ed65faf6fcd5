"""greenrec command line: derive, eval, verify, qbx and experiment subcommands.

Exit codes: 0 success, 2 usage or validation error, 3 numerical certification
failure, 1 internal error.
"""

import argparse
import csv
import hashlib
import math
import os
from pathlib import Path
import re
import sys

import numpy as np

from .errors import (
    CapabilityError,
    ConfigError,
    DegenerateFitError,
    DomainError,
    GeometryError,
    GreenrecError,
    ParseError,
    ReferenceNotConverged,
)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_CERT = 0, 1, 2, 3
CACHE_ENV = "GREENREC_CACHE_DIR"
RESIDUAL_TOL = 1e-8


class CertificationFailure(GreenrecError):
    """A verification or convergence check did not pass."""


def fmt(v):
    return format(float(v), ".17g")


def _out(stream, line=""):
    stream.write(line + "\n")


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text, count=None, name="value"):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise ConfigError(f"{name} needs {count} numbers")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{name} must be finite")
    return vals


def _ints(text, name):
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated integers, got {text!r}") from None


def _int_range(text):
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if not m or int(m.group(1)) > int(m.group(2)):
        raise ConfigError(f"range must look like 1..12, got {text!r}")
    return range(int(m.group(1)), int(m.group(2)) + 1)


def _kernel_from_args(args):
    from .kernels import get_kernel

    return get_kernel(args.kernel, args.k)


def _add_kernel(p, required=True, default=None):
    from .kernels import BUILTIN_IDS

    p.add_argument("--kernel", choices=BUILTIN_IDS, required=required, default=default,
                   help="builtin Green's function")
    p.add_argument("--k", type=float, default=None, help="wave number for Helmholtz and Yukawa kernels")


# ---------------------------------------------------------------------------
# artifact cache


def cache_dir():
    base = os.environ.get(CACHE_ENV)
    if base:
        return Path(base)
    root = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(root) / "greenrec"


def pde_key(pde):
    from .pde2ode import dump_pde_spec

    return hashlib.sha256(dump_pde_spec(pde).encode()).hexdigest()


def write_artifacts(directory, pde, derived):
    from .pde2ode import dump_pde_spec
    from .recurrence import dump_ode, dump_recurrence

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {"pde.json": dump_pde_spec(pde), "ode.json": dump_ode(derived.ode),
             "large.json": dump_recurrence(derived.large), "small.json": dump_recurrence(derived.small)}
    for name, text in files.items():
        tmp = directory / (name + ".tmp")
        tmp.write_text(text)
        tmp.replace(directory / name)  # atomic, so concurrent readers never see half a file


def read_artifacts(directory):
    from .evaluator import Derived
    from .recurrence import load_ode, load_recurrence

    directory = Path(directory)
    return Derived(load_ode((directory / "ode.json").read_text()),
                   load_recurrence((directory / "large.json").read_text()),
                   load_recurrence((directory / "small.json").read_text()))


def load_or_derive(pde):
    """Derived artifacts for ``pde``, from the cache when present."""
    from .evaluator import derive

    where = cache_dir() / pde_key(pde)
    if (where / "small.json").exists():
        try:
            return read_artifacts(where)
        except (ParseError, KeyError, ValueError, OSError):
            pass  # unreadable cache entry: derive again and overwrite it
    derived = derive(pde)
    try:
        write_artifacts(where, pde, derived)
    except OSError:
        pass  # a read-only cache only costs a re-derivation next time
    return derived


# ---------------------------------------------------------------------------
# derive


def cmd_derive(args, out):
    from .pde2ode import parse_pde_spec
    from .recurrence import recurrence_order

    if args.pde:
        try:
            text = Path(args.pde).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.pde}: {exc.strerror}") from None
        pde = parse_pde_spec(text)
    else:
        pde = _kernel_from_args(args).pde
    derived = load_or_derive(pde)
    write_artifacts(args.out, pde, derived)
    a = derived.ode.order
    h = derived.ode.highest_x1_power()
    _out(out, f"ode order a = {a}")
    _out(out, f"highest x1 power h = {h}")
    _out(out, f"large recurrence order = {recurrence_order(derived.large)} (bound a + h = {a + h})")
    _out(out, f"small recurrence order = {recurrence_order(derived.small)}")
    _out(out, f"artifacts written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args, out):
    from .evaluator import HybridConfig, HybridEvaluator
    from .kernels import oracle_derivatives

    kernel = _kernel_from_args(args)
    point = _floats(args.point, kernel.dimension, "--point")
    if args.P < 0:
        raise ConfigError("--P must be non-negative")
    cfg = HybridConfig(xi=args.xi, p_small=args.p_small, P=args.P, precision=args.precision)
    ev = HybridEvaluator(kernel, cfg, load_or_derive(kernel.pde))
    seq = ev.evaluate(np.array(point), args.P)
    ref = None
    if args.check:
        ref = np.array([complex(v) for v in oracle_derivatives(kernel, tuple(point), args.P).values])
    cols = ["n", "branch", "value_re", "value_im"] + (["rel_error"] if args.check else [])
    rows = []
    for i, v in enumerate(seq.values):
        v = complex(v)
        row = [str(i), seq.branch, fmt(v.real), fmt(v.imag)]
        if ref is not None:
            err = abs(v - ref[i]) / abs(ref[i]) if ref[i] != 0 else abs(v - ref[i])
            row.append(fmt(err))
        rows.append(row)
    if args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(cols)
        w.writerows(rows)
    else:
        widths = [max(len(c), *(len(r[j]) for r in rows)) for j, c in enumerate(cols)]
        _out(out, "  ".join(c.rjust(wd) for c, wd in zip(cols, widths)))
        for r in rows:
            _out(out, "  ".join(c.rjust(wd) for c, wd in zip(r, widths)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _random_points(dim, count, seed):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        x = rng.uniform(-2, 2, dim)
        # off-axis and away from the origin
        if abs(x[0]) > 0.05 and np.linalg.norm(x[1:]) > 0.05:
            pts.append(tuple(float(v) for v in x))
    return pts


def verify_kernel(kernel, derived, points, n_max):
    """(ode residual, large residual, small residual), each a max over the points."""
    from .evaluator import small_seed_top
    from .pde2ode import verify_ode
    from .recurrence import recurrence_residual

    ode = verify_ode(derived.ode, kernel, points)
    large = max(recurrence_residual(derived.large, kernel, p, n_max) for p in points)
    first = small_seed_top(derived.small) + 2
    small = max(recurrence_residual(derived.small, kernel, p, n_max, n_min=first) for p in points)
    return ode, large, small


def cmd_verify(args, out):
    from .kernels import BUILTIN_IDS, get_kernel
    from .pde2ode import parse_pde_spec

    if args.pde:
        try:
            parse_pde_spec(Path(args.pde).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {args.pde}: {exc.strerror}") from None
        print("warning: custom PDE has no oracle; verification skipped", file=sys.stderr)
        _out(out, "SKIP custom: no oracle")
        return EXIT_OK
    if args.all:
        kernels = [get_kernel(kid, 1.0 if kid[:4] in ("helm", "yuka") else None) for kid in BUILTIN_IDS]
    elif args.kernel:
        kernels = [_kernel_from_args(args)]
    else:
        raise ConfigError("give --kernel, --all or --pde")
    failed = False
    for kernel in kernels:
        if args.artifacts:
            try:
                derived = read_artifacts(args.artifacts)
            except OSError as exc:
                raise ConfigError(f"cannot read artifacts: {exc}") from None
        else:
            derived = load_or_derive(kernel.pde)
        points = _random_points(kernel.dimension, args.points, args.seed)
        res = verify_kernel(kernel, derived, points, args.n_max)
        ok = max(res) <= RESIDUAL_TOL
        failed |= not ok
        _out(out, f"{'PASS' if ok else 'FAIL'} {kernel.id} ode={res[0]:.3e} large={res[1]:.3e} small={res[2]:.3e}")
    if failed:
        raise CertificationFailure(f"residuals above {RESIDUAL_TOL:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# qbx


def parse_density(name):
    if name in ("one", "1"):
        return lambda t: np.ones_like(t)
    m = re.fullmatch(r"cos(\d+)t", name)
    if m:
        freq = int(m.group(1))
        return lambda t: np.cos(freq * t)
    raise ConfigError(f"density must be 'one' or 'cos<m>t', got {name!r}")


def cmd_qbx(args, out):
    from .evaluator import HybridConfig
    from .experiments import flop_comparison
    from .qbx import QbxConfig, discretize_ellipse, reference_potential, single_layer_qbx

    if args.p < 0:
        raise ConfigError("--p must be non-negative")
    if args.flops:
        rep = flop_comparison(args.kernel or "helmholtz2d", _int_range(args.p_range), k=args.k)
        _emit(rep.to_csv(), args.out, out)
        return EXIT_OK
    a, b = _floats(args.ellipse, 2, "--ellipse")
    if a <= 0 or b <= 0:
        raise ConfigError("ellipse semi-axes must be positive")
    density = parse_density(args.density)
    curve = discretize_ellipse(a, b, args.N)
    kinds = ["recurrence", "direct"] if args.backend == "both" else [args.backend]
    vals = {}
    for kind in kinds:
        cfg = QbxConfig(p_qbx=args.p, radius_factor=args.radius_factor, backend=kind, oversample=args.oversample,
                        hybrid=HybridConfig(xi=args.xi, p_small=args.p_small, P=args.p), jobs=args.jobs)
        vals[kind] = single_layer_qbx(curve, density, None, cfg)
    ref = reference_potential(curve, density)
    scale = np.max(np.abs(ref))
    cols = ["node", "t", "x", "y", "reference"]
    for kind in kinds:
        cols += [kind, f"{kind}_rel_error"]
    if len(kinds) == 2:
        cols.append("backend_agreement")
    lines = [",".join(cols)]
    for i in range(curve.N):
        row = [str(i), fmt(curve.t[i]), fmt(curve.nodes[0, i]), fmt(curve.nodes[1, i]), fmt(ref[i])]
        for kind in kinds:
            row += [fmt(vals[kind][i]), fmt(abs(vals[kind][i] - ref[i]) / scale)]
        if len(kinds) == 2:
            row.append(fmt(abs(vals["recurrence"][i] - vals["direct"][i]) / np.max(np.abs(vals["direct"]))))
        lines.append(",".join(row))
    _emit("\n".join(lines) + "\n", args.out, out)
    for kind in kinds:
        print(f"{kind}: max relative error {np.max(np.abs(vals[kind] - ref)) / scale:.3e}", file=sys.stderr)
    return EXIT_OK


def _emit(text, path, out):
    if path:
        Path(path).write_text(text)
    else:
        out.write(text)


# ---------------------------------------------------------------------------
# experiment


def cmd_experiment(args, out):
    from . import experiments as ex

    kernel = args.kernel or "laplace2d"
    if args.id == "heatmap":
        grid = ex.GridSpec(resolution=args.resolution)
        n = 9 if args.n is None else args.n
        rep = ex.error_heatmap(kernel, n, grid, args.mode, args.xi, args.p_small, k=args.k, jobs=args.jobs)
    elif args.id == "slope":
        rep = ex.slope_fit(kernel, 9 if args.n is None else args.n, seed=args.seed, k=args.k)
    elif args.id == "assumptions":
        rep = ex.assumption_heatmap(kernel, args.c, args.d_even, ex.GridSpec(resolution=args.resolution), k=args.k)
    elif args.id == "qbx-table":
        hybrid = ex.HybridConfig(xi=args.xi, p_small=args.p_small)
        rep = ex.qbx_error_table(_ints(args.N_list, "--N-list"), _ints(args.p_list, "--p-list"),
                                 hybrid=hybrid, jobs=args.jobs)
    else:
        rep = ex.flop_comparison(args.kernel or "helmholtz2d", _int_range(args.p_range), k=args.k)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    path = Path(args.out_dir) / f"{args.id}.csv"
    rep.write(path)
    for key in sorted(rep.summary):
        v = rep.summary[key]
        _out(out, f"{key} = {fmt(v) if isinstance(v, float) else v}")
    _out(out, f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="greenrec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="derive the ODE and both recurrences for a PDE")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pde", help="JSON PDE description")
    src.add_argument("--kernel", help="builtin kernel id")
    p.add_argument("--k", type=float, default=None, help="wave number for Helmholtz and Yukawa kernels")
    p.add_argument("--out", required=True, help="directory for the artifacts")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("eval", help="evaluate d^0..d^P along x1 at one point")
    _add_kernel(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates, e.g. 3,4")
    p.add_argument("--P", type=int, default=9, help="highest derivative order (default 9)")
    p.add_argument("--xi", type=float, default=50.0, help="region switch |x1|/xbar = 1/xi (default 50)")
    p.add_argument("--p-small", type=int, default=8, help="Taylor order of the small-|x1| branch (default 8)")
    p.add_argument("--precision", choices=("double", "extended"), default="double")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--check", action="store_true", help="add the relative error against the oracle")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="check ODE and recurrence residuals on oracle derivatives")
    _add_kernel(p, required=False)
    p.add_argument("--all", action="store_true", help="verify every builtin kernel")
    p.add_argument("--pde", help="custom JSON PDE (no oracle: reported as skipped)")
    p.add_argument("--artifacts", help="verify the artifacts in this directory instead of a fresh derivation")
    p.add_argument("--points", type=int, default=20, help="random off-axis points (default 20)")
    p.add_argument("--n-max", type=int, default=12, help="highest recurrence index checked (default 12)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("qbx", help="single-layer potential on an ellipse, or flop counts with --flops")
    p.add_argument("--ellipse", default="2,1", help="semi-axes a,b (default 2,1)")
    p.add_argument("--density", default="cos10t", help="'one' or 'cos<m>t' (default cos10t)")
    p.add_argument("--p", type=int, default=5, help="QBX order (default 5)")
    p.add_argument("--N", type=int, default=400, help="number of curve nodes (default 400)")
    p.add_argument("--backend", choices=("recurrence", "direct", "both"), default="recurrence")
    p.add_argument("--radius-factor", type=float, default=2.5, help="expansion radius over node spacing")
    p.add_argument("--oversample", type=int, default=4, help="source grid refinement factor (default 4)")
    p.add_argument("--xi", type=float, default=50.0)
    p.add_argument("--p-small", type=int, default=8)
    p.add_argument("--flops", action="store_true", help="count flops per line-Taylor expansion instead")
    p.add_argument("--p-range", default="1..12", help="orders for --flops (default 1..12)")
    _add_kernel(p, required=False)
    p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--out", help="CSV file (default stdout)")
    p.set_defaults(func=cmd_qbx)

    p = sub.add_parser("experiment", help="run one study and write <out-dir>/<id>.csv")
    p.add_argument("id", choices=("heatmap", "slope", "assumptions", "qbx-table", "flops"))
    _add_kernel(p, required=False)
    p.add_argument("--n", type=int, default=None, help="derivative order (heatmap, slope; default 9)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("large", "small", "hybrid"), default="hybrid")
    p.add_argument("--resolution", type=int, default=64, help="grid points per axis (default 64)")
    p.add_argument("--xi", type=float, default=50.0)
    p.add_argument("--p-small", type=int, default=8)
    p.add_argument("--c", type=int, default=5, help="odd order for assumptions (default 5)")
    p.add_argument("--d-even", type=int, default=6, help="even order for assumptions (default 6)")
    p.add_argument("--N-list", default="200,400,800", help="node counts for qbx-table")
    p.add_argument("--p-list", default="5,7,9,11", help="QBX orders for qbx-table")
    p.add_argument("--p-range", default="1..12", help="orders for flops")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default=".", help="output directory (default .)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except (ConfigError, ParseError, DomainError, CapabilityError, GeometryError, DegenerateFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReferenceNotConverged, CertificationFailure) as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except Exception as exc:  # noqa: BLE001 - last-resort handler maps to the internal exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
