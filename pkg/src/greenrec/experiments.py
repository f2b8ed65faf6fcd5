"""Desk-scale error, cost and assumption studies; every study returns an ExperimentReport."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import io
import math

import mpmath
import numpy as np

from .errors import ConfigError, DegenerateFitError
from .evaluator import HybridConfig, HybridEvaluator, _large_batch, _small_batch, single_step_relative_error
from .flops import FlopCounter
from .kernels import get_kernel, oracle_derivatives, oracle_derivatives_fast
from .qbx import (
    QbxConfig,
    discretize_ellipse,
    line_taylor_contribution,
    make_backend,
    reference_potential,
    single_layer_qbx,
)


@dataclass(frozen=True)
class GridSpec:
    x1_range: tuple = (1e-3, 10.0)
    x2_range: tuple = (1e-3, 10.0)
    resolution: int = 64
    spacing: str = "log"

    def __post_init__(self):
        if self.resolution < 16:
            raise ConfigError("grid resolution must be at least 16")
        if self.spacing not in ("log", "linear"):
            raise ConfigError("spacing is 'log' or 'linear'")
        for lo, hi in (self.x1_range, self.x2_range):
            if not lo < hi:
                raise ConfigError("grid ranges need lo < hi")
            if self.spacing == "log" and lo <= 0:
                raise ConfigError("log spacing needs positive ranges")
        x1, x2 = self.axes()
        if np.any(x1 == 0) and np.any(x2 == 0):
            raise ConfigError("grid contains the origin")

    def axes(self):
        make = np.geomspace if self.spacing == "log" else np.linspace
        return make(*self.x1_range, self.resolution), make(*self.x2_range, self.resolution)

    def points(self):
        """(2, resolution**2) with x1 varying slowest."""
        x1, x2 = self.axes()
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()])

    def as_params(self):
        return {"x1_range": f"{self.x1_range[0]:g}:{self.x1_range[1]:g}",
                "x2_range": f"{self.x2_range[0]:g}:{self.x2_range[1]:g}",
                "resolution": self.resolution, "spacing": self.spacing}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class ExperimentReport:
    id: str
    params: dict
    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        out = io.StringIO()
        out.write(f"# experiment={self.id}\n")
        for key in sorted(self.params):
            out.write(f"# {key}={_fmt(self.params[key])}\n")
        for key in sorted(self.summary):
            out.write(f"# summary.{key}={_fmt(self.summary[key])}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(_fmt(v) for v in row) + "\n")
        return out.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def column(self, name):
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows])


def _kernel(kernel, k=None):
    if isinstance(kernel, str):
        if kernel in ("helmholtz2d", "yukawa2d") and k is None:
            k = 1.0
        return get_kernel(kernel, k)
    return kernel


def _kernel_params(kernel):
    return {"kernel": kernel.id, "k": "none" if kernel.k is None else kernel.k}


# ---------------------------------------------------------------------------
# error heat map


def _oracle_chunk(args):
    kernel, pts, n, digits = args
    out = []
    for j in range(pts.shape[1]):
        v = oracle_derivatives(kernel, tuple(float(c) for c in pts[:, j]), n, digits).values[n]
        out.append(complex(v))
    return out


def oracle_column(kernel, pts, n, digits=30, jobs=1):
    """d^n along x1 at every column of pts, in binary64 from the high-precision oracle."""
    chunks = [pts[:, i:i + 256] for i in range(0, pts.shape[1], 256)]
    tasks = [(kernel, c, n, digits) for c in chunks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_oracle_chunk, tasks))
    else:
        parts = [_oracle_chunk(t) for t in tasks]
    vals = np.array([v for part in parts for v in part])
    return vals if kernel.is_complex else vals.real


def branch_values(kernel, pts, n, mode, cfg):
    """d^n from one branch (or the hybrid) at every column; NaN where a large step is singular."""
    ev = HybridEvaluator(kernel, cfg)
    if mode == "hybrid":
        b = ev.evaluate_batch(pts, n)
        return b.values[n], b.branch
    if mode == "large":
        D, _, singular = _large_batch(ev.large, kernel, pts, n, cfg.precision)
        vals = np.where(singular >= 0, np.nan, D[n])
        return vals, np.full(pts.shape[1], "large")
    if mode == "small":
        D, _, _ = _small_batch(ev.small, kernel, pts, n, cfg.p_small, cfg.precision)
        return D[n], np.full(pts.shape[1], "small")
    raise ConfigError(f"unknown mode {mode!r}; use large, small or hybrid")


def relative_errors(values, reference):
    ref = np.abs(reference)
    diff = np.abs(values - reference)
    return np.where(ref > 0, diff / np.where(ref > 0, ref, 1), diff)


def error_heatmap(kernel, n=9, grid=None, mode="hybrid", xi=50.0, p_small=8, k=None, digits=30, jobs=1):
    kernel = _kernel(kernel, k)
    grid = grid or GridSpec()
    cfg = HybridConfig(xi=xi, p_small=p_small, P=max(n, 0))
    pts = grid.points()
    vals, branch = branch_values(kernel, pts, n, mode, cfg)
    ref = oracle_column(kernel, pts, n, digits, jobs)
    err = relative_errors(vals, ref)
    near = pts[0] / pts[1] < 1e-2
    finite = np.isfinite(err)
    summary = {
        "max_rel_error": float(np.max(err[finite])) if finite.any() else math.nan,
        "median_rel_error": float(np.median(err[finite])) if finite.any() else math.nan,
        "median_rel_error_near_axis": float(np.median(err[near & finite])) if (near & finite).any() else math.nan,
        "singular_cells": int(np.sum(~finite)),
    }
    rows = [(pts[0, j], pts[1, j], branch[j], float(np.real(vals[j])), float(np.imag(vals[j])),
             float(np.real(ref[j])), float(np.imag(ref[j])), err[j]) for j in range(pts.shape[1])]
    params = {**_kernel_params(kernel), **grid.as_params(), "n": n, "mode": mode, "xi": xi,
              "p_small": p_small, "oracle_digits": digits}
    columns = ("x1", "x2", "branch", "value_re", "value_im", "reference_re", "reference_im", "rel_error")
    return ExperimentReport("heatmap", params, columns, rows, summary)


# ---------------------------------------------------------------------------
# slope fit


def fit_loglog(x, y):
    """Least-squares line through (log10 x, log10 y); zero y values are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 2 or np.ptp(np.log10(x[keep])) == 0:
        raise DegenerateFitError("fewer than two distinct nonzero samples")
    slope, intercept = np.polyfit(np.log10(x[keep]), np.log10(y[keep]), 1)
    return float(slope), float(intercept), int(np.sum(~keep))


DEFAULT_RATIOS = tuple(10.0 ** -e for e in range(10))


def slope_fit(kernel="laplace2d", n=9, ratios=DEFAULT_RATIOS, samples_per_ratio=5, seed=0,
              xbar_range=(0.5, 2.0), k=None, digits=50):
    """Single-step relative error of the large-|x1| recurrence against |x1|/xbar.

    Each sample feeds the step with the exact prefix rounded to binary64 and
    measures the rounding error of that one step against the exact d^n.
    """
    kernel = _kernel(kernel, k)
    if samples_per_ratio < 1 or not ratios:
        raise ConfigError("need at least one ratio and one sample per ratio")
    ev = HybridEvaluator(kernel)
    rng = np.random.default_rng(seed)
    rows = []
    for ratio in ratios:
        for _ in range(samples_per_ratio):
            xbar = rng.uniform(*xbar_range)
            x = np.array([ratio * xbar, xbar])
            exact = oracle_derivatives(kernel, (float(x[0]), float(x[1])), n, digits).values
            prefix = np.array([complex(v) for v in exact])
            if not kernel.is_complex:
                prefix = prefix.real
            with mpmath.workdps(digits):
                err = single_step_relative_error(ev.large, kernel, prefix, n, x, exact[n])
            rows.append((float(ratio), x[0], x[1], err))
    errs = np.array([r[3] for r in rows])
    try:
        slope, intercept, zeros = fit_loglog([r[0] for r in rows], errs)
    except DegenerateFitError:
        slope = intercept = math.nan
        zeros = int(np.sum(errs == 0))
    summary = {"slope": slope, "intercept": intercept, "C": 10.0 ** intercept if np.isfinite(intercept) else math.nan,
               "zero_errors": zeros, "samples": len(rows)}
    params = {**_kernel_params(kernel), "n": n, "ratios": ";".join(_fmt(r) for r in ratios),
              "samples_per_ratio": samples_per_ratio, "seed": seed,
              "xbar_range": f"{xbar_range[0]:g}:{xbar_range[1]:g}", "oracle_digits": digits}
    return ExperimentReport("slope", params, ("ratio", "x1", "x2", "rel_error"), rows, summary)


# ---------------------------------------------------------------------------
# assumption heat map


def _chebyshev_fractions(m):
    """Chebyshev-Lobatto points on [0, 1]; both ends are included since the max often sits there."""
    return (1 - np.cos(np.pi * np.arange(m) / (m - 1))) / 2


def max_abs_derivatives(kernel, x1, xbar, orders, samples=64):
    """{order: max over xi in [0, x1] of |d^order G| at (xi, xbar)}, by Chebyshev sampling."""
    xi = np.outer(_chebyshev_fractions(samples), x1)
    xb = np.broadcast_to(xbar, xi.shape)
    d = oracle_derivatives_fast(kernel, xi.ravel(), xb.ravel(), max(orders))
    return {o: np.abs(d[o]).reshape(xi.shape).max(axis=0) for o in orders}


def _normalizers(kernel, x1, xbar, c, d_even):
    if kernel.id == "biharmonic2d":
        return np.abs(x1) ** 3 / xbar ** (c + 1), x1 ** 2 / xbar ** d_even
    return np.abs(x1) / xbar ** (c + 1), 1.0 / xbar ** d_even


def assumption_heatmap(kernel, c=5, d_even=6, grid=None, samples=64, k=None, check_doubling=True):
    """max |d^c G| and max |d^d G| over [0, x1], scaled by the assumed power laws."""
    kernel = _kernel(kernel, k)
    if kernel.dimension != 2:
        raise ConfigError("assumption maps are defined for 2D kernels")
    if c % 2 != 1 or d_even % 2 != 0:
        raise ConfigError("c must be odd and d_even even")
    grid = grid or GridSpec()
    pts = grid.points()
    x1, xbar = np.abs(pts[0]), pts[1]
    region = x1 / xbar < 1
    norm_c, norm_d = _normalizers(kernel, x1, xbar, c, d_even)

    def ratios(m):
        peaks = max_abs_derivatives(kernel, x1, xbar, (c, d_even), m)
        return peaks[c] / norm_c, peaks[d_even] / norm_d

    rc, rd = ratios(samples)
    summary = {}
    for name, r in (("odd", rc), ("even", rd)):
        summary[f"{name}_min"] = float(r[region].min())
        summary[f"{name}_max"] = float(r[region].max())
        summary[f"{name}_in_bounds"] = bool(np.all((r[region] >= 1) & (r[region] <= 100)))
    if check_doubling:
        rc2, rd2 = ratios(2 * samples)
        change = [np.max(np.abs(a2 - a)[region] / a2[region]) for a, a2 in ((rc, rc2), (rd, rd2))]
        summary["sampling_change"] = float(max(change))
    rows = [(pts[0, j], pts[1, j], bool(region[j]), rc[j], rd[j]) for j in range(pts.shape[1])]
    params = {**_kernel_params(kernel), **grid.as_params(), "c": c, "d_even": d_even, "samples": samples}
    return ExperimentReport("assumptions", params, ("x1", "x2", "in_region", "ratio_odd", "ratio_even"),
                            rows, summary)


# ---------------------------------------------------------------------------
# QBX error table


def ellipse_density(t):
    return np.cos(10 * t)


def qbx_error_table(n_list=(200, 400, 800), p_list=(5, 7, 9, 11), backends=("recurrence", "direct"),
                    a=2.0, b=1.0, radius_factor=2.5, oversample=4, hybrid=None, jobs=1):
    """L-infinity relative error of the single layer on the ellipse for every (N, p, backend)."""
    for kind in backends:
        make_backend(kind, get_kernel("laplace2d"))  # rejects unknown names early
    hybrid = hybrid or HybridConfig()
    rows = []
    summary = {}
    for N in n_list:
        curve = discretize_ellipse(a, b, N)
        ref = reference_potential(curve, ellipse_density)
        scale = np.max(np.abs(ref))
        h = float(np.sum(curve.weights) / N)
        for p in p_list:
            vals = {}
            for kind in backends:
                cfg = QbxConfig(p_qbx=p, radius_factor=radius_factor, backend=kind, oversample=oversample,
                                hybrid=HybridConfig(hybrid.xi, hybrid.p_small, max(p, 0), hybrid.precision),
                                jobs=jobs)
                vals[kind] = single_layer_qbx(curve, ellipse_density, None, cfg)
                err = float(np.max(np.abs(vals[kind] - ref)) / scale)
                summary[f"error.N{N}.p{p}.{kind}"] = err
                rows.append((N, h, p, kind, err))
            if "recurrence" in vals and "direct" in vals:
                agree = float(np.max(np.abs(vals["recurrence"] - vals["direct"])) / np.max(np.abs(vals["direct"])))
                summary[f"agreement.N{N}.p{p}"] = agree
    params = {"a": a, "b": b, "density": "cos(10t)", "n_list": ";".join(map(str, n_list)),
              "p_list": ";".join(map(str, p_list)), "backends": ";".join(backends),
              "radius_factor": radius_factor, "oversample": oversample, "xi": hybrid.xi, "p_small": hybrid.p_small}
    return ExperimentReport("qbx-table", params, ("N", "h", "p_qbx", "backend", "rel_linf_error"), rows, summary)


# ---------------------------------------------------------------------------
# flop comparison


def flop_comparison(kernel="helmholtz2d", p_range=range(1, 13), target=(1.3, 0.4), source=(0.0, 0.0), r=0.1,
                    fit_range=(2, 12), k=None):
    """Counted flops of one line-Taylor expansion per order for the recurrence and direct backends."""
    kernel = _kernel(kernel, k)
    p_values = list(p_range)
    if not p_values or min(p_values) < 0:
        raise ConfigError("p_range must hold non-negative orders")
    kinds = ("recurrence", "direct", "direct-factored")
    backends = {kind: make_backend(kind, kernel) for kind in kinds}
    rows = []
    for p in p_values:
        counts = []
        for kind in kinds:
            fc = FlopCounter()
            line_taylor_contribution(kernel, target, source, r, p, backends[kind], fc)
            counts.append(fc.flops)
        rows.append((p, *counts))
    summary = {}
    fit = [row for row in rows if fit_range[0] <= row[0] <= fit_range[1]]
    if len(fit) >= 2:
        ps = np.log([row[0] for row in fit])
        for j, kind in enumerate(kinds):
            summary[f"exponent.{kind}"] = float(np.polyfit(ps, np.log([row[j + 1] for row in fit]), 1)[0])
    cheaper = [row[0] for row in rows if row[1] < row[2]]
    summary["recurrence_cheaper_from"] = min(
        (p for p in cheaper if all(row[1] < row[2] for row in rows if row[0] >= p)), default=-1)
    params = {**_kernel_params(kernel), "p_range": f"{p_values[0]}..{p_values[-1]}",
              "target": f"{target[0]:g};{target[1]:g}", "source": f"{source[0]:g};{source[1]:g}", "r": r,
              "fit_range": f"{fit_range[0]}..{fit_range[1]}"}
    return ExperimentReport("flops", params, ("p", "recurrence", "direct", "direct_factored"), rows, summary)
