"""Hybrid evaluation of d^0..d^P along x1 of a radially symmetric Green's function.

Points with |x1|/xbar >= 1/xi run the large-|x1| recurrence forward from
closed-form seeds.  Points closer to the hyperplane x1 = 0 run the small-|x1|
recurrence over on-hyperplane values and rebuild the derivatives from a
truncated Taylor series in x1.

Every entry point is batched: points are columns of a (d, M) array and all
recurrence steps are vectorized over the columns.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import csv
import math

import numpy as np

from .errors import CapabilityError, ConfigError, DomainError, SingularStepError
from .flops import axis_seed_cost, seed_cost
from .kernels import axis_values, base_derivatives
from .pde2ode import pde_to_ode
from .recurrence import CompiledRecurrence, ode_to_large_recurrence, specialize_small_recurrence

LARGE = "large"
SMALL = "small"


@dataclass(frozen=True)
class HybridConfig:
    xi: float = 50.0
    p_small: int = 8
    P: int = 9
    precision: str = "double"

    def __post_init__(self):
        if not self.xi > 1:
            raise ConfigError("xi must exceed 1")
        if self.p_small < 0 or self.P < 0:
            raise ConfigError("p_small and P must be non-negative")
        if self.precision not in ("double", "extended"):
            raise ConfigError("precision is 'double' or 'extended'")


@dataclass
class DerivSeq:
    point: np.ndarray
    values: np.ndarray
    branch: str
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


@dataclass
class DerivBatch:
    """Column j holds the derivative sequence of point x[:, j]."""

    points: np.ndarray
    values: np.ndarray  # (P+1, M)
    branch: np.ndarray  # (M,) of LARGE / SMALL
    step_ratio: np.ndarray  # (P+1, M), NaN where no recurrence step produced the entry
    remainder: np.ndarray  # (P+1, M), NaN on the large branch
    perturbed: np.ndarray  # (M,) bool, x1 moved one ulp after a singular step

    def sequence(self, j):
        diag = {"step_ratio": self.step_ratio[:, j].copy(), "perturbed": bool(self.perturbed[j])}
        if self.branch[j] == SMALL:
            diag["taylor_remainder"] = self.remainder[:, j].copy()
        return DerivSeq(self.points[:, j].copy(), self.values[:, j].copy(), str(self.branch[j]), diag)


# ---------------------------------------------------------------------------
# regions


def _as_batch(x):
    x = np.asarray(x)
    if x.dtype != np.longdouble:
        x = x.astype(float)
    single = x.ndim == 1
    return (x[:, None] if single else x), single


def _xbar(x):
    return np.sqrt(np.sum(x[1:] ** 2, axis=0))


def classify_region(x, xi):
    """LARGE iff |x1|/xbar >= 1/xi; on-axis points (xbar = 0) are LARGE."""
    xb, single = _as_batch(x)
    x1 = np.abs(xb[0])
    xbar = _xbar(xb)
    if np.any((x1 == 0) & (xbar == 0)):
        raise DomainError("the origin has no region")
    large = (xbar == 0) | (x1 * xi >= xbar)
    labels = np.where(large, LARGE, SMALL)
    return str(labels[0]) if single else labels


# ---------------------------------------------------------------------------
# derivation cache


@dataclass(frozen=True)
class Derived:
    ode: object
    large: object
    small: object


@lru_cache(maxsize=None)
def derive(pde):
    ode = pde_to_ode(pde)
    large = ode_to_large_recurrence(ode)
    return Derived(ode, large, specialize_small_recurrence(large))


_COMPILED = {}


def _compile(rec, kernel):
    # recurrences hold dicts and are unhashable; key on identity and keep rec alive
    key = (id(rec), kernel.k)
    hit = _COMPILED.get(key)
    if hit is None or hit[0] is not rec:
        hit = _COMPILED[key] = (rec, CompiledRecurrence(rec, kernel.k))
    return hit[1]


def small_seed_top(small, limit=128):
    """Largest even n at which the leading small-recurrence coefficient vanishes identically.

    Values at or below this index cannot come from the recurrence and must be
    seeded from closed forms; the recurrence is also only valid from its
    reindexing offset on.
    """
    lead = small.coefficients[small.max_shift]
    roots = [n for n in range(0, limit, 2) if lead.subs("n", n).is_zero()]
    top = max(roots) if roots else 0
    start = small.meta.get("reindex", 0)
    while top + 2 < start:
        top += 2
    return top


def _dtype(kernel, precision):
    if precision == "extended":
        return np.clongdouble if kernel.is_complex else np.longdouble
    return complex if kernel.is_complex else float


# ---------------------------------------------------------------------------
# branches


def _large_batch(rec, kernel, x, P, precision="double", counter=None):
    crec = _compile(rec, kernel)
    a = rec.max_shift
    M = x.shape[1]
    dtype = _dtype(kernel, precision)
    real_dtype = np.longdouble if precision == "extended" else float
    seed_top = min(a, kernel.base_order, P)
    D = np.zeros((P + 1, M), dtype=dtype)
    for i, v in enumerate(base_derivatives(kernel, x.astype(float), seed_top)):
        D[i] = v if kernel.is_complex else np.real(v)
    xp = x.astype(real_dtype)
    pv = crec.point_values(xp)
    if not kernel.is_complex:
        pv = {s: np.real(v) for s, v in pv.items()}
    ratio = np.full((P + 1, M), np.nan)
    singular = np.full(M, -1)
    lower = crec.shifts[1:]
    horner = terms = 0
    for t in range(seed_top + 1, P + 1):
        n = t - a
        lead = crec.coefficient(pv, a, n)
        horner += crec.degree[a]
        acc = np.zeros(M, dtype=dtype)
        mags = []
        for s in lower:
            if n + s < 0:
                continue
            b = crec.coefficient(pv, s, n) * D[n + s]
            acc = acc + b
            mags.append(np.abs(b).astype(float))
            horner += crec.degree[s]
            terms += 1
        zero = lead == 0
        singular = np.where((singular < 0) & zero, n, singular)
        D[t] = -acc / np.where(zero, 1, lead)
        ratio[t] = _batch_ratio(np.array(mags))
    if counter is not None:
        sa, sm, sc = seed_cost(kernel.id, seed_top)
        pa, pm = crec.point_cost()
        # per used shift: Horner in n, one product with D, one accumulation; one division per step
        counter.add(sa + pa + horner + terms, sm + pm + horner + terms + (P - seed_top), sc, times=M)
    return D, ratio, singular


def _batch_ratio(mags):
    """Column-wise ratio_of_terms for a (terms, M) array."""
    bmax = mags.max(axis=0)
    kept = mags > bmax * 2.0 ** -52
    bmin = np.where(kept, mags, np.inf).min(axis=0)
    return np.where(bmax > 0, bmax / np.where(np.isinf(bmin), 1, bmin), 0.0)


def _small_batch(small, kernel, x, P, p_small, precision="double", counter=None):
    csmall = _compile(small, kernel)
    M = x.shape[1]
    dtype = _dtype(kernel, precision)
    real_dtype = np.longdouble if precision == "extended" else float
    seed_top = small_seed_top(small)
    if seed_top // 2 > kernel.base_order:
        raise CapabilityError(f"small recurrence needs on-axis seeds up to order {seed_top}")
    top = (P + p_small) // 2 * 2 + 2  # one extra even order for the remainder estimate
    xbar = _xbar(x.astype(float))
    A = np.zeros((top + 1, M), dtype=dtype)
    for j, v in enumerate(axis_values(kernel, xbar, min(seed_top, top) // 2)):
        A[2 * j] = v if kernel.is_complex else np.real(v)
    xp = x.astype(real_dtype)
    pv = csmall.point_values(xp)
    if not kernel.is_complex:
        pv = {s: np.real(v) for s, v in pv.items()}
    lower = [s for s in csmall.shifts[1:] if s % 2 == 0]
    horner = steps = 0
    for n in range(seed_top + 2, top + 1, 2):
        lead = csmall.coefficient(pv, 0, n)
        if np.any(lead == 0):
            raise SingularStepError(n)
        horner += csmall.degree[0]
        acc = np.zeros(M, dtype=dtype)
        for s in lower:
            if n + s < 0:
                continue
            acc = acc + csmall.coefficient(pv, s, n) * A[n + s]
            horner += csmall.degree[s]
            steps += 1
        A[n] = -acc / lead
    x1 = xp[0]
    scaled = [np.ones(M, dtype=real_dtype)]  # x1^k / k!
    for kk in range(1, p_small + 3):
        scaled.append(scaled[-1] * x1 / kk)
    D = np.zeros((P + 1, M), dtype=dtype)
    rem = np.zeros((P + 1, M))
    terms = 0
    for i in range(P + 1):
        acc = np.zeros(M, dtype=dtype)
        for kk in range(i % 2, p_small + 1, 2):
            acc = acc + A[i + kk] * scaled[kk]
            terms += 1
        D[i] = acc
        kstar = p_small + 1 if (i + p_small + 1) % 2 == 0 else p_small + 2
        nxt = np.abs(A[i + kstar] * scaled[kstar]).astype(float)
        mag = np.abs(acc).astype(float)
        rem[i] = np.where(mag > 0, nxt / np.where(mag > 0, mag, 1), nxt)
    if counter is not None:
        sa, sm, sc = axis_seed_cost(kernel.id, min(seed_top, top) // 2)
        pa, pm = csmall.point_cost()
        nsteps = len(range(seed_top + 2, top + 1, 2))
        counter.add(sa + pa + horner + steps + terms,
                    sm + pm + horner + steps + nsteps + (p_small + 2) * 2 + terms, sc, times=M)
    return D, rem, A


def eval_large(rec, kernel, x, P, precision="double", counter=None):
    """Large-|x1| branch at one point; raises SingularStepError on a vanishing leading coefficient."""
    xb, _ = _as_batch(x)
    if np.all(xb[:, 0] == 0):
        raise DomainError("derivatives requested at the origin")
    D, ratio, singular = _large_batch(rec, kernel, xb, P, precision, counter)
    if singular[0] >= 0:
        raise SingularStepError(int(singular[0]))
    return DerivSeq(xb[:, 0].copy(), D[:, 0], LARGE, {"step_ratio": ratio[:, 0], "perturbed": False})


def eval_small(small, kernel, x, P, p_small, precision="double", counter=None):
    xb, _ = _as_batch(x)
    if np.all(xb[1:, 0] == 0):
        raise DomainError("the small-|x1| branch needs xbar > 0")
    D, rem, A = _small_batch(small, kernel, xb, P, p_small, precision, counter)
    diag = {"step_ratio": np.full(P + 1, np.nan), "taylor_remainder": rem[:, 0],
            "axis_values": A[:, 0], "perturbed": False}
    return DerivSeq(xb[:, 0].copy(), D[:, 0], SMALL, diag)


class HybridEvaluator:
    """Algorithm driver for one kernel; recurrences are derived once and shared."""

    def __init__(self, kernel, cfg=None, derived=None):
        self.kernel = kernel
        self.cfg = cfg or HybridConfig()
        derived = derived or derive(kernel.pde)
        self.ode = derived.ode
        self.large = derived.large
        self.small = derived.small

    def evaluate_batch(self, x, P=None, counter=None):
        cfg = self.cfg
        P = cfg.P if P is None else P
        xb, _ = _as_batch(x)
        if xb.shape[0] != self.kernel.dimension:
            raise DomainError(f"points have dimension {xb.shape[0]}, kernel expects {self.kernel.dimension}")
        branch = np.asarray(classify_region(xb, cfg.xi)).reshape(-1)
        M = xb.shape[1]
        dtype = _dtype(self.kernel, cfg.precision)
        values = np.zeros((P + 1, M), dtype=dtype)
        ratio = np.full((P + 1, M), np.nan)
        rem = np.full((P + 1, M), np.nan)
        perturbed = np.zeros(M, dtype=bool)
        big = np.flatnonzero(branch == LARGE)
        if big.size:
            pts = xb[:, big]
            D, rt, singular = _large_batch(self.large, self.kernel, pts, P, cfg.precision, counter)
            bad = np.flatnonzero(singular >= 0)
            if bad.size:
                moved = pts[:, bad].copy()
                moved[0] = np.nextafter(moved[0], np.inf)
                D2, rt2, singular2 = _large_batch(self.large, self.kernel, moved, P, cfg.precision, counter)
                if np.any(singular2 >= 0):
                    raise SingularStepError(int(singular2[singular2 >= 0][0]))
                D[:, bad], rt[:, bad] = D2, rt2
                perturbed[big[bad]] = True
            values[:, big] = D
            ratio[:, big] = rt
        near = np.flatnonzero(branch == SMALL)
        if near.size:
            D, rm, _ = _small_batch(self.small, self.kernel, xb[:, near], P, cfg.p_small, cfg.precision, counter)
            values[:, near] = D
            rem[:, near] = rm
        return DerivBatch(xb.copy(), values, branch, ratio, rem, perturbed)

    def evaluate(self, x, P=None, counter=None):
        return self.evaluate_batch(x, P, counter).sequence(0)


def eval_hybrid(kernel, x, cfg=None, counter=None):
    return HybridEvaluator(kernel, cfg).evaluate(x, counter=counter)


# ---------------------------------------------------------------------------
# error model


def step_terms(rec, kernel, values, n, x):
    """The b terms c_s(n, x) * d^{n+s} G for every shift below the top, top coefficient divided out."""
    crec = _compile(rec, kernel)
    xb, _ = _as_batch(x)
    pv = crec.point_values(xb)
    a = rec.max_shift
    lead = crec.coefficient(pv, a, n - a)[0]
    out = []
    for s in crec.shifts[1:]:
        idx = n - a + s
        if idx < 0:
            continue
        out.append(-crec.coefficient(pv, s, n - a)[0] / lead * values[idx])
    return out


def single_step_error_estimate(rec, kernel, values, n, x):
    """max |b_i| / |b_j| over the nonzero terms of the step that produces d^n G."""
    mags = [abs(b) for b in step_terms(rec, kernel, values, n, x)]
    return ratio_of_terms(mags)


def ratio_of_terms(mags):
    """max/min over the terms that matter; anything below 2^-52 of the largest counts as zero."""
    mags = [float(m) for m in mags]
    if not mags or max(mags) == 0:
        return 0.0
    floor = max(mags) * 2.0 ** -52
    kept = [m for m in mags if m > floor]
    return max(kept) / min(kept)


def single_step_relative_error(rec, kernel, values, n, x, exact):
    """Relative rounding error of one float64 step fed with ``values`` (exact prefix, rounded).

    The denominator is |exact|, so cancellation shows up in full instead of
    saturating at one.
    """
    bs = step_terms(rec, kernel, values, n, x)
    acc = 0.0
    for b in bs:
        acc = acc + b
    if exact == 0:
        return float(abs(acc))
    return float(abs(exact - acc) / abs(exact))


def truncation_exponent(n, p_small):
    """Power of |x1|/xbar in the small-branch relative bound.

    Only Taylor terms with n + s even survive, and the remainder derivative
    order n + p + 1 is odd exactly when n + p is even.
    """
    e = p_small + 2
    if n % 2:
        e -= 1
    if (n + p_small) % 2:
        e -= 1
    return e


def combined_error_bound(cfg, n, constants):
    M, m, C = constants["M"], constants["m"], constants["C"]
    p = cfg.p_small
    small = M / (m * math.factorial(p + 1)) * cfg.xi ** (-truncation_exponent(n, p))
    return max(small, C * cfg.xi ** 2)


# ---------------------------------------------------------------------------
# diagnostics export

CSV_COLUMNS = ("point", "n", "branch", "step_ratio", "taylor_remainder", "value_re", "value_im",
               "rel_error")


def diagnostics_rows(seq, reference=None):
    pt = ";".join(repr(float(v)) for v in seq.point)
    ratio = seq.diagnostics.get("step_ratio")
    rem = seq.diagnostics.get("taylor_remainder")
    for i, v in enumerate(seq.values):
        err = ""
        if reference is not None:
            ref = complex(reference[i])
            err = repr(abs(complex(v) - ref) / abs(ref)) if ref != 0 else repr(abs(complex(v)))
        yield {
            "point": pt,
            "n": i,
            "branch": seq.branch,
            "step_ratio": "" if ratio is None or np.isnan(ratio[i]) else repr(float(ratio[i])),
            "taylor_remainder": "" if rem is None or np.isnan(rem[i]) else repr(float(rem[i])),
            "value_re": repr(float(np.real(v))),
            "value_im": repr(float(np.imag(v))),
            "rel_error": err,
        }


def write_diagnostics_csv(stream, seqs, references=None):
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for j, seq in enumerate(seqs):
        writer.writerows(diagnostics_rows(seq, None if references is None else references[j]))
