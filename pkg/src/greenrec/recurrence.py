"""Order-parametric derivative recurrences derived from an ODE in x1.

A recurrence is stored homogeneously:  sum_s c_s(n, x) * d^{n+s} G = 0.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import DegenerateRecurrenceError, ParseError
from .pde2ode import OdeInX1, canonicalize_coefficients
from .symcore import Poly, QQi, parse_poly, shift_product_rule, standard_vars

FORMAT = "greenrec-recurrence/1"


@dataclass(frozen=True)
class Recurrence:
    dimension: int
    coefficients: dict  # shift -> Poly over (x1..xd, n, k)
    source_ode_order: int
    highest_x1_power: int
    kind: str = "large"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("empty recurrence")
        if self.coefficients[self.max_shift].is_zero():
            raise ValueError("top-shift coefficient vanishes identically")

    @property
    def max_shift(self):
        return max(self.coefficients)

    @property
    def min_shift(self):
        return min(self.coefficients)

    @property
    def shifts(self):
        return sorted(self.coefficients, reverse=True)

    @property
    def variables(self):
        return standard_vars(self.dimension, extra=("n", "k"))

    def at(self, n):
        """Coefficients with a concrete integer n substituted."""
        return {s: c.subs("n", n) for s, c in self.coefficients.items()}


SmallRecurrence = Recurrence


def ode_to_large_recurrence(ode: OdeInX1):
    variables = standard_vars(ode.dimension, extra=("n", "k"))
    coeffs = {}
    h = 0
    for i, li in enumerate(ode.coefficients):
        if li.is_zero():
            continue
        for p, c in li.with_vars(standard_vars(ode.dimension, extra=("k",))).coefficients_in("x1").items():
            h = max(h, p)
            c = c.with_vars(variables)
            for l, factor in shift_product_rule(p, variables):
                s = i - l
                term = factor * c
                coeffs[s] = coeffs[s] + term if s in coeffs else term
    coeffs = {s: c for s, c in coeffs.items() if not c.is_zero()}
    shifts = sorted(coeffs)
    canon, _ = canonicalize_coefficients([coeffs[s] for s in shifts], ode.dimension)
    return Recurrence(ode.dimension, dict(zip(shifts, canon)), ode.order, h, "large")


def specialize_small_recurrence(rec: Recurrence):
    at0 = {s: c.subs("x1", 0).with_vars(rec.variables) for s, c in rec.coefficients.items()}
    at0 = {s: c for s, c in at0.items() if not c.is_zero()}
    if not at0:
        raise DegenerateRecurrenceError("every coefficient vanishes on x1 = 0")
    top = max(at0)
    n = Poly.var("n", rec.variables)
    shifted = {s - top: c.subs("n", n - top).with_vars(rec.variables) for s, c in at0.items()}
    shifts = sorted(shifted)
    canon, _ = canonicalize_coefficients([shifted[s] for s in shifts], rec.dimension)
    meta = {"reindex": top}
    return Recurrence(rec.dimension, dict(zip(shifts, canon)), rec.source_ode_order,
                      rec.highest_x1_power, "small", meta)


def recurrence_order(rec: Recurrence):
    return rec.max_shift - rec.min_shift


# ---------------------------------------------------------------------------
# artifacts


def dump_recurrence(rec: Recurrence):
    doc = {
        "format": FORMAT,
        "kind": rec.kind,
        "dimension": rec.dimension,
        "variables": list(rec.variables),
        "source_ode_order": rec.source_ode_order,
        "highest_x1_power": rec.highest_x1_power,
        "max_shift": rec.max_shift,
        "min_shift": rec.min_shift,
        "coefficients": [{"shift": s, "coefficient": str(rec.coefficients[s])} for s in rec.shifts],
    }
    if rec.meta:
        doc["meta"] = rec.meta
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_recurrence(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
    if doc.get("format") != FORMAT:
        raise ParseError("not a recurrence artifact", "format")
    d = doc["dimension"]
    variables = standard_vars(d, extra=("n", "k"))
    if tuple(doc["variables"]) != variables:
        raise ParseError("unexpected variable order", "variables")
    coeffs = {}
    for idx, entry in enumerate(doc["coefficients"]):
        try:
            coeffs[int(entry["shift"])] = parse_poly(entry["coefficient"], allowed_vars=variables).with_vars(variables)
        except ParseError as exc:
            raise ParseError(str(exc), f"coefficients[{idx}]") from None
    rec = Recurrence(d, coeffs, doc["source_ode_order"], doc["highest_x1_power"], doc["kind"], doc.get("meta", {}))
    if rec.max_shift != doc["max_shift"] or rec.min_shift != doc["min_shift"]:
        raise ParseError("shift range does not match coefficients", "max_shift")
    return rec


def dump_ode(ode: OdeInX1):
    doc = {
        "format": "greenrec-ode/1",
        "dimension": ode.dimension,
        "order": ode.order,
        "variables": list(ode.variables),
        "coefficients": [str(c) for c in ode.coefficients],
        "normalization": ode.normalization,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_ode(text):
    from .pde2ode import ode_from_strings

    doc = json.loads(text)
    if doc.get("format") != "greenrec-ode/1":
        raise ParseError("not an ODE artifact", "format")
    return ode_from_strings(doc["dimension"], doc["coefficients"], doc.get("normalization"))


# ---------------------------------------------------------------------------
# numeric form


class CompiledRecurrence:
    """c_s(n, x) = sum_e n^e * P_{s,e}(x); the P are evaluated once per point batch."""

    def __init__(self, rec: Recurrence, k=None):
        self.rec = rec
        self.k = k
        self.shifts = rec.shifts
        self.parts = {}
        for s, c in rec.coefficients.items():
            self.parts[s] = [(e, p) for e, p in c.coefficients_in("n").items()]
        self.degree = {s: max(e for e, _ in parts) for s, parts in self.parts.items()}
        self.n_degree = max(self.degree.values())
        self.point_terms = sum(len(p.terms) for parts in self.parts.values() for _, p in parts)

    def point_values(self, x):
        """{s: array (degree[s]+1, ...)} of P_{s,e}(x); x has shape (d,) or (d, M)."""
        x = np.asarray(x)
        if x.dtype != np.longdouble:
            x = x.astype(float)
        cdtype = np.clongdouble if x.dtype == np.longdouble else complex
        values = {f"x{i + 1}": x[i] for i in range(self.rec.dimension)}
        if self.k is not None:
            values["k"] = x.dtype.type(self.k) if not np.iscomplexobj(self.k) else cdtype(self.k)
        out = {}
        shape = x.shape[1:]
        complex_k = self.k is not None and np.iscomplexobj(self.k)
        for s, parts in self.parts.items():
            arr = np.zeros((self.degree[s] + 1,) + shape, dtype=cdtype)
            for e, p in parts:
                arr[e] = p.evaluate(values)
            out[s] = arr if (complex_k or np.any(arr.imag)) else arr.real.copy()
        return out

    def point_cost(self):
        """(adds, mults) per point for point_values.

        Powers of each variable are formed once; each term then costs one
        multiplication per variable factor (the coefficient included) and one
        accumulation.
        """
        top = {}
        adds = mults = 0
        for parts in self.parts.values():
            for _, p in parts:
                for e, c in p.terms.items():
                    adds += 1
                    mults += sum(1 for x in e if x) + (0 if c == 1 else 1) - 1
                    for v, x in zip(p.vars, e):
                        top[v] = max(top.get(v, 0), x)
        mults += sum(max(x - 1, 0) for x in top.values())
        return adds, max(mults, 0)

    def coefficient(self, pv, s, n):
        """Horner in n for shift s at every point; costs degree[s] adds and mults."""
        arr = pv[s]
        acc = arr[self.degree[s]]
        for e in range(self.degree[s] - 1, -1, -1):
            acc = acc * n + arr[e]
        return acc


# ---------------------------------------------------------------------------
# verification


def recurrence_residual(rec, kernel, point, n_max, digits=50, n_min=0):
    """max over n of |sum_s c_s(n) d^{n+s} G| / max_s |c_s(n) d^{n+s} G| on oracle derivatives.

    Small-|x1| recurrences relate values on x1 = 0, so their point is moved
    onto that hyperplane first.
    """
    import mpmath

    from .kernels import oracle_derivatives

    point = tuple(float(v) for v in point)
    if rec.kind == "small":
        point = (0.0,) + point[1:]
    top = n_max + rec.max_shift
    with mpmath.workdps(digits):
        derivs = oracle_derivatives(kernel, point, top, digits).values
        values = {f"x{i + 1}": mpmath.mpf(v) for i, v in enumerate(point)}
        if kernel.k is not None:
            values["k"] = mpmath.mpmathify(kernel.k)
        worst = 0.0
        for n in range(n_min, n_max + 1):
            terms = []
            for s, c in rec.coefficients.items():
                if n + s < 0:
                    continue
                # exact substitution so coefficients vanishing at this n drop out exactly
                cn = c.subs("n", n)
                if not cn.is_zero():
                    terms.append(cn.evaluate(values, coeff=QQi.to_mpc) * derivs[n + s])
            scale = max((abs(t) for t in terms), default=0)
            if scale > 0:
                worst = max(worst, float(abs(mpmath.fsum(terms)) / scale))
    return worst
