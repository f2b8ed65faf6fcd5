"""PDE with polynomial coefficients -> ODE in x1 satisfied by a radial solution G(|x|).

The derivation works on sums  sum_l A_l(x, r) * G^(l)(r)  of radial derivatives.
Spatial derivatives enter through  d/dx_i r = x_i / r  and leave through
G^(l) = ((r / x1) d/dx1)^l G.  Denominators stay monomials in x1 and r, so a
single monomial multiplier clears them.
"""

from dataclasses import dataclass, field
import json

from .errors import DivisionError, DomainError, InternalError, ParseError
from .symcore import MultiIndex, Poly, QQi, parse_poly, standard_vars


@dataclass(frozen=True)
class PdeSpec:
    dimension: int
    order: int
    coefficients: tuple  # ((MultiIndex, Poly), ...) sorted, zero entries dropped

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if self.order < 1:
            raise ValueError("order must be at least 1")
        for q, p in self.coefficients:
            if q.dim != self.dimension:
                raise ValueError(f"multi-index {q} has wrong dimension")
            if q.order > self.order:
                raise ValueError(f"multi-index {q} exceeds the PDE order")
            bad = set(p.used_vars()) - set(self.allowed_vars())
            if bad:
                raise ValueError(f"coefficient uses disallowed variables {sorted(bad)}")
        if not any(q.order == self.order for q, _ in self.coefficients):
            raise ValueError("top-order symbol vanishes")

    def allowed_vars(self):
        return standard_vars(self.dimension, extra=("k",))

    def coefficient_map(self):
        return dict(self.coefficients)

    def scaled(self, c):
        return PdeSpec(self.dimension, self.order, tuple((q, p * c) for q, p in self.coefficients))


@dataclass(frozen=True)
class OdeInX1:
    """sum_i coefficients[i] * d^i/dx1^i G = 0 with polynomial coefficients in x1..xd, k."""

    dimension: int
    order: int
    coefficients: tuple
    normalization: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.order < 1 or len(self.coefficients) != self.order + 1:
            raise ValueError("coefficient list must have length order + 1")
        if self.coefficients[-1].is_zero():
            raise ValueError("leading ODE coefficient vanishes")

    @property
    def variables(self):
        return standard_vars(self.dimension, extra=("k",))

    def highest_x1_power(self):
        return max(c.degree("x1") for c in self.coefficients if not c.is_zero())


def _ordered_coefficients(entries):
    return tuple(sorted(entries, key=lambda qp: (qp[0].order, qp[0].exponents), reverse=True))


def parse_pde_spec(text):
    """Parse a JSON PDE document into a validated PdeSpec."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("document must be an object", "$")
    for key in ("dimension", "order", "coefficients"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}", "$")
    unknown = set(doc) - {"dimension", "order", "coefficients", "name"}
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", "$")
    d, c = doc["dimension"], doc["order"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise ParseError("dimension must be an integer >= 2", "dimension")
    if not isinstance(c, int) or isinstance(c, bool) or c < 1:
        raise ParseError("order must be an integer >= 1", "order")
    if not isinstance(doc["coefficients"], list):
        raise ParseError("coefficients must be a list", "coefficients")
    allowed = standard_vars(d, extra=("k",))
    seen = {}
    for idx, entry in enumerate(doc["coefficients"]):
        where = f"coefficients[{idx}]"
        if not isinstance(entry, dict) or set(entry) != {"multi_index", "coefficient"}:
            raise ParseError("entry needs exactly 'multi_index' and 'coefficient'", where)
        mi = entry["multi_index"]
        if (not isinstance(mi, list) or len(mi) != d
                or any(not isinstance(e, int) or isinstance(e, bool) or e < 0 for e in mi)):
            raise ParseError(f"multi_index must be {d} non-negative integers", f"{where}.multi_index")
        q = MultiIndex(tuple(mi))
        if q.order > c:
            raise ParseError(f"multi_index order {q.order} exceeds PDE order {c}", f"{where}.multi_index")
        if q in seen:
            raise ParseError("duplicate multi_index", f"{where}.multi_index")
        try:
            p = parse_poly(entry["coefficient"], allowed_vars=allowed)
        except ParseError as exc:
            raise ParseError(str(exc), f"{where}.coefficient") from None
        p = p.with_vars(allowed)
        if not p.is_zero():
            seen[q] = p
    if not any(q.order == c for q in seen):
        raise ParseError("top-order symbol is zero", "coefficients")
    return PdeSpec(d, c, _ordered_coefficients(seen.items()))


def dump_pde_spec(pde, name=None):
    doc = {"dimension": pde.dimension, "order": pde.order}
    if name:
        doc["name"] = name
    doc["coefficients"] = [
        {"multi_index": list(q.exponents), "coefficient": str(p)} for q, p in pde.coefficients
    ]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def pde_from_dict(dimension, order, entries):
    """Build a PdeSpec from {multi_index tuple: expression string or number}."""
    allowed = standard_vars(dimension, extra=("k",))
    coeffs = []
    for mi, expr in entries.items():
        p = parse_poly(str(expr), allowed_vars=allowed).with_vars(allowed)
        if not p.is_zero():
            coeffs.append((MultiIndex(tuple(mi)), p))
    return PdeSpec(dimension, order, _ordered_coefficients(coeffs))


# ---------------------------------------------------------------------------
# derivation


def _total_dx(A, xi, inv_r):
    """d/dx_i of A(x, r) with r = |x|."""
    return A.diff(xi) + A.diff("r") * Poly.var(xi, A.vars) * inv_r


def _add_into(acc, l, term):
    if term.is_zero():
        return
    acc[l] = acc[l] + term if l in acc else term


def radial_form_of_partial(q, variables):
    """d^q G(|x|) as {l: A_l(x, r)} with G^(l) the l-th radial derivative."""
    inv_r = Poly.var("r", variables, power=-1)
    expr = {0: Poly.const(1, variables)}
    for i, times in enumerate(q):
        xi = variables[i]
        for _ in range(times):
            nxt = {}
            for l, A in expr.items():
                _add_into(nxt, l, _total_dx(A, xi, inv_r))
                _add_into(nxt, l + 1, A * Poly.var(xi, variables) * inv_r)
            expr = nxt
    return expr


def radial_to_x1(l_max, variables):
    """Rows C[l] = {j: C_lj} with G^(l) = sum_j C_lj * d^j/dx1^j G."""
    r_over_x1 = Poly.monomial(variables, [(-1 if v == "x1" else 1 if v == "r" else 0) for v in variables])
    x1_over_r = Poly.monomial(variables, [(1 if v == "x1" else -1 if v == "r" else 0) for v in variables])
    rows = [{0: Poly.const(1, variables)}]
    for _ in range(l_max):
        prev = rows[-1]
        nxt = {}
        for j, B in prev.items():
            dB = B.diff("x1") + B.diff("r") * x1_over_r
            _add_into(nxt, j, dB * r_over_x1)
            _add_into(nxt, j + 1, B * r_over_x1)
        rows.append(nxt)
    return rows


def _rewrite_r_squared(p, dimension):
    """Replace r^(2m) by (x1^2 + ... + xd^2)^m; every r exponent must be even and >= 0."""
    if "r" not in p.vars:
        return p
    ri = p.vars.index("r")
    for e in p.terms:
        if e[ri] < 0 or e[ri] % 2:
            raise InternalError(f"odd or negative power of r survived normalization: r^{e[ri]}")
    s = sum((Poly.var(f"x{i}", p.vars, power=2) for i in range(1, dimension + 1)), Poly.zero(p.vars))
    out = Poly.zero(p.vars)
    for m, coeff in p.coefficients_in("r").items():
        out = out + coeff.with_vars(p.vars) * s ** (m // 2)
    return out.with_vars(tuple(v for v in p.vars if v != "r"))


def pde_to_ode(pde):
    d = pde.dimension
    variables = standard_vars(d, extra=("r", "k"))
    radial = {}
    for q, p in pde.coefficients:
        pq = p.with_vars(variables)
        for l, A in radial_form_of_partial(q, variables).items():
            _add_into(radial, l, A * pq)
    if not radial:
        raise InternalError("PDE reduced to the zero operator on radial functions")
    rows = radial_to_x1(max(radial), variables)
    ode = {}
    for l, A in radial.items():
        for j, C in rows[l].items():
            _add_into(ode, j, A * C)
    ode = {j: c for j, c in ode.items() if not c.is_zero()}
    if not ode:
        raise InternalError("derived ODE vanishes identically")
    a = max(ode)

    # clear monomial denominators with the smallest x1^s * r^t that works
    xi_, ri_ = variables.index("x1"), variables.index("r")
    s = max(0, -min(min(e[xi_] for e in c.terms) for c in ode.values()))
    t = max(0, -min(min(e[ri_] for e in c.terms) for c in ode.values()))
    parities = {(e[ri_] + t) % 2 for c in ode.values() for e in c.terms}
    if parities == {1}:
        t += 1
    elif len(parities) > 1:
        raise InternalError("r exponents of mixed parity after clearing denominators")
    bound = 2 * pde.order
    if s > bound - 1 or t > bound:
        raise InternalError(f"normalization x1^{s} r^{t} exceeds the bound x1^{bound - 1} r^{bound}")
    shift = tuple(s if v == "x1" else t if v == "r" else 0 for v in variables)
    coeffs = [_rewrite_r_squared(ode.get(j, Poly.zero(variables)).shift_monomial(shift), d) for j in range(a + 1)]
    for c in coeffs:
        if not c.is_polynomial():
            raise InternalError("non-polynomial ODE coefficient after normalization")
    coeffs, extra = canonicalize_coefficients(coeffs, d)
    norm = {"x1_power": s, "r_power": t}
    norm.update(extra)
    return OdeInX1(d, a, tuple(coeffs), norm)


def canonicalize_coefficients(coeffs, dimension):
    """Divide a coefficient list by its common content, common x-monomial and common |x|^2 factors.

    Returns (coefficients, record of what was removed). The unit is chosen so
    the leading coefficient of the last nonzero entry has positive real part.
    """
    variables = coeffs[0].vars
    xnames = [v for v in variables if v.startswith("x")]
    nonzero = [c for c in coeffs if not c.is_zero()]
    # common monomial in the x variables
    mono = tuple(min(c.monomial_content(xnames)[i] for c in nonzero) for i in range(len(variables)))
    if any(mono):
        neg = tuple(-e for e in mono)
        coeffs = [c.shift_monomial(neg) for c in coeffs]
    # common factors of x1^2 + ... + xd^2
    s = sum((Poly.var(f"x{i}", variables, power=2) for i in range(1, dimension + 1)), Poly.zero(variables))
    s_power = 0
    while True:
        try:
            trial = [c.exact_divide(s) for c in coeffs]
        except DivisionError:
            break
        coeffs = trial
        s_power += 1
    # joint content and unit
    joint = Poly.zero(variables)
    lead_idx = max(i for i, c in enumerate(coeffs) if not c.is_zero())
    # fold the list into a single poly with a fresh tag exponent so one content pass covers all
    tagged_vars = variables + ("zz_tag",)
    for i, c in enumerate(coeffs):
        joint = joint + Poly(tagged_vars, {e + (i,): v for e, v in c.terms.items()})
    _, lead_c = coeffs[lead_idx].leading_term()
    scale, _ = joint.content_normalized()
    factor = QQi(1) / scale
    # content_normalized chose its unit from the joint leading term; re-choose from l_a
    v = lead_c * factor
    for unit in (QQi(1), QQi(0, -1), QQi(-1), QQi(0, 1)):
        w = v * unit
        if w.re > 0 and w.im >= 0:
            break
    factor = factor * unit
    coeffs = [c * factor for c in coeffs]
    removed = {"x_monomial": [mono[variables.index(x)] for x in xnames], "radius_squared_power": s_power,
               "scalar": str(Poly.const(factor))}
    return coeffs, removed


def ode_from_strings(dimension, exprs, normalization=None):
    variables = standard_vars(dimension, extra=("k",))
    coeffs = tuple(parse_poly(e, allowed_vars=variables).with_vars(variables) for e in exprs)
    return OdeInX1(dimension, len(coeffs) - 1, coeffs, dict(normalization or {}))


def ode_residual_at(ode, derivs, point, k=None):
    """|sum l_i d^i G| / max_i |l_i d^i G| for mpmath derivative values."""
    import mpmath

    values = {f"x{i + 1}": mpmath.mpf(x) if not isinstance(x, mpmath.mpf) else x for i, x in enumerate(point)}
    if k is not None:
        values["k"] = mpmath.mpmathify(k)
    terms = [c.evaluate(values, coeff=QQi.to_mpc) * derivs[i] if not c.is_zero() else mpmath.mpf(0)
             for i, c in enumerate(ode.coefficients)]
    scale = max(abs(t) for t in terms)
    if scale == 0:
        return 0.0
    return float(abs(mpmath.fsum(terms)) / scale)


def verify_ode(ode, kernel, points, digits=50):
    """Maximum relative ODE residual over ``points`` using oracle derivatives."""
    from .kernels import oracle_derivatives

    worst = 0.0
    for pt in points:
        if all(float(x) == 0.0 for x in pt):
            raise DomainError("verification point at the origin")
        res = oracle_derivatives(kernel, pt, ode.order, digits=digits)
        import mpmath

        with mpmath.workdps(digits):
            worst = max(worst, ode_residual_at(ode, res.values, pt, kernel.k))
    return worst
