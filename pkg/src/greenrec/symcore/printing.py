"""Canonical text form of Poly values; ``parse_poly`` reads it back exactly."""

from fractions import Fraction


def _rat(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _monomial(variables, exps):
    parts = []
    for v, e in zip(variables, exps):
        if e == 1:
            parts.append(v)
        elif e:
            parts.append(f"{v}^{e}")
    return "*".join(parts)


def _signed_coeff(c, has_monomial):
    """Return (negative, text) for one coefficient; text is '' for a bare unit."""
    if c.im == 0:
        mag = abs(c.re)
        text = "" if (mag == 1 and has_monomial) else _rat(mag)
        return c.re < 0, text
    if c.re == 0:
        mag = abs(c.im)
        text = "i" if mag == 1 else f"{_rat(mag)}*i"
        return c.im < 0, text
    im_sign = "-" if c.im < 0 else "+"
    im_mag = abs(c.im)
    im_text = "i" if im_mag == 1 else f"{_rat(im_mag)}*i"
    return False, f"({_rat(c.re)} {im_sign} {im_text})"


def format_poly(p):
    if p.is_zero():
        return "0"
    pieces = []
    for exps, c in p.sorted_terms():
        mono = _monomial(p.vars, exps)
        neg, ctext = _signed_coeff(c, bool(mono))
        body = "*".join(s for s in (ctext, mono) if s)
        if not pieces:
            pieces.append(("-" if neg else "") + body)
        else:
            pieces.append((" - " if neg else " + ") + body)
    return "".join(pieces)
