import numpy as np
import pytest

from greenrec.symcore import parse_poly, standard_vars


def proportional(a, b):
    """Two coefficient lists define the same operator up to a polynomial scalar."""
    if len(a) != len(b):
        return False
    if [p.is_zero() for p in a] != [q.is_zero() for q in b]:
        return False
    return all(a[i] * b[j] == a[j] * b[i] for i in range(len(a)) for j in range(len(a)))


def polys(dimension, exprs, extra=("n", "k")):
    variables = standard_vars(dimension, extra=extra)
    return [parse_poly(e, allowed_vars=variables).with_vars(variables) for e in exprs]


def off_axis_points(rng, count, dimension=2, lo=0.2, hi=2.0, min_ratio=None):
    """Random points with both |x1| and xbar away from zero."""
    out = []
    while len(out) < count:
        x = rng.uniform(-hi, hi, size=dimension)
        xbar = np.linalg.norm(x[1:])
        if abs(x[0]) < lo or xbar < lo:
            continue
        if min_ratio is not None and abs(x[0]) / xbar < min_ratio:
            continue
        out.append(tuple(float(v) for v in x))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    monkeypatch.setenv("GREENREC_CACHE_DIR", str(d))
    return d
