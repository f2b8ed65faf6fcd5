"""Builtin radially symmetric Green's functions and their closed-form low-order derivatives."""

from dataclasses import dataclass, field
import math

import numpy as np

from ..errors import CapabilityError, ConfigError, DomainError
from ..pde2ode import PdeSpec, pde_from_dict
from ..symcore import sqrt_coefficient_table
from .special import bessel_k01_array, hankel1_01_array

BUILTIN_IDS = (
    "laplace2d", "laplace3d", "helmholtz2d", "helmholtz3d",
    "yukawa2d", "yukawa3d", "biharmonic2d", "biharmonic3d",
)
_NEEDS_K = {"helmholtz2d", "helmholtz3d", "yukawa2d", "yukawa3d"}
BASE_ORDER = 3


@dataclass(frozen=True)
class KernelSpec:
    id: str
    dimension: int
    pde: PdeSpec
    k: object = None
    base_order: int = BASE_ORDER
    # custom kernels only: callable(x, m) -> [d^0 .. d^m along x1]
    base_callback: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.pde.dimension != self.dimension:
            raise ConfigError("kernel dimension does not match its PDE")
        if self.id not in BUILTIN_IDS and self.id != "custom":
            raise ConfigError(f"unknown kernel id {self.id!r}")
        if self.id == "custom" and self.base_callback is None:
            raise ConfigError("custom kernels need a base-derivative callback")

    @property
    def is_complex(self):
        return self.id in ("helmholtz2d", "helmholtz3d") or (self.k is not None and np.iscomplexobj(self.k))

    @property
    def param_values(self):
        return {} if self.k is None else {"k": self.k}


def _laplacian_entries(d, power):
    """Multi-indices of Delta^power with multinomial weights."""
    entries = {}

    def rec(i, left, acc, weight):
        if i == d - 1:
            acc = acc + [left]
            mi = tuple(2 * a for a in acc)
            entries[mi] = entries.get(mi, 0) + weight * math.factorial(power) // math.prod(
                math.factorial(a) for a in acc)
            return
        for a in range(left + 1):
            rec(i + 1, left - a, acc + [a], weight)

    rec(0, power, [], 1)
    return entries


def builtin_pde(kernel_id):
    d = 2 if kernel_id.endswith("2d") else 3
    if kernel_id.startswith("biharmonic"):
        return pde_from_dict(d, 4, {mi: str(w) for mi, w in _laplacian_entries(d, 2).items()})
    entries = {mi: str(w) for mi, w in _laplacian_entries(d, 1).items()}
    if kernel_id.startswith("helmholtz"):
        entries[(0,) * d] = "k^2"
    elif kernel_id.startswith("yukawa"):
        entries[(0,) * d] = "-k^2"
    return pde_from_dict(d, 2, entries)


def get_kernel(kernel_id, k=None):
    if kernel_id not in BUILTIN_IDS:
        raise ConfigError(f"unknown builtin kernel {kernel_id!r}; choose from {', '.join(BUILTIN_IDS)}")
    if kernel_id in _NEEDS_K:
        if k is None:
            raise ConfigError(f"kernel {kernel_id} needs a wave number k")
        if kernel_id.endswith("2d"):
            k = float(k)
            if not k > 0:
                raise ConfigError("2D Bessel kernels need real k > 0")
        elif complex(k) == 0:
            raise ConfigError("k must be nonzero")
    elif k is not None:
        raise ConfigError(f"kernel {kernel_id} takes no parameter k")
    d = 2 if kernel_id.endswith("2d") else 3
    return KernelSpec(kernel_id, d, builtin_pde(kernel_id), k)


def custom_kernel(pde, base_callback, base_order=BASE_ORDER, k=None):
    return KernelSpec("custom", pde.dimension, pde, k, base_order, base_callback)


# ---------------------------------------------------------------------------
# closed forms in binary64 (vectorized over r)


def radial_derivatives(kernel, r, m):
    """[G, G', ..., G^(m)] as functions of r; m <= base_order."""
    if m > kernel.base_order:
        raise CapabilityError(f"closed forms stop at order {kernel.base_order}")
    if kernel.id == "custom":
        raise CapabilityError("custom kernels expose derivatives only through their callback")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("kernel evaluated at r <= 0")
    kid, k = kernel.id, kernel.k
    pi = math.pi
    if kid == "laplace2d":
        out = [-np.log(r) / (2 * pi), -1 / (2 * pi * r), 1 / (2 * pi * r ** 2), -1 / (pi * r ** 3)]
    elif kid == "laplace3d":
        out = [-1 / (4 * pi * r), 1 / (4 * pi * r ** 2), -1 / (2 * pi * r ** 3), 3 / (2 * pi * r ** 4)]
    elif kid == "biharmonic2d":
        lg = np.log(r)
        out = [r ** 2 * lg / (8 * pi), (2 * r * lg + r) / (8 * pi), (2 * lg + 3) / (8 * pi), 1 / (4 * pi * r)]
    elif kid == "biharmonic3d":
        out = [-r / (8 * pi), -np.ones_like(r) / (8 * pi), np.zeros_like(r), np.zeros_like(r)]
    elif kid == "helmholtz2d":
        z = k * r
        h0, h1 = hankel1_01_array(z)
        c = 0.25j
        out = [c * h0, -c * k * h1, c * k ** 2 * (h1 / z - h0), c * k ** 3 * (h1 + h0 / z - 2 * h1 / z ** 2)]
    elif kid == "yukawa2d":
        z = k * r
        k0, k1 = bessel_k01_array(z)
        c = 1 / (2 * pi)
        out = [c * k0, -c * k * k1, c * k ** 2 * (k0 + k1 / z), -c * k ** 3 * (k1 + k0 / z + 2 * k1 / z ** 2)]
    elif kid in ("helmholtz3d", "yukawa3d"):
        a = 1j * k if kid == "helmholtz3d" else -k
        e = np.exp(a * r) / (4 * pi)
        # Leibniz on e^{a r} * r^{-1}
        out = []
        for n in range(4):
            acc = 0
            for j in range(n + 1):
                acc = acc + math.comb(n, j) * a ** (n - j) * (-1) ** j * math.factorial(j) / r ** (j + 1)
            out.append(e * acc)
    else:
        raise CapabilityError(kernel.id)
    return [np.asarray(v) for v in out[: m + 1]]


def eval_kernel(kernel, r):
    if np.any(np.asarray(r) <= 0):
        raise DomainError("kernel evaluated at r <= 0")
    v = radial_derivatives(kernel, r, 0)[0]
    return v[()] if v.ndim == 0 else v


def _split(x):
    x = np.asarray(x, dtype=float)
    x1 = x[0]
    xbar2 = np.sum(x[1:] ** 2, axis=0)
    return x1, xbar2


def base_derivatives(kernel, x, m):
    """[d^0 .. d^m along x1] of G(|x|) at x (shape (d,) or (d, M)), m <= base_order."""
    if m > kernel.base_order:
        raise CapabilityError(f"closed forms stop at order {kernel.base_order}")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != kernel.dimension:
        raise DomainError(f"point has dimension {x.shape[0]}, kernel expects {kernel.dimension}")
    x1, xbar2 = _split(x)
    r2 = x1 ** 2 + xbar2
    if np.any(r2 == 0):
        raise DomainError("derivatives requested at the origin")
    if kernel.id == "custom":
        return [np.asarray(v) for v in kernel.base_callback(x, m)]
    r = np.sqrt(r2)
    g = radial_derivatives(kernel, r, m)
    a1 = x1 / r
    a2 = xbar2 / (r * r2)
    a3 = -3 * x1 * xbar2 / (r2 * r2 * r)
    out = [g[0]]
    if m >= 1:
        out.append(g[1] * a1)
    if m >= 2:
        out.append(g[2] * a1 ** 2 + g[1] * a2)
    if m >= 3:
        out.append(g[3] * a1 ** 3 + 3 * g[2] * a1 * a2 + g[1] * a3)
    return out


_SQRT_TABLE = sqrt_coefficient_table(BASE_ORDER)


def axis_values(kernel, xbar, j_max):
    """(d^{2j} G)|_{x1=0} for j = 0..j_max at distance ``xbar`` from the axis.

    Uses d^{2j}_{x1} f(x1^2 + xbar^2)|_{x1=0} = (2j)!/j! f^(j)(xbar^2) with
    f(s) = G(sqrt s), so order 2j needs radial derivatives up to j.
    """
    if j_max > kernel.base_order:
        raise CapabilityError(f"on-axis closed forms stop at order {2 * kernel.base_order}")
    xbar = np.asarray(xbar, dtype=float)
    if np.any(xbar <= 0):
        raise DomainError("on-axis values need xbar > 0")
    if kernel.id == "custom":
        pt = np.stack([np.zeros_like(xbar), xbar] + [np.zeros_like(xbar)] * (kernel.dimension - 2))
        vals = kernel.base_callback(pt, 2 * j_max)
        return [np.asarray(vals[2 * j]) for j in range(j_max + 1)]
    g = radial_derivatives(kernel, xbar, j_max)
    out = []
    for j in range(j_max + 1):
        if j == 0:
            out.append(g[0])
            continue
        fj = 0
        for l in range(1, j + 1):
            fj = fj + float(_SQRT_TABLE[j][l]) * g[l] * xbar ** (-(2 * j - l))
        out.append(math.factorial(2 * j) // math.factorial(j) * fj)
    return out
