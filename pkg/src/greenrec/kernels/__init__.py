"""Green's function registry, closed-form derivatives, special functions and the oracle."""

from .registry import (
    BUILTIN_IDS,
    KernelSpec,
    axis_values,
    base_derivatives,
    builtin_pde,
    custom_kernel,
    eval_kernel,
    get_kernel,
    radial_derivatives,
)
from .special import bessel_j0y0j1y1, bessel_k01_array, bessel_k0k1, hankel1_01, hankel1_01_array
from .oracle import (
    DerivOracleResult,
    finite_difference_derivatives,
    oracle_derivatives,
    oracle_derivatives_fast,
    oracle_partials,
    pde_residual,
    radial_derivatives_mp,
)

__all__ = [
    "BUILTIN_IDS", "KernelSpec", "axis_values", "base_derivatives", "builtin_pde", "custom_kernel",
    "eval_kernel", "get_kernel", "radial_derivatives", "bessel_j0y0j1y1", "bessel_k0k1", "bessel_k01_array",
    "hankel1_01", "hankel1_01_array",
    "DerivOracleResult", "finite_difference_derivatives", "oracle_derivatives", "oracle_derivatives_fast",
    "oracle_partials", "pde_residual", "radial_derivatives_mp",
]
