"""Exact symbolic substrate: multi-indices, polynomials, partitions, chain rules."""

from .gaussian import QQi, I
from .multiindex import MultiIndex, VectorPartition, enumerate_vector_partitions, all_vector_partitions
from .poly import Poly, standard_vars, var_key
from .parse import parse_poly
from .printing import format_poly
from .rules import (
    ZTerm,
    SqrtZTerm,
    faa_di_bruno_radial,
    deriv_square_composition,
    deriv_sqrt_composition,
    shift_product_rule,
    square_coefficient_table,
    sqrt_coefficient_table,
    falling,
    rising,
)

__all__ = [
    "QQi", "I", "MultiIndex", "VectorPartition", "enumerate_vector_partitions",
    "all_vector_partitions", "Poly", "standard_vars", "var_key", "parse_poly", "format_poly",
    "ZTerm", "SqrtZTerm", "faa_di_bruno_radial", "deriv_square_composition",
    "deriv_sqrt_composition", "shift_product_rule", "square_coefficient_table",
    "sqrt_coefficient_table", "falling", "rising", "poly_arith",
]


def poly_arith(a, b, op):
    """Dispatch ``add | sub | mul | exact_divide`` on two Polys."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "exact_divide":
        return a.exact_divide(b)
    raise ValueError(f"unknown operation {op!r}")
