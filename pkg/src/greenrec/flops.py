"""Instrumented operation counts shared by the evaluator and the QBX backends."""

from dataclasses import dataclass


@dataclass
class FlopCounter:
    additions: int = 0
    multiplications: int = 0
    special_calls: int = 0

    def add(self, additions=0, multiplications=0, special_calls=0, times=1):
        if min(additions, multiplications, special_calls, times) < 0:
            raise ValueError("flop counts only grow")
        self.additions += additions * times
        self.multiplications += multiplications * times
        self.special_calls += special_calls * times

    def merge(self, other):
        self.add(other.additions, other.multiplications, other.special_calls)
        return self

    @property
    def flops(self):
        return self.additions + self.multiplications

    def snapshot(self):
        return FlopCounter(self.additions, self.multiplications, self.special_calls)

    def __sub__(self, other):
        return FlopCounter(self.additions - other.additions, self.multiplications - other.multiplications,
                           self.special_calls - other.special_calls)


# modeled per-point cost of the closed-form seeds d^0..d^m along x1: (adds, mults, special calls)
# counts follow the formulas in kernels.registry.radial_derivatives and base_derivatives
_RADIAL_COST = {
    "laplace2d": [(0, 1, 1), (0, 2, 0), (0, 3, 0), (0, 3, 0)],
    "laplace3d": [(0, 2, 0), (0, 3, 0), (0, 3, 0), (0, 3, 0)],
    "biharmonic2d": [(0, 3, 1), (1, 3, 0), (1, 2, 0), (0, 2, 0)],
    "biharmonic3d": [(0, 2, 0), (0, 0, 0), (0, 0, 0), (0, 0, 0)],
    "helmholtz2d": [(0, 2, 2), (0, 2, 0), (1, 4, 0), (2, 8, 0)],
    "yukawa2d": [(0, 2, 2), (0, 2, 0), (1, 4, 0), (2, 8, 0)],
    "helmholtz3d": [(0, 3, 1), (1, 4, 0), (2, 6, 0), (3, 8, 0)],
    "yukawa3d": [(0, 3, 1), (1, 4, 0), (2, 6, 0), (3, 8, 0)],
}
# chain rule along x1 for orders 1..3, plus r, x1/r and the xbar^2 pieces
_CHAIN_COST = [(1, 3, 1), (0, 1, 0), (1, 4, 0), (2, 8, 0)]


def seed_cost(kernel_id, m):
    adds = mults = calls = 0
    table = _RADIAL_COST.get(kernel_id, [(0, 0, 1)] * 4)
    for j in range(m + 1):
        a, b, c = table[j]
        adds, mults, calls = adds + a, mults + b, calls + c
        a, b, c = _CHAIN_COST[j]
        adds, mults, calls = adds + a, mults + b, calls + c
    return adds, mults, calls


def axis_seed_cost(kernel_id, j_max):
    """(d^{2j} G)|_0 for j <= j_max from radial derivatives up to j_max."""
    adds = mults = calls = 0
    table = _RADIAL_COST.get(kernel_id, [(0, 0, 1)] * 4)
    for j in range(j_max + 1):
        a, b, c = table[j]
        adds, mults, calls = adds + a, mults + b, calls + c
        # sqrt-rule combination: j terms, 3 mults and 1 add each
        adds += j
        mults += 3 * j
    return adds, mults, calls
