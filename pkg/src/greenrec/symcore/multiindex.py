"""Multi-indices and vector partitions."""

from collections import Counter
from dataclasses import dataclass
from math import factorial, prod


@dataclass(frozen=True)
class MultiIndex:
    exponents: tuple

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise ValueError(f"multi-index entries must be non-negative: {exps}")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def unit(cls, d, i):
        return cls(tuple(1 if j == i else 0 for j in range(d)))

    @classmethod
    def zero(cls, d):
        return cls((0,) * d)

    @property
    def dim(self):
        return len(self.exponents)

    @property
    def order(self):
        return sum(self.exponents)

    def factorial(self):
        return prod(factorial(e) for e in self.exponents)

    def is_zero(self):
        return not any(self.exponents)

    def __len__(self):
        return len(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def __getitem__(self, i):
        return self.exponents[i]

    # componentwise partial order; deliberately no __lt__ so sorting needs an explicit key
    def __le__(self, other):
        self._check(other)
        return all(a <= b for a, b in zip(self.exponents, other.exponents))

    def __ge__(self, other):
        return other <= self

    def __add__(self, other):
        self._check(other)
        return MultiIndex(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __sub__(self, other):
        self._check(other)
        return MultiIndex(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def scale(self, m):
        return MultiIndex(tuple(m * a for a in self.exponents))

    def _check(self, other):
        if len(other) != len(self):
            raise ValueError("multi-index dimension mismatch")

    def __repr__(self):
        return f"MultiIndex{self.exponents}"


@dataclass(frozen=True)
class VectorPartition:
    """Multiset of nonzero multi-indices, stored as sorted (part, multiplicity) pairs."""

    parts: tuple

    @classmethod
    def from_parts(cls, parts):
        counts = Counter(p if isinstance(p, MultiIndex) else MultiIndex(p) for p in parts)
        return cls(tuple(sorted(counts.items(), key=lambda kv: kv[0].exponents, reverse=True)))

    def __post_init__(self):
        for part, mult in self.parts:
            if part.is_zero():
                raise ValueError("vector partitions contain only nonzero parts")
            if mult <= 0:
                raise ValueError("multiplicities must be positive")

    @property
    def multiplicity(self):
        return dict(self.parts)

    @property
    def cardinality(self):
        return sum(m for _, m in self.parts)

    def total(self):
        d = len(self.parts[0][0])
        acc = [0] * d
        for part, mult in self.parts:
            for i, e in enumerate(part):
                acc[i] += mult * e
        return MultiIndex(tuple(acc))

    def factorial(self):
        # the multinomial weight uses the product of multiplicity factorials
        return prod(factorial(m) for _, m in self.parts)


def _sub_indices_desc(bound, upper):
    """Nonzero b <= bound with b <= upper in reverse lexicographic order."""
    d = len(bound)
    out = []

    def rec(i, acc):
        if i == d:
            t = tuple(acc)
            if any(t) and t <= upper:
                out.append(t)
            return
        for e in range(bound[i], -1, -1):
            acc.append(e)
            rec(i + 1, acc)
            acc.pop()

    rec(0, [])
    return out


def enumerate_vector_partitions(alpha, k):
    """All partitions of ``alpha`` into exactly ``k`` nonzero parts."""
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(alpha)
    if alpha.order < 1:
        raise ValueError("alpha must have order at least 1")
    if k < 1:
        raise ValueError("k must be positive")
    if k > alpha.order:
        return set()

    results = set()

    def rec(remaining, upper, parts_left, acc):
        if parts_left == 0:
            if not any(remaining):
                results.add(VectorPartition.from_parts(acc))
            return
        if sum(remaining) < parts_left:
            return
        # parts are emitted in non-increasing lexicographic order to avoid duplicates
        for b in _sub_indices_desc(remaining, upper):
            rest = tuple(x - y for x, y in zip(remaining, b))
            acc.append(b)
            rec(rest, b, parts_left - 1, acc)
            acc.pop()

    rec(alpha.exponents, alpha.exponents, k, [])
    return results


def all_vector_partitions(alpha):
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(alpha)
    out = set()
    for k in range(1, alpha.order + 1):
        out |= enumerate_vector_partitions(alpha, k)
    return out
