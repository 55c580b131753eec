"""Discrete laws: geometric references, distances, empirical marginals and blocks.

Total variation here is the unhalved ``sum |p - q|``, so it ranges over
[0, 2] and is twice the more common convention.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Tuple

import numpy as np

from ..core import as_entries

SERIES_TAIL = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass on the integers ``offset, offset+1, ...``."""

    mass: np.ndarray
    offset: int = 0

    def __post_init__(self):
        arr = np.array(self.mass, dtype=float, copy=True)
        if arr.ndim != 1:
            raise ValueError("mass must be 1-D")
        if (arr < 0).any():
            raise ValueError("mass must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.mass))

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def mean(self) -> float:
        return float(np.dot(self.support, self.mass))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    def __call__(self, x: int) -> float:
        k = x - self.offset
        return float(self.mass[k]) if 0 <= k < len(self.mass) else 0.0

    @classmethod
    def point(cls, x: int) -> "Pmf":
        return cls(np.array([1.0]), offset=x)

    def to_rows(self):
        return list(zip(self.support.tolist(), self.mass.tolist()))


def _aligned(p: Pmf, q: Pmf):
    lo = min(p.offset, q.offset)
    hi = max(p.offset + len(p.mass), q.offset + len(q.mass))
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[p.offset - lo : p.offset - lo + len(p.mass)] = p.mass
    b[q.offset - lo : q.offset - lo + len(q.mass)] = q.mass
    return a, b


def tv_distance(p: Pmf, q: Pmf) -> float:
    """``sum_x |p(x) - q(x)|`` (no factor 1/2)."""
    a, b = _aligned(p, q)
    return float(np.abs(a - b).sum())


def w1_distance(p: Pmf, q: Pmf) -> float:
    """Wasserstein-1 distance on the integer line: ``sum_x |F_p(x) - F_q(x)|``."""
    a, b = _aligned(p, q)
    return float(np.abs(np.cumsum(a) - np.cumsum(b)).sum())


def geom_pmf(C, x):
    """``(1/(1+C)) (C/(1+C))**x`` for ``x >= 0``, else 0."""
    x = np.asarray(x)
    q = C / (1 + C)
    val = np.where(x >= 0, (1 / (1 + C)) * q ** np.where(x >= 0, x, 0), 0.0)
    return float(val) if np.ndim(val) == 0 else val


def geom_law(C, upto: int) -> Pmf:
    """``Geom(C)`` restricted to ``0..upto`` (mass ``(C/(1+C))**(upto+1)`` omitted)."""
    return Pmf(geom_pmf(C, np.arange(upto + 1)))


def geom_tail(C, x: int) -> float:
    """``P(Y > x)`` for ``Y ~ Geom(C)``."""
    return (C / (1 + C)) ** (x + 1)


def geom_moment(C, alpha: int) -> float:
    """``E[Y**alpha]`` for ``Y ~ Geom(C)`` by direct summation.

    Terms are added until the remaining tail, bounded by a geometric series
    from the current term once the term ratio drops below 1, is under 1e-12.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    q = C / (1 + C)
    total = 0.0
    x = 0
    while True:
        term = (1 / (1 + C)) * q**x * x**alpha
        total += term
        if x > 0:
            r = q * ((x + 1) / x) ** alpha
            if r < 1 and term * r / (1 - r) < SERIES_TAIL:
                return total
        x += 1


def row_class_marginal_pmf(n: int, C: int, x: int) -> float:
    """Law of one entry of a uniform ``1 x n`` row with sum ``Cn``.

    ``C(Cn - x + n - 2, n - 2) / C(Cn + n - 1, n - 1)`` for ``0 <= x <= Cn``.
    """
    return float(row_class_marginal_exact(n, C, x))


def row_class_marginal_exact(n: int, C: int, x: int) -> Fraction:
    if n < 2:
        raise ValueError("row class marginal needs n >= 2")
    if not 0 <= x <= C * n:
        return Fraction(0)
    return Fraction(math.comb(C * n - x + n - 2, n - 2), math.comb(C * n + n - 1, n - 1))


def row_class_law(n: int, C: int) -> Pmf:
    return Pmf([row_class_marginal_pmf(n, C, x) for x in range(C * n + 1)])


# --------------------------------------------------------------------------- empirical laws


def empirical_marginal(samples, i: int = 0, j: int = 0) -> Pmf:
    """Frequency law of entry ``(i, j)`` across sample tables."""
    arr = as_entries(samples)
    if arr.shape[0] == 0:
        raise ValueError("no samples")
    vals = arr[:, i, j]
    return Pmf(np.bincount(vals) / len(vals))


def pooled_marginal(samples) -> Pmf:
    """Frequency law of all entries of all tables (valid under exchangeability)."""
    arr = as_entries(samples)
    if arr.size == 0:
        raise ValueError("no samples")
    vals = arr.ravel()
    return Pmf(np.bincount(vals) / len(vals))


def tv_noise_floor(reference: Pmf, size: int) -> float:
    """Expected ``sum |p_hat - p|`` for ``size`` iid draws from ``reference`` (normal approximation)."""
    p = reference.mass
    return float(np.sqrt(2 / np.pi) * np.sqrt(p * (1 - p) / size).sum())


# --------------------------------------------------------------------------- max of iid geometrics


@dataclass(frozen=True)
class MaxEntryLaw:
    """Maximum of ``n**2`` iid ``Geom(C)`` entries."""

    C: int
    n: int

    @property
    def lam(self) -> float:
        return math.log((1 + self.C) / self.C)

    @property
    def harmonic(self) -> float:
        """``H_{n^2} = sum_{k <= n^2} 1/k``."""
        return math.fsum(1.0 / k for k in range(1, self.n * self.n + 1))

    def threshold(self, eps: float) -> float:
        return max_entry_threshold(self.n, self.C, eps)

    def expectation(self) -> float:
        return max_expectation_iid(self.n, self.C)

    def bounds(self) -> Tuple[float, float]:
        h = self.harmonic / self.lam
        return h - 1, h


def max_entry_threshold(n: int, C: int, eps: float) -> float:
    """``ln((C/(1+C)) n^{2+eps}) / ln((C+1)/C)``."""
    return (math.log(C / (1 + C)) + (2 + eps) * math.log(n)) / math.log((C + 1) / C)


def max_cdf_iid(n: int, C: int, x) -> float:
    """``P(max of n^2 iid Geom(C) <= x) = (1 - (C/(1+C))^{x+1})^{n^2}``."""
    if x < 0:
        return 0.0
    x = math.floor(x)
    return math.exp(n * n * math.log1p(-((C / (1 + C)) ** (x + 1))))


def max_expectation_iid(n: int, C: int) -> float:
    """``E[max]`` as ``sum_{x >= 0} (1 - CDF(x))``, summed until terms fall below 1e-17."""
    total = 0.0
    x = 0
    while True:
        term = -math.expm1(n * n * math.log1p(-((C / (1 + C)) ** (x + 1))))
        total += term
        if term < 1e-17:
            return total
        x += 1


# --------------------------------------------------------------------------- k x k blocks


@dataclass
class BlockLaw:
    """Joint law of a ``k x k`` block on the truncated support ``0..cutoff`` per entry.

    ``overflow`` is the mass of blocks with some entry above ``cutoff``.
    """

    k: int
    cutoff: int
    mass: Dict[tuple, float] = field(default_factory=dict)
    overflow: float = 0.0
    product_C: float = None  # set for the independent geometric reference

    def prob(self, key) -> float:
        if self.product_C is not None:
            if max(key) > self.cutoff:
                return 0.0
            return float(np.prod(geom_pmf(self.product_C, np.asarray(key))))
        return self.mass.get(tuple(key), 0.0)

    def total_inside(self) -> float:
        if self.product_C is not None:
            return (1 - geom_tail(self.product_C, self.cutoff)) ** (self.k * self.k)
        return float(sum(self.mass.values()))


def block_joint(samples, k: int, cutoff: int, pooled: bool = True, per_table: int = None) -> BlockLaw:
    """Empirical law of ``k x k`` blocks.

    With ``pooled`` every disjoint ``k x k`` block along the grid of each table
    counts as one observation (they share a law by exchangeability), or only
    the first ``per_table`` of them in row-major grid order; otherwise only
    the top-left block is used.
    """
    arr = as_entries(samples)
    S, m, n = arr.shape
    if k > min(m, n):
        raise ValueError("block larger than table")
    if pooled:
        nb_r, nb_c = m // k, n // k
        blocks = arr[:, : nb_r * k, : nb_c * k].reshape(S, nb_r, k, nb_c, k).transpose(0, 1, 3, 2, 4)
        blocks = blocks.reshape(S, nb_r * nb_c, k * k)
        if per_table is not None:
            if not 1 <= per_table <= nb_r * nb_c:
                raise ValueError(f"per_table must be in 1..{nb_r * nb_c}")
            blocks = blocks[:, :per_table]
        blocks = blocks.reshape(-1, k * k)
    else:
        blocks = arr[:, :k, :k].reshape(S, k * k)
    inside = blocks.max(axis=1) <= cutoff
    counts = Counter(map(tuple, blocks[inside].tolist()))
    total = len(blocks)
    return BlockLaw(
        k=k,
        cutoff=cutoff,
        mass={key: v / total for key, v in counts.items()},
        overflow=float((~inside).sum() / total),
    )


def product_geom_block(C, k: int, cutoff: int) -> BlockLaw:
    law = BlockLaw(k=k, cutoff=cutoff, product_C=C)
    law.overflow = 1 - law.total_inside()
    return law


def block_tv(empirical: BlockLaw, reference: BlockLaw) -> Tuple[float, float]:
    """TV on the truncated support plus the overflow difference, and the neglected-mass bound.

    The reference is summed in closed form over cells the empirical law never
    visits, so the cost scales with the number of observed blocks.
    """
    seen = 0.0
    diff = 0.0
    for key, p in empirical.mass.items():
        q = reference.prob(key)
        seen += q
        diff += abs(p - q)
    diff += reference.total_inside() - seen
    diff += abs(empirical.overflow - reference.overflow)
    return diff, max(empirical.overflow, reference.overflow)
