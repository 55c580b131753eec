"""Exact and asymptotic counts of tables with fixed margins.

All exact paths use Python integers, so nothing overflows or rounds.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, List, Optional

from .core import Margins, Table, balanced_vector
from .errors import ResourceError

#: Default cap on the number of tables ``enumerate_tables`` will materialise.
ENUMERATION_CAP = 10**6

#: Largest n for which ``rn_ratio`` uses exact counts by default.
# rough size of the row-state space; above it exact counting gets slow
RN_EXACT_STATES = 5000


def _bounded_vectors(total: int, caps) -> Iterator[tuple]:
    """All ``x`` with ``0 <= x_k <= caps[k]`` and ``sum(x) == total``, lexicographic."""
    k = len(caps)
    if k == 0:
        if total == 0:
            yield ()
        return
    tail = sum(caps[1:])
    for first in range(max(0, total - tail), min(caps[0], total) + 1):
        for rest in _bounded_vectors(total - first, caps[1:]):
            yield (first,) + rest


def enumerate_tables(margins: Margins, cap: int = ENUMERATION_CAP) -> List[Table]:
    """Every table with the given margins, in lexicographic order of flattened entries.

    Brute force; intended as an oracle for small instances. Raises
    :class:`ResourceError` once more than ``cap`` tables have been produced.
    """
    out = []

    def rows_from(i, col_left, prefix):
        if i == margins.m:
            if not any(col_left):
                out.append(prefix)
                if len(out) > cap:
                    raise ResourceError(f"more than {cap} tables with margins {margins}")
            return
        for row in _bounded_vectors(margins.row[i], col_left):
            rows_from(i + 1, tuple(c - x for c, x in zip(col_left, row)), prefix + [row])

    rows_from(0, margins.col, [])
    return [Table(rows, margins) for rows in out]


def _group_transitions(groups, c):
    """Ways to take ``c`` units from rows grouped as ``((value, multiplicity), ...)``.

    Yields ``(new_values, weight)`` where ``new_values`` is the multiset of
    remaining row margins as a Counter and ``weight`` counts the distinct
    assignments to labelled rows that produce it.
    """
    if not groups:
        if c == 0:
            yield Counter(), 1
        return
    (v, mult), rest = groups[0], groups[1:]
    rest_cap = sum(val * mu for val, mu in rest)

    # split the ``mult`` rows of this group by how much each gives (0..v)
    def splits(level, rows_left, taken):
        if level == v:
            yield (rows_left,), taken + v * rows_left
            return
        for k in range(rows_left + 1):
            for tail, tot in splits(level + 1, rows_left - k, taken + level * k):
                yield (k,) + tail, tot

    for counts, taken in splits(0, mult, 0):
        if taken > c or c - taken > rest_cap:
            continue
        weight = math.factorial(mult)
        for k in counts:
            weight //= math.factorial(k)
        here = Counter()
        for give, k in enumerate(counts):
            if k:
                here[v - give] += k
        for tail, w in _group_transitions(rest, c - taken):
            yield here + tail, weight * w


def count_exact(margins: Margins) -> int:
    """``#M(row, col)`` by column recursion memoised on the sorted remaining row margins.

    Rows with equal remaining margin are interchangeable, so each column is
    distributed over groups of equal rows with multinomial weights.
    """
    row = tuple(sorted(margins.row))
    col = tuple(sorted(margins.col, reverse=True))
    # fewer rows means fewer states; the count is symmetric under transposition
    if len(row) > len(col):
        row, col = tuple(sorted(col)), tuple(sorted(row, reverse=True))
    ncols = len(col)

    @lru_cache(maxsize=None)
    def rec(state, j):
        if j == ncols - 1:
            return 1
        groups = tuple(sorted(Counter(v for v in state if v).items()))
        total = 0
        for remaining, weight in _group_transitions(groups, col[j]):
            new_state = tuple(sorted(remaining.elements()))
            total += weight * rec(new_state, j + 1)
        return total

    return rec(tuple(v for v in row if v), 0)


def composition_polynomial(caps) -> List[int]:
    """Coefficients of ``prod_l (1 + q + ... + q**caps[l])``, lowest degree first."""
    coeffs = [1]
    for a in caps:
        a = int(a)
        if a < 0:
            raise ValueError("caps must be non-negative")
        # multiply by (1 + ... + q^a) via a running window sum
        new = [0] * (len(coeffs) + a)
        window = 0
        for d in range(len(new)):
            if d < len(coeffs):
                window += coeffs[d]
            if d - a - 1 >= 0:
                window -= coeffs[d - a - 1]
            new[d] = window
        coeffs = new
    return coeffs


def bounded_compositions(caps, r: int) -> int:
    """Number of ``x`` with ``0 <= x_l <= caps[l]`` summing to ``r``; 0 when out of range."""
    coeffs = composition_polynomial(caps)
    if not 0 <= r < len(coeffs):
        return 0
    return coeffs[r]


def is_symmetric_unimodal(coeffs) -> bool:
    """Palindromic, ends equal to 1, non-decreasing up to the middle."""
    S = len(coeffs) - 1
    if coeffs[0] != 1 or coeffs[S] != 1:
        return False
    if any(coeffs[j] != coeffs[S - j] for j in range(S + 1)):
        return False
    return all(coeffs[j] <= coeffs[j + 1] for j in range(S // 2))


def smooth_margin(b, i: int, j: int) -> tuple:
    """Replace ``b[i], b[j]`` by the balanced split ``(floor(s/2), ceil(s/2))``."""
    if i == j:
        raise ValueError("smoothing needs two distinct positions")
    b = list(b)
    s = b[i] + b[j]
    b[i], b[j] = s // 2, s - s // 2
    return tuple(b)


def _positive_compositions(total, parts):
    for cut in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cut + (total,)
        yield tuple(bounds[k + 1] - bounds[k] for k in range(parts))


@dataclass
class MaximalityReport:
    m: int
    n: int
    N: int
    pairs_checked: int
    max_count: int
    maximizer: tuple
    balanced: tuple
    balanced_count: int
    smoothing_checks: int
    smoothing_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.balanced_count == self.max_count and not self.smoothing_violations

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("max_count", "balanced_count"):
            d[key] = str(d[key])
        d["ok"] = self.ok
        return d


def verify_margin_maximality(m: int, n: int, N: int, max_pairs: int = 200_000) -> MaximalityReport:
    """Exhaustive check that balanced margins maximise the table count.

    Runs over every pair of positive margin vectors of lengths ``m`` and ``n``
    with total ``N``. Also checks that smoothing any two column margins never
    lowers the count.
    """
    if N < max(m, n):
        raise ValueError("positive margins need N >= max(m, n)")
    n_pairs = math.comb(N - 1, m - 1) * math.comb(N - 1, n - 1)
    if n_pairs > max_pairs:
        raise ResourceError(f"{n_pairs} margin pairs exceed cap {max_pairs}")

    @lru_cache(maxsize=None)
    def count(a, b):
        return count_exact(Margins(a, b))

    def key(a, b):
        return tuple(sorted(a)), tuple(sorted(b))

    best, best_pair = -1, None
    violations = []
    checks = 0
    for a in _positive_compositions(N, m):
        for b in _positive_compositions(N, n):
            c = count(*key(a, b))
            if c > best:
                best, best_pair = c, (a, b)
            for i, j in itertools.combinations(range(n), 2):
                b2 = smooth_margin(b, i, j)
                checks += 1
                if c > count(*key(a, b2)):
                    violations.append({"a": a, "b": b, "positions": (i, j)})
    a_star, b_star = balanced_vector(N, m), balanced_vector(N, n)
    return MaximalityReport(
        m=m,
        n=n,
        N=N,
        pairs_checked=n_pairs,
        max_count=best,
        maximizer=best_pair,
        balanced=(a_star, b_star),
        balanced_count=count(*key(a_star, b_star)),
        smoothing_checks=checks,
        smoothing_violations=violations,
    )


def log_binomial(n: int, k: int) -> float:
    """``ln C(n, k)``."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if n <= 100_000:
        return math.log(math.comb(n, k))
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binary_entropy(gamma: float) -> float:
    return -gamma * math.log(gamma) - (1 - gamma) * math.log(1 - gamma)


def binom_entropy_estimate(n: int, gamma: float) -> float:
    """Stirling estimate of ``ln C(n, gamma n)`` with its second-order correction."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return (
        binary_entropy(gamma) * n
        + 0.5 * math.log(1 / gamma)
        - 0.5 * math.log(2 * math.pi * (1 - gamma) * n)
    )


@dataclass(frozen=True)
class CMEstimate:
    """Canfield-McKay asymptotic for equal-margin tables, in log space."""

    log_count: float
    lam: float
    A: float
    applicable: bool
    a: float
    b: float

    def to_dict(self) -> dict:
        return asdict(self)


def cm_log_count(m: int, n: int, r: int, c: int, a: float = 0.25, b: float = 0.2) -> CMEstimate:
    """Closed-form Canfield-McKay estimate of ``ln #M((r)_m, (c)_n)``.

    ``applicable`` reports whether the estimate's growth hypothesis holds for
    the chosen constants ``a, b``; the estimate is returned either way.
    """
    if m * r != n * c:
        raise ValueError(f"need m*r == n*c, got {m}*{r} != {n}*{c}")
    if min(m, n, r, c) <= 0:
        raise ValueError("dimensions and line sums must be positive")
    lam = r / n
    A = lam * (1 + lam) / 2
    log_count = (
        m * n * ((1 + lam) * math.log1p(lam) - lam * math.log(lam))
        - (m + n - 1) / 2 * math.log(4 * math.pi * A)
        - (n - 1) / 2 * math.log(m)
        - (m - 1) / 2 * math.log(n)
        + 0.5
        - (1 + 2 * A) / (24 * A) * (m / n + n / m)
    )
    hyp = (1 + 2 * lam) ** 2 / (4 * lam * (1 + lam)) * (1 + 5 * m / (6 * n) + 5 * n / (6 * m))
    applicable = a > 0 and b > 0 and a + b < 0.5 and hyp <= a * math.log(n)
    return CMEstimate(log_count, lam, A, applicable, a, b)


def count_row_class(n: int, C: int, r: int) -> int:
    """``#R(Cn, r)``: ``r x n`` tables with row sums ``Cn`` and free columns."""
    if r < 0:
        raise ValueError("r must be non-negative")
    return math.comb(C * n + n - 1, n - 1) ** r


@dataclass(frozen=True)
class RnRatioReport:
    n: int
    C: int
    r: int
    ratio: float
    limit: float
    method: str

    @property
    def distance(self) -> float:
        return abs(self.ratio - self.limit)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["distance"] = self.distance
        return d


def rn_ratio(n: int, C: int, r: int, exact: Optional[bool] = None) -> RnRatioReport:
    """``#R(Cn,r) / #M(Cn,n) * #M((Cn)_{n-r}, (C(n-r))_n)`` against its limit ``e^{r/2}``.

    Exact counts are used while ``comb(Cn + n, n) <= RN_EXACT_STATES`` unless
    ``exact`` says otherwise; beyond that both table counts come from
    :func:`cm_log_count`.
    """
    if not 1 <= r < n:
        raise ValueError(f"need 1 <= r < n, got r={r}, n={n}")
    if exact is None:
        exact = math.comb(C * n + n, n) <= RN_EXACT_STATES
    if exact:
        full = count_exact(Margins((C * n,) * n, (C * n,) * n))
        part = count_exact(Margins((C * n,) * (n - r), (C * (n - r),) * n))
        ratio = float(Fraction(count_row_class(n, C, r) * part, full))
        method = "exact"
    else:
        log_full = cm_log_count(n, n, C * n, C * n).log_count
        log_part = cm_log_count(n - r, n, C * n, C * (n - r)).log_count
        log_rows = r * log_binomial(C * n + n - 1, n - 1)
        ratio = math.exp(log_rows + log_part - log_full)
        method = "estimated"
    return RnRatioReport(n, C, r, ratio, math.exp(r / 2), method)
