import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conftest import brute_force_tables
from ctables.core import Margins, validate_table
from ctables.counting import (
    binary_entropy,
    binom_entropy_estimate,
    bounded_compositions,
    cm_log_count,
    composition_polynomial,
    count_exact,
    count_row_class,
    enumerate_tables,
    is_symmetric_unimodal,
    log_binomial,
    rn_ratio,
    smooth_margin,
    verify_margin_maximality,
)
from ctables.errors import ResourceError


@pytest.mark.parametrize(
    "row, col, expected",
    [((1, 1), (1, 1), 2), ((2, 2), (2, 2), 3), ((3,), (1, 1, 1), 1)],
)
def test_enumerate_examples(row, col, expected):
    tables = enumerate_tables(Margins(row, col))
    assert len(tables) == expected
    assert all(validate_table(t) for t in tables)
    assert len(set(tables)) == expected


def test_enumerate_single_row_is_forced():
    (t,) = enumerate_tables(Margins((3,), (1, 1, 1)))
    assert t.tolist() == [[1, 1, 1]]


def test_enumerate_cap():
    with pytest.raises(ResourceError):
        enumerate_tables(Margins.uniform(3, 2), cap=10)


def test_count_examples():
    assert count_exact(Margins.uniform(2, 2)) == 5
    assert count_exact(Margins((1, 1), (1, 1))) == 2


def test_count_n3_c1_matches_brute_force():
    # 55, fixed by scanning all 3x3 matrices with entries <= 3
    expected = len(brute_force_tables((3, 3, 3), (3, 3, 3)))
    assert expected == 55
    assert count_exact(Margins.uniform(3, 1)) == 55


def test_count_uniform_c2_frozen():
    # frozen from enumerate_tables (n=3) and a transfer-matrix recomputation (n=4)
    assert count_exact(Margins.uniform(3, 2)) == 406 == len(enumerate_tables(Margins.uniform(3, 2)))
    assert count_exact(Margins.uniform(4, 2)) == 981541


def test_count_zero_margins():
    assert count_exact(Margins((0, 0), (0, 0))) == 1
    assert count_exact(Margins((0, 2), (1, 1))) == 1


margin_vec = st.lists(st.integers(0, 3), min_size=1, max_size=3)


@given(margin_vec, margin_vec)
def test_count_matches_brute_force(row, col):
    diff = sum(row) - sum(col)
    if diff > 0:
        col[-1] += diff
    else:
        row[-1] -= diff
    if max(row + col) > 4:
        return
    assert count_exact(Margins(row, col)) == len(brute_force_tables(row, col))


@given(margin_vec, margin_vec, st.randoms())
def test_count_symmetries(row, col, rnd):
    diff = sum(row) - sum(col)
    if diff > 0:
        col[-1] += diff
    else:
        row[-1] -= diff
    c = count_exact(Margins(row, col))
    assert count_exact(Margins(col, row)) == c
    rnd.shuffle(row)
    rnd.shuffle(col)
    assert count_exact(Margins(row, col)) == c


def _compositions_oracle(caps, r):
    return sum(1 for v in itertools.product(*(range(a + 1) for a in caps)) if sum(v) == r)


@pytest.mark.parametrize("caps, r, expected", [((1, 1, 1), 2, 3), ((5, 7), 0, 1), ((2, 2), 2, 3)])
def test_bounded_compositions_examples(caps, r, expected):
    assert bounded_compositions(caps, r) == expected == _compositions_oracle(caps, r)


def test_bounded_compositions_out_of_range():
    assert bounded_compositions((1, 2), 4) == 0
    assert bounded_compositions((1, 2), -1) == 0


@given(st.lists(st.integers(0, 4), min_size=1, max_size=4))
def test_composition_polynomial_matches_oracle(caps):
    coeffs = composition_polynomial(caps)
    assert len(coeffs) == sum(caps) + 1
    assert coeffs == [_compositions_oracle(caps, r) for r in range(sum(caps) + 1)]
    assert is_symmetric_unimodal(coeffs)


def test_unimodality_detector():
    assert is_symmetric_unimodal([1, 2, 1])
    assert not is_symmetric_unimodal([1, 3, 2, 3, 1])
    assert not is_symmetric_unimodal([1, 2, 2])


@pytest.mark.parametrize("b, expected", [((4, 2), (3, 3)), ((4, 1), (2, 3)), ((3, 3), (3, 3))])
def test_smooth_margin_examples(b, expected):
    assert smooth_margin(b, 0, 1) == expected


def test_smooth_margin_keeps_other_entries():
    assert smooth_margin((5, 9, 0, 2), 1, 3) == (5, 5, 0, 6)


def test_margin_maximality_examples():
    r = verify_margin_maximality(2, 2, 4)
    assert r.ok and r.maximizer == ((2, 2), (2, 2)) and r.max_count == 3
    r = verify_margin_maximality(2, 2, 2)
    assert r.ok and r.maximizer == ((1, 1), (1, 1))
    r = verify_margin_maximality(1, 3, 5)
    assert r.ok and r.max_count == 1


def test_margin_maximality_cap():
    with pytest.raises(ResourceError):
        verify_margin_maximality(3, 3, 30, max_pairs=10)


def test_log_binomial_examples():
    assert log_binomial(4, 2) == pytest.approx(math.log(6), abs=1e-15)
    assert log_binomial(9, 0) == 0
    assert log_binomial(10, 5) == pytest.approx(math.log(252), abs=1e-14)


def test_log_binomial_large_uses_lgamma():
    n, k = 300_000, 1000
    assert log_binomial(n, k) == pytest.approx(math.log(math.comb(n, k)), rel=1e-12)


def test_binary_entropy_half():
    assert binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)


@pytest.mark.parametrize("n, gamma", [(100, 0.5), (1000, 0.3)])
def test_binom_entropy_estimate(n, gamma):
    exact = math.log(math.comb(n, round(gamma * n)))
    assert abs(binom_entropy_estimate(n, gamma) - exact) < 0.01


def test_cm_constants_for_c2():
    est = cm_log_count(4, 4, 8, 8)
    assert est.lam == 2 and est.A == 3


def test_cm_symmetric_in_orientation():
    assert cm_log_count(3, 5, 10, 6).log_count == pytest.approx(cm_log_count(5, 3, 6, 10).log_count, abs=1e-12)


def test_cm_rejects_inconsistent_sums():
    with pytest.raises(ValueError):
        cm_log_count(3, 3, 4, 5)


def test_cm_error_shrinks():
    errs = [abs(cm_log_count(n, n, 2 * n, 2 * n).log_count - math.log(count_exact(Margins.uniform(n, 2)))) for n in (3, 4)]
    assert errs[1] < errs[0]


@pytest.mark.parametrize("n, C, r, expected", [(2, 2, 1, 5), (3, 1, 1, 10), (4, 3, 0, 1)])
def test_count_row_class(n, C, r, expected):
    assert count_row_class(n, C, r) == expected


def test_count_row_class_brute():
    # rows of length 3 summing to 3, two of them
    rows = sum(1 for v in itertools.product(range(4), repeat=3) if sum(v) == 3)
    assert count_row_class(3, 1, 2) == rows**2


def test_rn_ratio_limit_and_exact_value():
    rep = rn_ratio(4, 2, 1)
    assert rep.limit == pytest.approx(1.6487212707, abs=1e-9)
    assert rep.method == "exact"
    full = count_exact(Margins.uniform(4, 2))
    part = count_exact(Margins((8,) * 3, (6,) * 4))
    assert rep.ratio == pytest.approx(float(Fraction(math.comb(11, 3) * part, full)), rel=1e-15)


def test_rn_ratio_large_n_is_estimated():
    rep = rn_ratio(60, 2, 1)
    assert rep.method == "estimated"
    assert abs(rep.ratio - rep.limit) < 0.05


def test_rn_ratio_bad_r():
    with pytest.raises(ValueError):
        rn_ratio(3, 2, 3)
