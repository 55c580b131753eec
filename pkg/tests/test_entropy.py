import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from ctables.core import Margins
from ctables.counting import count_exact
from ctables.entropy import (
    GeometricModel,
    barvinok_bounds,
    entropy_f,
    entropy_g,
    geometric_model,
    typical_table,
)
from ctables.errors import ConvergenceError


def test_entropy_f_examples():
    assert entropy_f(0) == 0
    assert entropy_f(1) == pytest.approx(2 * math.log(2), abs=1e-15)
    assert entropy_f(2) == pytest.approx(3 * math.log(3) - 2 * math.log(2), abs=1e-15)


def test_entropy_f_vectorised_and_domain():
    assert np.allclose(entropy_f(np.array([0.0, 1.0])), [0.0, 2 * math.log(2)])
    with pytest.raises(ValueError):
        entropy_f(-0.5)


def test_entropy_g_examples():
    n, C = 3, 2
    assert entropy_g(np.full((n, n), C)) == pytest.approx(n * n * entropy_f(C), rel=1e-15)
    assert entropy_g(np.zeros((2, 3))) == 0
    assert entropy_g([[1, 1], [1, 1]]) == pytest.approx(8 * math.log(2), rel=1e-15)


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("C", [1, 2, 3])
def test_typical_uniform_is_constant(n, C):
    tt = typical_table(Margins.uniform(n, C, warn=False))
    assert np.max(np.abs(tt.Z - C)) < 1e-10
    assert tt.residual < 1e-10
    assert tt.dual_residual() < 1e-9
    assert abs(tt.col_potentials.sum()) < 1e-9


def test_typical_single_row():
    tt = typical_table(Margins((6,), (1, 2, 3)))
    assert np.allclose(tt.Z, [[1, 2, 3]], atol=1e-10)


def test_typical_2x2():
    tt = typical_table(Margins((2, 2), (2, 2)))
    assert np.allclose(tt.Z, 1, atol=1e-10)


def test_typical_zero_lines():
    tt = typical_table(Margins((0, 3, 3), (2, 0, 4)))
    assert np.all(tt.Z[0] == 0) and np.all(tt.Z[:, 1] == 0)
    assert np.allclose(tt.Z.sum(axis=1), [0, 3, 3], atol=1e-9)
    assert np.isinf(tt.row_potentials[0]) and np.isinf(tt.col_potentials[1])
    d = tt.to_dict()
    assert d["duals"]["row"][0] is None


def test_typical_all_zero():
    tt = typical_table(Margins((0, 0), (0, 0)))
    assert tt.gZ == 0 and tt.sweeps == 0


def test_typical_sweep_cap():
    with pytest.raises(ConvergenceError) as info:
        typical_table(Margins((5, 1, 1), (1, 1, 5)), max_sweeps=0)
    assert info.value.iterations == 0


def _slsqp_max_g(row, col):
    m, n = len(row), len(col)
    N = sum(row)
    cons = [{"type": "eq", "fun": lambda z, i=i: z.reshape(m, n)[i].sum() - row[i]} for i in range(m)]
    cons += [{"type": "eq", "fun": lambda z, j=j: z.reshape(m, n)[:, j].sum() - col[j]} for j in range(n - 1)]
    x0 = np.outer(row, col).ravel() / N
    res = optimize.minimize(
        lambda z: -entropy_g(np.clip(z, 0, None)),
        x0,
        method="SLSQP",
        bounds=[(0, None)] * (m * n),
        constraints=cons,
        options={"ftol": 1e-13, "maxiter": 500},
    )
    return -res.fun


@given(
    st.lists(st.integers(1, 6), min_size=2, max_size=3),
    st.lists(st.integers(1, 6), min_size=2, max_size=3),
)
def test_typical_matches_generic_optimiser(row, col):
    diff = sum(row) - sum(col)
    if diff > 0:
        col[-1] += diff
    else:
        row[-1] -= diff
    tt = typical_table(Margins(row, col))
    assert np.allclose(tt.Z.sum(axis=1), row, atol=1e-9)
    assert np.allclose(tt.Z.sum(axis=0), col, atol=1e-9)
    assert tt.dual_residual() < 1e-9
    assert tt.gZ >= _slsqp_max_g(row, col) - 1e-7


def test_barvinok_examples():
    b = barvinok_bounds(Margins.uniform(2, 2))
    assert b.gZ == pytest.approx(4 * entropy_f(2), rel=1e-12)
    assert b.gZ == pytest.approx(7.638, abs=1e-3)
    # e^{4 f(2)} = 3^12 / 2^8
    assert math.exp(b.log_upper) == pytest.approx(3**12 / 2**8, rel=1e-12)
    assert math.exp(b.log_upper) >= count_exact(Margins.uniform(2, 2))
    assert math.exp(barvinok_bounds(Margins((1, 1), (1, 1))).log_upper) >= 2
    assert barvinok_bounds(Margins((4,), (1, 3))).log_upper >= 0
    assert "gamma" in b.log_lower_symbolic


def test_geometric_model_examples():
    model = geometric_model(typical_table(Margins.uniform(3, 2)))
    assert np.allclose(model.means, 2)
    assert GeometricModel([[1.0]]).pmf(0)[0, 0] == pytest.approx(0.5)
    assert GeometricModel([[2.0]]).pmf(1)[0, 0] == pytest.approx(2 / 9)


def test_geometric_log_prob():
    model = GeometricModel.constant((2, 2), 1)
    assert model.log_prob([[1, 0], [0, 1]]) == pytest.approx(-6 * math.log(2))
    assert GeometricModel([[0.0]]).log_prob([[1]]) == -math.inf
