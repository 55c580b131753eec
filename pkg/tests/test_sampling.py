import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from ctables.core import Margins, Table, validate_table
from ctables.counting import enumerate_tables
from ctables.entropy import GeometricModel
from ctables.errors import ExhaustedError
from ctables.sampling import (
    ChainConfig,
    ChainSampler,
    RejectionConfig,
    RejectionSampler,
    TruncatedGeomModel,
    make_sampler,
    rejection_sample,
    rejection_sample_many,
    sample_geometric_matrix,
    swap_chain_pooled,
    swap_chain_run,
    swap_chain_samples,
    truncated_geom_pmf,
)


def state_counts(arr, margins):
    index = {t: k for k, t in enumerate(enumerate_tables(margins))}
    counts = np.zeros(len(index), dtype=int)
    for x in arr:
        counts[index[Table(x, margins)]] += 1
    return counts


def test_geometric_matrix_moments():
    draws = sample_geometric_matrix(np.full((2, 2), 2.0), seed=11, size=100_000)
    x = draws[:, 0, 0]
    assert abs(x.mean() - 2) < 3 * math.sqrt(6 / len(x))
    p0 = 1 / 3
    assert abs((x == 0).mean() - p0) < 3 * math.sqrt(p0 * (1 - p0) / len(x))


def test_geometric_matrix_deterministic():
    a = sample_geometric_matrix(np.full((3, 3), 2.0), seed=5)
    b = sample_geometric_matrix(np.full((3, 3), 2.0), seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_geometric_matrix(np.full((3, 3), 2.0), seed=6))


def test_geometric_zero_mean_gives_zero():
    assert np.all(sample_geometric_matrix(np.zeros((2, 2)), seed=1, size=10) == 0)


def test_rejection_acceptance_probability_exact():
    # sum of iid-geometric probabilities of the three 2x2 tables with line sums 2
    margins = Margins.uniform(2, 1, warn=False)
    model = GeometricModel.constant((2, 2), 1)
    p = sum(math.exp(model.log_prob(t.entries)) for t in enumerate_tables(margins))
    assert p == pytest.approx(3 / 256, rel=1e-12)
    res = rejection_sample_many(margins, 3000, seed=2)
    rate = res.acceptance_rate
    se = math.sqrt(p * (1 - p) / res.attempts)
    assert abs(rate - p) < 4 * se


@pytest.mark.parametrize("n, C", [(2, 2), (3, 1)])
def test_rejection_uniform_chi_square(n, C):
    margins = Margins.uniform(n, C, warn=False)
    arr = rejection_sample_many(margins, 10_000, RejectionConfig(max_attempts=10**9), seed=3).tables
    counts = state_counts(arr, margins)
    assert stats.chisquare(counts).pvalue > 0.01


def test_rejection_non_uniform_margins():
    arr = rejection_sample_many(Margins((1, 1), (1, 1)), 4000, seed=4).tables
    freq = (arr[:, 0, 0] == 1).mean()
    assert abs(freq - 0.5) < 3 * math.sqrt(0.25 / 4000)


def test_rejection_exhausted():
    with pytest.raises(ExhaustedError) as info:
        rejection_sample_many(Margins.uniform(4, 2), 1, RejectionConfig(max_attempts=10), seed=0)
    assert info.value.attempts == 10 and info.value.accepted == 0


def test_rejection_single_and_valid():
    t = rejection_sample(Margins.uniform(2, 2), seed=9)
    assert validate_table(t)


def test_truncated_model():
    model = TruncatedGeomModel(2, 100)
    assert model.cap == 113 == math.floor(10 * math.log(100) / math.log(1.5))
    assert sum(truncated_geom_pmf(model, x) for x in range(model.cap + 1)) == pytest.approx(1, abs=1e-12)
    assert truncated_geom_pmf(model, model.cap + 1) == 0
    draws = model.sample(100_000, seed=1)
    assert draws.max() <= model.cap and draws.min() >= 0


def test_truncated_rejection_matches_untruncated_when_cap_is_vacuous():
    margins = Margins.uniform(2, 2)
    model = TruncatedGeomModel(2, 2)
    assert model.cap >= 2 * 2
    # every table has the same truncated-model probability, so acceptance is uniform
    probs = {round(float(np.prod(model.pmf(t.entries))), 15) for t in enumerate_tables(margins)}
    assert len(probs) == 1
    arr = rejection_sample_many(margins, 5000, RejectionConfig(model=model), seed=8).tables
    assert stats.chisquare(state_counts(arr, margins)).pvalue > 0.01


def test_chain_preserves_margins():
    margins = Margins((5, 2, 3), (4, 4, 2))
    arr = swap_chain_samples(margins, ChainConfig(burn_in=100, thin=3, total_samples=500), seed=1).tables
    assert all(validate_table(Table(x, margins)) for x in arr)


def test_chain_tv_to_uniform_n3_c1():
    margins = Margins.uniform(3, 1, warn=False)
    cfg = ChainConfig(burn_in=10_000, thin=9, total_samples=100_000)
    counts = state_counts(swap_chain_samples(margins, cfg, seed=0).tables, margins)
    tv = np.abs(counts / counts.sum() - 1 / len(counts)).sum()
    assert tv <= 0.05


def test_chain_corner_law_n2_c2():
    margins = Margins.uniform(2, 2)
    # well-separated retained states so the chi-square test sees near-independent draws
    cfg = ChainConfig(burn_in=1000, thin=20, total_samples=10_000)
    x11 = swap_chain_samples(margins, cfg, seed=0).tables[:, 0, 0]
    assert stats.chisquare(np.bincount(x11, minlength=5)).pvalue > 0.01


def test_chain_detailed_balance():
    margins = Margins.uniform(2, 1, warn=False)
    arr = swap_chain_samples(margins, ChainConfig(burn_in=0, thin=1, total_samples=30_000), seed=2).tables
    states = [int(x[0, 0]) for x in arr]
    trans = Counter(zip(states, states[1:]))
    for a in range(3):
        for b in range(a + 1, 3):
            nab, nba = trans[(a, b)], trans[(b, a)]
            assert abs(nab - nba) <= 4 * math.sqrt(max(nab + nba, 1))


def test_chain_and_rejection_agree_on_corner():
    margins = Margins.uniform(3, 1, warn=False)
    a = swap_chain_samples(margins, ChainConfig(burn_in=1000, thin=9, total_samples=100_000), seed=5).tables
    # 2e4 exact draws already cost ~1e8 geometric tables at this acceptance rate
    b = rejection_sample_many(margins, 20_000, RejectionConfig(max_attempts=10**9), seed=5).tables
    pa = np.bincount(a[:, 0, 0], minlength=4) / len(a)
    pb = np.bincount(b[:, 0, 0], minlength=4) / len(b)
    assert np.abs(pa - pb).sum() < 0.05


def test_chain_deterministic_and_pooling_is_order_free():
    margins = Margins.uniform(4, 2)
    cfg = ChainConfig(burn_in=50, thin=4, total_samples=30)
    pooled = swap_chain_pooled(margins, cfg, seed=3, chains=3)
    parts = [swap_chain_samples(margins, cfg, seed=3, chain=k).tables for k in (0, 1, 2)]
    assert np.array_equal(pooled, np.concatenate(parts))
    assert np.array_equal(pooled, swap_chain_pooled(margins, cfg, seed=3, chains=3))


def test_chain_start_options():
    margins = Margins.uniform(3, 2)
    cfg = ChainConfig(burn_in=0, thin=1, total_samples=1)
    start = Table(np.full((3, 3), 2), margins)
    assert validate_table(swap_chain_run(margins, cfg, seed=0, start=start)[0])
    with pytest.raises(ValueError):
        swap_chain_samples(Margins((2, 1), (1, 2)), cfg, start="typical")
    with pytest.raises(ValueError):
        swap_chain_samples(margins, cfg, start=Table(np.full((3, 3), 1), Margins.uniform(3, 1, warn=False)))


def test_chain_single_row():
    arr = swap_chain_samples(Margins((3,), (1, 2)), ChainConfig(burn_in=5, thin=1, total_samples=4)).tables
    assert np.all(arr == [[1, 2]])


def test_chain_default_config():
    cfg = ChainConfig.default(10, 7)
    assert (cfg.burn_in, cfg.thin, cfg.total_samples) == (5000, 100, 7)


def test_sampler_callables():
    margins = Margins.uniform(3, 2)
    for sampler in (ChainSampler(chains=2, sweeps=2), RejectionSampler(), make_sampler("chain"), make_sampler("rejection")):
        arr = sampler(margins, 5, 1)
        assert arr.shape == (5, 3, 3)
        assert all(validate_table(Table(x, margins)) for x in arr)
        assert np.array_equal(arr, sampler(margins, 5, 1))
    assert ChainSampler(sweeps=3).config(margins, 5).thin == 27
    with pytest.raises(ValueError):
        make_sampler("gibbs")
