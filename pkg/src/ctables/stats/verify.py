"""Monte Carlo experiments comparing sampled tables with their iid geometric limits.

Each ``verify_*`` function draws tables through a sampler callable
``sampler(margins, count, seed) -> (count, n, n) array`` and returns an
:class:`ExperimentReport` holding data rows plus pass/fail :class:`Check` records.
The limit laws are asymptotic, so checks are trends and generous bounds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core import Margins
from ..rng import derive_seed
from ..sampling import sample_geometric_matrix
from .distributions import (
    MaxEntryLaw,
    Pmf,
    block_joint,
    block_tv,
    geom_law,
    geom_moment,
    geom_tail,
    max_entry_threshold,
    max_expectation_iid,
    pooled_marginal,
    product_geom_block,
    tv_distance,
    tv_noise_floor,
)
from .spectrum import ks_statistic, pooled_spectrum, singular_spectrum, spectral_w1

Sampler = Callable[[Margins, int, int], np.ndarray]


@dataclass
class Check:
    experiment: str
    statistic: str
    value: float
    reference: object
    passed: bool
    n: Optional[int] = None
    C: Optional[int] = None
    seed: Optional[int] = None
    error_bar: Optional[float] = None
    tolerance: object = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = bool(d.pop("passed"))
        return d


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    rows: List[dict] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    # two-column series for plotting (histograms, spectra); not part of to_dict
    data: Dict[str, list] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, statistic, value, reference, passed, **kw) -> Check:
        c = Check(self.experiment, statistic, value, reference, bool(passed), **kw)
        self.checks.append(c)
        return c

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "rows": self.rows,
            "checks": [c.to_dict() for c in self.checks],
            "notes": self.notes,
            "pass": self.passed,
        }


def tv_to_geom(p: Pmf, C) -> float:
    """Unhalved TV between ``p`` (finite support) and the full ``Geom(C)`` law."""
    top = p.offset + len(p.mass) - 1
    return tv_distance(p, geom_law(C, top)) + geom_tail(C, top)


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _draw(sampler: Sampler, n: int, C: int, count: int, seed: int, label: str) -> np.ndarray:
    margins = Margins.uniform(n, C, warn=False)
    return sampler(margins, count, derive_seed(seed, label, n))


# --------------------------------------------------------------------------- marginal law


def verify_marginal(
    sizes: Sequence[int],
    C: int,
    sampler: Sampler,
    entries: int = 100_000,
    seed: int = 0,
    slope_range=(-1.0, -0.2),
) -> ExperimentReport:
    """TV between the pooled entry law and ``Geom(C)`` across ``sizes``.

    ``entries`` pooled entries per size, i.e. ``ceil(entries / n^2)`` tables.
    The error bar is the iid noise floor for that many draws.
    """
    rep = ExperimentReport("verify-marginal", {"sizes": list(sizes), "C": C, "entries": entries, "seed": seed})
    tvs = []
    for n in sizes:
        count = math.ceil(entries / (n * n))
        X = _draw(sampler, n, C, count, seed, "marginal")
        p = pooled_marginal(X)
        tv = tv_to_geom(p, C)
        noise = tv_noise_floor(geom_law(C, len(p.mass) + 20), X.size)
        tvs.append(tv)
        rep.data[f"marginal_n{n}"] = p.to_rows()
        rep.rows.append({"n": n, "tables": count, "entries": int(X.size), "tv": tv, "error_bar": noise})
    rep.check("tv strictly decreasing in n", tvs, "decreasing", strictly_decreasing(tvs), C=C, seed=seed)
    if len(sizes) >= 2:
        slope = loglog_slope(sizes, tvs)
        lo, hi = slope_range
        rep.check(
            "log-log slope of tv",
            slope,
            -0.5,
            lo <= slope <= hi,
            C=C,
            seed=seed,
            tolerance=[lo, hi],
        )
    rep.notes.append("TV is the unhalved sum |p - q|, twice the usual convention")
    return rep


# --------------------------------------------------------------------------- k x k blocks


def verify_joint(
    sizes: Sequence[int],
    C: int,
    k: int,
    sampler: Sampler,
    samples: int = 2000,
    seed: int = 0,
    eps: float = 1.0,
) -> ExperimentReport:
    """TV between the law of ``k x k`` blocks and the independent geometric block law.

    Each table contributes the same number of disjoint blocks at every size
    (as many as fit in the smallest table), so the sampling noise is
    comparable across sizes; an iid geometric control with that many blocks
    gives the noise floor. Support is truncated at ``t(n, eps)`` per entry
    and the overflow mass is reported.
    """
    rep = ExperimentReport(
        "verify-joint", {"sizes": list(sizes), "C": C, "k": k, "samples": samples, "seed": seed, "eps": eps}
    )
    per_table = (min(sizes) // k) ** 2
    tvs = []
    for n in sizes:
        cutoff = math.floor(max_entry_threshold(n, C, eps))
        ref = product_geom_block(C, k, cutoff)
        X = _draw(sampler, n, C, samples, seed, "joint")
        tv, neglected = block_tv(block_joint(X, k, cutoff, per_table=per_table), ref)
        Y = iid_geometric_sampler(Margins.uniform(n, C, warn=False), samples, derive_seed(seed, "joint-control", n))
        floor, _ = block_tv(block_joint(Y, k, cutoff, per_table=per_table), ref)
        tvs.append(tv)
        rep.rows.append(
            {
                "n": n,
                "k": k,
                "cutoff": cutoff,
                "blocks": samples * per_table,
                "tv": tv,
                "iid_control_tv": floor,
                "neglected_mass": neglected,
            }
        )
    rep.check("block tv strictly decreasing in n", tvs, "decreasing", strictly_decreasing(tvs), C=C, seed=seed)
    rep.notes.append("iid_control_tv is the TV of independent geometric blocks, i.e. the sampling noise floor")
    return rep


# --------------------------------------------------------------------------- moments


def batch_means_se(vals, batches: int = 20) -> float:
    """Standard error of the mean of a possibly autocorrelated series.

    The series is cut into ``batches`` consecutive blocks and the spread of
    block means is used; for independent draws this agrees with the usual
    ``sd/sqrt(S)`` up to noise.
    """
    vals = np.asarray(vals, dtype=float)
    S = len(vals)
    if S < 2:
        return math.inf
    b = min(batches, S)
    size = S // b
    means = vals[: b * size].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(b))


def mixed_moment(X: np.ndarray, terms) -> tuple:
    """Estimate ``E[prod X_{ij}^alpha]`` from tables ``X``; returns (mean, batch-means standard error)."""
    vals = np.ones(X.shape[0])
    for (i, j), alpha in terms:
        vals = vals * X[:, i, j].astype(float) ** alpha
    return float(vals.mean()), batch_means_se(vals)


def geometric_mixed_moment(C, terms) -> float:
    """``E[prod Y_k^alpha_k]`` for iid ``Geom(C)``; repeated indices share one variable."""
    power = {}
    for (i, j), alpha in terms:
        power[(i, j)] = power.get((i, j), 0) + alpha
    return math.prod(geom_moment(C, a) for a in power.values())


def pooled_moments(X: np.ndarray) -> dict:
    """Exchangeability-pooled estimates of ``E[X_11]``, ``E[X_11^2]``, ``E[X_11 X_12]``.

    Each is averaged over every entry (or same-row pair) of every table; the
    standard errors come from batch means of the per-table averages.
    """
    S, m, n = X.shape
    x = X.astype(float)
    mean_t = x.mean(axis=(1, 2))
    sq_t = (x * x).mean(axis=(1, 2))
    rows = x.sum(axis=2)
    pair_t = ((rows * rows).sum(axis=1) - (x * x).sum(axis=(1, 2))) / (m * n * (n - 1))

    def est(v):
        return float(v.mean()), batch_means_se(v)

    return {"mean": est(mean_t), "square": est(sq_t), "row_pair": est(pair_t)}


def verify_moments(
    sizes: Sequence[int],
    C: int,
    sampler: Sampler,
    samples: int = 1000,
    seed: int = 0,
    terms=(((0, 0), 2),),
    sigmas: float = 3.0,
) -> ExperimentReport:
    """Empirical mixed moments against products of geometric moments.

    ``terms`` lists ``((i, j), alpha)`` factors of the moment estimated from
    the raw entries, checked at the largest size to within ``sigmas``
    standard errors. Pooled estimates add the identity ``mean == C`` at every
    size and the trend of ``E[X_11 X_12]`` towards ``C^2``.
    """
    terms = tuple(((int(i), int(j)), int(a)) for (i, j), a in terms)
    rep = ExperimentReport(
        "verify-moments",
        {"sizes": list(sizes), "C": C, "samples": samples, "seed": seed, "terms": [list(t) for t in terms]},
    )
    reference = geometric_mixed_moment(C, terms)
    pair_gaps = []
    last = None
    for n in sizes:
        X = _draw(sampler, n, C, samples, seed, "moments")
        est, se = mixed_moment(X, terms)
        pooled = pooled_moments(X)
        mean_exact = bool(np.all(X.sum(axis=(1, 2)) == C * n * n))
        rep.rows.append(
            {
                "n": n,
                "moment": est,
                "moment_se": se,
                "reference": reference,
                "pooled_mean": pooled["mean"][0],
                "pooled_square": pooled["square"][0],
                "pooled_square_se": pooled["square"][1],
                "pooled_row_pair": pooled["row_pair"][0],
                "pooled_row_pair_se": pooled["row_pair"][1],
            }
        )
        rep.check("pooled E[X_11] == C", pooled["mean"][0], C, mean_exact, n=n, C=C, seed=seed)
        pair_gaps.append(abs(pooled["row_pair"][0] - C * C))
        last = (n, est, se)
    n, est, se = last
    rep.check(
        f"E[prod X^alpha] within {sigmas:g} SE",
        est,
        reference,
        abs(est - reference) <= sigmas * se,
        n=n,
        C=C,
        seed=seed,
        error_bar=se,
        tolerance=sigmas * se,
    )
    rep.check("|E[X_11 X_12] - C^2| decreasing", pair_gaps, 0.0, strictly_decreasing(pair_gaps), C=C, seed=seed)
    return rep


# --------------------------------------------------------------------------- maximum entry


def iid_max_bounds(sizes: Sequence[int], C: int) -> ExperimentReport:
    """``H_{n^2}/lam - 1 < E[max of n^2 iid Geom(C)] < H_{n^2}/lam`` for each n."""
    rep = ExperimentReport("max-iid-bounds", {"sizes": list(sizes), "C": C})
    for n in sizes:
        law = MaxEntryLaw(C, n)
        lo, hi = law.bounds()
        e = law.expectation()
        rep.rows.append({"n": n, "expectation": e, "lower": lo, "upper": hi})
        rep.check("E[max] inside harmonic bounds", e, [lo, hi], lo < e < hi, n=n, C=C)
    return rep


def verify_max_entry(
    sizes: Sequence[int],
    C: int,
    eps: float,
    sampler: Sampler,
    samples: int = 1000,
    seed: int = 0,
    bound: float = 0.05,
) -> ExperimentReport:
    """How often the largest entry exceeds ``t(n, eps)``.

    The exceedance at the largest size must be below ``bound``. Empirical
    ``E[max]`` is listed next to the iid bounds for comparison.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rep = ExperimentReport(
        "verify-max", {"sizes": list(sizes), "C": C, "eps": eps, "samples": samples, "seed": seed}
    )
    freqs = []
    for n in sizes:
        t = max_entry_threshold(n, C, eps)
        X = _draw(sampler, n, C, samples, seed, "max")
        mx = X.max(axis=(1, 2))
        freq = float((mx > t).mean())
        freqs.append(freq)
        lo, hi = MaxEntryLaw(C, n).bounds()
        rep.rows.append(
            {
                "n": n,
                "threshold": t,
                "exceedance": freq,
                "error_bar": math.sqrt(max(freq * (1 - freq), 1e-12) / samples),
                "mean_max": float(mx.mean()),
                "iid_mean_max": max_expectation_iid(n, C),
                "iid_lower": lo,
                "iid_upper": hi,
            }
        )
    rep.check(
        "exceedance below bound",
        freqs[-1],
        0.0,
        freqs[-1] < bound,
        n=sizes[-1],
        C=C,
        seed=seed,
        tolerance=bound,
    )
    if len(sizes) >= 2:
        rep.check("exceedance non-increasing in n", freqs, "decreasing", all(b <= a for a, b in zip(freqs, freqs[1:])), C=C, seed=seed)
    return rep


# --------------------------------------------------------------------------- singular spectrum


def iid_geometric_sampler(margins: Margins, count: int, seed) -> np.ndarray:
    """Control: independent ``Geom(C)`` matrices, ignoring the margin constraint."""
    C = margins.density
    return sample_geometric_matrix(np.full(margins.shape, float(C)), seed, size=count)


def verify_esd(
    sizes: Sequence[int],
    C: int,
    sampler: Sampler,
    samples: int = 1,
    seed: int = 0,
    ks_bound: float = 0.08,
    control: bool = True,
) -> ExperimentReport:
    """KS and W1 distances from the singular-value law of sampled tables to MP.

    Reports the first sample and the pooled spectrum of all ``samples``;
    checks KS below ``ks_bound`` at the largest size (for the tables and for
    the iid geometric control) and a decreasing KS across sizes.
    """
    rep = ExperimentReport(
        "verify-esd", {"sizes": list(sizes), "C": C, "samples": samples, "seed": seed, "ks_bound": ks_bound}
    )
    first_ks = []
    for n in sizes:
        X = _draw(sampler, n, C, samples, seed, "esd")
        specs = [singular_spectrum(x, C) for x in X]
        pooled = pooled_spectrum(specs)
        rep.data[f"spectrum_n{n}"] = specs[0].to_rows()
        row = {
            "n": n,
            "ks": ks_statistic(specs[0]),
            "w1": spectral_w1(specs[0]),
            "ks_pooled": ks_statistic(pooled),
            "w1_pooled": spectral_w1(pooled),
        }
        if control:
            Y = iid_geometric_sampler(Margins.uniform(n, C, warn=False), 1, derive_seed(seed, "esd-control", n))
            cs = singular_spectrum(Y[0], C)
            row["ks_iid"] = ks_statistic(cs)
            row["w1_iid"] = spectral_w1(cs)
        rep.rows.append(row)
        first_ks.append(row["ks"])
    top = rep.rows[-1]
    rep.check("KS(table ESD, MP)", top["ks"], 0.0, top["ks"] < ks_bound, n=top["n"], C=C, seed=seed, tolerance=ks_bound)
    if control:
        rep.check(
            "KS(iid control ESD, MP)", top["ks_iid"], 0.0, top["ks_iid"] < ks_bound, n=top["n"], C=C, seed=seed, tolerance=ks_bound
        )
    if len(sizes) >= 2:
        rep.check("KS strictly decreasing in n", first_ks, "decreasing", strictly_decreasing(first_ks), C=C, seed=seed)
    return rep
