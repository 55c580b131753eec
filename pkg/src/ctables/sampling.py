"""Uniform samplers over tables with fixed margins.

Two routes:

* rejection: draw independent geometric entries with the typical-table means
  and keep the draw iff it meets the margins. Accepted tables are exactly
  uniform, but acceptance decays quickly with size.
* swap chain: a Metropolis walk on the +/-1 swap moves, for anything beyond
  toy sizes. Its stationary law is uniform since proposals are symmetric and a
  move is accepted iff it keeps entries non-negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Union

import numba
import numpy as np

from .core import Margins, Table, northwest_start
from .entropy import GeometricModel, geometric_model, typical_table
from .errors import ExhaustedError
from .rng import as_rng, make_rng

REJECTION_BATCH = 1 << 16
CHAIN_CHUNK = 1 << 20


# --------------------------------------------------------------------------- geometric draws


def _geometric_from_uniform(u, ratio):
    """Inverse CDF of ``P(Y <= x) = 1 - ratio**(x+1)``; ``u`` in (0, 1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.floor(np.log(u) / np.log(ratio))
    return np.where(ratio > 0, y, 0).astype(np.int64)


def sample_geometric_matrix(model, seed, size: Optional[int] = None) -> np.ndarray:
    """Independent draws, entry ``(i, j)`` geometric with mean ``model.means[i, j]``.

    ``model`` may be a :class:`GeometricModel`, a :class:`TruncatedGeomModel`
    (then every entry uses the truncated law) or an array of means. With
    ``size`` a stack of ``size`` matrices is returned.
    """
    rng = as_rng(seed, "geometric")
    if isinstance(model, TruncatedGeomModel):
        raise TypeError("use TruncatedGeomModel.sample for the truncated law")
    if not isinstance(model, GeometricModel):
        model = GeometricModel(model)
    shape = model.shape if size is None else (size,) + model.shape
    u = 1.0 - rng.random(shape)
    return _geometric_from_uniform(u, model.ratio)


# --------------------------------------------------------------------------- truncated model


@dataclass(frozen=True)
class TruncatedGeomModel:
    """Geometric law with mean ``C`` conditioned on ``x <= cap``.

    ``cap = floor(10 ln n / ln((C+1)/C))`` and the normaliser is
    ``1 - (C/(1+C))**(cap+1)``.
    """

    C: int
    n: int

    @property
    def ratio(self) -> float:
        return self.C / (1 + self.C)

    @property
    def cap(self) -> int:
        return math.floor(10 * math.log(self.n) / math.log((self.C + 1) / self.C))

    @property
    def normalizer(self) -> float:
        return 1 - self.ratio ** (self.cap + 1)

    def pmf(self, x):
        x = np.asarray(x)
        inside = (x >= 0) & (x <= self.cap)
        val = np.where(inside, (1 / (1 + self.C)) * self.ratio ** np.where(inside, x, 0), 0.0)
        val = val / self.normalizer
        return float(val) if np.ndim(val) == 0 else val

    def sample(self, shape, seed) -> np.ndarray:
        rng = as_rng(seed, "truncated")
        u = rng.random(shape)
        y = np.floor(np.log1p(-u * self.normalizer) / math.log(self.ratio)).astype(np.int64)
        return np.minimum(y, self.cap)


def truncated_geom_pmf(model: TruncatedGeomModel, x: int) -> float:
    return model.pmf(x)


# --------------------------------------------------------------------------- rejection sampling


@dataclass(frozen=True)
class RejectionConfig:
    """``model=None`` means: use the geometric model of the typical table."""

    max_attempts: int = 10**7
    model: Union[GeometricModel, TruncatedGeomModel, None] = None

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True, eq=False)
class RejectionResult:
    tables: np.ndarray
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.tables) / self.attempts if self.attempts else 0.0


def _default_model(margins: Margins) -> GeometricModel:
    C = margins.density
    if C is not None:
        return GeometricModel.constant(margins.shape, C)
    return geometric_model(typical_table(margins))


def rejection_sample_many(
    margins: Margins, count: int, cfg: Optional[RejectionConfig] = None, seed=0
) -> RejectionResult:
    """Draw until ``count`` tables are accepted or ``cfg.max_attempts`` draws are spent.

    Draws are generated in fixed-size batches from one seeded stream, so the
    accepted sequence depends only on ``seed``. Raises :class:`ExhaustedError`
    if the attempt budget runs out first.
    """
    cfg = cfg or RejectionConfig()
    model = cfg.model if cfg.model is not None else _default_model(margins)
    rng = make_rng(seed, "rejection")
    row = np.asarray(margins.row)
    col = np.asarray(margins.col)
    m, n = margins.shape
    if isinstance(model, GeometricModel) and model.shape != margins.shape:
        raise ValueError(f"model shape {model.shape} does not match margins {margins.shape}")

    kept = []
    got = 0
    attempts = 0
    while got < count:
        if attempts >= cfg.max_attempts:
            raise ExhaustedError(
                f"accepted {got}/{count} tables in {attempts} attempts", attempts=attempts, accepted=got
            )
        b = min(REJECTION_BATCH, cfg.max_attempts - attempts)
        if isinstance(model, TruncatedGeomModel):
            draws = model.sample((b, m, n), rng)
        else:
            draws = sample_geometric_matrix(model, rng, size=b)
        ok = np.flatnonzero(
            (draws.sum(axis=2) == row).all(axis=1) & (draws.sum(axis=1) == col).all(axis=1)
        )
        need = count - got
        if len(ok) >= need:
            attempts += int(ok[need - 1]) + 1
            ok = ok[:need]
        else:
            attempts += b
        kept.append(draws[ok])
        got += len(ok)
    tables = np.concatenate(kept) if kept else np.zeros((0, m, n), dtype=np.int64)
    return RejectionResult(tables, attempts)


def rejection_sample(margins: Margins, cfg: Optional[RejectionConfig] = None, seed=0) -> Table:
    """One exactly uniform table, or :class:`ExhaustedError`."""
    res = rejection_sample_many(margins, 1, cfg, seed)
    return Table(res.tables[0], margins)


# --------------------------------------------------------------------------- swap chain


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int
    thin: int
    total_samples: int

    def __post_init__(self):
        if self.burn_in < 0 or self.thin < 1 or self.total_samples < 1:
            raise ValueError("need burn_in >= 0, thin >= 1, total_samples >= 1")

    @classmethod
    def default(cls, n: int, total_samples: int) -> "ChainConfig":
        """``burn_in = 50 n**2`` and ``thin = n**2``."""
        return cls(burn_in=50 * n * n, thin=n * n, total_samples=total_samples)


@numba.njit(cache=True)
def _swap_steps(x, i1, i2, j1, j2, sgn, thin, out, out_pos):
    """Apply proposals in order; after every ``thin`` steps copy ``x`` into ``out``.

    Returns the number of accepted moves and the next free slot in ``out``.
    ``thin <= 0`` disables recording.
    """
    accepted = 0
    for t in range(i1.shape[0]):
        a, b, c, d, s = i1[t], i2[t], j1[t], j2[t], sgn[t]
        if x[a, d] - s >= 0 and x[b, c] - s >= 0 and x[a, c] + s >= 0 and x[b, d] + s >= 0:
            x[a, c] += s
            x[b, d] += s
            x[a, d] -= s
            x[b, c] -= s
            accepted += 1
        if thin > 0 and (t + 1) % thin == 0:
            out[out_pos] = x
            out_pos += 1
    return accepted, out_pos


def _proposals(rng, m, n, size):
    i1 = rng.integers(0, m, size)
    i2 = (i1 + rng.integers(1, m, size)) % m
    j1 = rng.integers(0, n, size)
    j2 = (j1 + rng.integers(1, n, size)) % n
    sgn = rng.integers(0, 2, size) * 2 - 1
    return i1, i2, j1, j2, sgn


@dataclass(frozen=True, eq=False)
class ChainResult:
    tables: np.ndarray
    proposals: int
    accepted: int
    final: np.ndarray

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


def _start_matrix(margins: Margins, start) -> np.ndarray:
    if isinstance(start, str) and start == "auto":
        start = "typical" if margins.density is not None else "northwest"
    if start is None or (isinstance(start, str) and start == "northwest"):
        return northwest_start(margins).entries.copy()
    if isinstance(start, str) and start == "typical":
        C = margins.density
        if C is None:
            raise ValueError("the 'typical' start needs uniform margins")
        return np.full(margins.shape, C, dtype=np.int64)
    tab = start if isinstance(start, Table) else Table(start, margins)
    if tab.margins != margins:
        raise ValueError("start table has different margins")
    return tab.entries.copy()


def swap_chain_samples(
    margins: Margins, cfg: ChainConfig, seed=0, start=None, chain: int = 0
) -> ChainResult:
    """Run one swap chain and return its retained tables as an ``(S, m, n)`` array.

    ``start`` is ``"northwest"`` (default), ``"typical"`` (the constant table
    ``C`` for uniform margins), ``"auto"`` (typical when available) or an
    explicit valid table. The stream is
    ``make_rng(seed, "chain", chain)``, so chains with distinct ``chain``
    indices are independent and individually reproducible.
    """
    m, n = margins.shape
    x = _start_matrix(margins, start)
    out = np.empty((cfg.total_samples, m, n), dtype=np.int64)
    if m < 2 or n < 2:
        # only one table exists
        out[:] = x
        return ChainResult(out, 0, 0, x)
    rng = make_rng(seed, "chain", chain)
    accepted = 0
    dummy = np.empty((1, m, n), dtype=np.int64)

    left = cfg.burn_in
    while left > 0:
        size = min(left, CHAIN_CHUNK)
        acc, _ = _swap_steps(x, *_proposals(rng, m, n, size), 0, dummy, 0)
        accepted += acc
        left -= size

    # keep chunk boundaries on multiples of thin so recording stays aligned
    per_chunk = max(1, CHAIN_CHUNK // cfg.thin)
    pos = 0
    while pos < cfg.total_samples:
        k = min(per_chunk, cfg.total_samples - pos)
        acc, pos = _swap_steps(x, *_proposals(rng, m, n, k * cfg.thin), cfg.thin, out, pos)
        accepted += acc
    total = cfg.burn_in + cfg.thin * cfg.total_samples
    return ChainResult(out, total, accepted, x)


def swap_chain_run(margins: Margins, cfg: ChainConfig, seed=0, start=None, chain: int = 0) -> List[Table]:
    res = swap_chain_samples(margins, cfg, seed, start=start, chain=chain)
    return [Table(t, margins) for t in res.tables]


def swap_chain_pooled(
    margins: Margins, cfg: ChainConfig, seed=0, chains: int = 1, start=None
) -> np.ndarray:
    """Concatenate ``chains`` independent chains, in chain-index order."""
    parts = [swap_chain_samples(margins, cfg, seed, start=start, chain=k).tables for k in range(chains)]
    return np.concatenate(parts)


# --------------------------------------------------------------------------- sampler callables


class ChainSampler:
    """Callable ``(margins, count, seed) -> (count, m, n)`` array backed by the swap chain.

    ``burn_in``/``thin`` default to ``50 n^2`` and ``n^2``. The default start
    is the constant table for uniform margins, which is already close to
    equilibrium; the northwest corner needs a much longer burn-in at large n.
    """

    def __init__(self, burn_in=None, thin=None, start="auto", chains=1, sweeps: float = 1.0):
        # sweeps: default thinning in units of n^2 steps when thin is not given
        if sweeps <= 0:
            raise ValueError("sweeps must be positive")
        self.burn_in = burn_in
        self.thin = thin
        self.start = start
        self.chains = chains
        self.sweeps = sweeps

    def config(self, margins: Margins, count: int) -> ChainConfig:
        n = max(margins.shape)
        default = ChainConfig.default(n, count)
        per_chain = -(-count // self.chains)
        return ChainConfig(
            burn_in=default.burn_in if self.burn_in is None else self.burn_in,
            thin=max(1, round(self.sweeps * default.thin)) if self.thin is None else self.thin,
            total_samples=per_chain,
        )

    def __call__(self, margins: Margins, count: int, seed) -> np.ndarray:
        cfg = self.config(margins, count)
        return swap_chain_pooled(margins, cfg, seed, self.chains, self.start)[:count]

    def describe(self) -> dict:
        return {
            "name": "chain",
            "burn_in": self.burn_in,
            "thin": self.thin,
            "start": self.start,
            "chains": self.chains,
            "sweeps": self.sweeps,
        }


class RejectionSampler:
    """Callable wrapper over :func:`rejection_sample_many`."""

    def __init__(self, max_attempts: int = 10**8):
        self.max_attempts = max_attempts

    def __call__(self, margins: Margins, count: int, seed) -> np.ndarray:
        cfg = RejectionConfig(max_attempts=self.max_attempts)
        return rejection_sample_many(margins, count, cfg, seed).tables

    def describe(self) -> dict:
        return {"name": "rejection", "max_attempts": self.max_attempts}


def make_sampler(name: str, **kwargs):
    if name == "chain":
        return ChainSampler(**kwargs)
    if name == "rejection":
        return RejectionSampler(**{k: v for k, v in kwargs.items() if k == "max_attempts"})
    raise ValueError(f"unknown sampler {name!r}")
