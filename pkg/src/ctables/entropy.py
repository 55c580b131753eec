"""Maximum-entropy typical table and the geometric model attached to it.

The typical table ``Z`` maximises ``g(M) = sum f(M_ij)`` with
``f(x) = (x+1) ln(x+1) - x ln x`` over real matrices meeting the margins.
At the optimum every positive entry satisfies ``Z_ij = 1/(exp(lam_i + mu_j) - 1)``
for row potentials ``lam`` and column potentials ``mu``; the solver works on
those potentials directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Margins
from .errors import ConvergenceError

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 100_000


def entropy_f(x):
    """``(x+1) ln(x+1) - x ln x`` with ``f(0) = 0``; works on scalars and arrays."""
    arr = np.asarray(x, dtype=float)
    if (arr < 0).any():
        raise ValueError("entropy_f is defined for x >= 0 only")
    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(arr > 0, arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
    out = (arr + 1) * np.log1p(arr) - xlogx
    return float(out) if np.ndim(x) == 0 else out


def entropy_g(M) -> float:
    """Sum of :func:`entropy_f` over the entries of ``M``."""
    arr = np.asarray(M, dtype=float)
    if (arr < 0).any():
        raise ValueError("entropy_g needs a non-negative matrix")
    return float(np.sum(entropy_f(arr)))


def _mean_from_potential(s):
    return 1.0 / np.expm1(s)


def _solve_potentials(other, targets, guess):
    """For each target t_k find x_k with ``sum_l 1/expm1(x_k + other_l) = t_k``.

    The left side is convex and strictly decreasing in x_k on
    ``(-min(other), inf)``, so a bracketed Newton iteration converges.
    """
    base = -other.min()
    lo = np.full(targets.shape, base)
    hi = base + np.log1p(other.size / targets)
    x = np.clip(guess, np.nextafter(lo, np.inf), hi)
    for _ in range(200):
        s = x[:, None] + other[None, :]
        z = _mean_from_potential(s)
        h = z.sum(axis=1) - targets
        dh = -(z * (z + 1)).sum(axis=1)
        pos = h > 0
        lo = np.where(pos, x, lo)
        hi = np.where(pos, hi, x)
        step = x - h / dh
        bad = ~((step > lo) & (step < hi))
        x_new = np.where(bad, 0.5 * (lo + hi), step)
        if np.all(np.abs(x_new - x) <= 1e-15 * np.maximum(1.0, np.abs(x))):
            return x_new
        x = x_new
    return x


@dataclass(frozen=True, eq=False)
class TypicalTable:
    """Result of :func:`typical_table`.

    ``row_potentials``/``col_potentials`` are ``+inf`` on zero margins, where
    the corresponding entries of ``Z`` vanish. The gauge is fixed by making
    the finite column potentials sum to zero.
    """

    Z: np.ndarray
    row_potentials: np.ndarray
    col_potentials: np.ndarray
    residual: float
    sweeps: int
    margins: Margins

    @property
    def gZ(self) -> float:
        return entropy_g(self.Z)

    def dual_residual(self) -> float:
        """``max |Z_ij - 1/(exp(lam_i + mu_j) - 1)|`` over entries with finite potentials."""
        lam, mu = self.row_potentials, self.col_potentials
        r, c = np.isfinite(lam), np.isfinite(mu)
        if not r.any() or not c.any():
            return 0.0
        pred = _mean_from_potential(lam[r][:, None] + mu[c][None, :])
        return float(np.max(np.abs(self.Z[np.ix_(r, c)] - pred)))

    def to_dict(self) -> dict:
        def fin(v):
            return [float(x) if math.isfinite(x) else None for x in v]

        return {
            "Z": self.Z.tolist(),
            "duals": {"row": fin(self.row_potentials), "col": fin(self.col_potentials)},
            "residual": self.residual,
            "gZ": self.gZ,
        }


def typical_table(margins: Margins, tol: float = DEFAULT_TOL, max_sweeps: int = MAX_SWEEPS) -> TypicalTable:
    """Maximise ``g`` over the transportation polytope by alternating dual ascent.

    Each sweep solves every row potential with the column potentials fixed
    (so row sums are exact), then every column potential. Stops when the
    largest row-sum violation after the column step is at most ``tol``.
    Starts from the constant matrix ``N/(mn)``.
    """
    row = np.asarray(margins.row, dtype=float)
    col = np.asarray(margins.col, dtype=float)
    m, n = margins.shape
    Z = np.zeros((m, n))
    lam = np.full(m, np.inf)
    mu = np.full(n, np.inf)
    ri, ci = row > 0, col > 0
    if not ri.any():
        return TypicalTable(Z, lam, mu, 0.0, 0, margins)

    r, c = row[ri], col[ci]
    start = math.log1p((r.size * c.size) / margins.total)
    lam_r = np.full(r.size, start / 2)
    mu_c = np.full(c.size, start / 2)

    def residual_of(lr, mc):
        Zr = _mean_from_potential(lr[:, None] + mc[None, :])
        return max(np.max(np.abs(Zr.sum(axis=1) - r)), np.max(np.abs(Zr.sum(axis=0) - c)))

    res = residual_of(lam_r, mu_c)
    sweeps = 0
    while res > tol:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"typical table did not converge in {max_sweeps} sweeps (residual {res:.3e})",
                residual=float(res),
                iterations=sweeps,
            )
        lam_r = _solve_potentials(mu_c, r, lam_r)
        mu_c = _solve_potentials(lam_r, c, mu_c)
        sweeps += 1
        res = residual_of(lam_r, mu_c)

    shift = mu_c.mean()
    lam_r, mu_c = lam_r + shift, mu_c - shift
    lam[ri], mu[ci] = lam_r, mu_c
    Z[np.ix_(ri, ci)] = _mean_from_potential(lam_r[:, None] + mu_c[None, :])
    return TypicalTable(Z, lam, mu, float(res), sweeps, margins)


@dataclass(frozen=True)
class BarvinokBounds:
    """``N^{-gamma(m+n)} e^{g(Z)} <= #M <= e^{g(Z)}`` with ``gamma`` left symbolic."""

    gZ: float
    log_upper: float
    log_lower_symbolic: str

    def to_dict(self) -> dict:
        return {"gZ": self.gZ, "log_upper": self.log_upper, "log_lower_symbolic": self.log_lower_symbolic}


def barvinok_bounds(margins: Margins, tol: float = DEFAULT_TOL) -> BarvinokBounds:
    gZ = typical_table(margins, tol=tol).gZ
    m, n, N = margins.m, margins.n, margins.total
    lower = f"{gZ:.12g} - gamma*{m + n}*ln({N})"
    return BarvinokBounds(gZ=gZ, log_upper=gZ, log_lower_symbolic=lower)


@dataclass(frozen=True, eq=False)
class GeometricModel:
    """Independent geometric entries with means ``means`` (pmf ``(1/(1+z)) (z/(1+z))^x``)."""

    means: np.ndarray

    def __post_init__(self):
        arr = np.array(self.means, dtype=float, copy=True)
        if (arr < 0).any():
            raise ValueError("geometric means must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "means", arr)

    @property
    def shape(self):
        return self.means.shape

    @property
    def ratio(self) -> np.ndarray:
        """Success ratio ``z/(1+z)`` per entry."""
        return self.means / (1 + self.means)

    def pmf(self, x) -> np.ndarray:
        x = np.asarray(x)
        return (1 / (1 + self.means)) * self.ratio**x

    def log_prob(self, table) -> float:
        """Log-probability of an integer matrix under the model."""
        x = np.asarray(table, dtype=float)
        z = self.means
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(x > 0, x * np.log(np.where(z > 0, self.ratio, 1.0)), 0.0)
        if ((z == 0) & (x > 0)).any():
            return -math.inf
        return float(np.sum(term - np.log1p(z)))

    @classmethod
    def constant(cls, shape, C) -> "GeometricModel":
        return cls(np.full(shape, float(C)))


def geometric_model(tt: TypicalTable) -> GeometricModel:
    return GeometricModel(tt.Z)
