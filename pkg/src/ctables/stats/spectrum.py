"""Singular spectrum of centred tables and the Marchenko-Pastur reference.

For ``Y = (X - C)/sqrt(n)`` the squared singular values are the eigenvalues
of ``Y Y^T``; those are found with a cyclic Jacobi eigen solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate, stats

JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@numba.njit(cache=True)
def _jacobi_sweeps(a, rel_tol, max_sweeps):
    n = a.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += a[i, j] * a[i, j]
    total = math.sqrt(total)
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if math.sqrt(off) <= rel_tol * total or off == 0.0:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
    return max_sweeps


def jacobi_eigenvalues(sym, rel_tol: float = JACOBI_REL_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix, ascending.

    Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at most
    ``rel_tol`` times the full Frobenius norm.
    """
    a = np.array(sym, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("need a square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    used = _jacobi_sweeps(a, rel_tol, max_sweeps)
    if used >= max_sweeps:
        raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.sort(np.diag(a).copy())


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending singular values of ``(X - C J)/sqrt(n)``."""

    values: np.ndarray
    n: int
    C: float

    @property
    def scale(self) -> float:
        return 1 / math.sqrt(self.n)

    def ecdf(self, y) -> np.ndarray:
        return np.searchsorted(self.values, y, side="right") / len(self.values)

    def to_rows(self):
        k = len(self.values)
        return [(float(v), (i + 1) / k) for i, v in enumerate(self.values)]


def centered_scaled(table, C) -> np.ndarray:
    x = np.asarray(getattr(table, "entries", table), dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("singular spectrum needs a square table")
    return (x - C) / math.sqrt(x.shape[0])


def singular_spectrum(table, C) -> Spectrum:
    """Singular values of ``(X - C)/sqrt(n)`` via Jacobi on ``Y Y^T``."""
    y = centered_scaled(table, C)
    ev = jacobi_eigenvalues(y @ y.T)
    return Spectrum(np.sqrt(np.clip(ev, 0.0, None)), y.shape[0], C)


# --------------------------------------------------------------------------- Marchenko-Pastur


@dataclass(frozen=True)
class MPLaw:
    """Limit law of the singular values for entry variance ``C(1+C)``.

    Singular-value density ``sqrt(4s - y^2)/(pi s)`` on ``[0, 2 sqrt(s)]`` and
    eigenvalue density ``sqrt((4s - x) x)/(2 pi s x)`` on ``[0, 4s]`` with
    ``s = C(1+C)``.
    """

    C: float

    @property
    def variance(self) -> float:
        return self.C * (1 + self.C)

    @property
    def edge(self) -> float:
        return 2 * math.sqrt(self.variance)

    def density(self, y):
        return mp_density(self.C, y)

    def cdf(self, y):
        return mp_cdf(self.C, y)


def mp_density(C, y):
    """Singular-value form ``sqrt(4C(1+C) - y^2)/(pi C(1+C))`` on ``[0, 2 sqrt(C(1+C))]``."""
    s = C * (1 + C)
    y = np.asarray(y, dtype=float)
    inside = (y >= 0) & (y <= 2 * math.sqrt(s))
    val = np.where(inside, np.sqrt(np.clip(4 * s - y * y, 0, None)) / (math.pi * s), 0.0)
    return float(val) if val.ndim == 0 else val


def mp_eigen_density(C, x):
    """Eigenvalue form ``sqrt((4C(1+C) - x) x)/(2 pi C(1+C) x)`` on ``(0, 4C(1+C)]``."""
    s = C * (1 + C)
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x <= 4 * s)
    xs = np.where(inside, x, 1.0)
    val = np.where(inside, np.sqrt((4 * s - xs) * xs) / (2 * math.pi * s * xs), 0.0)
    return float(val) if val.ndim == 0 else val


def _quad_cdf(fun, upper, edge, **kw):
    if upper <= 0:
        return 0.0
    if upper >= edge:
        return 1.0
    val, _ = integrate.quad(fun, 0.0, upper, epsabs=1e-12, epsrel=1e-12, limit=200, **kw)
    return min(1.0, max(0.0, val))


def mp_cdf(C, y):
    """CDF of the singular-value form by adaptive quadrature."""
    s = C * (1 + C)
    edge = 2 * math.sqrt(s)

    def one(v):
        return _quad_cdf(lambda t: math.sqrt(4 * s - t * t) / (math.pi * s), v, edge)

    if np.ndim(y) == 0:
        return one(float(y))
    return np.array([one(float(v)) for v in np.ravel(y)]).reshape(np.shape(y))


def mp_eigen_cdf(C, x):
    """CDF of the eigenvalue form by adaptive quadrature (``x^{-1/2}`` singularity at 0)."""
    s = C * (1 + C)
    edge = 4 * s

    def one(v):
        if v <= 0:
            return 0.0
        if v >= edge:
            return 1.0
        val, _ = integrate.quad(
            lambda t: math.sqrt(edge - t) / (2 * math.pi * s),
            0.0,
            v,
            weight="alg",
            wvar=(-0.5, 0.0),
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        return min(1.0, max(0.0, val))

    if np.ndim(x) == 0:
        return one(float(x))
    return np.array([one(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))


def ks_statistic(spec: Spectrum, C=None) -> float:
    """Kolmogorov-Smirnov distance between the empirical spectral CDF and the MP CDF."""
    C = spec.C if C is None else C
    return float(stats.kstest(spec.values, lambda v: mp_cdf(C, v)).statistic)


def spectral_w1(spec: Spectrum, C=None, grid: int = 4001) -> float:
    """``W_1`` between the empirical singular-value law and MP, as ``int |F_emp - F_MP| dy``.

    ``F_MP`` is tabulated on ``grid`` points and the integral taken by the
    trapezoid rule on the union of that grid and the atoms.
    """
    C = spec.C if C is None else C
    edge = 2 * math.sqrt(C * (1 + C))
    top = max(edge, float(spec.values[-1]))
    base = np.linspace(0.0, edge, grid)
    f_base = mp_cdf(C, base)
    ys = np.unique(np.concatenate((base, spec.values, np.nextafter(spec.values, -np.inf), [top])))
    ys = ys[ys >= 0]
    f_mp = np.interp(ys, base, f_base, right=1.0)
    diff = np.abs(spec.ecdf(ys) - f_mp)
    return float(np.sum(0.5 * (diff[1:] + diff[:-1]) * np.diff(ys)))


def pooled_spectrum(spectra) -> Spectrum:
    """Average of several spectra as one law (concatenated atoms)."""
    spectra = list(spectra)
    vals = np.sort(np.concatenate([s.values for s in spectra]))
    return Spectrum(vals, spectra[0].n, spectra[0].C)
