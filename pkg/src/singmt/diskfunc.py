"""Radial profiles on the unit disk and the singular functional on ``B_1``.

For ``v`` radial with ``v(1) = 0`` the functional is

    F(v) = 2 pi * int_0^1 (exp(alpha v(r)^2) - 1) r^(1 - beta) dr.

Profiles are piecewise linear in ``r``, so their Dirichlet energy is a
finite sum and exact.  The radial integral uses Gauss-Legendre on every
cell except the one touching ``r = 0``, where a Gauss-Jacobi rule absorbs
the weight ``r^(1-beta)`` (integrable because ``beta < 2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

_ADMISSIBLE_SLACK = 1e-12
N_GAUSS = 10


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class FunctionalParams:
    """Exponent ``alpha`` and singular weight ``beta`` with alpha/4pi + beta/2 <= 1."""

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        if not a > 0:
            raise AdmissibilityError(f"alpha must be positive, got {a}")
        if not 0 <= b < 2:
            raise AdmissibilityError(f"beta must lie in [0, 2), got {b}")
        if self.criticality > 1 + _ADMISSIBLE_SLACK:
            raise AdmissibilityError(
                f"alpha/(4 pi) + beta/2 = {self.criticality:.12g} exceeds 1 "
                f"(alpha={a}, beta={b})")

    @property
    def criticality(self) -> float:
        """``alpha/(4 pi) + beta/2``; 1 on the critical line."""
        return self.alpha / (4 * math.pi) + self.beta / 2

    @property
    def is_critical(self) -> bool:
        return abs(self.criticality - 1) <= 1e-9

    @classmethod
    def critical(cls, beta: float) -> "FunctionalParams":
        return cls(4 * math.pi * (1 - beta / 2), beta)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Piecewise-linear radial function through ``(grid[j], values[j])``."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if r[0] != 0.0 or r[-1] != 1.0:
            raise ValueError("grid must run from 0 to 1")
        if np.any(np.diff(r) <= 0):
            raise ValueError("grid must be strictly increasing")
        if v[-1] != 0.0:
            raise ValueError("profile must vanish at r = 1")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite and nonnegative")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", r)
        object.__setattr__(self, "values", v)

    def __call__(self, r):
        return np.interp(r, self.grid, self.values)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.grid)

    def scaled(self, t: float) -> "RadialProfile":
        return RadialProfile(self.grid, t * self.values)

    def refined(self) -> "RadialProfile":
        """Same function on a grid with every cell bisected."""
        mid = 0.5 * (self.grid[1:] + self.grid[:-1])
        r = np.empty(2 * self.grid.size - 1)
        r[0::2], r[1::2] = self.grid, mid
        return RadialProfile(r, self(r))

    @classmethod
    def from_function(cls, f, grid) -> "RadialProfile":
        grid = np.asarray(grid, dtype=float)
        v = np.asarray(f(grid), dtype=float)
        v[-1] = 0.0
        return cls(grid, v)

    @classmethod
    def zero(cls, n: int = 2) -> "RadialProfile":
        return cls(np.linspace(0, 1, n), np.zeros(n))


def log_grid(n: int, r_min: float = 1e-6) -> np.ndarray:
    """``0`` followed by ``n`` log-spaced radii from ``r_min`` to 1."""
    return np.concatenate([[0.0], np.geomspace(r_min, 1.0, n)])


# -- quadrature -----------------------------------------------------------

@lru_cache(maxsize=64)
def _first_cell_rule(n: int, beta: float):
    x, w = roots_jacobi(n, 0.0, 1.0 - beta)
    return (x + 1) / 2, w


def radial_rule(grid: np.ndarray, beta: float, n: int = N_GAUSS):
    """Nodes and weights for ``int_0^1 f(r) r^(1-beta) dr`` on the cells of ``grid``.

    Returns ``(nodes, weights, cell)`` where ``cell[k]`` is the index of
    the cell holding node ``k``.  The weight ``r^(1-beta)`` is folded into
    ``weights``.
    """
    grid = np.asarray(grid, dtype=float)
    a, b = grid[:-1], grid[1:]
    x, w = np.polynomial.legendre.leggauss(n)
    h = (b - a)[:, None] / 2
    nodes = (a[:, None] + b[:, None]) / 2 + h * x[None, :]
    weights = h * w[None, :] * nodes ** (1.0 - beta)
    xj, wj = _first_cell_rule(n, float(beta))
    r1 = grid[1]
    nodes[0] = r1 * xj
    weights[0] = r1 ** (2.0 - beta) / 2 ** (1.0 - beta) * wj / 2
    cell = np.repeat(np.arange(grid.size - 1), n)
    return nodes.ravel(), weights.ravel(), cell


def _expm1_sq(alpha, v):
    return np.expm1(alpha * v * v)


# -- operations -----------------------------------------------------------

def dirichlet_norm_radial(v: RadialProfile) -> float:
    """``int_{B_1} |grad v|^2``, exact for the piecewise-linear profile."""
    dr = np.diff(v.grid)
    dv = np.diff(v.values)
    return float(math.pi * np.sum(dv * dv * (v.grid[1:] + v.grid[:-1]) / dr))


def concentration_tail(v: RadialProfile, eps: float) -> float:
    """Dirichlet energy of ``v`` on the annulus ``eps <= |x| <= 1``."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    r, s = v.grid, v.slopes
    j = int(np.searchsorted(r, eps, side="right")) - 1
    part = math.pi * s[j] ** 2 * (r[j + 1] ** 2 - eps ** 2)
    rest = math.pi * np.sum(s[j + 1:] ** 2 * (r[j + 2:] ** 2 - r[j + 1:-1] ** 2))
    return float(part + rest)


def l2_norm_sq_radial(v: RadialProfile) -> float:
    """``int_{B_1} v^2``; the Gauss rule is exact for this cubic integrand."""
    nodes, weights, _ = radial_rule(v.grid, 0.0)
    return float(2 * math.pi * np.sum(weights * v(nodes) ** 2))


def F_disk(p: FunctionalParams, v: RadialProfile, n: int = N_GAUSS) -> float:
    """Singular Moser-Trudinger functional of a radial profile on ``B_1``."""
    nodes, weights, _ = radial_rule(v.grid, p.beta, n)
    return float(2 * math.pi * np.sum(weights * _expm1_sq(p.alpha, v(nodes))))


def moser_value(rho: float, r):
    """Closed-form Moser function ``m_rho(r)``."""
    L = math.log(1 / rho)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        outer = np.log(1 / np.maximum(r, rho)) / math.sqrt(L)
    return outer / math.sqrt(2 * math.pi)


def moser_grid(rho: float, grid_size: int) -> np.ndarray:
    n_in = max(grid_size // 8, 4)
    n_out = grid_size - n_in
    inner = np.geomspace(rho * 1e-4, rho, n_in + 1)[:-1]
    outer = np.geomspace(rho, 1.0, n_out)
    return np.concatenate([[0.0], inner, outer])


def moser_profile(rho: float, grid_size: int = 4096, normalize: bool = True) -> RadialProfile:
    """Piecewise-linear sample of the Moser function ``m_rho``.

    The grid is log-spaced on ``(0, rho)`` and on ``[rho, 1]`` with ``rho``
    itself a node.  Linear interpolation of ``log(1/r)`` slightly
    overshoots the energy (by a factor ``1 + O(log(q)^2)`` for cell ratio
    ``q``), so by default the samples are rescaled to unit energy exactly.
    On the log-uniform outer grid every cell overshoots by the same factor,
    so energy fractions such as :func:`concentration_tail` are unaffected.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    grid = moser_grid(rho, grid_size)
    v = RadialProfile.from_function(lambda r: moser_value(rho, r), grid)
    if normalize:
        v = v.scaled(1.0 / math.sqrt(dirichlet_norm_radial(v)))
    return v


@dataclass(frozen=True)
class FDeltaEstimate:
    """Moser-family values ``F(m_rho)`` and their extrapolation as ``rho -> 0``.

    ``limit`` bounds the concentration level at 0 from below only: the
    Moser family is one particular concentrating sequence.  It is ``None``
    when fewer than three radii were supplied.
    """

    rhos: tuple
    values: tuple
    limit: float | None


def richardson_zero(x, y) -> float:
    """Value at ``x = 0`` of the polynomial through the points ``(x, y)``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    total = 0.0
    for i in range(x.size):
        others = np.delete(x, i)
        total += y[i] * np.prod(others / (others - x[i]))
    return float(total)


def f_delta_estimate(p: FunctionalParams, rho_list, grid_size: int = 16384) -> FDeltaEstimate:
    """Evaluate ``F`` along Moser profiles and extrapolate in ``1/log(1/rho)``.

    The three smallest radii are used for a quadratic extrapolation; the
    result is clipped at 0 since every ``F(m_rho)`` is nonnegative.
    """
    rhos = [float(r) for r in rho_list]
    if not rhos:
        raise ValueError("rho_list is empty")
    if any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ValueError("rho_list must be strictly decreasing")
    values = [F_disk(p, moser_profile(rho, grid_size)) for rho in rhos]
    limit = None
    if len(rhos) >= 3:
        x = [1 / math.log(1 / r) for r in rhos[-3:]]
        limit = max(0.0, richardson_zero(x, values[-3:]))
    return FDeltaEstimate(tuple(rhos), tuple(values), limit)
