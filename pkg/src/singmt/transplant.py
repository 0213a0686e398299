"""Transplanting radial disk profiles to ``Omega = h(B_1)``.

For ``u = v o h^{-1}`` with ``v`` radial, the change of variables ``x = h(y)``
turns the domain functional into a radial integral against the circle
integral of ``|h'|^2 / |h|^beta``.  Writing ``|h(y)| = |y| |h(y)/y|`` that
circle integral is ``r^(1-beta) * A(r)`` with

    A(r) = int_0^{2 pi} chi(r e^{it}) dt,   chi(y) = |h'(y)|^2 / |h(y)/y|^beta,

which is smooth up to ``r = 0`` with ``A(0) = 2 pi |h'(0)|^(2-beta)``.  The
outer integral therefore reuses the disk quadrature unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import conformal
from .conformal import ConformalMap, DomainError, GeometryError
from .diskfunc import (
    F_disk,
    FunctionalParams,
    RadialProfile,
    _expm1_sq,
    moser_profile,
    radial_rule,
)
from .reports import VerificationReport

CHI_THRESHOLD = 1e-8
CIRCLE_TOL = 1e-9


def circle_average(h: ConformalMap, r: float, gamma: float, beta: float, n: int = 256) -> float:
    """``r^beta * int_0^{2 pi} |h'(r e^{it})|^gamma / |h(r e^{it})|^beta dt`` by the periodic trapezoid rule."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"radius must lie in (0, 1), got {r}")
    if n < 1:
        raise ValueError("n must be positive")
    return float(_circle_mean(h, np.array([r]), gamma, beta, n)[0] * 2 * math.pi)


def _circle_mean(h, r, gamma, beta, n):
    # |h|^beta = r^beta |h/z|^beta, so the r^beta prefactor cancels exactly
    z = r[:, None] * np.exp(2j * np.pi * np.arange(n) / n)[None, :]
    vals = np.abs(h._dh(z)) ** gamma / np.abs(h._g(z)) ** beta
    return vals.mean(axis=1)


def circle_mean_converged(h, r, gamma, beta, n0: int = 64, rtol: float = 1e-11, n_max: int = 2 ** 15):
    """Angular mean of ``|h'|^gamma / |h/z|^beta`` on each radius, doubling ``n`` until the change is below ``rtol``."""
    r = np.asarray(r, dtype=float)
    out = _circle_mean(h, r, gamma, beta, n0)
    todo = np.arange(r.size)
    n = n0
    while todo.size and n < n_max:
        n *= 2
        new = _circle_mean(h, r[todo], gamma, beta, n)
        done = np.abs(new - out[todo]) <= rtol * np.abs(new)
        out[todo] = new
        todo = todo[~done]
    return out


def circle_average_converged(h, r, gamma, beta, **kw):
    """Vectorised :func:`circle_average` with adaptive resolution."""
    return 2 * math.pi * circle_mean_converged(h, r, gamma, beta, **kw)


def circle_lower_bound(h: ConformalMap, gamma: float, beta: float) -> float:
    return 2 * math.pi * h.conformal_radius ** (gamma - beta)


def verify_circle_inequality(h: ConformalMap, gamma: float, beta: float, r_grid) -> VerificationReport:
    """Check ``2 pi |h'(0)|^(gamma-beta) <= circle_average`` on every radius of ``r_grid``."""
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any((r_grid <= 0) | (r_grid >= 1)):
        raise DomainError("radii must lie in (0, 1)")
    slack = circle_average_converged(h, r_grid, gamma, beta) - circle_lower_bound(h, gamma, beta)
    k = int(np.argmin(slack))
    return VerificationReport(
        f"circle_inequality[{h!r}, gamma={gamma}, beta={beta}]",
        float(slack[k]), (float(r_grid[k]),), CIRCLE_TOL,
        {"max_abs_slack": float(np.max(np.abs(slack)))},
    )


def chi(h: ConformalMap, beta: float, y):
    """``|y|^beta |h'(y)|^2 / |h(y)|^beta``, extended by ``|h'(0)|^(2-beta)`` at 0."""
    y = np.asarray(y, dtype=complex)
    if np.any(np.abs(y) > 1.0 + 1e-12):
        raise DomainError("chi is only defined on the closed unit disk")
    val = np.abs(h._dh(y)) ** 2 / np.abs(h._g(y)) ** beta
    val = np.where(np.abs(y) <= CHI_THRESHOLD, h.conformal_radius ** (2 - beta), val)
    return float(val) if val.ndim == 0 else val


def chi_modulus(h: ConformalMap, beta: float, radius: float = 0.1, n_r: int = 40, n_t: int = 64) -> float:
    """Sampled Lipschitz constant of ``chi`` at the origin on ``|y| <= radius``."""
    r = np.geomspace(radius * 1e-4, radius, n_r)
    y = (r[:, None] * np.exp(2j * np.pi * np.arange(n_t) / n_t)[None, :]).ravel()
    dev = np.abs(chi(h, beta, y) - chi(h, beta, 0j))
    return float(np.max(dev / np.abs(y)))


# -- domain functional -----------------------------------------------------

@dataclass(frozen=True)
class TransplantResult:
    F_domain: float
    F_disk: float
    conformal_radius: float
    beta: float

    @property
    def bound(self) -> float:
        return self.conformal_radius ** (2 - self.beta) * self.F_disk

    @property
    def slack(self) -> float:
        return self.F_domain - self.bound

    @property
    def relative_slack(self) -> float:
        return self.slack / self.bound if self.bound > 0 else self.slack


def _circle_weight(h, beta, r):
    """``A(r) / (2 pi)`` at every node, with the continuous extension below the chi threshold."""
    A = np.empty_like(r)
    tiny = r <= CHI_THRESHOLD
    A[tiny] = h.conformal_radius ** (2 - beta)
    if (~tiny).any():
        A[~tiny] = circle_mean_converged(h, r[~tiny], 2.0, beta)
    return A


def F_domain_radial(p: FunctionalParams, v: RadialProfile, h: ConformalMap) -> float:
    """``F_Omega(v o h^{-1})`` through the radial change of variables."""
    nodes, weights, _ = radial_rule(v.grid, p.beta)
    f = _expm1_sq(p.alpha, v(nodes))
    live = f != 0
    A = np.zeros_like(nodes)
    A[live] = _circle_weight(h, p.beta, nodes[live])
    return float(2 * math.pi * np.sum(weights * f * A))


def transplant(p: FunctionalParams, v: RadialProfile, h: ConformalMap) -> TransplantResult:
    return TransplantResult(F_domain_radial(p, v, h), F_disk(p, v), h.conformal_radius, p.beta)


# -- Monte Carlo cross-check ------------------------------------------------

@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    acceptance: float
    n_samples: int


def _sample_domain(h, n_samples, seed, chunk, boundary_gap=1e-6):
    """Yield ``(x, z)`` for accepted samples in fixed chunk order.

    Chunk ``k`` draws from its own Philox stream, so the samples do not
    depend on how chunks are scheduled.
    """
    xmin, xmax, ymin, ymax = conformal.boundary_bbox(h)
    base = np.random.Philox(seed)
    for k, start in enumerate(range(0, n_samples, chunk)):
        m = min(chunk, n_samples - start)
        rng = np.random.Generator(base.jumped(k))
        x = rng.uniform(xmin, xmax, m) + 1j * rng.uniform(ymin, ymax, m)
        z, ok = conformal.invert_many(h, x)
        ok &= np.abs(z) <= 1.0 - boundary_gap
        yield x[ok], z[ok], m


def _mc_integrate(h, integrand, n_samples, seed, chunk, boundary_gap=1e-6):
    xmin, xmax, ymin, ymax = conformal.boundary_bbox(h)
    area = (xmax - xmin) * (ymax - ymin)
    s1 = s2 = 0.0
    accepted = 0
    for x, z, _ in _sample_domain(h, n_samples, seed, chunk, boundary_gap):
        f = integrand(x, z)
        s1 += float(np.sum(f))
        s2 += float(np.sum(f * f))
        accepted += x.size
    acceptance = accepted / n_samples
    if acceptance < 0.01:
        raise GeometryError(f"rejection acceptance {acceptance:.3%} below 1%")
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    return MonteCarloEstimate(area * mean, area * math.sqrt(var / n_samples), acceptance, n_samples)


def F_domain_montecarlo(
    p: FunctionalParams, v: RadialProfile, h: ConformalMap,
    n_samples: int = 10 ** 6, seed: int = 0, chunk: int = 2 ** 17,
) -> MonteCarloEstimate:
    """Rejection-sampling estimate of ``F_Omega(v o h^{-1})``.

    Points are drawn uniformly from the bounding box of ``h(B_1)`` and
    kept when Newton inversion succeeds; ``u(x) = v(|h^{-1}(x)|)``.
    """
    if n_samples < 10 ** 4:
        raise ValueError("n_samples must be >= 1e4")

    def integrand(x, z):
        return np.expm1(p.alpha * v(np.abs(z)) ** 2) / np.abs(x) ** p.beta

    return _mc_integrate(h, integrand, n_samples, seed, chunk)


def dirichlet_energy_montecarlo(
    v: RadialProfile, h: ConformalMap, n_samples: int = 10 ** 6, seed: int = 0, chunk: int = 2 ** 17,
) -> MonteCarloEstimate:
    """Monte Carlo ``int_Omega |grad u|^2`` for ``u = v o h^{-1}``; ``|grad u| = |v'| / |h'|``."""
    slopes = v.slopes

    def integrand(x, z):
        rz = np.abs(z)
        j = np.clip(np.searchsorted(v.grid, rz, side="right") - 1, 0, slopes.size - 1)
        return slopes[j] ** 2 / np.abs(h._dh(z)) ** 2

    return _mc_integrate(h, integrand, n_samples, seed, chunk)


# -- concentration experiment ------------------------------------------------

@dataclass(frozen=True)
class RatioRow:
    rho: float
    F_domain: float
    F_disk: float
    ratio: float | None


def transplant_ratio_experiment(
    p: FunctionalParams, h: ConformalMap, rho_list, grid_size: int = 4096,
) -> list[RatioRow]:
    """``F_Omega / F_{B_1}`` along transplanted Moser profiles; tends to ``|h'(0)|^(2-beta)``."""
    rhos = [float(r) for r in rho_list]
    if any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ValueError("rho_list must be strictly decreasing")
    rows = []
    for rho in rhos:
        m = moser_profile(rho, grid_size)
        fd, fb = F_domain_radial(p, m, h), F_disk(p, m)
        rows.append(RatioRow(rho, fd, fb, fd / fb if fb > 0 else None))
    return rows
