"""Constrained maximisation of the disk functional over radial profiles.

The profile is parameterised by its cell slopes ``s_j``; the Dirichlet
energy is then the diagonal quadratic form ``sum_j c_j s_j^2`` with
``c_j = pi (r_{j+1}^2 - r_j^2)``.  Each iteration takes the gradient in the
metric ``diag(c)`` (the H^1_0 Riesz representative), projects it onto the
tangent space of the unit-energy sphere, and rescales the trial point back
onto the sphere exactly.  Since ``F(t v)`` is strictly increasing in ``t``
the maximiser over the energy ball lies on that sphere.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import conformal
from .diskfunc import (
    F_disk,
    FDeltaEstimate,
    FunctionalParams,
    RadialProfile,
    dirichlet_norm_radial,
    f_delta_estimate,
    log_grid,
    moser_profile,
    radial_rule,
)
from .rearrange import radial_rearrangement
from .transplant import F_domain_radial

ARMIJO_C = 1e-4
MAX_HALVINGS = 40
DEFAULT_GAP_RHOS = (1e-4, 1e-8, 1e-16, 1e-32)


class ConvergenceError(RuntimeError):
    pass


@dataclass
class OptSettings:
    grid_size: int = 512
    max_iter: int = 3000
    tol: float = 1e-6
    init: str = "moser:0.3"
    r_min: float = 1e-8

    def __post_init__(self):
        if self.grid_size < 128:
            raise ValueError("grid_size must be >= 128")
        if self.grid_size > 2048:
            raise ValueError("grid_size is capped at 2048")
        parse_init(self.init)

    @classmethod
    def from_dict(cls, d: dict | None) -> "OptSettings":
        d = dict(d or {})
        known = {k: d.pop(k) for k in list(d) if k in cls.__dataclass_fields__}
        if d:
            raise ValueError(f"unknown optimizer settings: {sorted(d)}")
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


def parse_init(init: str):
    """``"moser:<rho>"``, ``"zero"`` or ``"file:<path>"``."""
    if init == "zero":
        return ("zero", None)
    kind, _, arg = init.partition(":")
    if kind == "moser":
        rho = float(arg)
        if not 0 < rho < 1:
            raise ValueError(f"moser init needs rho in (0, 1), got {arg}")
        return ("moser", rho)
    if kind == "file" and arg:
        return ("file", arg)
    raise ValueError(f"cannot parse init {init!r}")


def initial_profile(init, grid_size: int = 4096) -> RadialProfile:
    if isinstance(init, RadialProfile):
        return init
    kind, arg = parse_init(init)
    if kind == "zero":
        return RadialProfile.zero()
    if kind == "moser":
        return moser_profile(arg, max(grid_size, 64))
    from .io import read_profile_csv
    return read_profile_csv(arg)


@dataclass
class MaximizerResult:
    profile: RadialProfile
    value: float
    iterations: int
    converged: bool
    gradient_residual: float
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_residual": self.gradient_residual,
            "dirichlet_norm": dirichlet_norm_radial(self.profile),
            "grid_size": int(self.profile.grid.size - 1),
        }


class SlopeObjective:
    """``F_disk`` and its gradient as functions of the slope vector."""

    def __init__(self, p: FunctionalParams, grid: np.ndarray):
        self.p = p
        self.grid = np.asarray(grid, dtype=float)
        self.dr = np.diff(self.grid)
        self.c = math.pi * (self.grid[1:] ** 2 - self.grid[:-1] ** 2)
        self.nodes, w, self.cell = radial_rule(self.grid, p.beta)
        self.w = 2 * math.pi * w
        # distance from each node to the right end of its cell
        self.lever = self.grid[1:][self.cell] - self.nodes

    def values(self, s):
        """Nodal values ``v_j = -sum_{k >= j} s_k dr_k`` (``v_N = 0``)."""
        tail = np.cumsum((s * self.dr)[::-1])[::-1]
        return np.concatenate([-tail, [0.0]])

    def _node_values(self, s):
        return self.values(s)[1:][self.cell] - s[self.cell] * self.lever

    def energy(self, s) -> float:
        return float(np.sum(self.c * s * s))

    def __call__(self, s) -> float:
        v = self._node_values(s)
        return float(np.sum(self.w * np.expm1(self.p.alpha * v * v)))

    def gradient(self, s) -> np.ndarray:
        v = self._node_values(s)
        g = self.w * 2 * self.p.alpha * v * np.exp(self.p.alpha * v * v)
        n = s.size
        own = np.bincount(self.cell, weights=g * self.lever, minlength=n)
        G = np.bincount(self.cell, weights=g, minlength=n)
        left = np.concatenate([[0.0], np.cumsum(G)[:-1]])
        return -own - self.dr * left

    def profile(self, s) -> RadialProfile:
        return RadialProfile(self.grid, np.maximum(self.values(s), 0.0))


def _initial_slopes(obj: SlopeObjective, v0: RadialProfile) -> np.ndarray:
    vals = v0(obj.grid)
    vals[-1] = 0.0
    s = np.diff(vals) / obj.dr
    if not np.any(s):
        # F and its gradient both vanish at 0; leave along the cone 1 - r
        s = -np.ones_like(obj.dr)
    return s / math.sqrt(obj.energy(s))


def maximize_radial(
    p: FunctionalParams,
    grid_size: int = 512,
    init="moser:0.3",
    max_iter: int = 3000,
    tol: float = 1e-6,
    r_min: float = 1e-8,
) -> MaximizerResult:
    """Maximise ``F_disk`` over piecewise-linear profiles with unit Dirichlet energy.

    Stops once the metric norm of the projected gradient falls below
    ``tol`` times its normal component ``<s, grad F>``, i.e. once the
    tangential part is negligible next to the derivative along scalings.
    Around ``1e-7`` this ratio hits the floating-point floor of the Armijo
    test at critical parameters.

    The returned profile is nonincreasing; if the iteration ever produced
    an increasing piece it is re-sorted by :func:`radial_rearrangement`
    and renormalised.
    """
    if not isinstance(p, FunctionalParams):
        raise TypeError("p must be FunctionalParams")
    if grid_size < 128:
        raise ValueError("grid_size must be >= 128")
    obj = SlopeObjective(p, log_grid(grid_size, r_min))
    s = _initial_slopes(obj, initial_profile(init))
    F = obj(s)
    history = [F]
    t_prev = 1.0
    residual = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = obj.gradient(s)
        lam = float(s @ grad)
        d = grad / obj.c - lam * s
        residual = math.sqrt(float(np.sum(obj.c * d * d)))
        if residual <= tol * lam:
            converged = True
            it -= 1
            break
        # cap so that s(1 - t lam) + t C^-1 grad keeps the sign pattern of s
        t = min(1.0, 4 * t_prev, 0.5 / lam if lam > 0 else math.inf)
        decrease = residual ** 2
        for _ in range(MAX_HALVINGS):
            trial = s + t * d
            trial /= math.sqrt(obj.energy(trial))
            F_trial = obj(trial)
            if F_trial >= F + ARMIJO_C * t * decrease:
                break
            t *= 0.5
        else:
            break
        s, F, t_prev = trial, F_trial, t
        history.append(F)

    profile = obj.profile(s)
    if np.any(np.diff(profile.values) > 0):
        profile = radial_rearrangement(profile)
        profile = profile.scaled(1 / math.sqrt(dirichlet_norm_radial(profile)))
        F = F_disk(p, profile)
    return MaximizerResult(profile, F, it, converged, residual, history)


def maximize_with_settings(p: FunctionalParams, settings: OptSettings) -> MaximizerResult:
    return maximize_radial(p, settings.grid_size, settings.init, settings.max_iter,
                           settings.tol, settings.r_min)


# -- experiments --------------------------------------------------------------

@dataclass
class GapResult:
    params: FunctionalParams
    F_sup_estimate: float
    F_delta_lower_estimate: float | None
    fdelta: FDeltaEstimate
    maximizer: MaximizerResult
    offcenter: list | None = None

    @property
    def gap(self) -> float | None:
        if self.F_delta_lower_estimate is None:
            return None
        return self.F_sup_estimate - self.F_delta_lower_estimate

    def to_dict(self) -> dict:
        out = {
            "alpha": self.params.alpha,
            "beta": self.params.beta,
            "criticality": self.params.criticality,
            "F_sup_estimate": self.F_sup_estimate,
            "F_delta_lower_estimate": self.F_delta_lower_estimate,
            "gap": self.gap,
            "moser_rhos": list(self.fdelta.rhos),
            "moser_values": list(self.fdelta.values),
            "maximizer": self.maximizer.to_dict(),
            "note": ("F_delta is bounded from below along Moser profiles only; a positive gap "
                     "is consistent with the strict inequality, a negative one would indicate a bug."),
        }
        if self.offcenter is not None:
            out["offcenter"] = self.offcenter
        return out


def gap_experiment(
    p: FunctionalParams,
    rho_list=DEFAULT_GAP_RHOS,
    settings: OptSettings | None = None,
    diagnostic: bool = False,
    offcenter_a: float = 0.5,
) -> GapResult:
    """Compare the numerical supremum with the Moser-family concentration level.

    With ``diagnostic=True`` also evaluates Moser profiles recentred at
    ``offcenter_a`` (see :func:`offcenter_moser_values`), which must decay
    to 0 when ``beta > 0``.
    """
    settings = settings or OptSettings()
    res = maximize_with_settings(p, settings)
    fd = f_delta_estimate(p, rho_list)
    off = None
    if diagnostic:
        off = [{"rho": r, "F": F} for r, F in
               zip(rho_list, offcenter_moser_values(p, offcenter_a, rho_list))]
    return GapResult(p, res.value, fd.limit, fd, res, off)


@dataclass
class DomainMaximizerResult:
    disk: MaximizerResult
    domain_lower_bound: float
    direct: float

    @property
    def slack(self) -> float:
        return self.direct - self.domain_lower_bound


def maximize_on_domain(p: FunctionalParams, h, settings: OptSettings | None = None) -> DomainMaximizerResult:
    """Lower bound ``|h'(0)|^(2-beta) F_sup(B_1)`` for the supremum on ``h(B_1)``.

    Also evaluates the transplanted maximiser directly; that value must
    dominate the bound.
    """
    conformal.require_univalent(h)
    res = maximize_with_settings(p, settings or OptSettings())
    bound = h.conformal_radius ** (2 - p.beta) * res.value
    return DomainMaximizerResult(res, bound, F_domain_radial(p, res.profile, h))


# -- off-centre concentration diagnostic -------------------------------------------

def _disk_weight_integral(center: complex, radius: float, beta: float) -> float:
    """``int |x|^-beta`` over the Euclidean disk ``|x - center| < radius``."""
    from scipy.integrate import quad

    d = abs(center)
    e = 2.0 - beta
    if beta == 0:
        return math.pi * radius ** 2
    if d == 0:
        return 2 * math.pi * radius ** e / e

    # by symmetry put the centre on the positive real axis; along direction
    # theta the ray meets the circle at d cos(theta) -+ sqrt(R^2 - d^2 sin^2(theta))
    def chord(theta, sign):
        disc = radius ** 2 - (d * math.sin(theta)) ** 2
        return d * math.cos(theta) + sign * math.sqrt(max(disc, 0.0))

    if d < radius:
        f = lambda t: chord(t, 1) ** e / e
        return 2 * quad(f, 0, math.pi, limit=200)[0]
    tmax = math.asin(radius / d)
    f = lambda t: (chord(t, 1) ** e - max(chord(t, -1), 0.0) ** e) / e
    return 2 * quad(f, 0, tmax, limit=200)[0]


def offcenter_moser_values(p: FunctionalParams, a: float, rho_list, grid_size: int = 4096) -> list:
    """``F_{B_1}(m_rho o phi_a)`` for the disk automorphism ``phi_a(x) = (x - a)/(1 - a x)``.

    The sequence concentrates at ``a``.  In the variable ``w = phi_a(x)`` the
    profile is radial and ``phi_a^{-1}(B_r)`` is a Euclidean disk, so with
    ``mu(r) = int_{phi_a^{-1}(B_r)} |x|^-beta`` integration by parts gives
    ``F = -int_0^1 f'(r) mu(r) dr`` for ``f = exp(alpha m^2) - 1``.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    out = []
    x, wq = np.polynomial.legendre.leggauss(6)
    for rho in rho_list:
        m = moser_profile(rho, grid_size)
        r, v = m.grid, m.values
        s = m.slopes
        total = 0.0
        for j in np.flatnonzero(s != 0):
            lo, hi = r[j], r[j + 1]
            rr = (lo + hi) / 2 + (hi - lo) / 2 * x
            vv = v[j] + s[j] * (rr - lo)
            fprime = 2 * p.alpha * vv * s[j] * np.exp(p.alpha * vv * vv)
            mu = []
            for t in rr:
                c = a * (1 - t * t) / (1 - a * a * t * t)
                R = t * (1 - a * a) / (1 - a * a * t * t)
                mu.append(_disk_weight_integral(c, R, p.beta))
            total -= (hi - lo) / 2 * float(np.sum(wq * fprime * np.array(mu)))
        out.append(total)
    return out
