"""Conformal maps of the unit disk fixing the origin.

Three families are supported, all normalised so that ``h(0) = 0``:

* :class:`PowerSeries` -- ``z -> a_1 z + a_2 z^2 + ... + a_K z^K``
* :class:`Scaling`     -- ``z -> R z``
* :class:`Moebius`     -- ``z -> z / (1 - c z)`` with ``|c| < 1``

Every map exposes ``h``, ``h'`` and the quotient ``h(z)/z``.  The quotient
is what the singular weight actually needs: ``|h(z)|^beta`` is written as
``|z|^beta |h(z)/z|^beta`` so that nothing is ever divided by a tiny
``|h|`` near the origin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .reports import VerificationReport

logger = logging.getLogger(__name__)

_DISK_SLACK = 1e-12


class DomainError(ValueError):
    """Argument lies outside the closed unit disk (or required interval)."""


class InversionError(RuntimeError):
    """Newton inversion of a map did not converge."""


class GeometryError(ValueError):
    """The map is not (numerically) univalent or the domain is degenerate."""


def _check_disk(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 + _DISK_SLACK):
        raise DomainError("argument outside the closed unit disk")
    return z


class _MapBase:
    kind: str

    def __call__(self, z):
        z = _check_disk(z)
        return self._h(z)

    def deriv(self, z):
        z = _check_disk(z)
        return self._dh(z)

    def quotient(self, z):
        """``h(z)/z``, continuously extended by ``h'(0)`` at the origin."""
        z = _check_disk(z)
        return self._g(z)

    @property
    def conformal_radius(self) -> float:
        return float(abs(self._dh(np.complex128(0))))


@dataclass(frozen=True)
class PowerSeries(_MapBase):
    """Polynomial map with coefficients ``coeffs = (a_1, ..., a_K)``."""

    coeffs: tuple
    kind = "power_series"

    def __post_init__(self):
        c = tuple(complex(a) for a in self.coeffs)
        if not c:
            raise ValueError("power series needs at least one coefficient")
        if c[0] == 0:
            raise ValueError("leading coefficient a_1 must be nonzero")
        object.__setattr__(self, "coeffs", c)

    def _g(self, z):
        # Horner on a_1 + a_2 z + ... + a_K z^{K-1}
        acc = np.full(np.shape(z), self.coeffs[-1], dtype=complex)
        for a in self.coeffs[-2::-1]:
            acc = acc * z + a
        return acc

    def _h(self, z):
        return z * self._g(z)

    def _dh(self, z):
        k = len(self.coeffs)
        acc = np.full(np.shape(z), k * self.coeffs[-1], dtype=complex)
        for j in range(k - 1, 0, -1):
            acc = acc * z + j * self.coeffs[j - 1]
        return acc

    def critical_points(self) -> np.ndarray:
        """Zeros of ``h'``."""
        d = [k * a for k, a in enumerate(self.coeffs, start=1)]
        # np.roots wants highest degree first
        d = np.trim_zeros(np.array(d[::-1]), "f")
        if len(d) <= 1:
            return np.empty(0, dtype=complex)
        return np.roots(d)


@dataclass(frozen=True)
class Scaling(_MapBase):
    R: float
    kind = "scaling"

    def __post_init__(self):
        if not (float(self.R) > 0):
            raise ValueError("scaling factor must be positive")
        object.__setattr__(self, "R", float(self.R))

    def _g(self, z):
        return np.full(np.shape(z), self.R, dtype=complex)

    def _h(self, z):
        return self.R * z

    def _dh(self, z):
        return self._g(z)

    def critical_points(self) -> np.ndarray:
        return np.empty(0, dtype=complex)


@dataclass(frozen=True)
class Moebius(_MapBase):
    c: complex
    kind = "moebius"

    def __post_init__(self):
        c = complex(self.c)
        if not abs(c) < 1:
            raise ValueError("Moebius parameter must satisfy |c| < 1")
        object.__setattr__(self, "c", c)

    def _g(self, z):
        return 1.0 / (1.0 - self.c * z)

    def _h(self, z):
        return z / (1.0 - self.c * z)

    def _dh(self, z):
        return 1.0 / (1.0 - self.c * z) ** 2

    def critical_points(self) -> np.ndarray:
        return np.empty(0, dtype=complex)


ConformalMap = Union[PowerSeries, Scaling, Moebius]

IDENTITY = Scaling(1.0)


# -- functional interface --------------------------------------------------

def evaluate(h: ConformalMap, z):
    """``h(z)`` for ``|z| <= 1``; scalars in, scalars out."""
    out = h(z)
    return complex(out) if np.ndim(out) == 0 else out


def deriv(h: ConformalMap, z):
    out = h.deriv(z)
    return complex(out) if np.ndim(out) == 0 else out


def conformal_radius(h: ConformalMap) -> float:
    """``|h'(0)|``, the conformal radius of ``h(B_1)`` at 0."""
    return h.conformal_radius


def invert_many(h: ConformalMap, w, tol: float = 1e-12, max_iter: int = 60):
    """Vectorised Newton inversion.

    Returns ``(z, ok)`` where ``ok`` flags points with ``|h(z) - w| <= tol``
    (relative to ``max(1, |w|)``) and ``|z| <= 1``.  Failed points whose
    iterate ended strictly inside the disk get a second attempt by
    continuation along ``t w``.  Iterates pinned to the unit circle mean
    that ``w`` lies outside ``h(B_1)``, so those are left alone.
    """
    w = np.asarray(w, dtype=complex)
    shape = w.shape
    w = w.ravel()
    z0 = w / h._dh(np.complex128(0))
    z, ok = _newton(h, w, z0, tol, max_iter)
    bad = np.flatnonzero(~ok & (np.abs(z) < 1.0 - 1e-3))
    if bad.size:
        z_b = np.zeros(bad.size, dtype=complex)
        ok_b = np.ones(bad.size, dtype=bool)
        for t in np.linspace(0.125, 1.0, 8):
            z_b, ok_t = _newton(h, t * w[bad], z_b, tol, max_iter)
            ok_b &= ok_t
        z[bad] = np.where(ok_b, z_b, z[bad])
        ok[bad] = ok_b
    return z.reshape(shape), ok.reshape(shape)


def _into_disk(z):
    az = np.abs(z)
    return np.where(az > 1.0, z / np.where(az > 1.0, az, 1.0), z)


def _newton(h, w, z, tol, max_iter):
    z = _into_disk(np.array(z, dtype=complex))
    thresh = tol * np.maximum(1.0, np.abs(w))
    idx = np.arange(w.size)
    for _ in range(max_iter):
        zi = z[idx]
        res = h._h(zi) - w[idx]
        live = np.abs(res) > thresh[idx]
        if not live.all():
            idx, zi, res = idx[live], zi[live], res[live]
        if not idx.size:
            break
        step = res / h._dh(zi)
        znew = zi - step
        out = np.abs(znew) > 1.0
        if out.any():
            # damping: cut the step to half of its largest length that stays in the disk
            a, b = zi[out], step[out]
            bb = np.abs(b) ** 2
            re = (np.conj(a) * b).real
            t = (re + np.sqrt(np.maximum(re * re + bb * (1 - np.abs(a) ** 2), 0.0))) / bb
            znew[out] = _into_disk(a - 0.5 * np.minimum(t, 1.0) * b)
        z[idx] = znew
    ok = (np.abs(h._h(z) - w) <= thresh) & (np.abs(z) <= 1.0)
    return z, ok


def invert(h: ConformalMap, w: complex, tol: float = 1e-12, max_iter: int = 60) -> complex:
    """Solve ``h(z) = w`` for ``z`` in the closed disk.

    Raises :class:`InversionError` if Newton (and the continuation
    fallback) fail, which usually means ``w`` is outside ``h(B_1)``.
    """
    z, ok = invert_many(h, np.array([w]), tol, max_iter)
    if not ok[0]:
        raise InversionError(f"inversion of {h!r} at w={w} did not converge")
    return complex(z[0])


def boundary_trace(h: ConformalMap, r: float, n: int):
    """Samples ``(|h'(r e^{it_j})|, |h(r e^{it_j})|)`` at ``t_j = 2 pi j / n``."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"radius must lie in (0, 1), got {r}")
    if n < 1:
        raise ValueError("n must be positive")
    z = r * np.exp(2j * np.pi * np.arange(n) / n)
    return np.abs(h._dh(z)), np.abs(h._h(z))


def boundary_bbox(h: ConformalMap, n: int = 4096, margin: float = 0.01):
    """Bounding box ``(xmin, xmax, ymin, ymax)`` of ``h(B_1)``, slightly padded."""
    w = h._h(np.exp(2j * np.pi * np.arange(n) / n))
    xmin, xmax = w.real.min(), w.real.max()
    ymin, ymax = w.imag.min(), w.imag.max()
    pad = margin * max(xmax - xmin, ymax - ymin)
    return xmin - pad, xmax + pad, ymin - pad, ymax + pad


def univalence_check(
    h: ConformalMap, n_radial: int = 32, n_angular: int = 64, margin: float = 1e-6
) -> VerificationReport:
    """Sampled univalence test on the closed disk.

    Three things are looked at: the zeros of ``h'`` (exact for all three
    families), ``min |h'|`` over a polar grid, and the smallest difference
    quotient ``|h(z_i) - h(z_j)| / |z_i - z_j|`` over distinct grid
    points.  The report's slack is the smaller of the latter two minus
    ``margin``; an interior critical point forces a negative slack.

    Grid sampling alone can miss a fold that falls between nodes, so the
    most suspicious well-separated pairs are refined: Newton solves
    ``h(w) = h(z_i)`` from ``w = z_j``, and a solution in the disk away
    from ``z_i`` proves ``h`` is not injective.
    """
    if n_radial < 8 or n_angular < 8:
        raise ValueError("n_radial and n_angular must both be >= 8")
    radii = np.arange(1, n_radial + 1) / n_radial
    theta = 2 * np.pi * np.arange(n_angular) / n_angular
    z = np.concatenate([[0j], (radii[:, None] * np.exp(1j * theta)[None, :]).ravel()])
    hz = h._h(z)
    adh = np.abs(h._dh(z))
    i_d = int(np.argmin(adh))

    min_ratio, pair = np.inf, (0j, 0j)
    sep = 4.0 / n_radial
    far_q, far_i, far_j = [], [], []
    for start in range(0, z.size, 256):
        zi = z[start:start + 256, None]
        dz = np.abs(zi - z[None, :])
        dh = np.abs(hz[start:start + 256, None] - hz[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dz > 0, dh / dz, np.inf)
        k = np.unravel_index(np.argmin(q), q.shape)
        if q[k] < min_ratio:
            min_ratio = float(q[k])
            pair = (complex(z[start + k[0]]), complex(z[k[1]]))
        qf = np.where(dz > sep, q, np.inf).ravel()
        top = np.argpartition(qf, 8)[:8]
        far_q.append(qf[top])
        far_i.append(start + top // z.size)
        far_j.append(top % z.size)

    far_q, far_i, far_j = map(np.concatenate, (far_q, far_i, far_j))
    keep = np.argsort(far_q, kind="stable")[:16]
    w, ok = _newton(h, hz[far_i[keep]], z[far_j[keep]].copy(), 1e-12, 60)
    gap = np.abs(w - z[far_i[keep]])
    fold = ok & (gap > 1e-3)

    crit = [complex(c) for c in h.critical_points() if abs(c) < 1.0]
    details = {"min_abs_deriv": float(adh[i_d]), "min_difference_quotient": min_ratio,
               "interior_critical_points": crit}
    if crit:
        zc = min(crit, key=abs)
        slack, worst = -(1.0 - abs(zc)), (zc,)
    elif fold.any():
        k = int(np.flatnonzero(fold)[np.argmax(gap[fold])])
        z1, z2 = complex(z[far_i[keep][k]]), complex(w[k])
        details["fold_pair"] = (z1, z2)
        slack, worst = -min(1.0, float(gap[k])), (z1, z2)
    elif adh[i_d] <= min_ratio:
        slack, worst = float(adh[i_d]) - margin, (complex(z[i_d]),)
    else:
        slack, worst = min_ratio - margin, pair
    report = VerificationReport(f"univalence[{h!r}]", slack, worst, 0.0, details)
    if report.passed and adh[i_d] < 1e-2 * h.conformal_radius:
        logger.warning("%r is close to losing univalence (min |h'| = %.3g)", h, adh[i_d])
    return report


def require_univalent(h: ConformalMap) -> None:
    rep = univalence_check(h)
    if not rep.passed:
        raise GeometryError(f"map {h!r} is not univalent on the closed disk "
                            f"(slack {rep.min_slack:.3g} at {rep.worst_point})")


# -- JSON map description ---------------------------------------------

def map_from_dict(d: dict) -> ConformalMap:
    """Build a map from ``{"kind": ..., <payload>}``; exactly one payload field."""
    if not isinstance(d, dict):
        raise ValueError(f"map description must be a JSON object, got {d!r}")
    kind = d.get("kind")
    payload = {"power_series": "coeffs", "scaling": "R", "moebius": "c"}
    if kind not in payload:
        raise ValueError(f"unknown map kind {kind!r}")
    present = [k for k in ("coeffs", "R", "c") if k in d]
    if present != [payload[kind]]:
        raise ValueError(f"map of kind {kind!r} needs exactly the field {payload[kind]!r}, got {present}")
    if kind == "power_series":
        return PowerSeries(tuple(_complex(a) for a in d["coeffs"]))
    if kind == "scaling":
        return Scaling(float(d["R"]))
    return Moebius(_complex(d["c"]))


def map_to_dict(h: ConformalMap) -> dict:
    if isinstance(h, PowerSeries):
        return {"kind": h.kind, "coeffs": [[a.real, a.imag] for a in h.coeffs]}
    if isinstance(h, Scaling):
        return {"kind": h.kind, "R": h.R}
    return {"kind": h.kind, "c": [h.c.real, h.c.imag]}


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        re, im = x
        return complex(float(re), float(im))
    return complex(x)
