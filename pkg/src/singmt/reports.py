"""Slack records for numerically verified inequalities."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of checking an inequality ``lhs <= rhs`` over a set of points.

    ``min_slack`` is the smallest margin seen (positive means the
    inequality held everywhere) and ``worst_point`` the parameters at
    which it occurred.
    """

    name: str
    min_slack: float
    worst_point: tuple = ()
    tolerance: float = 0.0
    details: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return bool(self.min_slack >= -self.tolerance)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["worst_point"] = [_jsonable(x) for x in self.worst_point]
        out["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        out["passed"] = self.passed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "item"):
        return _jsonable(x.item())
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    return x


def combine(name: str, reports: list[VerificationReport], tolerance: float | None = None) -> VerificationReport:
    """Fold several reports into one that carries the worst slack."""
    if not reports:
        return VerificationReport(name, float("inf"), (), tolerance or 0.0)
    worst = min(reports, key=lambda r: r.min_slack + r.tolerance)
    tol = worst.tolerance if tolerance is None else tolerance
    return VerificationReport(
        name,
        worst.min_slack,
        (worst.name,) + tuple(worst.worst_point),
        tol,
        {"n_checks": len(reports), "n_failed": sum(not r.passed for r in reports)},
    )
