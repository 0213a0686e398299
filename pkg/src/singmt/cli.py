"""Command-line runner: ``singmt <command> [options]``.

Exit status is 0 on success, 1 when a check fails or the optimiser does
not converge, and 2 for bad input (unparseable files, inadmissible
parameters, non-univalent maps).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conformal, io
from .conformal import ConformalMap
from .diskfunc import (
    F_disk,
    FunctionalParams,
    RadialProfile,
    dirichlet_norm_radial,
    f_delta_estimate,
    moser_profile,
    radial_rule,
)
from .optimize import DEFAULT_GAP_RHOS, OptSettings, gap_experiment, maximize_radial
from .rearrange import GridFunction2D, equimeasurability_check, polya_szego_check
from .reports import VerificationReport, combine
from .transplant import (
    F_domain_montecarlo,
    F_domain_radial,
    transplant,
    transplant_ratio_experiment,
    verify_circle_inequality,
)

log = logging.getLogger("singmt")

DEFAULT_MAPS = [
    {"kind": "scaling", "R": 1.0},
    {"kind": "scaling", "R": 2.0},
    {"kind": "moebius", "c": 0.4},
    {"kind": "power_series", "coeffs": [1, 0.3]},
    {"kind": "power_series", "coeffs": [1, 0.2, [0, 0.1]]},
]
DEFAULT_PAIRS = [(4 * math.pi, 0.0), (2 * math.pi, 1.0), (math.pi, 0.5), (1.0, 1.5)]
DEFAULT_RATIO_RHOS = (1e-2, 1e-3, 1e-4)
TRANSPLANT_TOL = 1e-8


class InputError(Exception):
    """Bad user input; reported with exit status 2."""


@dataclass
class RunConfig:
    params: FunctionalParams | None = None
    map: ConformalMap | None = None
    maps: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    optimizer: OptSettings = field(default_factory=OptSettings)
    rho_list: tuple | None = None
    grid_size: int | None = None
    out: Path | None = None
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict)

    def require_params(self) -> FunctionalParams:
        if self.params is None:
            raise InputError("this command needs --alpha (and optionally --beta) or a config with 'alpha'")
        return self.params


def _params(alpha, beta) -> FunctionalParams:
    try:
        return FunctionalParams(float(alpha), float(beta))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _map(d) -> ConformalMap:
    if isinstance(d, str):
        try:
            d = json.loads(d)
        except json.JSONDecodeError as exc:
            raise InputError(f"--map is not valid JSON: {exc}") from None
    try:
        h = conformal.map_from_dict(d)
        conformal.require_univalent(h)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from None
    return h


def load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")

    cfg = RunConfig(raw=raw)
    alpha = args.alpha if args.alpha is not None else raw.get("alpha")
    beta = args.beta if args.beta is not None else raw.get("beta", 0.0)
    if alpha is not None:
        cfg.params = _params(alpha, beta)
    elif args.beta is not None:
        raise InputError("--beta given without --alpha")

    map_arg = getattr(args, "map", None) or raw.get("map")
    if map_arg is not None:
        cfg.map = _map(map_arg)
    cfg.maps = [_map(m) for m in raw.get("maps", [])]
    cfg.pairs = [_params(a, b) for a, b in raw.get("params", [])]

    try:
        cfg.optimizer = OptSettings.from_dict(raw.get("optimizer"))
    except (ValueError, TypeError) as exc:
        raise InputError(f"optimizer settings: {exc}") from None
    rhos = getattr(args, "rho", None) or raw.get("rho_list")
    if rhos is not None:
        cfg.rho_list = tuple(float(r) for r in rhos)
        if not all(0 < r < 1 for r in cfg.rho_list):
            raise InputError("every rho must lie in (0, 1)")
        if any(b >= a for a, b in zip(cfg.rho_list, cfg.rho_list[1:])):
            raise InputError("rho values must be strictly decreasing")
    cfg.grid_size = getattr(args, "grid", None) or raw.get("grid_size")
    out = args.out or raw.get("out")
    cfg.out = Path(out) if out else None
    cfg.seed = int(args.seed if args.seed is not None else raw.get("seed", 0))
    cfg.threads = int(args.threads if args.threads is not None else raw.get("threads", 1))
    if cfg.threads < 1:
        raise InputError("--threads must be >= 1")
    return cfg


def _write(cfg: RunConfig, name: str, text: str) -> None:
    if cfg.out is not None:
        io.atomic_write(cfg.out / name, text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(cfg: RunConfig, name: str, obj) -> None:
    text = _dump(obj)
    sys.stdout.write(text)
    _write(cfg, name, text)


# -- commands -----------------------------------------------------------------

def cmd_eval(cfg: RunConfig, args) -> int:
    p = cfg.require_params()
    if args.profile:
        try:
            v = io.read_profile_csv(args.profile)
        except OSError as exc:
            raise InputError(f"cannot read profile: {exc}") from None
        source = {"profile": str(args.profile)}
    elif args.moser is not None:
        try:
            v = moser_profile(args.moser, cfg.grid_size or 4096)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        source = {"moser_rho": args.moser}
    else:
        raise InputError("eval needs --profile or --moser")

    nodes, _, _ = radial_rule(v.grid, p.beta)
    out = {
        **source,
        "alpha": p.alpha,
        "beta": p.beta,
        "F_disk": F_disk(p, v),
        "dirichlet_norm": dirichlet_norm_radial(v),
        "n_cells": int(v.grid.size - 1),
        "n_nodes": int(nodes.size),
        "F_disk_refined": F_disk(p, v, n=20),
    }
    if cfg.map is not None:
        out["map"] = conformal.map_to_dict(cfg.map)
        out["conformal_radius"] = cfg.map.conformal_radius
        out["F_domain"] = F_domain_radial(p, v, cfg.map)
        if args.mc:
            est = F_domain_montecarlo(p, v, cfg.map, args.mc, cfg.seed)
            out["F_domain_montecarlo"] = {"estimate": est.estimate, "stderr": est.stderr,
                                          "acceptance": est.acceptance, "n_samples": est.n_samples,
                                          "seed": cfg.seed}
    _emit(cfg, "eval.json", out)
    return 0


def _test_profiles():
    return [
        ("cone", RadialProfile.from_function(lambda r: 1 - r, np.linspace(0, 1, 257))),
        ("moser:0.3", moser_profile(0.3)),
        ("moser:0.01", moser_profile(0.01)),
    ]


def transplant_reports(maps, pairs, profiles) -> list[VerificationReport]:
    reports = []
    for h in maps:
        for p in pairs:
            for name, v in profiles:
                res = transplant(p, v, h)
                reports.append(VerificationReport(
                    f"transplant[{h!r}, alpha={p.alpha:.6g}, beta={p.beta:.6g}, {name}]",
                    res.relative_slack, (), TRANSPLANT_TOL,
                    {"F_domain": res.F_domain, "bound": res.bound, "F_disk": res.F_disk},
                ))
    return reports


def circle_reports(maps, gammas=(0, 1, 2, 3), betas=(0, 0.5, 1, 1.5), n_radii=50):
    r_grid = np.linspace(0.02, 0.98, n_radii)
    return [verify_circle_inequality(h, g, b, r_grid) for h in maps for g in gammas for b in betas]


def _test_grid_functions(M):
    def bump(x0, y0, R, c=1.0):
        return lambda X, Y: c * np.maximum(0, 1 - ((X - x0) ** 2 + (Y - y0) ** 2) / R ** 2) ** 2

    two = lambda X, Y: bump(0.45, 0.2, 0.35)(X, Y) + bump(-0.4, -0.3, 0.4, 0.6)(X, Y)
    aniso = lambda X, Y: np.maximum(0, 1 - ((X + 0.2) / 0.7) ** 2 - (Y / 0.4) ** 2) ** 2
    return [("shifted_bump", GridFunction2D.from_function(bump(0.3, 0, 0.6), M)),
            ("anisotropic", GridFunction2D.from_function(aniso, M)),
            ("two_bumps", GridFunction2D.from_function(two, M))]


def rearrangement_reports(pairs, M=512) -> list[VerificationReport]:
    from .rearrange import decreasing_rearrangement

    reports = []
    for name, f in _test_grid_functions(M):
        eq = equimeasurability_check(f, decreasing_rearrangement(f))
        reports.append(VerificationReport(f"{eq.name}[{name}]", eq.min_slack, eq.worst_point,
                                          eq.tolerance, eq.details))
        ps = polya_szego_check(f, pairs)
        reports.append(VerificationReport(f"{ps.name}[{name}]", ps.min_slack, ps.worst_point,
                                          ps.tolerance, ps.details))
    return reports


def cmd_verify(cfg: RunConfig, args) -> int:
    maps = ([cfg.map] if cfg.map is not None else cfg.maps) or [_map(m) for m in DEFAULT_MAPS]
    if cfg.params is not None:
        pairs = [cfg.params]
    else:
        pairs = cfg.pairs or [FunctionalParams(a, b) for a, b in DEFAULT_PAIRS]

    reports = circle_reports(maps) + transplant_reports(maps, pairs, _test_profiles())
    if args.rearrange:
        # coarser grids misstate the rearranged energy by more than the 2% tolerance
        if args.rearrange_grid < 256:
            raise InputError("--rearrange-grid must be >= 256")
        reports += rearrangement_reports(pairs[:3], args.rearrange_grid)
    summary = combine("verify", reports)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} min_slack={r.min_slack:.3e}")
    print(f"{'PASS' if summary.passed else 'FAIL'} {summary.name}: "
          f"{summary.details['n_failed']} of {summary.details['n_checks']} checks failed")
    _write(cfg, "reports.json", _dump(io.reports_json(reports + [summary])))
    return 0 if summary.passed else 1


def _starts(cfg: RunConfig, args) -> list[str]:
    if args.init:
        return list(args.init)
    n = args.starts
    if n <= 1:
        return [cfg.optimizer.init]
    rng = np.random.default_rng(cfg.seed)
    rhos = np.exp(rng.uniform(math.log(1e-3), math.log(0.5), n - 1))
    return [cfg.optimizer.init] + [f"moser:{float(r)!r}" for r in rhos]


def _report_nonconvergence(results) -> int:
    bad = [(init, r) for init, r in results if not r.converged]
    for init, r in bad:
        print(f"not converged (init {init}): gradient_residual={r.gradient_residual!r} "
              f"after {r.iterations} iterations", file=sys.stderr)
    return 1 if bad else 0


def cmd_maximize(cfg: RunConfig, args) -> int:
    p = cfg.require_params()
    s = cfg.optimizer
    inits = _starts(cfg, args)
    try:
        results = [(init, maximize_radial(p, s.grid_size, init, s.max_iter, s.tol, s.r_min))
                   for init in inits]
    except (ValueError, OSError) as exc:
        raise InputError(str(exc)) from None
    values = [r.value for _, r in results]
    best_init, best = max(results, key=lambda ir: ir[1].value)
    out = {
        "alpha": p.alpha, "beta": p.beta,
        "settings": s.to_dict(),
        "seed": cfg.seed,
        "starts": [{"init": init, **r.to_dict()} for init, r in results],
        "best_value": best.value,
        "best_init": best_init,
        "relative_spread": (max(values) - min(values)) / max(values) if max(values) > 0 else 0.0,
    }
    _emit(cfg, "maximize.json", out)
    _write(cfg, "maximizer_profile.csv", io.profile_csv_text(best.profile))
    _write(cfg, "history.csv", io.csv_text(["iteration", "F"], enumerate(best.history)))
    return _report_nonconvergence(results)


def cmd_gap(cfg: RunConfig, args) -> int:
    p = cfg.require_params()
    res = gap_experiment(p, cfg.rho_list or DEFAULT_GAP_RHOS, cfg.optimizer,
                         diagnostic=args.diagnostic)
    out = {**res.to_dict(), "settings": cfg.optimizer.to_dict(),
           "fdelta_grid_size": 16384}
    _emit(cfg, "gap.json", out)
    _write(cfg, "moser_series.csv",
           io.csv_text(["rho", "F_disk"], zip(res.fdelta.rhos, res.fdelta.values)))
    _write(cfg, "maximizer_profile.csv", io.profile_csv_text(res.maximizer.profile))
    status = _report_nonconvergence([(cfg.optimizer.init, res.maximizer)])
    if res.gap is None or res.gap <= 0:
        print(f"gap not positive: {res.gap!r}", file=sys.stderr)
        return 1
    return status


def cmd_ratio(cfg: RunConfig, args) -> int:
    p = cfg.require_params()
    h = cfg.map or conformal.IDENTITY
    rows = transplant_ratio_experiment(p, h, cfg.rho_list or DEFAULT_RATIO_RHOS,
                                       cfg.grid_size or 4096)
    text = io.ratio_csv_text(rows)
    sys.stdout.write(text)
    print(f"# target |h'(0)|^(2-beta) = {h.conformal_radius ** (2 - p.beta)!r}")
    _write(cfg, "ratio.csv", text)
    return 0


SWEEP_HEADER = ["alpha", "beta", "criticality", "F_sup", "F_delta_lower", "gap", "converged",
                "gradient_residual"]


def _sweep_row(p: FunctionalParams, settings: OptSettings, rhos):
    res = maximize_radial(p, settings.grid_size, settings.init, settings.max_iter,
                          settings.tol, settings.r_min)
    lower = f_delta_estimate(p, rhos).limit
    gap = res.value - lower if lower is not None else None
    return res, [p.alpha, p.beta, p.criticality, res.value, lower, gap,
                 "true" if res.converged else "false", res.gradient_residual]


def cmd_sweep(cfg: RunConfig, args) -> int:
    pairs = cfg.pairs or ([cfg.params] if cfg.params is not None else None)
    if not pairs:
        raise InputError("sweep needs a config with 'params': [[alpha, beta], ...]")
    rhos = cfg.rho_list or DEFAULT_GAP_RHOS
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        done = list(pool.map(lambda p: _sweep_row(p, cfg.optimizer, rhos), pairs))
    # rows come back in input order regardless of scheduling
    text = io.csv_text(SWEEP_HEADER, [row for _, row in done])
    sys.stdout.write(text)
    _write(cfg, "sweep.csv", text)
    return _report_nonconvergence([(f"{p.alpha!r},{p.beta!r}", r) for p, (r, _) in zip(pairs, done)])


COMMANDS = {
    "eval": cmd_eval,
    "verify": cmd_verify,
    "maximize": cmd_maximize,
    "gap": cmd_gap,
    "ratio": cmd_ratio,
    "sweep": cmd_sweep,
}


def _global_flags(parser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {"default": None}
    parser.add_argument("--alpha", type=float, help="exponent alpha > 0", **d)
    parser.add_argument("--beta", type=float, help="singular weight exponent in [0, 2)", **d)
    parser.add_argument("--config", help="JSON config file", **d)
    parser.add_argument("--out", help="directory for output files", **d)
    parser.add_argument("--seed", type=int, **d)
    parser.add_argument("--threads", type=int, **d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singmt", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        sp = sub.add_parser(name, help=help)
        _global_flags(sp, suppress=True)
        return sp

    sp = add("eval", "evaluate the functional for one profile")
    sp.add_argument("--profile", help="CSV with header r,v")
    sp.add_argument("--moser", type=float, metavar="RHO", help="use the Moser profile m_rho")
    sp.add_argument("--grid", type=int, help="grid size for --moser")
    sp.add_argument("--map", help='conformal map as JSON, e.g. {"kind": "moebius", "c": 0.4}')
    sp.add_argument("--mc", type=int, default=0, metavar="N", help="also run N Monte Carlo samples")

    sp = add("verify", "run the inequality checks")
    sp.add_argument("--map", help="restrict to this map (JSON)")
    sp.add_argument("--rearrange", action="store_true", help="include the rearrangement checks")
    sp.add_argument("--rearrange-grid", type=int, default=512)

    sp = add("maximize", "maximise over unit-energy radial profiles")
    sp.add_argument("--init", action="append", help="initial profile (repeatable)")
    sp.add_argument("--starts", type=int, default=1, help="number of starts (extra ones seeded)")

    sp = add("gap", "compare the supremum with the Moser concentration level")
    sp.add_argument("--rho", type=float, nargs="+", help="Moser parameters, strictly decreasing")
    sp.add_argument("--diagnostic", action="store_true", help="also evaluate off-centre Moser profiles")

    sp = add("ratio", "F_domain / F_disk along transplanted Moser profiles")
    sp.add_argument("--map", help="conformal map as JSON (default: identity)")
    sp.add_argument("--rho", type=float, nargs="+")
    sp.add_argument("--grid", type=int)

    add("sweep", "maximise and compare over a list of parameters")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (InputError, io.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
