"""Command-line front end.

Every command reads a JSON config (``schema_version`` 1) whose keys mirror
the dataclass fields of the engines, and writes CSV or JSON to ``--out`` or
stdout.  Exit status: 0 ok, 1 bad config, 2 model error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np

from . import __version__
from . import branching, equilibrium, reliability, selection
from .branching import INFINITE, BranchingSpec, make_pmf
from .equilibrium import Barrier, CultureMap, GameConfig, ShockSpec, SmoothBarrier
from .errors import ModelError
from .montecarlo import SimConfig, estimate_reliability

COMMANDS = ("rho", "rho-curve", "critical", "simulate", "equilibrium", "fragility", "envelope", "leadership")
SCHEMA_VERSION = 1
SIG_DIGITS = 12

TOLERANCES = {
    "pmf_mass": branching.MASS_TOL,
    "gen_fn_inverse": branching.INVERSE_TOL,
    "fixed_point": reliability.FIXED_POINT_TOL,
    "fixed_point_max_iter": reliability.MAX_ITER,
    "zero_floor": reliability.ZERO_FLOOR,
    "scan_points": reliability.SCAN_POINTS,
    "golden_section": reliability.GOLDEN_TOL,
    "slope_cap": reliability.SLOPE_CAP,
    "root_bisection": equilibrium.ROOT_TOL,
    "deviation_points": equilibrium.DEVIATION_POINTS,
    "threshold": selection.THRESHOLD_TOL,
}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: str
    output: Optional[str] = None  # None means stdout
    format: str = "json"
    seed: Optional[int] = None
    grid: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: expected csv or json, got {self.format!r}")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)


# ------------------------------------------------------------------ parsing


def _get(d: dict, key: str, path: str, kind=None, default: Any = ...):
    where = f"{path}.{key}" if path else key
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}: missing required key")
        return default
    val = d[key]
    if kind is not None:
        ok = isinstance(val, kind) and not (isinstance(val, bool) and bool not in _as_tuple(kind))
        if not ok:
            raise ConfigError(f"{where}: expected {_kind_name(kind)}, got {type(val).__name__}")
    return val


def _as_tuple(kind):
    return kind if isinstance(kind, tuple) else (kind,)


def _kind_name(kind) -> str:
    return " or ".join(k.__name__ for k in _as_tuple(kind))


NUM = (int, float)


def parse_pmf(d: dict, path: str):
    support = _get(d, "support", path, list)
    probs = _get(d, "probs", path, list)
    for j, v in enumerate(support):
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"{path}.support[{j}]: expected int")
    for j, v in enumerate(probs):
        if not isinstance(v, NUM) or isinstance(v, bool):
            raise ConfigError(f"{path}.probs[{j}]: expected number")
    return make_pmf(support, probs)


def parse_depth(val, path: str):
    if val == "infinite":
        return INFINITE
    if isinstance(val, int) and not isinstance(val, bool):
        return val
    raise ConfigError(f"{path}: expected a positive integer or \"infinite\"")


def parse_spec(d: dict, path: str = "spec") -> BranchingSpec:
    p = parse_pmf(_get(d, "p", path, dict), f"{path}.p")
    q = parse_pmf(_get(d, "q", path, dict), f"{path}.q")
    depth = parse_depth(_get(d, "depth", path, default="infinite"), f"{path}.depth")
    return BranchingSpec(p, q, depth)


def parse_grid(val, path: str = "grid") -> np.ndarray:
    if isinstance(val, str):
        parts = val.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{path}: expected start:step:end")
        try:
            start, step, end = (float(x) for x in parts)
        except ValueError:
            raise ConfigError(f"{path}: non-numeric entry in {val!r}") from None
    elif isinstance(val, dict):
        start = float(_get(val, "start", path, NUM))
        step = float(_get(val, "step", path, NUM))
        end = float(_get(val, "end", path, NUM))
    elif isinstance(val, list):
        return np.asarray([float(v) for v in val])
    else:
        raise ConfigError(f"{path}: expected start:step:end string, object or list")
    if not step > 0 or end < start:
        raise ConfigError(f"{path}: need step > 0 and end >= start")
    n = int(round((end - start) / step)) + 1
    return np.round(start + step * np.arange(n), 12)


def parse_cost(d: dict, path: str = "game.cost"):
    family = _get(d, "family", path, str)
    alpha = float(_get(d, "alpha", path, NUM))
    if family == "barrier":
        return Barrier(alpha)
    if family == "smooth_barrier":
        return SmoothBarrier(alpha, float(_get(d, "gamma", path, NUM, 2.0)))
    raise ConfigError(f"{path}.family: expected barrier or smooth_barrier, got {family!r}")


def parse_shocks(d, path: str = "game.shocks") -> Optional[ShockSpec]:
    if d is None:
        return None
    return ShockSpec(
        float(_get(d, "psi", path, NUM)),
        float(_get(d, "s_lo", path, NUM)),
        float(_get(d, "s_hi", path, NUM)),
        int(_get(d, "quadrature_nodes", path, int, 64)),
    )


def parse_game(d: dict, spec: BranchingSpec, path: str = "game", k_override: Optional[int] = None) -> GameConfig:
    cd = _get(d, "culture", path, dict)
    cpath = f"{path}.culture"
    baseline = float(_get(cd, "baseline", cpath, NUM))
    beta = float(_get(cd, "beta", cpath, NUM, 1.0))
    if k_override is not None:
        weights = [1.0 / k_override] * k_override
    elif "weights" in cd:
        weights = [float(w) for w in _get(cd, "weights", cpath, list)]
    else:
        k = _get(cd, "k", cpath, int)
        weights = [1.0 / k] * k
    culture = CultureMap(baseline, tuple(weights), beta)
    benefits = _get(d, "benefits", path, (list, int, float))
    if not isinstance(benefits, list):
        benefits = [benefits] * culture.k
    cost = parse_cost(_get(d, "cost", path, dict), f"{path}.cost")
    shocks = parse_shocks(_get(d, "shocks", path, dict, None), f"{path}.shocks")
    return GameConfig(spec, culture, cost, tuple(float(a) for a in benefits), shocks)


def load_config(path: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    version = _get(cfg, "schema_version", "", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version}")
    return cfg


# ------------------------------------------------------------------ output


def fmt(x: float) -> str:
    return format(float(x), f".{SIG_DIGITS}g")


def _round(obj):
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def to_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(payload: dict, run: RunConfig, cfg: dict, seed: Optional[int]) -> str:
    meta = {
        "tool": "orgfragility",
        "version": __version__,
        "seed": seed,
        "tolerances": TOLERANCES,
        "run_config": run.to_dict(),
        "config": cfg,
    }
    return json.dumps({"metadata": _round(meta), **_round(payload)}, indent=2) + "\n"


# ------------------------------------------------------------------ commands


def _depth_label(depth) -> Any:
    return "infinite" if depth == INFINITE else int(depth)


def cmd_rho(cfg, run):
    spec = parse_spec(_get(cfg, "spec", "", dict))
    pi = float(_get(cfg, "pi", "", NUM))
    rho = float(reliability.rho_value(spec, reliability._check_pi(pi)))
    slope = reliability.rho_derivative(spec, pi)
    payload = {"pi": pi, "rho": rho, "depth": _depth_label(spec.depth), "slope": slope.value, "slope_flag": slope.flag}
    disc = spec.is_infinite and any(abs(cp.pi - pi) < 1e-12 for cp in reliability.find_discontinuities(spec))
    return payload, (["pi", "rho", "is_discontinuity"], [(pi, rho, disc)])


def cmd_rho_curve(cfg, run):
    spec = parse_spec(_get(cfg, "spec", "", dict))
    grid = parse_grid(run.grid) if run.grid else parse_grid(_get(cfg, "grid", "", (str, dict, list)))
    depths = _get(cfg, "depths", "", list, None)
    depths = [spec.depth] if depths is None else [parse_depth(v, f"depths[{j}]") for j, v in enumerate(depths)]
    curves, rows = [], []
    for depth in depths:
        curve = reliability.sample_curve(spec, grid, depth)
        flags = curve.discontinuity_flags()
        curves.append(
            {
                "depth": _depth_label(depth),
                "pi": list(curve.pis),
                "rho": list(curve.rhos),
                "is_discontinuity": flags,
                "discontinuities": [{"pi": cp.pi, "r": cp.r} for cp in curve.discontinuities],
            }
        )
        for p, r, f in zip(curve.pis, curve.rhos, flags):
            rows.append((p, r, f) if len(depths) == 1 else (_depth_label(depth), p, r, f))
    header = ["pi", "rho", "is_discontinuity"] if len(depths) == 1 else ["depth", "pi", "rho", "is_discontinuity"]
    return {"curves": curves}, (header, rows)


def cmd_critical(cfg, run):
    spec = parse_spec(_get(cfg, "spec", "", dict))
    resolution = int(_get(cfg, "resolution", "", int, reliability.SCAN_POINTS))
    crit = reliability.find_discontinuities(spec, resolution)
    return {"critical_points": [{"pi": c.pi, "r": c.r} for c in crit]}, (["pi", "r"], [(c.pi, c.r) for c in crit])


def _seed(cfg, run) -> int:
    if run.seed is not None:
        return run.seed
    return int(_get(cfg, "seed", "", int, 0))


def cmd_simulate(cfg, run):
    spec = parse_spec(_get(cfg, "spec", "", dict))
    pi = float(_get(cfg, "pi", "", NUM))
    trials = _get(cfg, "trials", "", int)
    workers = _get(cfg, "workers", "", int, 1)
    res = estimate_reliability(SimConfig(spec, pi, trials, _seed(cfg, run)), workers)
    analytic = None if spec.is_infinite else reliability.rho_finite(spec, pi, spec.depth)
    payload = {
        "result": asdict(res),
        "rho_finite": analytic,
        "std_error_method": "normal approximation sqrt(p(1-p)/n)",
        "spec": spec.to_dict(),
        "pi": pi,
    }
    header = ["successes", "trials", "estimate", "std_error", "seed", "rho_finite"]
    return payload, (header, [(res.successes, res.trials, res.estimate, res.std_error, res.seed, analytic)])


def _solve(cfg, spec: BranchingSpec, game_d: dict):
    """List of (depth, game, results, selected) for each requested depth."""
    solver = _get(cfg, "solver", "", str, "symmetric" if not spec.is_infinite else "heterogeneous")
    if solver not in ("symmetric", "heterogeneous"):
        raise ConfigError(f"solver: expected symmetric or heterogeneous, got {solver!r}")
    depths = _get(cfg, "depths", "", list, None)
    out = []
    if depths is None:
        game = parse_game(game_d, spec)
        targets = [(spec.depth, game)]
    else:
        # one worker per layer, as in the finite-tree example
        targets = []
        for j, v in enumerate(depths):
            d = parse_depth(v, f"depths[{j}]")
            if d == INFINITE:
                raise ConfigError(f"depths[{j}]: per-depth games need finite depths")
            targets.append((d, parse_game(game_d, spec.with_depth(d), k_override=d)))
    for depth, game in targets:
        if solver == "symmetric":
            results = equilibrium.solve_symmetric_equilibrium(game)
            chosen = equilibrium.selected_equilibrium(results)
        else:
            chosen = equilibrium.solve_heterogeneous_equilibrium(game)
            results = [] if chosen is None else [chosen]
        out.append((depth, game, results, chosen))
    return out


def cmd_equilibrium(cfg, run):
    spec = parse_spec(_get(cfg, "spec", "", dict))
    game_d = _get(cfg, "game", "", dict)
    solved = _solve(cfg, spec, game_d)
    payload = {"equilibria": []}
    rows = []
    for depth, game, results, chosen in solved:
        payload["equilibria"].append(
            {
                "depth": _depth_label(depth),
                "k": game.k,
                "results": [r.to_dict() for r in results],
                "selected": None if chosen is None else chosen.to_dict(),
                "zero_equilibrium": equilibrium.check_zero_equilibrium(game),
            }
        )
        for r in results:
            rows.append(
                (_depth_label(depth), r.kind, float(np.mean(r.x_star)), r.pi_star, r.rho_star, r.stable, r.selected)
            )
    header = ["depth", "kind", "x_mean", "pi_star", "rho_star", "stable", "selected"]
    return payload, (header, rows)


def cmd_fragility(cfg, run):
    spec = parse_spec(_get(cfg, "spec", "", dict))
    game_d = _get(cfg, "game", "", dict)
    shocks = parse_grid(_get(cfg, "shock_grid", "", (str, dict, list)), "shock_grid")
    if run.grid:
        shocks = parse_grid(run.grid)
    eps = float(_get(cfg, "epsilon", "", NUM, 0.0))
    (depth, game, _, chosen), *_ = _solve(cfg, spec, game_d)
    if chosen is None:
        raise ModelError("no equilibrium to assess")
    report = equilibrium.assess_fragility(game, chosen, shocks)
    payload = {
        "equilibrium": chosen.to_dict(),
        "rho_star": report.rho_star,
        "shocks": list(report.shocks),
        "rho_after_shock": list(report.rho_after),
        "epsilon": eps,
        "epsilon_fragile": report.epsilon_fragile(eps),
        "nearest_jump": None if report.nearest_jump is None else asdict(report.nearest_jump),
        "gamma_gap": report.gamma_gap,
    }
    return payload, (["s", "rho_after_shock"], report.to_rows())


def parse_menu(cfg) -> selection.ProjectMenu:
    md = _get(cfg, "menu", "", dict)
    simple = parse_spec(_get(md, "simple_spec", "menu", dict), "menu.simple_spec")
    complex_ = parse_spec(_get(md, "complex_spec", "menu", dict), "menu.complex_spec")
    game = parse_game(_get(cfg, "game", "", dict), complex_)
    return selection.ProjectMenu(
        simple,
        complex_,
        float(_get(md, "v_simple", "menu", NUM)),
        float(_get(md, "v_complex", "menu", NUM)),
        game,
        bool(_get(md, "net_of_costs", "menu", bool, False)),
    )


def cmd_envelope(cfg, run):
    menu = parse_menu(cfg)
    grid = parse_grid(run.grid) if run.grid else parse_grid(_get(cfg, "grid", "", (str, dict, list)))
    rep = selection.compute_envelope(menu, grid)
    th = rep.thresholds
    payload = {
        "thresholds": {"pi1": th.pi1, "pi2": th.pi2, "pi3": th.pi3, "ordered": th.ordered},
        "values_ordered": menu.values_ordered,
        "baseline_pi": list(rep.baseline_grid),
        "output_panel_a": list(rep.output_no_invest),
        "output_panel_b": list(rep.output_equilibrium),
        "chosen_project": list(rep.chosen_project),
        "eq_culture": list(rep.eq_culture),
    }
    header = ["baseline_pi", "output_panel_a", "output_panel_b", "chosen_project", "eq_culture"]
    return payload, (header, rep.rows())


def cmd_leadership(cfg, run):
    options = _get(cfg, "options", "", dict)
    for label, v in options.items():
        if not isinstance(v, NUM) or isinstance(v, bool):
            raise ConfigError(f"options.{label}: expected number")
    chosen = selection.choose_culture({k: float(v) for k, v in options.items()})
    rows = [(label, float(v), label == chosen) for label, v in sorted(options.items())]
    return {"options": options, "chosen": chosen}, (["label", "baseline_pi", "chosen"], rows)


HANDLERS = {
    "rho": cmd_rho,
    "rho-curve": cmd_rho_curve,
    "critical": cmd_critical,
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "fragility": cmd_fragility,
    "envelope": cmd_envelope,
    "leadership": cmd_leadership,
}


def render(run: RunConfig) -> str:
    cfg = load_config(run.config_path)
    payload, (header, rows) = HANDLERS[run.command](cfg, run)
    if run.format == "csv":
        return to_csv(header, rows)
    seed = _seed(cfg, run) if run.command == "simulate" else run.seed
    return to_json(payload, run, cfg, seed)


def run(config: RunConfig, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        text = render(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 1
    except ModelError as exc:
        print(f"model error: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=stderr)
        return 3
    try:
        if config.output is None:
            stdout.write(text)
        else:
            with open(config.output, "w") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"i/o error: {exc}", file=stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orgfragility", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="json")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--grid", default=None, help="start:step:end, overrides the config grid")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = RunConfig(args.command, args.config, args.out, args.format, args.seed, args.grid)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run(rc)


if __name__ == "__main__":
    sys.exit(main())
