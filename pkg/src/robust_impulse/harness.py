"""Configuration-driven runs: load a problem, solve, evaluate, report.

Configs are TOML (primary) or JSON, naming a built-in problem plus
parameter overrides.  All randomness flows from one 64-bit seed through
named substreams ("forward" for the solver batch, "eval" for policy
evaluation, "dual" for the dual sweep), so components can be re-run
independently and reproducibly.
"""

from __future__ import annotations

import datetime
import importlib.resources
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controls import ImpulseSequence, TimeGrid
from .errors import ConfigInvalid
from .problems import ProblemSpec, make_problem, builtin_names, validate as validate_problem
from .regression import FEATURIZERS, basis_size
from .simulate import SimConfig, constant_adversary, fixed_sequence_policy, simulate_controlled
from .solver import (RobustSolution, SolverConfig, dual_check, extract_strategy,
                     intervention_count_bound, random_feasible_sequences,
                     solve_robust)
from .tree import oracle_values, solve_tree, tree_from_problem


@dataclass(frozen=True)
class RunConfig:
    problem: str
    overrides: dict = field(default_factory=dict)
    steps: int = 50
    horizon: Optional[float] = None  # None: the problem's own horizon
    paths: int = 20_000
    seed: int = 1
    antithetic: bool = True
    k_max: int = 3
    basis_degree: int = 2
    ridge: Optional[float] = None
    featurizer: str = "markov"
    f_cap: Optional[float] = None
    eps_picard: Optional[float] = None
    tol_mono: Optional[float] = None
    tol_hit: Optional[float] = None
    eval_paths: Optional[int] = None  # None: same as paths
    dual_enabled: bool = False
    dual_candidates: int = 100
    dual_budget: int = 3
    dual_paths: int = 2_000
    oracle_enabled: bool = False
    oracle_steps: int = 200
    out_dir: str = "out"
    deterministic: bool = True
    adversary_action: Optional[list] = None  # for `evaluate`; None: first action


def _get(raw: dict, section: str, key: str, default, types, positive=False):
    sec = raw.get(section, {})
    if not isinstance(sec, dict):
        raise ConfigInvalid(section, "must be a table")
    val = sec.get(key, default)
    if val is not None and not isinstance(val, types):
        raise ConfigInvalid(f"{section}.{key}",
                            f"expected {types}, got {type(val).__name__}")
    if positive and val is not None and val <= 0:
        raise ConfigInvalid(f"{section}.{key}", "must be positive")
    return val


def parse_config(raw: dict) -> RunConfig:
    """Validate a raw config mapping; raises ConfigInvalid with a dotted
    path to the offending field."""
    problem = raw.get("problem")
    if not isinstance(problem, str):
        raise ConfigInvalid("problem", "must name a built-in problem")
    if problem not in builtin_names():
        raise ConfigInvalid("problem", f"unknown problem; choose from {builtin_names()}")
    overrides = raw.get("problem_overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigInvalid("problem_overrides", "must be a table")

    cfg = RunConfig(
        problem=problem,
        overrides=overrides,
        steps=_get(raw, "grid", "steps", 50, int, positive=True),
        horizon=_get(raw, "grid", "horizon", None, (int, float), positive=True),
        paths=_get(raw, "monte_carlo", "paths", 20_000, int, positive=True),
        seed=_get(raw, "monte_carlo", "seed", 1, int),
        antithetic=_get(raw, "monte_carlo", "antithetic", True, bool),
        k_max=_get(raw, "solver", "k_max", 3, int),
        basis_degree=_get(raw, "solver", "basis_degree", 2, int),
        ridge=_get(raw, "solver", "ridge", None, (int, float)),
        featurizer=_get(raw, "solver", "featurizer", "markov", str),
        f_cap=_get(raw, "solver", "f_cap", None, (int, float), positive=True),
        eps_picard=_get(raw, "solver", "epsilon_picard", None, (int, float), positive=True),
        tol_mono=_get(raw, "solver", "tol_mono", None, (int, float), positive=True),
        tol_hit=_get(raw, "solver", "tol_hit", None, (int, float), positive=True),
        eval_paths=_get(raw, "evaluation", "paths", None, int, positive=True),
        dual_enabled=_get(raw, "dual", "enabled", False, bool),
        dual_candidates=_get(raw, "dual", "candidates", 100, int, positive=True),
        dual_budget=_get(raw, "dual", "budget", 3, int, positive=True),
        dual_paths=_get(raw, "dual", "paths", 2_000, int, positive=True),
        oracle_enabled=_get(raw, "oracle", "enabled", False, bool),
        oracle_steps=_get(raw, "oracle", "steps", 200, int, positive=True),
        out_dir=_get(raw, "outputs", "directory", "out", str),
        deterministic=_get(raw, "outputs", "deterministic", True, bool),
        adversary_action=_get(raw, "evaluation", "adversary_action", None, list),
    )
    if cfg.k_max < 0:
        raise ConfigInvalid("solver.k_max", "must be nonnegative")
    if cfg.ridge is not None and cfg.ridge < 0:
        raise ConfigInvalid("solver.ridge", "must be nonnegative")
    if cfg.featurizer not in FEATURIZERS:
        raise ConfigInvalid("solver.featurizer",
                            f"choose from {sorted(FEATURIZERS)}")
    # basis size depends on the problem dimension
    spec = build_problem(cfg)
    feat_dim = spec.dim + (1 if cfg.featurizer == "pathdep" else 0)
    B = basis_size(feat_dim, cfg.basis_degree)
    if cfg.paths < B:
        raise ConfigInvalid("monte_carlo.paths",
                            f"need at least basis size {B} paths, got {cfg.paths}")
    if cfg.antithetic and cfg.paths % 2:
        raise ConfigInvalid("monte_carlo.paths", "must be even with antithetic on")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        if path.suffix == ".json":
            raw = json.loads(path.read_text())
        else:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigInvalid(str(path), f"cannot parse config: {exc}")
    return parse_config(raw)


def build_problem(cfg: RunConfig) -> ProblemSpec:
    overrides = dict(cfg.overrides)
    if cfg.horizon is not None:
        overrides.setdefault("horizon", float(cfg.horizon))
    try:
        return make_problem(cfg.problem, **overrides)
    except TypeError as exc:
        raise ConfigInvalid("problem_overrides", str(exc))


def solver_config(cfg: RunConfig, spec: ProblemSpec) -> SolverConfig:
    grid = TimeGrid(spec.horizon, cfg.steps)
    sim = SimConfig(grid, cfg.paths, seed=cfg.seed, antithetic=cfg.antithetic,
                    stream="forward")
    return SolverConfig(sim, k_max=cfg.k_max, degree=cfg.basis_degree,
                        ridge=cfg.ridge, f_cap=cfg.f_cap,
                        eps_picard=cfg.eps_picard, tol_mono=cfg.tol_mono,
                        tol_hit=cfg.tol_hit)


def estimate_J(spec: ProblemSpec, impulse_policy, adversary_policy,
               eval_cfg: SimConfig, budget: Optional[int] = None):
    """Monte-Carlo estimate of the reward functional for a policy pair:
    rectangle-rule running reward plus terminal reward minus intervention
    costs.  Returns (mean, standard error)."""
    _, trace = simulate_controlled(spec, impulse_policy, adversary_policy,
                                   eval_cfg, budget=budget)
    return trace.j_mean, trace.j_se


def _report_schema() -> dict:
    text = (importlib.resources.files("robust_impulse") / "report.schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, _report_schema())


def run(cfg: RunConfig, out_dir=None):
    """Execute a full run; returns (report dict, solution, trace) and
    writes report.json / levels.csv / strategy.csv / oracle.csv."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = build_problem(cfg)
    scfg = solver_config(cfg, spec)
    feat = FEATURIZERS[cfg.featurizer](spec.dim)
    sol = solve_robust(spec, scfg, feat)

    eval_cfg = SimConfig(scfg.sim.grid, cfg.eval_paths or cfg.paths,
                         seed=cfg.seed, antithetic=cfg.antithetic,
                         stream="eval")
    trace = extract_strategy(sol, eval_cfg)

    dual_report = None
    if cfg.dual_enabled:
        candidates = random_feasible_sequences(spec, cfg.dual_candidates,
                                               cfg.dual_budget, cfg.seed)
        dual_cfg = SimConfig(scfg.sim.grid, cfg.dual_paths, seed=cfg.seed,
                             antithetic=cfg.antithetic, stream="dual")
        dual_report = dual_check(sol, candidates, dual_cfg)

    oracle_rows = None
    if cfg.oracle_enabled and spec.markov is not None:
        tree = tree_from_problem(spec, cfg.oracle_steps, sol.k_used)
        oracle_rows = oracle_values(solve_tree(tree))

    report = {
        "problem": spec.name,
        "featurizer": feat.name,
        "y0": sol.y0,
        "se": sol.y0_se,
        "k_used": sol.k_used,
        "levels": [
            {
                "k": lv.k,
                "y0": lv.y0,
                "se": lv.y0_se,
                "sup_increment": None if np.isnan(lv.sup_increment) else lv.sup_increment,
                "mean_increment": None if np.isnan(lv.mean_increment) else lv.mean_increment,
                "binding_fraction_mean": float(np.mean(lv.binding_fraction)),
            }
            for lv in sol.levels
        ],
        "e_n_star": float(np.mean(trace.n_impulses)),
        "e_n_star_bound": intervention_count_bound(sol),
        "j_hat": trace.j_mean,
        "j_hat_se": trace.j_se,
        "dual_gap": dual_report.gap if dual_report is not None else None,
        "dual": (
            {
                "n_candidates": len(dual_report.entries),
                "max_j": dual_report.max_j,
                "violations": len(dual_report.violations),
            }
            if dual_report is not None else None
        ),
        "oracle": (
            [{"budget": r, "value": v} for r, v in oracle_rows]
            if oracle_rows is not None else None
        ),
        "config": _config_echo(cfg),
    }
    if not cfg.deterministic:
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    validate_report(report)

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    with open(out / "levels.csv", "w") as fh:
        fh.write("k,y0,se,sup_increment\n")
        for lv in sol.levels:
            sup = "" if np.isnan(lv.sup_increment) else repr(lv.sup_increment)
            fh.write(f"{lv.k},{lv.y0!r},{lv.y0_se!r},{sup}\n")
    with open(out / "strategy.csv", "w") as fh:
        fh.write("path_id,n_impulses,first_impulse_step,total_cost,reward\n")
        for p in range(len(trace.impulse_steps)):
            steps = trace.impulse_steps[p]
            first = steps[0] if steps else ""
            fh.write(f"{p},{len(steps)},{first},{trace.total_cost[p]!r},"
                     f"{trace.j_values[p]!r}\n")
    if oracle_rows is not None:
        with open(out / "oracle.csv", "w") as fh:
            fh.write("budget,value\n")
            for r, v in oracle_rows:
                fh.write(f"{r},{v!r}\n")
    return report, sol, trace


def _config_echo(cfg: RunConfig) -> dict:
    echo = asdict(cfg)
    echo["overrides"] = {k: v for k, v in cfg.overrides.items()}
    return echo


def run_oracle(cfg: RunConfig):
    """Tree oracle values V(0, x0, r) for r = 0..k_max."""
    spec = build_problem(cfg)
    if spec.markov is None:
        raise ConfigInvalid("problem", "no Markovian restriction; the tree "
                            "oracle needs one")
    tree = tree_from_problem(spec, cfg.oracle_steps, cfg.k_max)
    return oracle_values(solve_tree(tree))


def run_evaluate(cfg: RunConfig, strategy_path):
    """Evaluate a fixed impulse sequence from a JSON strategy file against
    a constant adversary action (config [evaluation].adversary_action,
    default the first action of the grid)."""
    spec = build_problem(cfg)
    seq = ImpulseSequence.from_json(Path(strategy_path).read_text())
    grid = TimeGrid(spec.horizon, cfg.steps)
    eval_cfg = SimConfig(grid, cfg.eval_paths or cfg.paths, seed=cfg.seed,
                         antithetic=cfg.antithetic, stream="eval")
    action = (cfg.adversary_action if cfg.adversary_action is not None
              else spec.action_set[0])
    policy = fixed_sequence_policy(seq, grid)
    mean, se = estimate_J(spec, policy, constant_adversary(action), eval_cfg,
                          budget=len(seq))
    return {"j_mean": mean, "j_se": se, "n_impulses": len(seq)}


def run_validate(cfg: RunConfig, n_probe: int = 10_000):
    spec = build_problem(cfg)
    return validate_problem(spec, n_probe=n_probe, seed=cfg.seed)
