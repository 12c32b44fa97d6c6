"""Scenario-driven command line front end.

A scenario is a JSON object describing one system and a list of tasks:

    {
      "name": "two-state-demo",
      "Q": [[-1.0, 1.0], [2.0, -2.0]],
      "v": [1.0, 0.0],
      "N": 1,
      "V0": [...] or {"pairwise": [[...]]},     // N > 1 only
      "t_grid": [1, 2, 4, 8],
      "seed": 0,
      "tolerances": {"hk_tol": 1e-10},
      "tasks": ["validate", "spectral", {"name": "mc", "options": {"t": 50}}]
    }

Unknown keys anywhere are rejected.  `run` executes the tasks in order
and writes a single JSON report with a config echo, a section per task,
the library version, and wall-clock timings.  Exit codes: 0 success,
1 a task failed, 2 the scenario itself is invalid.  Reports are
deterministic for fixed scenario and seed, apart from the timings
section; non-finite numbers are emitted as the strings "infinity",
"-infinity", or "nan".
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, DVSemigroupError
from .generator import Generator, Potential, validate_generator
from .generator import check_condition_A, check_condition_D
from .hohenberg_kohn import (
    InversionOptions,
    ReducedOptions,
    equilibrium_marginal,
    hk_verify,
    i_hk,
    invert_potential,
)
from .multiparticle import (
    TensorSystem,
    kronecker_sum,
    pairwise_potential,
    separable_potential,
)
from .rate_function import SolverOptions, dv_sup, rate_I, rate_IV, relative_entropy
from .semigroup import check_condition_B, growth_bound, make_operator
from .spectral import (
    ground_measure_by_averaging,
    ground_measure_by_evolution,
    principal_eigen,
    total_variation,
)
from .feynman_kac import estimate_lambda

log = logging.getLogger("dvsemigroup")

SCENARIO_KEYS = {"name", "Q", "V", "v", "N", "V0", "t_grid", "seed",
                 "tolerances", "tasks"}
TASK_NAMES = ("validate", "spectral", "rate", "hk-verify", "hk-invert",
              "ihk", "mc", "averaging")


@dataclass
class Scenario:
    name: str
    raw: dict
    Q1: Generator
    v: np.ndarray
    N: int
    V0: Potential | None
    t_grid: list[float]
    seed: int
    tolerances: dict
    tasks: list[tuple[str, dict]]
    _sys: TensorSystem | None = field(default=None, repr=False)

    def system(self) -> TensorSystem:
        if self._sys is None:
            self._sys = kronecker_sum(self.Q1, self.N)
        return self._sys

    def full_potential(self) -> Potential:
        """V0 + separable(v) on the product space (just v when N = 1)."""
        sep = separable_potential(self.v, self.N)
        if self.V0 is None:
            return sep
        return Potential(self.V0.values + sep.values)

    def full_generator(self) -> Generator:
        return self.Q1 if self.N == 1 else self.system().QN


def _require(cond: bool, message: str, key: str | None = None):
    if not cond:
        raise ConfigError(message, key=key)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario is not valid JSON: {exc}") from exc

    _require(isinstance(raw, dict), "scenario must be a JSON object")
    unknown = set(raw) - SCENARIO_KEYS
    _require(not unknown, "unknown scenario keys", key=",".join(sorted(unknown)))
    _require("Q" in raw, "scenario must define a rate matrix", key="Q")

    try:
        Q1 = validate_generator(raw["Q"])
    except (DVSemigroupError, ValueError) as exc:
        raise ConfigError(f"invalid rate matrix: {exc}", key="Q") from exc

    N = raw.get("N", 1)
    _require(isinstance(N, int) and N >= 1, "N must be a positive integer", key="N")

    _require(not ("V" in raw and "v" in raw),
             "give either V or v, not both", key="V")
    vec = raw.get("v", raw.get("V"))
    if vec is None:
        v = np.zeros(Q1.dim)
    else:
        v = np.asarray(vec, dtype=float)
        _require(v.shape == (Q1.dim,),
                 f"potential must have {Q1.dim} entries", key="v" if "v" in raw else "V")
        _require(bool(np.all(np.isfinite(v))), "potential entries must be finite",
                 key="v" if "v" in raw else "V")

    V0 = None
    if "V0" in raw:
        given = raw["V0"]
        size = Q1.dim ** N
        try:
            if isinstance(given, dict):
                unknown = set(given) - {"pairwise"}
                _require(not unknown, "unknown V0 keys", key=",".join(sorted(unknown)))
                _require("pairwise" in given, "V0 object needs a pairwise matrix",
                         key="V0")
                V0 = pairwise_potential(np.asarray(given["pairwise"], dtype=float), N)
            else:
                arr = np.asarray(given, dtype=float)
                _require(arr.shape == (size,),
                         f"V0 must have {size} entries", key="V0")
                V0 = Potential(arr)
        except (DVSemigroupError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid V0: {exc}", key="V0") from exc

    t_grid = raw.get("t_grid", [])
    _require(isinstance(t_grid, list) and
             all(isinstance(x, (int, float)) and x >= 0 for x in t_grid),
             "t_grid must be a list of nonnegative numbers", key="t_grid")

    seed = raw.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer", key="seed")

    tolerances = raw.get("tolerances", {})
    _require(isinstance(tolerances, dict) and
             all(isinstance(x, (int, float)) for x in tolerances.values()),
             "tolerances must map names to numbers", key="tolerances")

    tasks = []
    for entry in raw.get("tasks", []):
        if isinstance(entry, str):
            name, options = entry, {}
        elif isinstance(entry, dict):
            unknown = set(entry) - {"name", "options"}
            _require(not unknown, "unknown task keys", key=",".join(sorted(unknown)))
            _require("name" in entry, "task object needs a name", key="tasks")
            name = entry["name"]
            options = entry.get("options", {})
            _require(isinstance(options, dict), "task options must be an object",
                     key=name)
        else:
            raise ConfigError("tasks must be names or objects", key="tasks")
        _require(name in TASK_NAMES, f"unknown task '{name}'", key="tasks")
        tasks.append((name, options))

    return Scenario(name=raw.get("name", os.path.basename(path)), raw=raw,
                    Q1=Q1, v=v, N=N, V0=V0, t_grid=[float(x) for x in t_grid],
                    seed=seed, tolerances=tolerances, tasks=tasks)


# ---------------------------------------------------------------------------
# task runners


def _opt(options: dict, allowed: dict, task: str) -> dict:
    unknown = set(options) - set(allowed)
    _require(not unknown, f"unknown options for task '{task}'",
             key=",".join(sorted(unknown)))
    merged = dict(allowed)
    merged.update(options)
    return merged


def _task_validate(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"T": 1.0}, "validate")
    return {
        "d": sc.Q1.dim,
        "N": sc.N,
        "product_states": sc.Q1.dim ** sc.N,
        "epsilon_A": check_condition_A(sc.Q1, float(opts["T"])),
        "condition_B": check_condition_B(sc.Q1, float(opts["T"])),
        "condition_D": check_condition_D(sc.Q1),
    }


def _task_spectral(sc: Scenario, options: dict) -> dict:
    _opt(options, {}, "spectral")
    gd = principal_eigen(sc.full_generator(), sc.full_potential())
    return {"lambda": gd.lam, "psi": gd.psi.tolist(),
            "pi": gd.pi.weights.tolist(), "mu": gd.mu.weights.tolist()}


def _task_rate(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"mu": None}, "rate")
    Q = sc.full_generator()
    V = sc.full_potential()
    gd = principal_eigen(Q, V)
    mu = gd.mu if opts["mu"] is None else np.asarray(opts["mu"], dtype=float)
    lam_dual, mu_star = dv_sup(Q, V, SolverOptions(seed=sc.seed))
    return {
        "I": rate_I(Q, mu).value,
        "IV": rate_IV(Q, V, mu),
        "lambda_dual": lam_dual,
        "mu_star": mu_star.weights.tolist(),
    }


def _task_averaging(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"n_grid": 1025}, "averaging")
    _require(len(sc.t_grid) > 0, "averaging needs a t_grid", key="t_grid")
    Q = sc.full_generator()
    V = sc.full_potential()
    gd = principal_eigen(Q, V)
    op = make_operator(Q, V)
    C = growth_bound(op, gd.lam, np.linspace(0.0, max(sc.t_grid), 201))
    rows = []
    for T in sc.t_grid:
        avg = ground_measure_by_averaging(Q, V, gd.mu, T, int(opts["n_grid"]))
        end = ground_measure_by_evolution(Q, V, gd.mu, T)
        rows.append({
            "T": T,
            "tv_average": total_variation(avg, gd.pi),
            "tv_evolved": total_variation(end, gd.pi),
            "entropy_average": relative_entropy(gd.mu, avg),
            "entropy_evolved": relative_entropy(gd.mu, end),
        })
    return {"log_growth_bound": float(np.log(C)), "ladder": rows}


def _hk_system(sc: Scenario) -> tuple[TensorSystem, Potential]:
    sys = sc.system()
    V0 = sc.V0 if sc.V0 is not None else Potential(np.zeros(sys.size))
    return sys, V0


def _task_hk_verify(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"v1": None, "v2": None,
                          "tol": sc.tolerances.get("hk_tol", 1e-10)}, "hk-verify")
    _require(opts["v2"] is not None, "hk-verify needs option v2", key="v2")
    sys, V0 = _hk_system(sc)
    v1 = sc.v if opts["v1"] is None else np.asarray(opts["v1"], dtype=float)
    report = hk_verify(sys, V0, v1, np.asarray(opts["v2"], dtype=float),
                       tol=float(opts["tol"]))
    return {
        "marginal_distance": report.marginal_distance,
        "potential_residual": report.potential_residual,
        "lambdas": list(report.lambdas),
        "conclusion": report.conclusion.value,
        "kappa": report.kappa,
        "inequality_margins": list(report.inequality_margins),
    }


def _task_hk_invert(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"rho_target": None, "v_star": None, "step": 0.5,
                          "tol": 1e-8, "max_iter": 500}, "hk-invert")
    sys, V0 = _hk_system(sc)
    if opts["rho_target"] is not None:
        rho_target = np.asarray(opts["rho_target"], dtype=float)
    elif opts["v_star"] is not None:
        _, _, rho = equilibrium_marginal(sys, V0, np.asarray(opts["v_star"], dtype=float))
        rho_target = rho.weights
    else:
        raise ConfigError("hk-invert needs rho_target or v_star", key="rho_target")
    result = invert_potential(sys, V0, rho_target,
                              InversionOptions(step=float(opts["step"]),
                                               tol=float(opts["tol"]),
                                               max_iter=int(opts["max_iter"])))
    return {
        "v_recovered": result.v_recovered.values.tolist(),
        "iterations": result.iterations,
        "marginal_error": result.marginal_error,
        "converged": result.converged,
    }


def _task_ihk(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"rho": None}, "ihk")
    sys, V0 = _hk_system(sc)
    if opts["rho"] is None:
        _, _, rho = equilibrium_marginal(sys, V0, sc.v)
        rho = rho.weights
    else:
        rho = np.asarray(opts["rho"], dtype=float)
    return {"rho": rho.tolist(), "I_HK": i_hk(sys, V0, rho, ReducedOptions())}


def _task_mc(sc: Scenario, options: dict) -> dict:
    opts = _opt(options, {"t": 50.0, "paths": 1000, "seed": sc.seed}, "mc")
    Q = sc.full_generator()
    V = sc.full_potential()
    estimate, stderr = estimate_lambda(Q, V, float(opts["t"]),
                                       int(opts["paths"]), int(opts["seed"]))
    return {"lambda_mc": estimate, "stderr": stderr,
            "lambda_spectral": principal_eigen(Q, V).lam,
            "t": float(opts["t"]), "paths": int(opts["paths"])}


_TASK_RUNNERS = {
    "validate": _task_validate,
    "spectral": _task_spectral,
    "rate": _task_rate,
    "averaging": _task_averaging,
    "hk-verify": _task_hk_verify,
    "hk-invert": _task_hk_invert,
    "ihk": _task_ihk,
    "mc": _task_mc,
}


# ---------------------------------------------------------------------------
# report plumbing


def sanitize(obj):
    """Make a report JSON-safe; non-finite numbers become strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isposinf(x):
            return "infinity"
        if np.isneginf(x):
            return "-infinity"
        return x
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    return obj


def run_scenario(sc: Scenario) -> tuple[dict, bool]:
    """Execute the scenario's tasks; returns (report, all_ok)."""
    report = {"name": sc.name, "version": __version__,
              "config": sc.raw, "tasks": [], "timings": {}}
    ok = True
    total0 = time.perf_counter()
    for name, options in sc.tasks:
        t0 = time.perf_counter()
        section = {"task": name}
        try:
            section["status"] = "ok"
            section["result"] = _TASK_RUNNERS[name](sc, options)
        except ConfigError:
            raise
        except (DVSemigroupError, ValueError) as exc:
            log.warning("task %s failed: %s", name, exc)
            section["status"] = "error"
            section["error"] = {"type": type(exc).__name__, "message": str(exc)}
            ok = False
        report["tasks"].append(section)
        report["timings"][name] = time.perf_counter() - t0
    report["timings"]["total"] = time.perf_counter() - total0
    return sanitize(report), ok


def write_report(report: dict, out_path: str | None):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def write_csv(report: dict, csv_dir: str):
    """Vector-valued result fields, one CSV per field."""
    os.makedirs(csv_dir, exist_ok=True)
    base = str(report.get("name", "scenario")).replace(os.sep, "_")
    for section in report.get("tasks", []):
        result = section.get("result")
        if not isinstance(result, dict):
            continue
        for key, val in result.items():
            if (isinstance(val, list) and val
                    and all(isinstance(x, (int, float)) for x in val)):
                path = os.path.join(csv_dir, f"{base}__{section['task']}__{key}.csv")
                with open(path, "w") as fh:
                    fh.writelines(f"{x}\n" for x in val)


def run(scenario_path: str, out_path: str | None = None,
        csv_dir: str | None = None) -> int:
    """Load, execute, and report one scenario; returns the exit code."""
    try:
        sc = load_scenario(scenario_path)
        report, ok = run_scenario(sc)
    except ConfigError as exc:
        log.error("config error in %s: %s", scenario_path, exc)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    write_report(report, out_path)
    if csv_dir is not None:
        write_csv(report, csv_dir)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _single_task_run(path: str, task: str, options: dict, out: str | None) -> int:
    """Emit the bare result object of one task (plus timing for hk tasks).

    Options come from the scenario's own entry for the task, overridden by
    any command-line flags.
    """
    try:
        sc = load_scenario(path)
        for name, scenario_options in sc.tasks:
            if name == task:
                options = {**scenario_options, **options}
                break
        t0 = time.perf_counter()
        try:
            result = _TASK_RUNNERS[task](sc, options)
        except (DVSemigroupError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            write_report(sanitize({"error": {"type": type(exc).__name__,
                                             "message": str(exc)}}), out)
            return 1
        if task in ("hk-verify", "hk-invert", "ihk"):
            result["timing_seconds"] = time.perf_counter() - t0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    write_report(sanitize(result), out)
    return 0


def main(argv=None) -> int:
    level = os.environ.get("DV_SEMIGROUP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")

    parser = argparse.ArgumentParser(
        prog="dvsemigroup",
        description="Schrodinger semigroup calculations on finite state spaces")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the tasks of one or more scenarios")
    p_run.add_argument("scenarios", nargs="+")
    p_run.add_argument("-o", "--out", default=None,
                       help="output file (single scenario) or directory")
    p_run.add_argument("--csv", default=None, metavar="DIR",
                       help="also emit measure-valued outputs as CSV")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="run independent scenarios concurrently")

    for name in ("spectral", "rate", "hk-verify", "hk-invert", "ihk"):
        p = sub.add_parser(name, help=f"run only the {name} task")
        p.add_argument("scenario")
        p.add_argument("-o", "--out", default=None)

    p_mc = sub.add_parser("mc", help="Monte Carlo eigenvalue estimate")
    p_mc.add_argument("scenario")
    p_mc.add_argument("-o", "--out", default=None)
    p_mc.add_argument("--t", type=float, default=50.0)
    p_mc.add_argument("--paths", type=int, default=1000)
    p_mc.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)

    if args.command == "run":
        if len(args.scenarios) == 1:
            return run(args.scenarios[0], args.out, args.csv)
        out_dir = args.out or "."
        os.makedirs(out_dir, exist_ok=True)

        def one(path):
            stem = os.path.splitext(os.path.basename(path))[0]
            return run(path, os.path.join(out_dir, f"{stem}.report.json"), args.csv)

        with concurrent.futures.ThreadPoolExecutor(max_workers=max(args.jobs, 1)) as pool:
            codes = list(pool.map(one, args.scenarios))
        return max(codes)

    if args.command == "mc":
        options = {"t": args.t, "paths": args.paths}
        if args.seed is not None:
            options["seed"] = args.seed
        return _single_task_run(args.scenario, "mc", options, args.out)

    return _single_task_run(args.scenario, args.command, {}, args.out)


if __name__ == "__main__":
    sys.exit(main())
