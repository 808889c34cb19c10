"""Command-line front end: simulate data, run any method, merge reports.

Three subcommands, each driven by a JSON config with a ``schema_version``
field:

``simulate``
    Generate exact trajectories or observations and write them in the
    package's CSV formats.
``identify``
    Run one method (or a gamma sweep of it) on data files and write a
    RunRecord JSON: config echo, estimates, iteration histories, library
    version, seed, wall clock.  Records are deterministic for a given
    config and seed except for the wall-clock field.
``report``
    Merge RunRecord files into a plot-ready CSV sorted by gamma.

Exit codes: 0 success, 2 input error, 3 solver hit max_iters (the record
is still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from multiprocessing import Pool

import numpy as np

from . import __version__, altmin, asymptotics, fullobs, partialobs
from ._validation import RankDeficientError
from .model import HyperParams, ObservedData, Trajectory, simulate_full, simulate_observed
from .realization import minimal_realization, silverman_order
from .serialize import (
    read_impulse_json,
    read_observed_csv,
    read_trajectory_csv,
    write_observed_csv,
    write_trajectory_csv,
)
from .smoother import smoother_solve

SCHEMA_VERSION = 1

FULL_OBS_METHODS = ("ls", "ridge", "dual", "gd", "neumann")
PARTIAL_OBS_METHODS = ("lift", "pgd", "altmin", "dualstep")
IMPULSE_METHODS = ("realize", "silverman")
METHODS = FULL_OBS_METHODS + PARTIAL_OBS_METHODS + IMPULSE_METHODS + ("asymptotics",)


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 2."""


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version {version!r} not supported (expected {SCHEMA_VERSION})"
        )
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing '{key}'")
    return cfg[key]


def _matrix(cfg: dict, key: str) -> np.ndarray:
    value = np.asarray(_require(cfg, key), dtype=float)
    if value.ndim != 2:
        raise ConfigError(f"config field '{key}' must be a matrix (list of rows)")
    return value


def _vector(cfg: dict, key: str) -> np.ndarray:
    value = np.asarray(_require(cfg, key), dtype=float)
    if value.ndim != 1:
        raise ConfigError(f"config field '{key}' must be a flat list")
    return value


def _opts_from(cfg: dict, seed) -> HyperParams:
    try:
        return HyperParams(
            gamma=float(cfg.get("gamma", 1.0)),
            mu=float(cfg.get("mu", 1.0)),
            rho=float(cfg.get("rho", 0.0)),
            max_iters=int(cfg.get("max_iters", 1000)),
            grad_tol=float(cfg.get("grad_tol", 1e-8)),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def cmd_simulate(cfg: dict, out: str) -> int:
    A = _matrix(cfg, "A")
    x = _vector(cfg, "x")
    T = int(_require(cfg, "T"))
    if "C" in cfg:
        C = _matrix(cfg, "C")
        data = simulate_observed(A, C, x, T)
        write_observed_csv(data, out, cfg.get("sidecar", out + ".json"))
    else:
        write_trajectory_csv(simulate_full(A, x, T), out)
    return 0


def _ledger_dicts(ledger) -> list:
    return [dataclasses.asdict(entry) for entry in ledger]


def _report_fields(report) -> dict:
    return {
        "objectives": list(report.objectives),
        "grad_norms": list(report.grad_norms),
        "converged": report.converged,
        "reason": report.reason,
        "n_iters": report.n_iters,
    }


def _run_method(method: str, data, opts: HyperParams, cfg: dict) -> dict:
    """One solve; returns a JSON-ready result dict with a 'converged' key."""
    gamma, mu = opts.gamma, opts.mu
    if method == "ls":
        return {"estimate": fullobs.least_squares(data).tolist(), "converged": True}
    if method == "ridge":
        return {"estimate": fullobs.ridge(data, gamma).tolist(), "converged": True}
    if method == "dual":
        sol = fullobs.dual_solve(data, gamma)
        return {
            "estimate": sol.transition.tolist(),
            "coefficients": sol.coefficients.tolist(),
            "dual_value": sol.dual_value,
            "converged": True,
        }
    if method == "gd":
        A, report = fullobs.gradient_descent(data, gamma, opts)
        return {"estimate": A.tolist(), **_report_fields(report)}
    if method == "neumann":
        order = int(cfg.get("order", 1))
        return {
            "estimate": fullobs.neumann_expansion(data, gamma, order).tolist(),
            "order": order,
            "converged": True,
        }
    if method == "lift":
        return {
            "estimate": partialobs.lift_estimator(data, gamma).tolist(),
            "converged": True,
        }
    if method == "pgd":
        Z, report = partialobs.gradient_descent(
            data, gamma, mu, opts, step_mode=cfg.get("step_mode", "armijo")
        )
        return {
            "estimate": Z.A.tolist(),
            "controls": Z.v.tolist(),
            **_report_fields(report),
        }
    if method == "altmin":
        result = altmin.alternate(data, gamma, mu, opts.rho, opts)
        return {
            "estimate": result.transition.tolist(),
            "states": result.states.tolist(),
            "descent_ledger": _ledger_dicts(result.ledger),
            **_report_fields(result.report),
        }
    if method == "dualstep":
        A0 = (
            np.asarray(cfg["A0"], dtype=float)
            if "A0" in cfg
            else np.zeros((data.n, data.n))
        )
        stepped = altmin.dual_control_step(A0, data, gamma, mu)
        states, adjoints, _ = smoother_solve(A0, data, gamma, mu)
        resid = partialobs.stationarity_residual(A0, states, adjoints, data, gamma, mu)
        return {
            "estimate": stepped.tolist(),
            "start": A0.tolist(),
            "start_residual": resid,
            "converged": True,
        }
    if method == "realize":
        order = int(_require(cfg, "order"))
        sys_hat = minimal_realization(data, order, rank_tol=cfg.get("rank_tol", 1e-10))
        return {
            "estimate": sys_hat.A.tolist(),
            "input_map": sys_hat.B.tolist(),
            "output_map": sys_hat.C.tolist(),
            "converged": True,
        }
    if method == "silverman":
        found = silverman_order(
            data,
            max_depth=int(cfg.get("max_depth", 8)),
            rank_tol=float(cfg.get("rank_tol", 1e-10)),
            j_max=int(cfg.get("j_max", 3)),
        )
        return {
            "order": found.order,
            "stabilized": found.stabilized,
            "ranks": list(found.ranks),
            "converged": True,
        }
    raise ConfigError(f"unknown method '{method}'")


def _sweep_worker(payload) -> dict:
    """Rebuild the data object and run one grid point (used by --jobs)."""
    method, kind, raw, opts_dict, cfg, gamma = payload
    if kind == "trajectory":
        data = Trajectory(np.asarray(raw))
    else:
        data = ObservedData(
            x=np.asarray(raw[0]), C=np.asarray(raw[1]), observations=np.asarray(raw[2])
        )
    opts = HyperParams(**{**opts_dict, "gamma": gamma})
    result = _run_method(method, data, opts, cfg)
    result["gamma"] = gamma
    return result


def cmd_identify(cfg: dict, out: str, seed, jobs: int) -> int:
    method = str(_require(cfg, "method"))
    if method == "simulate":
        raise ConfigError("method 'simulate' runs through the simulate subcommand")
    if method not in METHODS:
        raise ConfigError(
            f"unknown method '{method}' (choose from {', '.join(METHODS)})"
        )
    if seed is None:
        seed = cfg.get("seed")
    opts = _opts_from(cfg, seed)

    started = time.perf_counter()
    record = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "method": method,
        "library_version": __version__,
        "seed": seed,
    }

    if method == "asymptotics":
        Abar = _matrix(cfg, "Abar")
        C = _matrix(cfg, "C")
        x = _vector(cfg, "x")
        T = int(_require(cfg, "T"))
        grid = _require(cfg, "gamma_grid")
        sweep_opts = (
            HyperParams(
                max_iters=int(cfg["max_iters"]),
                grad_tol=float(cfg.get("grad_tol", 1e-11)),
                seed=seed,
            )
            if "max_iters" in cfg
            else None
        )
        diag = asymptotics.expansion_validation(Abar, C, x, T, grid, opts=sweep_opts)
        record["diagnostics"] = diag.as_dict()
        converged = all(r.converged for r in diag.records)
    else:
        if method in FULL_OBS_METHODS:
            data = read_trajectory_csv(_require(cfg, "data"))
            kind, raw = "trajectory", data.states.tolist()
        elif method in PARTIAL_OBS_METHODS:
            csv_path = _require(cfg, "data")
            data = read_observed_csv(csv_path, cfg.get("sidecar", csv_path + ".json"))
            kind, raw = "observed", (
                data.x.tolist(),
                data.C.tolist(),
                data.observations.tolist(),
            )
        else:
            data = read_impulse_json(_require(cfg, "data"))
            kind, raw = "impulse", None

        grid = cfg.get("gamma_grid")
        if grid is not None and method in FULL_OBS_METHODS + PARTIAL_OBS_METHODS:
            opts_dict = {
                "gamma": opts.gamma,
                "mu": opts.mu,
                "rho": opts.rho,
                "max_iters": opts.max_iters,
                "grad_tol": opts.grad_tol,
                "seed": opts.seed,
            }
            payloads = [
                (method, kind, raw, opts_dict, cfg, float(g)) for g in grid
            ]
            if jobs > 1:
                with Pool(jobs) as pool:
                    sweep = pool.map(_sweep_worker, payloads)
            else:
                sweep = [_sweep_worker(p) for p in payloads]
            record["sweep"] = sweep
            converged = all(entry["converged"] for entry in sweep)
        else:
            result = _run_method(method, data, opts, cfg)
            record.update(result)
            converged = bool(result["converged"])

    record["wall_clock_seconds"] = time.perf_counter() - started
    with open(out, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if converged else 3


def _table_rows(record: dict) -> list:
    cfg = record.get("config", {})
    base = {
        "method": record.get("method", ""),
        "mu": cfg.get("mu", ""),
        "rho": cfg.get("rho", ""),
    }
    rows = []
    if "sweep" in record:
        for entry in record["sweep"]:
            rows.append(
                {
                    **base,
                    "gamma": entry.get("gamma", ""),
                    "estimate": entry.get("estimate"),
                    "iterations": entry.get("n_iters", ""),
                    "residual": (entry.get("grad_norms") or [""])[-1],
                }
            )
    else:
        rows.append(
            {
                **base,
                "gamma": cfg.get("gamma", ""),
                "estimate": record.get("estimate"),
                "iterations": record.get("n_iters", ""),
                "residual": (record.get("grad_norms") or [""])[-1],
            }
        )
    return rows


def cmd_report(cfg: dict, out: str) -> int:
    import csv

    paths = _require(cfg, "records")
    if not isinstance(paths, list) or not paths:
        raise ConfigError("'records' must be a non-empty list of RunRecord paths")
    truth = np.asarray(cfg["ground_truth"], dtype=float) if "ground_truth" in cfg else None

    rows = []
    for path in paths:
        try:
            with open(path) as fh:
                record = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"record file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}")
        if record.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(
                f"{path}: schema_version {record.get('schema_version')!r} does not match {SCHEMA_VERSION}"
            )
        rows.extend(_table_rows(record))

    for row in rows:
        estimate = row.pop("estimate")
        if truth is not None and estimate is not None:
            row["error"] = float(np.linalg.norm(np.asarray(estimate) - truth))
        else:
            row["error"] = ""
        row["estimate"] = json.dumps(estimate) if estimate is not None else ""

    def sort_key(row):
        g = row["gamma"]
        return (0, float(g)) if g != "" else (1, 0.0)

    rows.sort(key=sort_key)
    fields = ["method", "gamma", "mu", "rho", "error", "iterations", "residual", "estimate"]
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="linsysid",
        description="Identify linear system dynamics from trajectories or observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "generate exact trajectories or observations"),
        ("identify", "run one identification method from a JSON config"),
        ("report", "merge RunRecord files into a CSV table"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "identify":
            return cmd_identify(cfg, args.out, args.seed, max(1, args.jobs))
        return cmd_report(cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RankDeficientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
