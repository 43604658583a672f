"""Experiment drivers shared by the CLI and the acceptance checks.

Every driver takes a plain dict (the merged experiment config), writes its
artifacts under ``out`` when given, and returns a summary dict.
"""

from __future__ import annotations

import copy
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (SimulationConfig, SpongeSpec, evolve, gaussian_input, minimal_half_separation,
                       perturbed_soliton, soliton_pair, track_pair, write_run)
from .errors import BracketError, DomainError
from .model import ComplexField, Grid, ModelParams, fmt
from .stability import (assemble_linearization, classify_stability, spectrum, vk_slope,
                        write_mode_csv, write_spectrum_csv)
from .stationary import (continue_branch, cutoff_summary, find_cutoff, soliton_on_grid,
                         verify_universal_constants, write_branch_csv, write_cutoff_json)
from .variational import va_curve, write_va_csv

SIM_KEYS = ("xi_max", "dt", "dt_factor", "dt_safety", "snapshot_stride", "observable_stride",
            "collapse_amp_factor", "collapse_width_cells", "collapse_intensity_fraction", "cubic")

DEFAULTS = {
    "branch": {"beta": 1.0, "gamma": 1.0, "k_min": 0.02, "k_max": 0.6, "k_step": 0.01, "dx": 0.02,
               "half_width": None, "tol": 1e-10, "va_variant": "difference", "plots": False},
    "constants": {"sums": [1.0, 2.0, 4.0], "dx": 0.02, "half_width": 24.0, "fine_ds": 0.002,
                  "plots": False},
    "spectrum": {"beta": 1.0, "gamma": 1.0, "k_min": 0.3, "k_max": 0.4, "k_step": 0.01, "dx": 0.02,
                 "half_width": None, "form": "derived", "write_modes": 0, "plots": False},
    "evolve": {"beta": 1.0, "gamma": 1.0, "k": 0.3, "input": "soliton", "perturbation": None,
               "half_width": 30.0, "dx": 0.05, "xi_max": 100.0, "dt": None, "dt_factor": 0.05,
               "dt_safety": 0.1, "snapshot_stride": None, "observable_stride": 1, "sponge": False,
               "collapse_amp_factor": 10.0, "collapse_width_cells": 4,
               "collapse_intensity_fraction": 0.99, "cubic": True, "plots": False},
    "interact": {"k": 1.0, "half_separation": 5.3, "half_width": 45.0, "soliton_half_width": 40.0,
                 "dx": 0.1, "dt": None, "dt_factor": 0.1, "dt_safety": 0.1, "snapshot_stride": None,
                 "observable_stride": 50, "sponge": True, "collapse_amp_factor": 10.0,
                 "collapse_width_cells": 4, "collapse_intensity_fraction": 0.99, "cubic": True,
                 "ordering_xi": 300.0, "xi_max": 500.0,
                 "runs": [{"beta": 0.0, "gamma": 0.0, "phase": "in-phase"}], "plots": False},
    "va": {"beta": 1.0, "gamma": 1.0, "k_min": 0.02, "k_max": 0.6, "k_step": 0.01,
           "variant": "difference", "plots": False},
}


def workers() -> int:
    """Worker-pool size: NLSD_THREADS if set, otherwise the CPU count."""
    env = os.environ.get("NLSD_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, n)


def pool_map(fn, items):
    items = list(items)
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def merged_config(command: str, file_cfg: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the JSON document, then explicit overrides."""
    cfg = copy.deepcopy(DEFAULTS[command])
    for src in (file_cfg or {}, overrides or {}):
        for key, val in src.items():
            if key in ("command", "version"):
                continue
            if val is not None or key not in cfg:
                cfg[key] = val
    return cfg


def write_manifest(out: Path, command: str, cfg: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "version": __version__, **cfg}
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def k_range(k_min: float, k_max: float, k_step: float) -> np.ndarray:
    if not (k_min > 0 and k_max >= k_min and k_step > 0):
        raise DomainError("invalid k range")
    m = int(math.floor((k_max - k_min) / k_step + 1e-9))
    return np.round(k_min + k_step * np.arange(m + 1), 12)


def _params(cfg) -> ModelParams:
    return ModelParams(cfg["beta"], cfg["gamma"])


def sim_config(cfg: dict, xi_max: float | None = None) -> SimulationConfig:
    d = {key: cfg[key] for key in SIM_KEYS if key in cfg}
    if xi_max is not None:
        d["xi_max"] = xi_max
    sp = cfg.get("sponge")
    if sp is True:
        d["sponge"] = SpongeSpec()
    elif isinstance(sp, dict):
        d["sponge"] = SpongeSpec(**sp)
    return SimulationConfig(**d)


def run_branch(cfg: dict, out: Path | None = None) -> dict:
    params = _params(cfg)
    ks = k_range(cfg["k_min"], cfg["k_max"], cfg["k_step"])
    branch = continue_branch(ks, params, dx=cfg["dx"], half_width=cfg["half_width"], tol=cfg["tol"])
    summary = cutoff_summary(branch)
    va = va_curve(ks, params, cfg["va_variant"])
    if out is not None:
        write_branch_csv(out / "branch.csv", branch)
        write_cutoff_json(out / "cutoff.json", branch)
        write_va_csv(out / "va.csv", va)
        if cfg.get("plots"):
            from .plotting import plot_branch
            plot_branch(out, branch, va, summary.get("k_co"))
    return {"branch": branch, "cutoff": summary, "va": va}


def run_constants(cfg: dict, out: Path | None = None) -> dict:
    rep = verify_universal_constants(cfg["sums"], dx=cfg["dx"], half_width=cfg["half_width"],
                                     fine_ds=cfg["fine_ds"])
    doc = rep.to_dict()
    if len(cfg["sums"]) < 2:
        doc["spread"] = "undefined (single sum)"
    if out is not None:
        (out / "constants.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return {"report": rep, "doc": doc}


def _spectrum_task(args):
    k, beta, gamma, dx, half_width, form, modes = args
    from .stationary import continue_branch as cb
    params = ModelParams(beta, gamma)
    br = cb([k], params, dx=dx, half_width=half_width)
    sol = br.solutions[0]
    spec = spectrum(assemble_linearization(sol, form), vectors=modes > 0)
    return k, sol, spec


def run_spectrum(cfg: dict, out: Path | None = None) -> dict:
    params = _params(cfg)
    ks = k_range(cfg["k_min"], cfg["k_max"], cfg["k_step"])
    hw = cfg["half_width"]
    if hw is None:
        hw = max(24.0, 20.0 * math.sqrt(ks[-1]))
    branch = continue_branch(ks, params, dx=cfg["dx"], half_width=hw)
    nm = int(cfg.get("write_modes") or 0)
    tasks = [(float(k), params.beta, params.gamma, cfg["dx"], hw, cfg["form"], nm) for k in ks]
    results = pool_map(_spectrum_task, tasks)
    rows = []
    for (k, sol, spec) in results:
        verdict = classify_stability(spec)
        try:
            slope = vk_slope(branch, k)
        except BracketError:
            slope = math.nan
        rows.append({"k": k, "max_lambda_sq": spec.nonzero_max(), "top": spec.lambda_sq[:4].tolist(),
                     "zero_modes": spec.smallest_magnitudes().tolist(), "zero_tol": spec.zero_tolerance(),
                     "unstable_count": verdict.count, "parities": list(verdict.parities),
                     "label": verdict.label, "vk_slope": slope, "power": sol.power})
        if out is not None:
            tag = f"k{k:.4f}"
            write_spectrum_csv(out / f"spectrum_{tag}.csv", spec)
            for j in range(min(nm, spec.lambda_sq.size)):
                write_mode_csv(out / f"mode_{tag}_{j}.csv", spec, j)
    if out is not None:
        lines = ["k,max_lambda_sq,unstable_count,vk_slope,power"]
        for r in rows:
            lines.append(f"{fmt(r['k'])},{fmt(r['max_lambda_sq'])},{r['unstable_count']},"
                         f"{fmt(r['vk_slope'])},{fmt(r['power'])}")
        (out / "spectrum_summary.csv").write_text("\n".join(lines) + "\n")
        if cfg.get("plots"):
            from .plotting import plot_lambda_curve
            top = [sorted(np.delete(s.lambda_sq, np.argsort(np.abs(s.lambda_sq))[:2]))[::-1][:2]
                   for (_, _, s) in results]
            plot_lambda_curve(out / "lambda_sq.svg", ks, top)
    return {"rows": rows, "branch": branch}


def _mode(spec, parity: str):
    for j, p in enumerate(spec.parity):
        if p == parity:
            return j
    raise DomainError(f"no {parity} mode in the spectrum")


def build_evolve_input(cfg: dict):
    """Initial field and, for soliton inputs, the underlying solution."""
    params = _params(cfg)
    grid = Grid.symmetric(cfg["half_width"], cfg["dx"])
    kind = cfg["input"]
    sol = None
    info = {}
    if kind == "zero":
        return ComplexField(np.zeros(grid.n), np.zeros(grid.n), grid), None, info
    if kind == "gaussian":
        from .variational import va_predict
        pred = va_predict(cfg["k"], params, cfg.get("va_variant", "difference"))
        info["va"] = {"W": pred.W, "P": pred.P, "A": pred.A}
        return gaussian_input(pred, grid), None, info
    if kind != "soliton":
        raise DomainError(f"unknown input kind {kind!r}")
    sol = soliton_on_grid(cfg["k"], params, grid)
    pert = cfg.get("perturbation")
    if not pert:
        return ComplexField.from_real(sol.profile), sol, info
    spec = spectrum(assemble_linearization(sol))
    j = _mode(spec, pert["parity"])
    info["mode"] = {"index": j, "parity": pert["parity"], "lambda_sq": float(spec.lambda_sq[j])}
    field = perturbed_soliton(sol, spec.modes[:, j], int(pert.get("sign", 1)), float(pert.get("epsilon", 1e-3)))
    return field, sol, info


def run_evolve(cfg: dict, out: Path | None = None) -> dict:
    params = _params(cfg)
    field, sol, info = build_evolve_input(cfg)
    res = evolve(field, params, sim_config(cfg))
    if out is not None:
        write_run(out, res, {"input": cfg["input"], **info})
        if cfg.get("plots"):
            from .plotting import plot_contour, plot_observables
            plot_contour(out / "contour.svg", res)
            plot_observables(out / "observables.svg", res)
    return {"result": res, "solution": sol, "info": info}


def _interact_task(args):
    cfg, run = args
    params = ModelParams(run["beta"], run["gamma"])
    sol = soliton_on_grid(cfg["k"], params, Grid.symmetric(cfg["soliton_half_width"], cfg["dx"]))
    eta0 = cfg["half_separation"]
    if eta0 is None:
        eta0 = minimal_half_separation(sol)
    q0 = soliton_pair(sol, eta0, run["phase"], Grid.symmetric(cfg["half_width"], cfg["dx"]))
    res = evolve(q0, params, sim_config(cfg, run.get("xi_max", cfg["xi_max"])), classify="interaction")
    return run, eta0, res


def run_interact(cfg: dict, out: Path | None = None) -> dict:
    outcomes = pool_map(_interact_task, [(cfg, r) for r in cfg["runs"]])
    table = []
    for run, eta0, res in outcomes:
        tr = track_pair(res)
        row = {"beta": run["beta"], "gamma": run["gamma"], "phase": run["phase"], "half_separation": eta0,
               "outcome": res.outcome,
               "xi_collapse": None if res.collapse is None else res.collapse.xi_collapse,
               "separation_at_ordering_xi": tr.separation_at(cfg["ordering_xi"]),
               "expected": run.get("expected")}
        table.append(row)
        if out is not None:
            name = f"{run['phase']}_b{run['beta']:g}_g{run['gamma']:g}"
            write_run(out / name, res, {"half_separation": eta0, "phase": run["phase"]})
            if cfg.get("plots"):
                from .plotting import plot_contour
                plot_contour(out / name / "contour.svg", res,
                             f"{run['phase']} beta={run['beta']:g} gamma={run['gamma']:g}")
    if out is not None:
        lines = ["beta,gamma,phase,half_separation,outcome,xi_collapse,separation_at_ordering_xi,expected"]
        for r in table:
            xc = "" if r["xi_collapse"] is None else fmt(r["xi_collapse"])
            lines.append(f"{fmt(r['beta'])},{fmt(r['gamma'])},{r['phase']},{fmt(r['half_separation'])},"
                         f"{r['outcome']},{xc},{fmt(r['separation_at_ordering_xi'])},{r['expected'] or ''}")
        (out / "interactions.csv").write_text("\n".join(lines) + "\n")
    return {"table": table, "results": outcomes}


def run_va(cfg: dict, out: Path | None = None) -> dict:
    params = _params(cfg)
    ks = k_range(cfg["k_min"], cfg["k_max"], cfg["k_step"])
    va = va_curve(ks, params, cfg["variant"])
    if out is not None:
        write_va_csv(out / "va.csv", va)
    return {"va": va}


RUNNERS = {"branch": run_branch, "constants": run_constants, "spectrum": run_spectrum,
           "evolve": run_evolve, "interact": run_interact, "va": run_va}
