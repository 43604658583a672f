"""Command-line front end: ``nlsd <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import experiments as ex
from .errors import EXIT_ACCEPTANCE, EXIT_INPUT, EXIT_OK, NLSDError
from .model import fmt

COMMANDS = ("branch", "constants", "spectrum", "evolve", "interact", "va")

# flag dest -> config key
OVERRIDES = {"beta": "beta", "gamma": "gamma", "k": "k", "k_min": "k_min", "k_max": "k_max",
             "k_step": "k_step", "dx": "dx", "dt": "dt", "xi_max": "xi_max", "sponge": "sponge"}


class InputProblem(NLSDError):
    """Unreadable or inconsistent command-line input."""

    exit_code = EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlsd", description="Soliton families, spectra and dynamics "
                                     "for the NLS equation with nonlinear diffraction.")
    parser.add_argument("--version", action="version", version=f"nlsd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--out", type=Path, help="output directory (default nlsd_runs/<command>)")
        p.add_argument("--plots", action="store_true", default=None, help="write SVG figures")
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--k", type=float, help="single propagation constant")
        p.add_argument("--k-min", type=float)
        p.add_argument("--k-max", type=float)
        p.add_argument("--k-step", type=float)
        p.add_argument("--dx", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--xi-max", type=float)
        p.add_argument("--sponge", action=argparse.BooleanOptionalAction, default=None)
        if name == "constants":
            p.add_argument("--sums", type=float, nargs="+", help="values of beta + gamma")
    p = sub.add_parser("reproduce-paper", help="run the shipped experiments and check acceptance criteria")
    p.add_argument("--out", type=Path, help="directory for run artifacts and acceptance.json")
    p.add_argument("--plots", action="store_true")
    p.add_argument("--criteria", type=int, nargs="+", help="subset of criterion numbers (1-12)")
    return parser


def overrides_from_args(args) -> dict:
    """Explicit flags as config keys; unset flags are omitted."""
    cmd = args.command
    over = {}
    for dest, key in OVERRIDES.items():
        val = getattr(args, dest, None)
        if val is not None:
            over[key] = val
    if getattr(args, "plots", None):
        over["plots"] = True
    if getattr(args, "sums", None):
        over["sums"] = list(args.sums)
    if "k" in over and cmd in ("branch", "spectrum", "va"):
        k = over.pop("k")
        over["k_min"] = over["k_max"] = k
    if cmd == "interact":
        if "k_min" in over or "k_max" in over or "k_step" in over:
            raise InputProblem("interact takes --k, not a k range")
        if "beta" in over or "gamma" in over:
            b, g = over.pop("beta", 0.0), over.pop("gamma", 0.0)
            over["runs"] = [{"beta": b, "gamma": g, "phase": ph} for ph in ("in-phase", "out-of-phase")]
    return over


def load_config(path: Path | None, command: str) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise InputProblem(f"cannot read config {path}: {err}") from err
    if not isinstance(doc, dict):
        raise InputProblem(f"config {path} must hold a JSON object")
    if doc.get("command", command) != command:
        raise InputProblem(f"config {path} is for command {doc['command']!r}, not {command!r}")
    return doc


def _report(command: str, res: dict) -> None:
    if command == "branch":
        print(json.dumps(res["cutoff"], indent=2, sort_keys=True))
    elif command == "constants":
        print(json.dumps(res["doc"], indent=2, sort_keys=True))
    elif command == "spectrum":
        print("k,max_lambda_sq,label,vk_slope")
        for r in res["rows"]:
            print(f"{fmt(r['k'])},{fmt(r['max_lambda_sq'])},{r['label']},{fmt(r['vk_slope'])}")
    elif command == "evolve":
        r = res["result"]
        msg = f"outcome: {r.outcome}"
        if r.collapse is not None:
            msg += f" (xi={r.collapse.xi_collapse:.6g}, eta={r.collapse.eta_location:.6g}, {r.collapse.trigger})"
        print(msg)
        print(f"power drift {r.drift('power'):.3e}, hamiltonian drift {r.drift('hamiltonian'):.3e}")
    elif command == "interact":
        print("beta,gamma,phase,outcome,expected")
        for r in res["table"]:
            print(f"{r['beta']:g},{r['gamma']:g},{r['phase']},{r['outcome']},{r['expected'] or ''}")
        bad = [r for r in res["table"] if r["outcome"] == "inconclusive"]
        for r in bad:
            print(f"inconclusive: beta={r['beta']:g} gamma={r['gamma']:g} {r['phase']}", file=sys.stderr)
    elif command == "va":
        print(f"{len(res['va'])} VA points")


def _keep_partial(err: NLSDError, out: Path) -> None:
    partial = getattr(err, "partial", None)
    if partial is not None and len(partial) > 0:
        from .stationary import write_branch_csv
        write_branch_csv(out / "branch_partial.csv", partial)


def run_command(args) -> int:
    cmd = args.command
    cfg = ex.merged_config(cmd, load_config(args.config, cmd), overrides_from_args(args))
    out = args.out if args.out is not None else Path("nlsd_runs") / cmd
    ex.write_manifest(out, cmd, cfg)
    try:
        res = ex.RUNNERS[cmd](cfg, out)
    except NLSDError as err:
        _keep_partial(err, out)
        raise
    _report(cmd, res)
    return EXIT_OK


def run_reproduce(args) -> int:
    from .acceptance import CRITERIA, run_all
    unknown = sorted(set(args.criteria or ()) - set(CRITERIA))
    if unknown:
        raise InputProblem(f"unknown criteria {unknown}; valid numbers are {CRITERIA[0]}-{CRITERIA[-1]}")
    results = run_all(args.criteria, args.out, args.plots)
    for r in results:
        print(r.line(), flush=True)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce-paper":
            return run_reproduce(args)
        return run_command(args)
    except NLSDError as err:
        print(f"nlsd: error: {err}", file=sys.stderr)
        return err.exit_code
    except (TypeError, KeyError) as err:
        print(f"nlsd: error: invalid configuration: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
