"""Command-line pipeline: generate-state, sample, train, evaluate, scaling.

Every command works inside a run directory (``--run-dir``, or ``--run NAME``
under ``$MPSTOMO_RUN_ROOT``, default ``./runs``) and records what it did in
``manifest.json`` there.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dmrg import DmrgConfig, dmrg_solve
from .errors import (
    DegenerateDiagnosticError,
    InvalidArgumentError,
    InvalidStateError,
    InvisibleObservableError,
    ResourceLimitError,
    TrainingFailedError,
)
from .evaluation import (
    ScalingCurve,
    bound_exceedance,
    evaluate_report,
    fit_power_law,
    read_run_directory,
    run_record,
    scaling_rows,
    write_scaling_csv,
)
from .hamiltonians import (
    ghz_state,
    interpolated_state,
    ruby_rydberg_mpo,
    surface_code_mpo,
    surface_code_stabilizers,
)
from .measurement import EnsembleSpec, generate_dataset, load_dataset, save_dataset, split_dataset
from .mps import load_mps, new_random_mps, product_state, save_mps
from .paulis import PauliString
from .shadows import estimate_subsystem_rdm_projected, estimation_report
from .training import (
    RdmRegularizer,
    StabilizerRegularizer,
    TrainConfig,
    best_history,
    nll_loss,
    train,
    write_histories,
)

RUN_ROOT_ENV = "MPSTOMO_RUN_ROOT"
log = logging.getLogger("mpstomo")


class CliError(Exception):
    pass


# --- run directories and manifests -------------------------------------------------------


def run_directory(args) -> Path:
    if args.run_dir:
        path = Path(args.run_dir)
    else:
        path = Path(os.environ.get(RUN_ROOT_ENV, "runs")) / args.run
    path.mkdir(parents=True, exist_ok=True)
    return path


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def write_manifest(run_dir: Path, command: str, config: dict, seeds: dict, inputs, outputs, started: float):
    """Add (or replace) this command's entry in ``manifest.json``."""
    path = run_dir / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {"artifact_version": __version__, "commands": {}}
    manifest["artifact_version"] = __version__
    manifest["commands"][command] = {
        "command": command,
        "config": {k: _jsonable(v) for k, v in config.items()},
        "seeds": seeds,
        "inputs": {str(p): file_hash(p) for p in inputs},
        "outputs": {str(Path(p).name): file_hash(p) for p in outputs},
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "artifact_version": __version__,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolved(args) -> dict:
    skip = {"func", "config", "verbose"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# --- commands -----------------------------------------------------------------------


def _check_lattice_flags(args):
    if args.system == "surface-code":
        for flag in ("lx", "ly"):
            if getattr(args, flag) < 2:
                raise CliError(f"--{flag} must be >= 2 for the surface code, got {getattr(args, flag)}")
    elif args.system == "ruby":
        for flag in ("lx", "ly"):
            if getattr(args, flag) < 1:
                raise CliError(f"--{flag} must be >= 1 for the ruby lattice, got {getattr(args, flag)}")
    elif args.system == "product":
        if not args.bits or set(args.bits) - {"0", "1"}:
            raise CliError(f"--bits must be a non-empty 0/1 string for --system product, got {args.bits!r}")
    elif args.n is None or args.n < 1:
        raise CliError(f"--n must be >= 1 for --system {args.system}")


def cmd_generate_state(args) -> int:
    started = time.time()
    _check_lattice_flags(args)
    run_dir = run_directory(args)
    sidecar = {"system": args.system}
    if args.system in ("surface-code", "ruby"):
        if args.system == "surface-code":
            mpo = surface_code_mpo(args.lx, args.ly, args.hz)
        else:
            mpo = ruby_rydberg_mpo(args.lx, args.ly, args.delta, args.hbd)
        cfg = DmrgConfig(chi_max=args.chi, n_sweeps=args.sweeps, tolerance=args.tolerance, seed=args.seed)
        result = dmrg_solve(mpo, cfg)
        state = result.state
        sidecar.update(result.summary())
    elif args.system == "product":
        state = product_state(args.bits)
    elif args.system == "ghz":
        state = ghz_state(args.n)
    elif args.system == "interpolated":
        if args.n != 3:
            raise CliError("--n must be 3 for --system interpolated")
        state = interpolated_state(args.x, seed=args.seed, n=args.n)
        sidecar["x"] = args.x
    else:
        state = new_random_mps(args.n, args.chi, seed=args.seed, real=args.real)
    sidecar.update({"n": state.n, "bond_dims": list(state.bond_dims)})
    out = run_dir / "target.mps"
    save_mps(state, out)
    _write_json(run_dir / "target.json", sidecar)
    write_manifest(run_dir, "generate-state", _resolved(args), {"seed": args.seed}, [], [out, run_dir / "target.json"], started)
    print(f"wrote {out} (n={state.n}, bond dims {state.bond_dims})")
    if "energy" in sidecar:
        print(f"energy {sidecar['energy']:.12f} after {sidecar['sweeps']} sweeps")
    return 0


def cmd_sample(args) -> int:
    started = time.time()
    run_dir = run_directory(args)
    state_path = Path(args.state) if args.state else run_dir / "target.mps"
    state = load_mps(state_path)
    ds = generate_dataset(state, EnsembleSpec(args.ensemble, state.n), args.n_samples, args.seed)
    out = run_dir / "dataset.jsonl"
    save_dataset(ds, out)
    write_manifest(run_dir, "sample", _resolved(args), {"seed": args.seed}, [state_path], [out], started)
    print(f"wrote {len(ds)} records to {out}")
    return 0


def _parse_blocks(text: str) -> list[tuple[int, ...]]:
    blocks = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            blocks.append(tuple(int(s) for s in part.split(",")))
    return blocks


def _train_config(args, ds) -> TrainConfig:
    base = TrainConfig.load(args.train_config) if args.train_config else TrainConfig()
    cfg = base.to_dict()
    for key, flag in (("chi", "chi"), ("beta", "beta"), ("seed", "seed"), ("n_restarts", "restarts")):
        if getattr(args, flag) is not None:
            cfg[key] = getattr(args, flag)
    for key, flag in (("learning_rate", "lr"), ("batch_size", "batch_size"), ("epochs", "epochs")):
        if getattr(args, flag) is not None:
            cfg["sgd"][key] = getattr(args, flag)
    for key, flag in (("max_iterations", "lbfgs_maxiter"), ("gtol", "gtol"), ("memory", "lbfgs_memory")):
        if getattr(args, flag) is not None:
            cfg["lbfgs"][key] = getattr(args, flag)
    kind = args.regularizer
    if kind == "stabilizers":
        if not args.stabilizer_estimates:
            raise CliError("--regularizer stabilizers needs --stabilizer-estimates FILE")
        est = json.loads(Path(args.stabilizer_estimates).read_text())
        entries = est["estimates"] if isinstance(est, dict) else est
        cfg["regularizer"] = StabilizerRegularizer(
            [e["observable"] for e in entries], [e["estimate"] for e in entries]
        ).to_dict()
    elif kind == "projected-rdm":
        if not args.rdm_blocks:
            raise CliError("--regularizer projected-rdm needs --rdm-blocks '0,1,2;3,4,5'")
        blocks = [(b, estimate_subsystem_rdm_projected(ds, b)) for b in _parse_blocks(args.rdm_blocks)]
        cfg["regularizer"] = RdmRegularizer(blocks).to_dict()
    elif kind == "none":
        cfg["regularizer"] = None
    return TrainConfig.from_dict(cfg)


def cmd_train(args) -> int:
    started = time.time()
    run_dir = run_directory(args)
    ds_path = Path(args.dataset) if args.dataset else run_dir / "dataset.jsonl"
    ds = load_dataset(ds_path)
    config = _train_config(args, ds)
    target_path = Path(args.target) if args.target else None
    target = load_mps(target_path) if target_path else None
    test = None
    if args.train_fraction is not None:
        ds, test = split_dataset(ds, args.train_fraction, config.seed)
    inputs = [ds_path] + ([target_path] if target_path else [])
    try:
        model, histories = train(config, ds, target)
    except TrainingFailedError as exc:
        write_histories(exc.histories, run_dir / "history.csv")
        raise
    out = run_dir / "model.mps"
    save_mps(model, out)
    write_histories(histories, run_dir / "history.csv")
    best = best_history(histories)
    summary = {
        "config": config.to_dict(),
        "best_restart": best.restart,
        "converged": best.converged,
        "stage_reached": best.stage_reached,
        "final_loss": best.final_loss,
        "train_nll": nll_loss(model, ds),
        "restarts": [
            {"restart": h.restart, "final_loss": h.final_loss, "converged": h.converged, "diverged": h.diverged}
            for h in histories
        ],
    }
    if test is not None:
        summary["test_nll"] = nll_loss(model, test)
    _write_json(run_dir / "train.json", summary)
    config.save(run_dir / "train_config.json")
    outputs = [out, run_dir / "history.csv", run_dir / "train.json"]
    write_manifest(run_dir, "train", _resolved(args), {"seed": config.seed}, inputs, outputs, started)
    print(f"wrote {out}; final loss {best.final_loss:.6f}, converged={best.converged}")
    return 0


def _stabilizer_set(args):
    if args.system != "surface-code":
        raise CliError("--estimate-stabilizers needs --system surface-code with --lx/--ly")
    for flag in ("lx", "ly"):
        if getattr(args, flag) < 2:
            raise CliError(f"--{flag} must be >= 2 for the surface code, got {getattr(args, flag)}")
    return surface_code_stabilizers(args.lx, args.ly)


def cmd_evaluate(args) -> int:
    started = time.time()
    run_dir = run_directory(args)
    if args.estimate_stabilizers:
        ds_path = Path(args.dataset) if args.dataset else run_dir / "dataset.jsonl"
        ds = load_dataset(ds_path)
        reports = [estimation_report(ds, p) for p in _stabilizer_set(args)]
        out = run_dir / "stabilizer_estimates.json"
        _write_json(out, {"ensemble": ds.ensemble, "N": len(ds), "estimates": reports})
        write_manifest(run_dir, "evaluate-stabilizers", _resolved(args), {}, [ds_path], [out], started)
        print(f"wrote {len(reports)} stabilizer estimates to {out}")
        return 0
    model_path = Path(args.model) if args.model else run_dir / "model.mps"
    target_path = Path(args.target) if args.target else run_dir / "target.mps"
    model, target = load_mps(model_path), load_mps(target_path)
    observables = [PauliString.from_label(lbl) for lbl in args.observable or []]
    report = evaluate_report(model, target, observables, args.cut or [])
    train_summary = run_dir / "train.json"
    if train_summary.exists():
        report["converged"] = json.loads(train_summary.read_text()).get("converged", True)
    out = run_dir / "report.json"
    _write_json(out, report)
    write_manifest(run_dir, "evaluate", _resolved(args), {}, [model_path, target_path], [out], started)
    print(f"fidelity {report['fidelity']:.6f} (infidelity {report['infidelity']:.3e}); wrote {out}")
    return 0


def _scaling_cell(task):
    target_path, cell_dir, ensemble, n_samples, seed, config_dict = task
    cell_dir = Path(cell_dir)
    cell_dir.mkdir(parents=True, exist_ok=True)
    target = load_mps(target_path)
    ds = generate_dataset(target, EnsembleSpec(ensemble, target.n), n_samples, seed)
    save_dataset(ds, cell_dir / "dataset.jsonl")
    config = TrainConfig.from_dict(dict(config_dict, seed=seed))
    try:
        model, histories = train(config, ds)
        converged = best_history(histories).converged
    except TrainingFailedError as exc:
        write_histories(exc.histories, cell_dir / "history.csv")
        return {"n": target.n, "N": n_samples, "seed": seed, "infidelity": 1.0, "converged": False}
    save_mps(model, cell_dir / "model.mps")
    write_histories(histories, cell_dir / "history.csv")
    report = evaluate_report(model, target)
    report["converged"] = converged
    _write_json(cell_dir / "report.json", report)
    return {"n": target.n, "N": n_samples, "seed": seed, "infidelity": report["infidelity"], "converged": converged}


def _parse_int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def cmd_scaling(args) -> int:
    started = time.time()
    run_dir = run_directory(args)
    inputs = []
    if args.from_runs:
        records = [run_record(read_run_directory(p)) for p in args.from_runs]
    else:
        target_path = Path(args.state) if args.state else run_dir / "target.mps"
        inputs.append(target_path)
        grid = _parse_int_list(args.n_grid)
        seeds = _parse_int_list(args.seeds)
        config = (TrainConfig.load(args.train_config) if args.train_config else TrainConfig()).to_dict()
        if args.chi is not None:
            config["chi"] = args.chi
        if args.restarts is not None:
            config["n_restarts"] = args.restarts
        if args.epochs is not None:
            config["sgd"]["epochs"] = args.epochs
        tasks = [
            (str(target_path), str(run_dir / "cells" / f"N{n_samples}_s{seed}"), args.ensemble, n_samples, seed, config)
            for n_samples in grid
            for seed in seeds
        ]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                records = list(pool.map(_scaling_cell, tasks))
        else:
            records = [_scaling_cell(t) for t in tasks]
    rows, excluded = scaling_rows(records)
    out = run_dir / "scaling.csv"
    write_scaling_csv(rows, out)
    summary = {"rows": rows, "excluded_nonconverged": excluded, "runs": records}
    ns = sorted({r["n"] for r in rows})
    summary["fits"] = {}
    for n in ns:
        sub = [r for r in rows if r["n"] == n]
        if len(sub) >= 3:
            fit = fit_power_law(ScalingCurve([r["N"] for r in sub], [r["median_infidelity"] for r in sub]))
            summary["fits"][str(n)] = {"c": fit.c, "alpha": fit.alpha, "r2": fit.r2}
    if args.bound_chi is not None and len(ns) == 1:
        pairs = [(r["N"], r["infidelity"]) for r in records if r["converged"]]
        summary["bound_check"] = bound_exceedance(pairs, ns[0], args.bound_chi, args.delta)
    _write_json(run_dir / "report.json", summary)
    write_manifest(run_dir, "scaling", _resolved(args), {}, inputs, [out, run_dir / "report.json"], started)
    print(f"wrote {len(rows)} rows to {out}")
    for n, fit in summary["fits"].items():
        print(f"n={n}: alpha={fit['alpha']:.3f}, c={fit['c']:.3g}, r2={fit['r2']:.3f}")
    return 0


# --- argument parsing -------------------------------------------------------------------


def _add_run_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--run", default="default", help=f"run name under ${RUN_ROOT_ENV} (default ./runs)")
    g.add_argument("--run-dir", help="explicit run directory")
    p.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_train_flags(p):
    p.add_argument("--train-config", help="training config JSON (TrainConfig keys)")
    p.add_argument("--chi", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--epochs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpstomo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mpstomo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-state", help="build a target state (DMRG or analytic)")
    _add_run_args(p)
    p.add_argument("--system", required=True, choices=["surface-code", "ruby", "ghz", "interpolated", "random", "product"])
    p.add_argument("--lx", type=int, default=3)
    p.add_argument("--ly", type=int, default=3)
    p.add_argument("--hz", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=1.7)
    p.add_argument("--hbd", type=float, default=-0.6)
    p.add_argument("--n", type=int)
    p.add_argument("--bits", help="computational basis string for --system product, e.g. 0000")
    p.add_argument("--x", type=float, default=0.0, help="mixing weight for --system interpolated")
    p.add_argument("--chi", type=int, default=10)
    p.add_argument("--real", action="store_true", help="real entries for --system random")
    p.add_argument("--sweeps", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate_state)

    p = sub.add_parser("sample", help="draw a measurement dataset from a state")
    _add_run_args(p)
    p.add_argument("--state", help="MPS file (default: <run>/target.mps)")
    p.add_argument("--ensemble", default="random-xz", choices=["random-xz", "global-xz"])
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="fit an MPS to a dataset")
    _add_run_args(p)
    _add_train_flags(p)
    p.add_argument("--dataset", help="dataset file (default: <run>/dataset.jsonl)")
    p.add_argument("--target", help="optional target MPS for fidelity tracking")
    p.add_argument("--beta", type=float)
    p.add_argument("--regularizer", choices=["none", "stabilizers", "projected-rdm"])
    p.add_argument("--stabilizer-estimates", help="file from 'evaluate --estimate-stabilizers'")
    p.add_argument("--rdm-blocks", help="subsystems for the projected-RDM regularizer, e.g. '0,1,2;3,4,5'")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lbfgs-maxiter", type=int)
    p.add_argument("--lbfgs-memory", type=int)
    p.add_argument("--gtol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-fraction", type=float, help="hold out a test split and report its NLL")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compare a model with its target, or estimate stabilizers")
    _add_run_args(p)
    p.add_argument("--model")
    p.add_argument("--target")
    p.add_argument("--observable", action="append", help="Pauli label such as 'Z0 Z1'; repeatable")
    p.add_argument("--cut", type=int, action="append", help="bipartition for entropy/Schmidt values; repeatable")
    p.add_argument("--estimate-stabilizers", action="store_true", help="estimate surface-code stabilizers from data")
    p.add_argument("--dataset")
    p.add_argument("--system", default="surface-code")
    p.add_argument("--lx", type=int, default=3)
    p.add_argument("--ly", type=int, default=3)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scaling", help="run or aggregate an (N, seed) matrix into scaling.csv")
    _add_run_args(p)
    _add_train_flags(p)
    p.add_argument("--state", help="target MPS (default: <run>/target.mps)")
    p.add_argument("--ensemble", default="random-xz", choices=["random-xz", "global-xz"])
    p.add_argument("--n-grid", default="250,500,1000,2000,4000,8000")
    p.add_argument("--seeds", default="0-9")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--from-runs", nargs="+", help="aggregate existing run directories instead")
    p.add_argument("--bound-chi", type=int, help="also run the error-bound check with this chi")
    p.add_argument("--delta", type=float, default=0.1)
    p.set_defaults(func=cmd_scaling)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and argv and argv[0] in parser._subparsers._group_actions[0].choices:
        defaults = json.loads(Path(known.config).read_text())
        sub = parser._subparsers._group_actions[0].choices[argv[0]]
        actions = {a.dest: a for a in sub._actions}
        unknown = set(defaults) - set(actions)
        if unknown:
            raise CliError(f"unknown keys in --config file: {sorted(unknown)}")
        for dest in defaults:
            actions[dest].required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except (
        CliError,
        InvalidArgumentError,
        InvalidStateError,
        InvisibleObservableError,
        ResourceLimitError,
        DegenerateDiagnosticError,
        TrainingFailedError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        print(f"mpstomo: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
