"""Command-line front end: ``rqhd-lab run|validate <config>`` and ``rqhd-lab report <dir>``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure, 4 I/O.
Failures print a JSON object on stderr and, when the output directory
exists, write it to ``error.json``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig, InitialData, build_initial, load_config, serialize_config
from .errors import ConfigError, NoConvergenceError, RQHDError, StudyError
from .kg import KGState, auto_dt, kg_solve
from .limits import convergence_study
from .madelung import initial_data_kg_from_hydro
from .rqhd.equivalence import compare_kg_picard
from .rqhd.identities import identity_report
from .rqhd.picard import auto_window, picard_solve
from .rqhd.reform import cauchy_from_hydro
from .rqhd.residuals import residual_norms
from .storage import write_checkpoint, write_snapshot

log = logging.getLogger("rqhd_lab")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _fmt(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_json_clean(obj), indent=2, sort_keys=True) + "\n")


def resolve_dt(cfg: ExperimentConfig, grid, params) -> float:
    if cfg.run.dt != "auto":
        return float(cfg.run.dt)
    if cfg.mode in ("kg", "equivalence"):
        return auto_dt(grid, params)
    return 0.5 * min(grid.spacing)


def resolve_window(cfg: ExperimentConfig, params):
    if cfg.run.window == "auto":
        return auto_window(params)
    return cfg.run.window


def _kg_init(data: InitialData, params) -> KGState:
    if data.kg is not None:
        return data.kg
    grid = data.grid
    S_full = data.S0 + grid.dot_x(params.epsilon * grid.lattice_vector(data.winding))
    phi0, phi1 = initial_data_kg_from_hydro(data.n0, data.n1, S_full, data.S1, params)
    return KGState(grid, phi0, phi1)


def run_kg(cfg, grid, params, data, out: Path) -> dict:
    dt = resolve_dt(cfg, grid, params)
    traj = kg_solve(_kg_init(data, params), params, cfg.run.T, dt)
    charge = traj.diagnostics["charge"]
    _write_csv(out / "charge.csv", ["t", "charge", "mean_defect"],
               zip(traj.times, charge, traj.diagnostics["mean_defect"]))
    write_snapshot(out / "phi_final.snap", grid, traj.final.phi)
    if cfg.output.checkpoint:
        write_checkpoint(out / "trajectory.ckpt", traj)
    drift = float(np.max(np.abs(charge - charge[0])) / abs(charge[0])) if charge[0] else float("nan")
    return {"steps": len(traj) - 1, "dt": traj.dt, "charge_drift_rel": drift,
            "min_density": float(min(np.min(np.abs(s.phi) ** 2) for s in traj))}


def _picard_outputs(out: Path, report, estimates) -> None:
    with open(out / "iteration_report.jsonl", "w") as fh:
        fh.write(json.dumps(_json_clean(report.to_json()), sort_keys=True) + "\n")
        fh.write(json.dumps(_json_clean(estimates.to_json()), sort_keys=True) + "\n")
    (out / "norm_history.csv").write_text(estimates.norm_history_csv())


def run_rqhd(cfg, grid, params, data, out: Path) -> dict:
    dt = resolve_dt(cfg, grid, params)
    cauchy = cauchy_from_hydro(grid, data.n0, data.n1, data.S0, data.S1, params, data.winding)
    traj, report, estimates = picard_solve(cauchy, params, cfg.run.T, dt, tol=cfg.run.tol,
                                           max_iter=cfg.run.max_iter, window=resolve_window(cfg, params),
                                           N=cfg.run.N, C=cfg.run.C)
    _picard_outputs(out, report, estimates)
    final = traj.final
    for name in ("psi", "Psi", "Phi"):
        write_snapshot(out / f"{name}_final.snap", grid, getattr(final, name))
    return {"dt": traj.dt, "iterations": report.iterations, "converged": report.converged,
            "contraction_ratio_estimate": report.contraction_ratio_estimate,
            "Tstar": estimates.Tstar, "a0": estimates.a0, "I0": estimates.I0}


def run_equivalence(cfg, grid, params, data, out: Path) -> dict:
    dt = resolve_dt(cfg, grid, params)
    res = compare_kg_picard(grid, data.n0, data.n1, data.S0, data.S1, params, cfg.run.T, dt,
                            data.winding, tol=cfg.run.tol, max_iter=cfg.run.max_iter,
                            window=resolve_window(cfg, params), N=cfg.run.N, C=cfg.run.C, kg_init=data.kg)
    _picard_outputs(out, res.report, res.estimates)
    _write_csv(out / "discrepancy.csv", ["t", "distance"], zip(res.kg.times, res.distances))
    _write_csv(out / "charge.csv", ["t", "charge"], zip(res.kg.times, res.kg.diagnostics["charge"]))
    summary = {"dt": res.kg.dt, "discrepancy": res.distance, "iterations": res.report.iterations,
               "contraction_ratio_estimate": res.report.contraction_ratio_estimate}
    if len(res.kg) >= 3:
        summary["residual_kg"] = dict(zip(("continuity", "momentum"), residual_norms(res.kg, params)))
        summary["residual_picard"] = dict(zip(("continuity", "momentum"), residual_norms(res.picard, params)))
    _write_json(out / "report.json", summary)
    return summary


def run_limits(cfg, grid, params, data, out: Path) -> dict:
    dt = None if cfg.run.dt == "auto" else float(cfg.run.dt)
    lim = cfg.limits
    table = convergence_study(lim.kind, grid, data.n0, data.S0, params, lim.values, cfg.run.T, dt,
                              data.winding, solver=lim.solver, tol=cfg.run.tol)
    (out / "table.csv").write_text(table.to_csv())
    _write_json(out / "summary.json", table.summary())
    return {**table.summary(), "discrepancies": table.discrepancies,
            "strictly_decreasing": table.strictly_decreasing}


def run_identities(cfg, grid, params, data, out: Path) -> dict:
    rep = identity_report(grid, params, seed=cfg.run.seed)
    _write_json(out / "identities.json", rep)
    return rep


RUNNERS = {"kg": run_kg, "rqhd": run_rqhd, "equivalence": run_equivalence, "limits": run_limits,
           "identities": run_identities}


def _versions() -> dict:
    return {"rqhd_lab": __version__, "numpy": np.__version__, "pyyaml": yaml.__version__,
            "python": platform.python_version()}


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Run one configured experiment, writing outputs and ``manifest.json`` to the output directory."""
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    canonical = serialize_config(cfg)
    (out / "config.yaml").write_text(canonical)
    start = time.perf_counter()
    grid = cfg.grid.build()
    params = cfg.physical_params()
    data = build_initial(cfg, grid, params)
    summary = RUNNERS[cfg.mode](cfg, grid, params, data, out)
    manifest = {
        "mode": cfg.mode,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - start,
        "outputs": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
        "summary": summary,
    }
    _write_json(out / "manifest.json", manifest)
    return summary


def _error_payload(exc: BaseException, code: int, context: dict) -> dict:
    payload = {"status": "error", "error": type(exc).__name__, "message": str(exc), "exit_code": code,
               **context}
    if isinstance(exc, NoConvergenceError) and exc.report is not None:
        payload["report"] = exc.report.to_json()
    if isinstance(exc, StudyError) and exc.table is not None:
        payload["table"] = {"params": exc.table.params, "discrepancies": exc.table.discrepancies,
                            "failures": exc.table.failures}
    return _json_clean(payload)


def _fail(exc: BaseException, code: int, context: dict, out: Path | None = None) -> int:
    payload = _error_payload(exc, code, context)
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(text + "\n")
    return code


def _classify(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_VALIDATION
    if isinstance(exc, RQHDError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERICAL if isinstance(exc, (FloatingPointError, ArithmeticError)) else 1


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except Exception as exc:
        return _fail(exc, _classify(exc), {"config": str(args.config)})
    print(json.dumps({"status": "ok", "mode": cfg.mode, "config": str(args.config)}))
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except Exception as exc:
        return _fail(exc, _classify(exc), {"config": str(args.config)})
    out = Path(args.out or cfg.output.dir)
    try:
        summary = run_experiment(cfg, out)
    except Exception as exc:
        code = _classify(exc)
        if code == 1:
            log.exception("unexpected failure")
        return _fail(exc, code, {"config": str(args.config), "mode": cfg.mode}, out)
    print(json.dumps(_json_clean({"status": "ok", "mode": cfg.mode, "output": str(out), **summary}),
                     sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    from .plotting import render_report

    d = Path(args.dir)
    if not d.is_dir():
        return _fail(FileNotFoundError(f"no such output directory: {d}"), EXIT_IO, {"dir": str(d)})
    try:
        made = render_report(d)
    except Exception as exc:
        return _fail(exc, _classify(exc), {"dir": str(d)}, d)
    print(json.dumps({"status": "ok", "figures": [p.name for p in made]}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqhd-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a YAML config")
    p.add_argument("config", help="path to the YAML configuration")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", help="check a configuration without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("report", help="render figures for an output directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
