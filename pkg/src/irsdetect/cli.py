"""Command-line front end.

    irs-detect <analytic|simulate|roc|sweep|validate> --config FILE --out DIR
               [--seed U64] [--trials N]

The configuration is one flat YAML mapping.  System keys (``M``, ``K``,
``L``, ``N``, ...) and experiment keys (``detector``, ``snr_db``, ...) sit
side by side; ``noise`` and ``sweep`` are nested mappings.  Unknown keys
are rejected.  Every run writes its result files plus ``manifest.json``
holding the resolved configuration and a SHA-256 digest of each file.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numeric error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from . import analytic as an
from . import montecarlo as mc
from .channel import NoiseModel, SystemConfig
from .detectors import DetectorKind
from .errors import (CalibrationError, ConfigurationError, DomainError, IrsDetectError,
                     NumericError)

SCHEMA_VERSION = 1
COMMANDS = ("analytic", "simulate", "roc", "sweep", "validate")
CSV_COLUMNS = ("schema_version", "axis_name", "axis_value", "threshold", "pfa", "pfa_lo",
               "pfa_hi", "pd", "pd_lo", "pd_hi", "trials", "seed")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

SYSTEM_DEFAULTS = {
    "N": 16,
    "nakagami_m": 2.0,
    "reflection_amplitude": 0.8,
    "power_range_mw": [10.0, 50.0],
    "direct_mask": None,
    "resample_powers": False,
    "base_seed": 2024,
}
NOISE_DEFAULTS = {"model": "iid", "sigma2": 1e-9, "variances": None, "rho": 0.0,
                  "spread_db": 3.0}
EXPERIMENT_DEFAULTS = {
    "detector": "Opt",
    "snr_db": -5.0,
    "fading": "fixed",
    "trials": 100_000,
    "seed": 2024,
    "target_pfa": 0.01,
    "target_pd": 0.9,
    "pfa_grid": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
    "rao_law": "beta",
}
SWEEP_DEFAULTS = {"axis": "M", "values": [2, 4, 8],
                  "snr_grid": [float(v) for v in range(-25, 6)]}
REQUIRED = ("M", "K", "L")


@dataclass(frozen=True)
class RunConfig:
    """A parsed document: system, scenario and experiment settings."""

    system: SystemConfig
    scenario: mc.Scenario
    settings: dict
    resolved: dict  # the full document with every default filled in


@dataclass
class RunManifest:
    command: str
    config_path: str
    out_dir: str
    seed: int
    trials: int
    config: dict
    files: Dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        # the output directory is left out so that identical runs into
        # different directories leave identical manifests
        doc = {"schema_version": SCHEMA_VERSION, "command": self.command,
               "config_path": self.config_path, "seed": self.seed, "trials": self.trials,
               "config": self.config, "files": dict(sorted(self.files.items()))}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# configuration

def _merge(doc: dict, defaults: dict, prefix: str = "") -> dict:
    unknown = sorted(set(doc) - set(defaults))
    if unknown:
        raise ConfigurationError(f"unknown configuration key {prefix + unknown[0]!r}",
                                 key=prefix + unknown[0])
    return {k: doc.get(k, v) for k, v in defaults.items()}


def _number(value, key, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{key} must be a number, got {value!r}", key=key)
    if kind is int and value != int(value):
        raise ConfigurationError(f"{key} must be an integer, got {value!r}", key=key)
    return kind(value)


def _probability(value, key):
    p = _number(value, key)
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"{key} must lie in (0, 1), got {p!r}", key=key)
    return p


def _resolve(doc) -> dict:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a mapping", key="<document>")
    for key in REQUIRED:
        if key not in doc:
            raise ConfigurationError(f"missing required key {key!r}", key=key)
    top = {**{k: None for k in REQUIRED}, **SYSTEM_DEFAULTS, **EXPERIMENT_DEFAULTS,
           "noise": None, "sweep": None}
    out = _merge(doc, top)
    noise = doc.get("noise") or {}
    sweep = doc.get("sweep") or {}
    for name, sub in (("noise", noise), ("sweep", sweep)):
        if not isinstance(sub, dict):
            raise ConfigurationError(f"{name} must be a mapping", key=name)
    out["noise"] = _merge(noise, NOISE_DEFAULTS, "noise.")
    out["sweep"] = _merge(sweep, SWEEP_DEFAULTS, "sweep.")
    return out


def _build(resolved: dict) -> RunConfig:
    r = resolved
    nz = r["noise"]
    try:
        noise = NoiseModel(kind=nz["model"], sigma2=_number(nz["sigma2"], "noise.sigma2"),
                           variances=None if nz["variances"] is None else tuple(nz["variances"]),
                           rho=_number(nz["rho"], "noise.rho"),
                           spread_db=_number(nz["spread_db"], "noise.spread_db"))
        pr = r["power_range_mw"]
        if not isinstance(pr, (list, tuple)) or len(pr) != 2:
            raise ConfigurationError("power_range_mw must be [low, high]", key="power_range_mw")
        system = SystemConfig(
            M=r["M"], K=r["K"], L=r["L"], N=r["N"],
            nakagami_m=_number(r["nakagami_m"], "nakagami_m"),
            reflection_amplitude=_number(r["reflection_amplitude"], "reflection_amplitude"),
            power_range_mw=tuple(_number(v, "power_range_mw") for v in pr),
            noise=noise,
            direct_mask=None if r["direct_mask"] is None else tuple(r["direct_mask"]),
            resample_powers=bool(r["resample_powers"]),
            base_seed=r["base_seed"])
    except TypeError as exc:
        raise ConfigurationError(f"malformed system section: {exc}", key="<system>") from exc

    try:
        detector = DetectorKind(r["detector"])
    except ValueError:
        names = ", ".join(k.value for k in DetectorKind)
        raise ConfigurationError(f"detector must be one of {names}", key="detector") from None
    if r["rao_law"] not in ("beta", "printed"):
        raise ConfigurationError("rao_law must be 'beta' or 'printed'", key="rao_law")
    trials = _number(r["trials"], "trials", int)
    if trials < 1:
        raise ConfigurationError("trials must be >= 1", key="trials")
    seed = _number(r["seed"], "seed", int)
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError("seed must be a 64-bit unsigned integer", key="seed")
    grid = [_probability(p, "pfa_grid") for p in r["pfa_grid"]]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("pfa_grid must be non-empty and increasing", key="pfa_grid")
    sw = r["sweep"]
    if sw["axis"] not in ("M", "K", "L", "snr_db"):
        raise ConfigurationError("sweep.axis must be one of M, K, L, snr_db", key="sweep.axis")
    values = [_number(v, "sweep.values") for v in sw["values"]]
    snr_grid = [_number(v, "sweep.snr_grid") for v in sw["snr_grid"]]
    for key, seq in (("sweep.values", values), ("sweep.snr_grid", snr_grid)):
        if not seq or any(b <= a for a, b in zip(seq, seq[1:])):
            raise ConfigurationError(f"{key} must be non-empty and increasing", key=key)
    settings = {
        "detector": detector,
        "snr_db": _number(r["snr_db"], "snr_db"),
        "fading": r["fading"],
        "trials": trials,
        "seed": seed,
        "target_pfa": _probability(r["target_pfa"], "target_pfa"),
        "target_pd": _probability(r["target_pd"], "target_pd"),
        "pfa_grid": grid,
        "rao_law": r["rao_law"],
        "sweep": {"axis": sw["axis"], "values": values, "snr_grid": snr_grid},
    }
    scenario = mc.make_scenario(system, detector, snr_db=settings["snr_db"],
                                fading=settings["fading"])
    return RunConfig(system, scenario, settings, resolved)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML configuration document.

    Raises
    ------
    ConfigurationError
        Malformed YAML, an unknown or missing key, or a violated invariant.
        ``key`` names the offending entry.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed configuration document: {exc}",
                                 key="<document>") from exc
    return _build(_resolve(doc))


def serialize_config(cfg: RunConfig) -> str:
    """YAML text of the resolved document; ``parse_config`` reads it back equal."""
    return yaml.safe_dump(cfg.resolved, sort_keys=True)


# --------------------------------------------------------------------------
# outputs

def _csv_text(rows: List[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row[k]) for k in CSV_COLUMNS})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _op_row(axis_name, axis_value, op: mc.OperatingPoint, seed: int) -> dict:
    return {"schema_version": SCHEMA_VERSION, "axis_name": axis_name,
            "axis_value": float(axis_value), "threshold": float(op.threshold),
            "pfa": op.pfa_hat, "pfa_lo": op.pfa_ci[0], "pfa_hi": op.pfa_ci[1],
            "pd": op.pd_hat, "pd_lo": op.pd_ci[0], "pd_hi": op.pd_ci[1],
            "trials": op.trials, "seed": seed}


def analytic_point(scenario: mc.Scenario, pfa_target: float, rao_law: str = "beta") -> tuple:
    """``(threshold, pfa, pd)`` from the closed-form laws of the scenario's detector."""
    kind, cfg = scenario.detector, scenario.config
    L, M = cfg.L, cfg.M
    if scenario.fading != "fixed":
        raise ConfigurationError("closed-form curves need a fixed channel", key="fading")
    p = scenario.analytic()
    if kind is DetectorKind.Opt:
        tau = an.opt_threshold(pfa_target, p.b)
        pfa, pd = an.opt_perf(tau, p.b)
    elif kind is DetectorKind.T1:
        if not np.allclose(scenario.noise_cov, p.sigma2 * np.eye(M)):
            raise ConfigurationError("the T1 closed form needs white noise", key="noise.model")
        tau = an.t1_threshold(pfa_target, p.traceMM, p.sigma2, L, M)
        pfa, pd, _ = an.t1_perf(tau, p.traceMM, p.sigma2, L, M)
    elif kind is DetectorKind.T2:
        tau = an.t2_threshold(pfa_target, L, M)
        pfa, pd = an.t2_perf(tau, (p.eigvals, p.eigvecs), scenario.u, L)[:2]
    elif kind is DetectorKind.T3Rao and rao_law == "printed":
        tau = an.rao_threshold_exact(pfa_target, L, M)
        pfa = an.rao_pfa_exact(tau, L, M)
        pd = an.rao_asymptotic(tau, p.lambda_rao, M)[1]
    elif kind is DetectorKind.T3Rao:
        tau = an.rao_null_beta_threshold(pfa_target, L, M)
        pfa, pd = an.rao_null_beta_pfa(tau, L, M), an.rao_beta_pd(tau, L, M, p.lambda_rao)
    elif kind is DetectorKind.T3Glrt:
        tau = an.glrt_null_threshold(pfa_target, L, M)
        pfa = an.glrt_null_pfa(tau, L, M)
        # the GLRT is a monotone map of the Rao statistic
        pd = an.rao_beta_pd(2 * L * -math.expm1(-tau / L), L, M, p.lambda_rao)
    else:
        raise ConfigurationError(f"no closed-form law for detector {kind.value}", key="detector")
    return float(tau), float(pfa), float(pd)


def _cmd_analytic(cfg: RunConfig, seed, trials) -> Dict[str, str]:
    rows = []
    for q in cfg.settings["pfa_grid"]:
        tau, pfa, pd = analytic_point(cfg.scenario, q, cfg.settings["rao_law"])
        rows.append({"schema_version": SCHEMA_VERSION, "axis_name": "pfa", "axis_value": q,
                     "threshold": tau, "pfa": pfa, "pfa_lo": pfa, "pfa_hi": pfa,
                     "pd": pd, "pd_lo": pd, "pd_hi": pd, "trials": 0, "seed": seed})
    return {"analytic.csv": _csv_text(rows)}


def _cmd_simulate(cfg: RunConfig, seed, trials) -> Dict[str, str]:
    sc, st = cfg.scenario, cfg.settings
    cal = mc.calibrate_threshold(sc, st["target_pfa"], trials, seed)
    op = mc.estimate_operating_point(sc, cal.threshold, trials, seed + 1,
                                     threshold_band=cal.threshold_band)
    summary = {"schema_version": SCHEMA_VERSION, "detector": sc.detector.value,
               "target_pfa": st["target_pfa"], "threshold": float(cal.threshold),
               "threshold_band": [float(t) for t in cal.threshold_band],
               "analytic_thresholds": {k: float(v) for k, v in cal.analytic.items()},
               "pd_band": [float(v) for v in op.pd_joint]}
    return {"simulate.csv": _csv_text([_op_row("snr_db", st["snr_db"], op, seed)]),
            "simulate_summary.yaml": yaml.safe_dump(summary, sort_keys=True)}


def _cmd_roc(cfg: RunConfig, seed, trials) -> Dict[str, str]:
    curve = mc.roc_curve(cfg.scenario, cfg.settings["pfa_grid"], trials, seed)
    return {"roc.csv": _csv_text([_op_row("pfa", x, op, seed) for x, op in curve.points])}


def _cmd_sweep(cfg: RunConfig, seed, trials) -> Dict[str, str]:
    st, sw = cfg.settings, cfg.settings["sweep"]
    values = sw["values"] if sw["axis"] == "snr_db" else [int(v) for v in sw["values"]]
    res = mc.sweep(cfg.scenario, sw["axis"], values, st["target_pfa"], trials, seed,
                   snr_grid=sw["snr_grid"], target_pd=st["target_pd"])
    files = {}
    for key, curve in res.curves.items():
        name = f"sweep_{sw['axis']}_{key}.csv"
        files[name] = _csv_text([_op_row("snr_db", x, op, seed) for x, op in curve.points])
    summary = {"schema_version": SCHEMA_VERSION, "axis": res.axis,
               "values": [v for v in values], "detector": res.detector,
               "target_pfa": res.target_pfa, "target_pd": res.target_pd,
               "snr_at_target_db": {str(k): v for k, v in res.snr_at_target.items()},
               "shift_db": res.shift_db, "increments_db": list(res.increments_db)}
    files[f"sweep_{sw['axis']}_summary.yaml"] = yaml.safe_dump(summary, sort_keys=True)
    return files


def _cmd_validate(cfg: RunConfig, seed, trials) -> Dict[str, str]:
    from . import validation

    rows = validation.run_checks(trials, seed=seed)
    for r in rows:
        print(r.line())
    report = validation.format_report(rows, trials, seed)
    return {"validation_report.yaml": yaml.safe_dump(report, sort_keys=False)}


HANDLERS = {"analytic": _cmd_analytic, "simulate": _cmd_simulate, "roc": _cmd_roc,
            "sweep": _cmd_sweep, "validate": _cmd_validate}


def run(command: str, cfg: RunConfig, out_dir: Path, config_path: str,
        seed: Optional[int] = None, trials: Optional[int] = None) -> tuple:
    """Execute ``command`` and write its files plus ``manifest.json``.

    Returns ``(exit_status, manifest)``.
    """
    seed = cfg.settings["seed"] if seed is None else int(seed)
    trials = cfg.settings["trials"] if trials is None else int(trials)
    files = HANDLERS[command](cfg, seed, trials)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg.resolved, seed=seed, trials=trials)
    manifest = RunManifest(command, config_path, str(out_dir), seed, trials, resolved)
    for name, text in files.items():
        data = text.encode("utf-8")
        (out_dir / name).write_bytes(data)
        manifest.files[name] = hashlib.sha256(data).hexdigest()
    (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    status = EXIT_OK
    if command == "validate":
        report = yaml.safe_load(files["validation_report.yaml"])
        status = EXIT_OK if report["all_passed"] else EXIT_FAILED
    return status, manifest


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irs-detect", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML scenario file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="trial seed (overrides config)")
    ap.add_argument("--trials", type=int, default=None, help="trials (overrides config)")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigurationError("--seed must be a 64-bit unsigned integer", key="seed")
        if args.trials is not None and args.trials < 1:
            raise ConfigurationError("--trials must be >= 1", key="trials")
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read configuration: {exc}", key="--config") from exc
        cfg = parse_config(text)
        status, _ = run(args.command, cfg, Path(args.out), args.config, args.seed, args.trials)
    except (ConfigurationError, CalibrationError, DomainError) as err:
        key = getattr(err, "key", None)
        print(f"configuration error{f' ({key})' if key else ''}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, IrsDetectError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return status


if __name__ == "__main__":
    sys.exit(main())
