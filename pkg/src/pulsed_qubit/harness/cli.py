"""Command-line front end: ``pulsed-qubit {evolve,compare,atlas,classify} --config FILE``.

Exit status is 0 on success, 2 for configuration errors, 3 when propagation
or a closed-form evaluation fails, and 4 for I/O failures. On failure a JSON
object ``{"error": ..., "kind": ..., "exit_code": ...}`` is printed to stderr.

The environment variable ``QUBIT_PULSE_SEED`` is reserved for future
stochastic features. Nothing in the package is random today, so it is
ignored.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..core import Unitary2
from ..errors import ConfigError, NoPointwiseValueError, PreconditionError, QubitError
from ..propagator import EvolutionRecord, refine_to_tolerance
from ..pulses import TAU_CONVENTION
from ..regime_map import AtlasSpec, RegimeReport, build_atlas, classify
from ..regimes import RegimeKind, closed_form
from . import config as cfgmod
from .io import heatmap_svg, write_csv, write_json, write_svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROPAGATION = 3
EXIT_IO = 4


def _out_dir(cfg: cfgmod.RunConfig, override: Optional[str]) -> Path:
    path = Path(override if override is not None else cfg.output.dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _header(cfg: cfgmod.RunConfig) -> dict:
    return {
        "units_note": cfgmod.UNITS_NOTE,
        "tau_convention": TAU_CONVENTION,
        "ratio": cfg.ratio,
        "config": cfg.to_dict(),
        "version": __version__,
    }


def _matrix_dict(u: Unitary2) -> dict:
    return {name: [complex(v).real, complex(v).imag]
            for name, v in zip(("u11", "u12", "u21", "u22"), u.matrix.ravel())}


def _report(cfg: cfgmod.RunConfig) -> Optional[RegimeReport]:
    try:
        return classify(cfg.system, cfg.require_pulse(), cfg.ratio)
    except ConfigError:
        raise
    except (QubitError, ValueError):
        # e.g. an identically zero Gaussian has no duration; the map point is undefined
        return None


def _reference(cfg: cfgmod.RunConfig):
    return refine_to_tolerance(cfg.system, cfg.require_pulse(), cfg.require_time(),
                               cfg.propagation.tolerance, cfg.propagation,
                               cfg.initial_state, record=True)


def _p2(u: np.ndarray, psi: np.ndarray) -> float:
    out = u @ psi
    norm = float(np.sum(np.abs(out) ** 2))
    return float(abs(out[1]) ** 2 / norm) if norm > 0 else math.nan


def cmd_evolve(cfg: cfgmod.RunConfig, out_dir: Optional[str] = None) -> Dict[str, Path]:
    """Time-series CSV plus a JSON summary of the refined numerical evolution."""
    record, err = _reference(cfg)
    report = _report(cfg)
    out = _out_dir(cfg, out_dir)
    prefix = cfg.output.prefix
    states = record.states
    pops = record.populations()
    rows = (
        (t, s[0].real, s[0].imag, s[1].real, s[1].imag, p[0], p[1])
        for t, s, p in zip(record.times, states, pops)
    )
    csv_path = write_csv(out / f"{prefix}_timeseries.csv",
                         ("t", "re_a1", "im_a1", "re_a2", "im_a2", "p1", "p2"), rows)
    final = record.final
    summary = _header(cfg) | {
        "command": "evolve",
        "final_propagator": _matrix_dict(final),
        "unitarity_defect": final.unitarity_defect(),
        "error_estimate": err,
        "steps": record.step_total,
        "final_populations": {"p1": float(pops[-1, 0]), "p2": float(pops[-1, 1])},
        "regime_report": report.to_dict() if report else None,
    }
    json_path = write_json(out / f"{prefix}_summary.json", summary)
    return {"timeseries": csv_path, "summary": json_path}


def compare(cfg: cfgmod.RunConfig) -> dict:
    """Build the comparison result: every requested closed form against the numerical reference."""
    record, err = _reference(cfg)
    report = _report(cfg)
    if cfg.regimes_to_compare is not None:
        kinds: Sequence[RegimeKind] = cfg.regimes_to_compare
    elif report is not None and report.applicable:
        kinds = sorted(report.applicable, key=lambda k: list(RegimeKind).index(k))
    else:
        kinds = list(RegimeKind)
    psi = cfg.initial_state.vector
    ref = record.final
    p2_ref = _p2(ref.matrix, psi)
    regimes = {}
    for kind in kinds:
        entry = {
            "applicable": bool(report and kind in report.applicable),
            "validity_margin": report.margins[kind] if report else math.nan,
        }
        try:
            u = closed_form(kind, cfg.system, cfg.pulse, cfg.t_final)
        except (PreconditionError, NoPointwiseValueError) as exc:
            entry |= {"matrix_error": None, "transfer_error": None, "note": str(exc)}
        else:
            entry |= {"matrix_error": u.distance(ref),
                      "transfer_error": abs(_p2(u.matrix, psi) - p2_ref),
                      "closed_form": _matrix_dict(u)}
        regimes[kind.value] = entry
    return _header(cfg) | {
        "command": "compare",
        "regimes": regimes,
        "numerical_reference": {"propagator": _matrix_dict(ref), "error_estimate": err,
                                "steps": record.step_total},
        "regime_report": report.to_dict() if report else None,
        "time_series": {"columns": ["t", "p1", "p2"],
                        "rows": np.column_stack([record.times, record.populations()]).tolist()},
    }


def cmd_compare(cfg: cfgmod.RunConfig, out_dir: Optional[str] = None) -> Dict[str, Path]:
    result = compare(cfg)
    out = _out_dir(cfg, out_dir)
    return {"comparison": write_json(out / f"{cfg.output.prefix}_comparison.json", result)}


def cmd_atlas(cfg: cfgmod.RunConfig, out_dir: Optional[str] = None,
              jobs: Optional[int] = None) -> Dict[str, Path]:
    """Per-regime error grids as CSV (and SVG), plus a manifest with the only timestamp."""
    spec = cfg.atlas or AtlasSpec(delta_e=cfg.system.delta_e, hbar=cfg.system.hbar, ratio=cfg.ratio)
    grid = build_atlas(spec, jobs)
    out = _out_dir(cfg, out_dir)
    prefix = cfg.output.prefix
    files: Dict[str, Path] = {}
    for kind in RegimeKind:
        err, tr = grid.errors[kind], grid.transfer_errors[kind]
        rows = ((x, y, err[iy, ix], tr[iy, ix])
                for iy, y in enumerate(grid.y_axis) for ix, x in enumerate(grid.x_axis))
        files[f"{kind.value}_csv"] = write_csv(out / f"{prefix}_atlas_{kind.value}.csv",
                                               ("x", "y", "error", "transfer_error"), rows)
        if cfg.output.svg:
            svg = heatmap_svg(err, grid.x_axis, grid.y_axis, f"{kind.value}: Frobenius error")
            files[f"{kind.value}_svg"] = write_svg(out / f"{prefix}_atlas_{kind.value}.svg", svg)
    manifest = _header(cfg) | {
        "command": "atlas",
        "atlas": dataclasses.asdict(spec),
        "invalid_cells": grid.invalid_count,
        "evaluation_time": "end of pulse support plus 2 pi hbar / delta_e",
        "files": sorted(p.name for p in files.values()),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    files["manifest"] = write_json(out / f"{prefix}_atlas_manifest.json", manifest)
    return files


def cmd_classify(cfg: cfgmod.RunConfig) -> dict:
    report = classify(cfg.system, cfg.require_pulse(), cfg.ratio)
    return {"units_note": cfgmod.UNITS_NOTE, "tau_convention": TAU_CONVENTION,
            "ratio": cfg.ratio} | report.to_dict()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulsed-qubit",
                                description="Simulate and classify a simply pulsed qubit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("evolve", "numerical time series and summary"),
                        ("compare", "closed forms against the numerical reference"),
                        ("atlas", "error fields of every closed form over the (x, y) map"),
                        ("classify", "print map coordinates and applicable regimes")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="JSON config file")
        if name != "classify":
            s.add_argument("--out-dir", default=None, help="override output.dir")
        if name == "atlas":
            s.add_argument("--jobs", type=int, default=None,
                           help="worker processes (default: number of processors)")
    return p


def _fail(code: int, exc: BaseException) -> int:
    kind = {EXIT_CONFIG: "config", EXIT_PROPAGATION: "propagation", EXIT_IO: "io"}[code]
    print(json.dumps({"error": str(exc), "exception": type(exc).__name__,
                      "kind": kind, "exit_code": code}, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        if args.command == "evolve":
            files = cmd_evolve(cfg, args.out_dir)
        elif args.command == "compare":
            files = cmd_compare(cfg, args.out_dir)
        elif args.command == "atlas":
            if args.jobs is not None and args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            files = cmd_atlas(cfg, args.out_dir, args.jobs)
        else:
            print(json.dumps(cmd_classify(cfg), sort_keys=True, indent=2))
            return EXIT_OK
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except (QubitError, ArithmeticError, ValueError) as exc:
        return _fail(EXIT_PROPAGATION, exc)
    for name, path in sorted(files.items()):
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
