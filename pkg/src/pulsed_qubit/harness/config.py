"""JSON run configuration.

A config is a single JSON object. Unknown keys anywhere raise
:class:`~pulsed_qubit.errors.ConfigError`; so does any value that violates
the invariants of the type it is parsed into.

Example::

    {
      "system": {"delta_e": 1.0, "hbar": 1.0},
      "pulse": {"kind": "gaussian", "v_peak": 0.5, "t_center": 8.0, "sigma": 1.0},
      "t_final": 16.0,
      "initial_state": {"a1": [1.0, 0.0], "a2": [0.0, 0.0]},
      "propagation": {"step_count": 64, "tolerance": 1e-10, "record_stride": 64},
      "regimes_to_compare": ["perturbative", "kicked"],
      "thresholds": {"ratio": 0.1},
      "output": {"dir": "out", "prefix": "run", "svg": true}
    }

Atlas runs use an ``"atlas"`` section instead of ``"pulse"``/``"t_final"``
(its keys are the fields of :class:`~pulsed_qubit.regime_map.AtlasSpec`).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..core import Complex2State, SystemParams
from ..errors import ConfigError
from ..propagator import PropagationSettings
from ..pulses import DeltaKick, Gaussian, Pulse, Rectangular, Sampled
from ..regime_map import DEFAULT_RATIO, AtlasSpec
from ..regimes import RegimeKind

UNITS_NOTE = (
    "natural units: energies, potentials and times are plain numbers with hbar "
    "set by system.hbar (default 1); phases are in radians"
)

_PULSE_FIELDS = {
    "rectangular": ("v0", "t_start", "width"),
    "gaussian": ("v_peak", "t_center", "sigma"),
    "delta_kick": ("alpha_k", "t_k"),
    "sampled": ("times", "values"),
}
_TOP_KEYS = {"system", "pulse", "t_final", "initial_state", "propagation",
             "regimes_to_compare", "thresholds", "output", "atlas", "units_note"}


def _check_keys(section: str, data: Any, allowed, required=()) -> Mapping:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{section}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {unknown}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigError(f"{section}: missing key(s) {missing}")
    return data


def _number(section: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{section}: must be finite")
    return float(value)


def _integer(section: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}: expected an integer, got {value!r}")
    return value


def _build(section: str, factory, *args, **kwargs):
    # turn constructor validation failures into config errors
    try:
        return factory(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def parse_pulse(data: Any) -> Pulse:
    data = _check_keys("pulse", data, {"kind", *sum(_PULSE_FIELDS.values(), ())}, ("kind",))
    kind = data["kind"]
    if kind not in _PULSE_FIELDS:
        raise ConfigError(f"pulse.kind must be one of {sorted(_PULSE_FIELDS)}, got {kind!r}")
    names = _PULSE_FIELDS[kind]
    _check_keys(f"pulse ({kind})", data, ("kind", *names), names)
    if kind == "sampled":
        times, values = data["times"], data["values"]
        if not isinstance(times, list) or not isinstance(values, list) or len(times) != len(values):
            raise ConfigError("pulse.times and pulse.values must be lists of equal length")
        pairs = tuple((_number("pulse.times", t), _number("pulse.values", v))
                      for t, v in zip(times, values))
        return _build("pulse", Sampled, pairs)
    args = [_number(f"pulse.{n}", data[n]) for n in names]
    cls = {"rectangular": Rectangular, "gaussian": Gaussian, "delta_kick": DeltaKick}[kind]
    return _build("pulse", cls, *args)


def pulse_to_dict(pulse: Pulse) -> Dict[str, Any]:
    if isinstance(pulse, Sampled):
        return {"kind": "sampled", "times": [t for t, _ in pulse.samples],
                "values": [v for _, v in pulse.samples]}
    out = {"kind": pulse.kind}
    for name in _PULSE_FIELDS[pulse.kind]:
        out[name] = getattr(pulse, name)
    return out


def _parse_complex(section: str, value: Any) -> complex:
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(section, value[0]), _number(section, value[1]))
    return complex(_number(section, value), 0.0)


def parse_state(data: Any) -> Complex2State:
    data = _check_keys("initial_state", data, ("a1", "a2"), ("a1", "a2"))
    a1 = _parse_complex("initial_state.a1", data["a1"])
    a2 = _parse_complex("initial_state.a2", data["a2"])
    return _build("initial_state", Complex2State, a1, a2)


def state_to_dict(s: Complex2State) -> Dict[str, Any]:
    return {"a1": [s.a1.real, s.a1.imag], "a2": [s.a2.real, s.a2.imag]}


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    prefix: str = "run"
    svg: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI command needs. ``pulse`` is ``None`` for atlas-only configs."""

    system: SystemParams = SystemParams(1.0)
    pulse: Optional[Pulse] = None
    t_final: Optional[float] = None
    initial_state: Complex2State = Complex2State(1.0, 0.0)
    propagation: PropagationSettings = PropagationSettings()
    regimes_to_compare: Optional[Tuple[RegimeKind, ...]] = None
    ratio: float = DEFAULT_RATIO
    output: OutputSpec = OutputSpec()
    atlas: Optional[AtlasSpec] = None

    def require_pulse(self) -> Pulse:
        if self.pulse is None:
            raise ConfigError("this command needs a 'pulse' section")
        return self.pulse

    def require_time(self) -> float:
        if self.t_final is None:
            raise ConfigError("this command needs 't_final'")
        return self.t_final

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "units_note": UNITS_NOTE,
            "system": {"delta_e": self.system.delta_e, "hbar": self.system.hbar},
            "initial_state": state_to_dict(self.initial_state),
            "propagation": dataclasses.asdict(self.propagation),
            "thresholds": {"ratio": self.ratio},
            "output": dataclasses.asdict(self.output),
        }
        if self.pulse is not None:
            out["pulse"] = pulse_to_dict(self.pulse)
        if self.t_final is not None:
            out["t_final"] = self.t_final
        if self.regimes_to_compare is not None:
            out["regimes_to_compare"] = [k.value for k in self.regimes_to_compare]
        if self.atlas is not None:
            out["atlas"] = dataclasses.asdict(self.atlas)
        return out


def parse_config(data: Any) -> RunConfig:
    data = _check_keys("config", data, _TOP_KEYS)
    kw: Dict[str, Any] = {}

    if "system" in data:
        sysd = _check_keys("system", data["system"], ("delta_e", "hbar"), ("delta_e",))
        kw["system"] = _build("system", SystemParams, _number("system.delta_e", sysd["delta_e"]),
                              _number("system.hbar", sysd.get("hbar", 1.0)))
    elif "pulse" in data:
        raise ConfigError("config: a 'system' section is required with a pulse")
    else:
        kw["system"] = SystemParams(1.0)
    if "pulse" in data:
        kw["pulse"] = parse_pulse(data["pulse"])
    if "t_final" in data:
        t = _number("t_final", data["t_final"])
        if not t > 0:
            raise ConfigError("t_final must be positive")
        kw["t_final"] = t
    if "initial_state" in data:
        kw["initial_state"] = parse_state(data["initial_state"])
    if "propagation" in data:
        p = _check_keys("propagation", data["propagation"], ("step_count", "tolerance", "record_stride"))
        args = {}
        if "step_count" in p:
            args["step_count"] = _integer("propagation.step_count", p["step_count"])
        if "tolerance" in p:
            args["tolerance"] = _number("propagation.tolerance", p["tolerance"])
        if "record_stride" in p:
            args["record_stride"] = _integer("propagation.record_stride", p["record_stride"])
        kw["propagation"] = _build("propagation", PropagationSettings, **args)
    if data.get("regimes_to_compare") is not None:
        names = data["regimes_to_compare"]
        if not isinstance(names, list):
            raise ConfigError("regimes_to_compare must be a list")
        kinds = []
        for n in names:
            try:
                kinds.append(RegimeKind(n))
            except ValueError:
                raise ConfigError(f"unknown regime {n!r}; choose from {[k.value for k in RegimeKind]}") from None
        kw["regimes_to_compare"] = tuple(kinds)
    if "thresholds" in data:
        th = _check_keys("thresholds", data["thresholds"], ("ratio",))
        if "ratio" in th:
            r = _number("thresholds.ratio", th["ratio"])
            if not r > 0:
                raise ConfigError("thresholds.ratio must be positive")
            kw["ratio"] = r
    if "output" in data:
        o = _check_keys("output", data["output"], ("dir", "prefix", "svg"))
        for key, typ in (("dir", str), ("prefix", str), ("svg", bool)):
            if key in o and not isinstance(o[key], typ):
                raise ConfigError(f"output.{key} must be of type {typ.__name__}")
        kw["output"] = OutputSpec(**o)
    if "atlas" in data:
        a = _check_keys("atlas", data["atlas"], [f.name for f in dataclasses.fields(AtlasSpec)])
        args = {}
        for f in dataclasses.fields(AtlasSpec):
            if f.name not in a:
                continue
            if f.name == "family":
                args[f.name] = a[f.name]
            elif f.name in ("nx", "ny", "step_count"):
                args[f.name] = _integer(f"atlas.{f.name}", a[f.name])
            else:
                args[f.name] = _number(f"atlas.{f.name}", a[f.name])
        if "delta_e" not in a:
            args["delta_e"] = kw["system"].delta_e
        if "hbar" not in a:
            args["hbar"] = kw["system"].hbar
        if "ratio" not in a and "ratio" in kw:
            args["ratio"] = kw["ratio"]
        kw["atlas"] = _build("atlas", AtlasSpec, **args)
    return RunConfig(**kw)


def loads(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_config(data)


def load(path) -> RunConfig:
    """Read and parse a UTF-8 JSON config file. I/O errors propagate as ``OSError``."""
    return loads(Path(path).read_text(encoding="utf-8"))
