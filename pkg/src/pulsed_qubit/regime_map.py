"""Qubit-map coordinates, regime classification and the empirical atlas.

The map has two dimensionless axes:

* ``x = int V dt / hbar`` over the whole pulse (field phase),
* ``y = dE tau / (2 hbar)`` (splitting phase), with ``tau`` from
  :meth:`Pulse.duration_tau`.

"Much less than" is a configurable ratio (default 0.1). A regime's *margin*
is the quantity that must stay below 1 for the regime to apply.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .core import SystemParams, Unitary2
from .errors import NoPointwiseValueError, PreconditionError, QubitError
from .propagator import PropagationSettings, refine_to_tolerance
from .pulses import NON_DIFFERENTIABLE, DeltaKick, Gaussian, Pulse, Rectangular, Sampled
from .quadrature import DEFAULT_TOL
from .regimes import RegimeKind, closed_form

TWO_PI = 2 * math.pi
DEFAULT_RATIO = 0.1


@dataclass(frozen=True)
class MapCoordinates:
    x: float
    y: float

    def in_units_of_2pi(self) -> Tuple[float, float]:
        return self.x / TWO_PI, self.y / TWO_PI


@dataclass(frozen=True)
class RegimeReport:
    coords: MapCoordinates
    ratio: float
    margins: Dict[RegimeKind, float]
    applicable: FrozenSet[RegimeKind]
    adiabatic_pointwise: float
    central: bool
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {
            "coords": {"x": self.coords.x, "y": self.coords.y,
                       "x_over_2pi": self.coords.x / TWO_PI, "y_over_2pi": self.coords.y / TWO_PI},
            "ratio": self.ratio,
            "applicable": sorted(k.value for k in self.applicable),
            "margins": {k.value: num(v) for k, v in sorted(self.margins.items(), key=lambda kv: kv[0].value)},
            "adiabatic_pointwise": num(self.adiabatic_pointwise),
            "central": self.central,
            "notes": list(self.notes),
        }


def map_coordinates(params: SystemParams, pulse: Pulse, tol: float = DEFAULT_TOL) -> MapCoordinates:
    x = pulse.integrated_strength(hbar=params.hbar, tol=tol)
    y = params.delta_e * pulse.duration_tau() / (2 * params.hbar)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("pulse has no finite integrated strength")
    return MapCoordinates(x, y)


def adiabaticity_ratio(params: SystemParams, pulse: Pulse, t):
    """Pointwise ``hbar |dV/dt| dE / (V^2 + (dE/2)^2)^(3/2)``.

    Returns ``inf`` (violated) where the pulse is not differentiable and for
    delta kicks. Accepts scalar or array ``t``.
    """
    if isinstance(pulse, DeltaKick):
        return math.inf
    v = np.asarray(pulse.value_at(t), dtype=float)
    dv = np.asarray(pulse.derivative_at(t), dtype=float)
    num = params.hbar * np.abs(dv) * params.delta_e
    den = (v * v + 0.25 * params.delta_e ** 2) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(num == 0, 0.0, num / den)
    out = np.where(np.isinf(dv) & (params.delta_e > 0), math.inf, out)
    return float(out) if out.ndim == 0 else out


def max_adiabaticity_ratio(params: SystemParams, pulse: Pulse, samples: int = 4001) -> float:
    """Worst-case adiabaticity ratio over the pulse support.

    Smooth shapes are scanned on a uniform grid; sampled pulses are also
    checked at every segment midpoint, where the slope is exact.
    """
    if isinstance(pulse, (DeltaKick, Rectangular)):
        return math.inf
    t_on, t_off = pulse.support
    t = np.linspace(t_on, t_off, samples)
    if isinstance(pulse, Sampled):
        nodes = np.asarray(pulse.breakpoints())
        t = np.concatenate([t, 0.5 * (nodes[1:] + nodes[:-1])])
    return float(np.max(adiabaticity_ratio(params, pulse, t)))


def classify(params: SystemParams, pulse: Pulse, ratio: float = DEFAULT_RATIO,
             tol: float = DEFAULT_TOL) -> RegimeReport:
    """Place a pulse on the map and list the closed forms expected to hold."""
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    c = map_coordinates(params, pulse, tol)
    ax, y = abs(c.x), c.y
    notes = []
    inf = math.inf

    def frac(num, den):
        if num == 0:
            return 0.0
        return num / den if den > 0 else inf

    margins = {
        RegimeKind.PERTURBATIVE: ax / (ratio * TWO_PI),
        RegimeKind.KICKED: y / (ratio * TWO_PI),
        RegimeKind.DEGENERATE: max(frac(y, ratio * ax), frac(y * y, ratio * ax)),
        RegimeKind.DEGENERATE_EXTENDED: frac(y, ax) if ax > 0 or y > 0 else 1.0,
        RegimeKind.ZERO_POTENTIAL: 0.0 if c.x == 0 else inf,
    }
    pointwise = max_adiabaticity_ratio(params, pulse)
    if isinstance(pulse, Rectangular):
        notes.append("non-differentiable edges")
    elif isinstance(pulse, DeltaKick):
        notes.append("delta kick is not differentiable")
    margins[RegimeKind.ADIABATIC] = pointwise / ratio
    applicable = frozenset(k for k, m in margins.items() if m < 1)
    lo, hi = ratio * TWO_PI, TWO_PI / ratio
    central = not applicable and lo <= ax <= hi and lo <= y <= hi
    for k, m in margins.items():
        if 0.5 <= m < 2 and math.isfinite(m):
            notes.append(f"{k.value} near its boundary (margin {m:.3g})")
    return RegimeReport(c, ratio, margins, applicable, pointwise, central, tuple(notes))


# --------------------------------------------------------------------- atlas

FAMILIES = ("gaussian", "rectangular")


@dataclass(frozen=True)
class AtlasSpec:
    """Grid specification. Axis bounds are given in units of 2 pi."""

    x_min: float = 1e-2
    x_max: float = 1e2
    y_min: float = 1e-2
    y_max: float = 1e2
    nx: int = 48
    ny: int = 48
    family: str = "gaussian"
    delta_e: float = 1.0
    hbar: float = 1.0
    ratio: float = DEFAULT_RATIO
    refine_tol: float = 1e-8
    quad_tol: float = 1e-10
    step_count: int = 32

    def __post_init__(self):
        for name in ("x_min", "x_max", "y_min", "y_max"):
            v = getattr(self, name)
            if not (1e-3 <= v <= 1e3):
                raise ValueError(f"{name} must lie in [1e-3, 1e3] (units of 2 pi), got {v}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("axis minimum exceeds maximum")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}; a kick family has y = 0 and cannot span the grid")
        if not self.delta_e > 0:
            raise ValueError("the atlas needs delta_e > 0 to reach y > 0")

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        x = TWO_PI * np.geomspace(self.x_min, self.x_max, self.nx)
        y = TWO_PI * np.geomspace(self.y_min, self.y_max, self.ny)
        return x, y

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.delta_e, self.hbar)


def atlas_pulse(spec: AtlasSpec, x: float, y: float) -> Pulse:
    """Pulse of the atlas family with map coordinates ``(x, y)``, starting at ``t = 0``."""
    tau = 2 * y * spec.hbar / spec.delta_e
    amplitude = x * spec.hbar / tau
    if spec.family == "rectangular":
        return Rectangular(amplitude, 0.0, tau)
    sigma = tau / math.sqrt(TWO_PI)
    return Gaussian(amplitude, 8 * sigma, sigma)


def atlas_time(spec: AtlasSpec, pulse: Pulse) -> float:
    """End of the pulse support plus one free-evolution period."""
    return pulse.support[1] + TWO_PI * spec.hbar / spec.delta_e


def _transfer(m: np.ndarray) -> float:
    # P2 of the normalized image of state 1; keeps non-unitary forms in [0, 1]
    col = m[:, 0]
    norm = float(np.sum(np.abs(col) ** 2))
    return float(abs(col[1]) ** 2 / norm) if norm > 0 else math.nan


def regime_errors(params: SystemParams, pulse: Pulse, t: float, refine_tol: float = 1e-8,
                  quad_tol: float = 1e-10, step_count: int = 32) -> Dict[str, Dict[str, float]]:
    """Matrix and transfer errors of every closed form against the refined propagator.

    Invalid entries are NaN: all of them when the numerical reference fails,
    a single regime when its closed form cannot be evaluated.
    """
    matrix_err = {k.value: math.nan for k in RegimeKind}
    transfer_err = dict(matrix_err)
    try:
        ref, _ = refine_to_tolerance(params, pulse, t, refine_tol,
                                     PropagationSettings(step_count=step_count), record=False)
    except QubitError:
        return {"matrix": matrix_err, "transfer": transfer_err, "valid": False}
    p2_ref = _transfer(ref.matrix)
    for kind in RegimeKind:
        try:
            u = closed_form(kind, params, pulse, t, quad_tol)
        except (PreconditionError, NoPointwiseValueError, ArithmeticError):
            continue
        matrix_err[kind.value] = u.distance(ref)
        transfer_err[kind.value] = abs(_transfer(u.matrix) - p2_ref)
    return {"matrix": matrix_err, "transfer": transfer_err, "valid": True}


def atlas_cell(spec: AtlasSpec, x: float, y: float) -> Dict[str, Dict[str, float]]:
    """:func:`regime_errors` for the atlas pulse at map point ``(x, y)``."""
    pulse = atlas_pulse(spec, x, y)
    return regime_errors(spec.params, pulse, atlas_time(spec, pulse), spec.refine_tol,
                         spec.quad_tol, spec.step_count)


def _row(args):
    spec, xs, y = args
    return [atlas_cell(spec, x, y) for x in xs]


@dataclass(frozen=True, eq=False)
class AtlasGrid:
    """Error fields on the ``(y, x)`` grid; arrays are indexed ``[iy, ix]``."""

    spec: AtlasSpec
    x_axis: np.ndarray
    y_axis: np.ndarray
    errors: Dict[RegimeKind, np.ndarray]
    transfer_errors: Dict[RegimeKind, np.ndarray]
    valid: np.ndarray

    @property
    def invalid_count(self) -> int:
        return int(np.count_nonzero(~self.valid))

    def min_error(self) -> np.ndarray:
        return np.nanmin(np.stack([self.errors[k] for k in RegimeKind]), axis=0)


def build_atlas(spec: AtlasSpec = AtlasSpec(), jobs: Optional[int] = None) -> AtlasGrid:
    """Evaluate every closed form against the refined numerical propagator on the grid.

    Rows are distributed over ``jobs`` worker processes (default: CPU count);
    assembly order is fixed, so the result does not depend on scheduling.
    """
    xs, ys = spec.axes()
    jobs = jobs or os.cpu_count() or 1
    tasks = [(spec, xs, y) for y in ys]
    if jobs == 1:
        rows = [_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_row, tasks))
    shape = (len(ys), len(xs))
    errors = {k: np.full(shape, math.nan) for k in RegimeKind}
    transfer = {k: np.full(shape, math.nan) for k in RegimeKind}
    valid = np.zeros(shape, dtype=bool)
    for iy, row in enumerate(rows):
        for ix, cell in enumerate(row):
            valid[iy, ix] = cell["valid"]
            for k in RegimeKind:
                errors[k][iy, ix] = cell["matrix"][k.value]
                transfer[k][iy, ix] = cell["transfer"][k.value]
    return AtlasGrid(spec, xs, ys, errors, transfer, valid)
