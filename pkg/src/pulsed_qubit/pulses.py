"""Single-pulse external potentials V(t).

Every pulse reports a finite support window ``(t_on, t_off)``; outside it V is
exactly zero. Pulse integrals use :func:`~pulsed_qubit.quadrature.adaptive_simpson`
where no exact form is cheaper.

Duration convention
-------------------
Only the rectangular pulse has an unambiguous duration. For the others the
duration is the *equivalent width*

    tau = integral(|V| dt) / max|V|

which equals the width of a rectangle of the same height and area. For a
single-signed pulse this is ``|integral(V dt)| / max|V|``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from .errors import DegeneratePulseError, NoPointwiseValueError
from .quadrature import DEFAULT_TOL, adaptive_simpson

GAUSSIAN_CUTOFF = 8.0  # support half-width in units of sigma
TAU_CONVENTION = "equivalent width: integral(|V| dt) / max|V|; exact width for rectangular pulses"

#: Returned by :meth:`Pulse.derivative_at` where V jumps.
NON_DIFFERENTIABLE = math.inf


class Pulse(ABC):
    """Common interface for the pulse shapes."""

    kind: str = ""

    @property
    @abstractmethod
    def support(self) -> Tuple[float, float]:
        """``(t_on, t_off)``; V is exactly zero outside."""

    @abstractmethod
    def value_at(self, t):
        """V(t). Accepts scalars or arrays."""

    @abstractmethod
    def derivative_at(self, t):
        """dV/dt, or :data:`NON_DIFFERENTIABLE` at a jump."""

    @abstractmethod
    def area(self, t_from: float = -math.inf, t_to: float = math.inf, tol: float = DEFAULT_TOL) -> float:
        """``integral V dt`` over the window (not divided by hbar)."""

    @abstractmethod
    def abs_area(self) -> float:
        """``integral |V| dt`` over the whole support."""

    @abstractmethod
    def peak(self) -> float:
        """``max |V|``."""

    @abstractmethod
    def stretched(self, factor: float) -> "Pulse":
        """Time dilation ``t -> factor * t`` with amplitudes unchanged."""

    @abstractmethod
    def scaled(self, factor: float) -> "Pulse":
        """Amplitude scaling ``V -> factor * V``."""

    @abstractmethod
    def shifted(self, dt: float) -> "Pulse":
        """Time translation ``V(t) -> V(t - dt)``."""

    def breakpoints(self) -> Tuple[float, ...]:
        """Times where V or its derivative may jump."""
        return self.support

    def integrated_strength(self, t_from: float = -math.inf, t_to: float = math.inf,
                            hbar: float = 1.0, tol: float = DEFAULT_TOL) -> float:
        """Action integral ``integral V dt / hbar`` over ``[t_from, t_to)``."""
        if t_from > t_to:
            raise ValueError("t_from must not exceed t_to")
        return self.area(t_from, t_to, tol) / hbar

    def duration_tau(self) -> float:
        """Pulse duration (see the module notes for non-rectangular shapes)."""
        peak = self.peak()
        if peak == 0:
            raise DegeneratePulseError(f"{self.kind} pulse is identically zero; duration undefined")
        return self.abs_area() / peak

    def _clip(self, t_from, t_to):
        t_on, t_off = self.support
        return max(t_from, t_on), min(t_to, t_off)


@dataclass(frozen=True)
class Rectangular(Pulse):
    """Constant ``v0`` on ``[t_start, t_start + width]``."""

    v0: float
    t_start: float
    width: float
    kind = "rectangular"

    def __post_init__(self):
        if not (math.isfinite(self.v0) and math.isfinite(self.t_start)):
            raise ValueError("rectangular pulse parameters must be finite")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError(f"width must be positive, got {self.width}")

    @property
    def support(self):
        return (self.t_start, self.t_start + self.width)

    def value_at(self, t):
        t_on, t_off = self.support
        t = np.asarray(t, dtype=float)
        out = np.where((t >= t_on) & (t <= t_off), self.v0, 0.0)
        return float(out) if out.ndim == 0 else out

    def derivative_at(self, t):
        t = np.asarray(t, dtype=float)
        edge = (t == self.support[0]) | (t == self.support[1])
        out = np.where(edge & (self.v0 != 0), NON_DIFFERENTIABLE, 0.0)
        return float(out) if out.ndim == 0 else out

    def area(self, t_from=-math.inf, t_to=math.inf, tol=DEFAULT_TOL):
        lo, hi = self._clip(t_from, t_to)
        return self.v0 * (hi - lo) if hi > lo else 0.0

    def abs_area(self):
        return abs(self.v0) * self.width

    def peak(self):
        return abs(self.v0)

    def duration_tau(self):
        return self.width

    def stretched(self, factor):
        return Rectangular(self.v0, self.t_start * factor, self.width * factor)

    def scaled(self, factor):
        return Rectangular(self.v0 * factor, self.t_start, self.width)

    def shifted(self, dt):
        return Rectangular(self.v0, self.t_start + dt, self.width)


@dataclass(frozen=True)
class Gaussian(Pulse):
    """``v_peak * exp(-(t - t_center)^2 / (2 sigma^2))``, truncated at 8 sigma.

    Beyond the cutoff the value is below ``1.3e-14`` of the peak and is set
    to exactly zero.
    """

    v_peak: float
    t_center: float
    sigma: float
    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.v_peak) and math.isfinite(self.t_center)):
            raise ValueError("gaussian pulse parameters must be finite")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def support(self):
        half = GAUSSIAN_CUTOFF * self.sigma
        return (self.t_center - half, self.t_center + half)

    def _inside(self, t):
        return np.abs(t - self.t_center) <= GAUSSIAN_CUTOFF * self.sigma

    def value_at(self, t):
        t = np.asarray(t, dtype=float)
        z = (t - self.t_center) / self.sigma
        out = np.where(self._inside(t), self.v_peak * np.exp(-0.5 * z * z), 0.0)
        return float(out) if out.ndim == 0 else out

    def derivative_at(self, t):
        t = np.asarray(t, dtype=float)
        z = (t - self.t_center) / self.sigma
        out = np.where(self._inside(t), -self.v_peak * z / self.sigma * np.exp(-0.5 * z * z), 0.0)
        return float(out) if out.ndim == 0 else out

    def area(self, t_from=-math.inf, t_to=math.inf, tol=DEFAULT_TOL):
        lo, hi = self._clip(t_from, t_to)
        if hi <= lo:
            return 0.0
        return adaptive_simpson(self.value_at, lo, hi, tol=tol, min_panels=16)

    def abs_area(self):
        return abs(self.area())

    def peak(self):
        return abs(self.v_peak)

    def stretched(self, factor):
        return Gaussian(self.v_peak, self.t_center * factor, self.sigma * factor)

    def scaled(self, factor):
        return Gaussian(self.v_peak * factor, self.t_center, self.sigma)

    def shifted(self, dt):
        return Gaussian(self.v_peak, self.t_center + dt, self.sigma)


@dataclass(frozen=True)
class DeltaKick(Pulse):
    """``V(t) = alpha_k * hbar * delta(t - t_k)``.

    ``alpha_k`` is already the dimensionless integrated strength. A delta has
    no pointwise value, so :meth:`value_at` and :meth:`derivative_at` raise.
    """

    alpha_k: float
    t_k: float
    kind = "delta_kick"

    def __post_init__(self):
        if not (math.isfinite(self.alpha_k) and math.isfinite(self.t_k)):
            raise ValueError("kick parameters must be finite")
        if self.t_k < 0:
            raise ValueError(f"t_k must be >= 0, got {self.t_k}")

    @property
    def support(self):
        return (self.t_k, self.t_k)

    def value_at(self, t):
        raise NoPointwiseValueError("a delta kick has no pointwise value; use integrated_strength")

    def derivative_at(self, t):
        raise NoPointwiseValueError("a delta kick has no derivative")

    def area(self, t_from=-math.inf, t_to=math.inf, tol=DEFAULT_TOL):
        raise NoPointwiseValueError("kick area depends on hbar; use integrated_strength")

    def integrated_strength(self, t_from=-math.inf, t_to=math.inf, hbar=1.0, tol=DEFAULT_TOL):
        if t_from > t_to:
            raise ValueError("t_from must not exceed t_to")
        return self.alpha_k if t_from <= self.t_k < t_to else 0.0

    def abs_area(self):
        raise NoPointwiseValueError("kick area depends on hbar; use integrated_strength")

    def peak(self):
        return math.inf

    def duration_tau(self):
        return 0.0

    def stretched(self, factor):
        return DeltaKick(self.alpha_k, self.t_k * factor)

    def scaled(self, factor):
        return DeltaKick(self.alpha_k * factor, self.t_k)

    def shifted(self, dt):
        return DeltaKick(self.alpha_k, self.t_k + dt)


@dataclass(frozen=True)
class Sampled(Pulse):
    """Piecewise-linear interpolation of ``(t, v)`` samples; zero outside their range."""

    samples: Tuple[Tuple[float, float], ...]
    kind = "sampled"
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple((float(t), float(v)) for t, v in self.samples)
        if len(pairs) < 2:
            raise ValueError("a sampled pulse needs at least two samples")
        t = np.array([p[0] for p in pairs])
        v = np.array([p[1] for p in pairs])
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("sample times and values must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "samples", pairs)
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_v", v)

    @property
    def support(self):
        return (float(self._t[0]), float(self._t[-1]))

    def breakpoints(self):
        return tuple(float(x) for x in self._t)

    def value_at(self, t):
        out = np.interp(t, self._t, self._v, left=0.0, right=0.0)
        return float(out) if np.ndim(out) == 0 else out

    def derivative_at(self, t):
        t = np.asarray(t, dtype=float)
        h = 1e-3 * float(np.min(np.diff(self._t)))
        fd = (np.interp(t + h, self._t, self._v, left=0.0, right=0.0)
              - np.interp(t - h, self._t, self._v, left=0.0, right=0.0)) / (2 * h)
        jump = ((t == self._t[0]) & (self._v[0] != 0)) | ((t == self._t[-1]) & (self._v[-1] != 0))
        out = np.where(jump, NON_DIFFERENTIABLE, fd)
        return float(out) if out.ndim == 0 else out

    def area(self, t_from=-math.inf, t_to=math.inf, tol=DEFAULT_TOL):
        lo, hi = self._clip(t_from, t_to)
        if hi <= lo:
            return 0.0
        inner = self._t[(self._t > lo) & (self._t < hi)]
        t = np.concatenate([[lo], inner, [hi]])
        v = self.value_at(t)
        # trapezoid rule is exact on linear pieces
        return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))

    def abs_area(self):
        t, v = self._t, self._v
        dt = np.diff(t)
        v0, v1 = v[:-1], v[1:]
        same = v0 * v1 >= 0
        total = np.sum(np.where(same, 0.5 * np.abs(v0 + v1) * dt, 0.0))
        # sign change inside a segment: two triangles meeting at the zero
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = 0.5 * dt * (v0 * v0 + v1 * v1) / (np.abs(v0) + np.abs(v1))
        total += np.sum(np.where(same, 0.0, cross))
        return float(total)

    def peak(self):
        return float(np.max(np.abs(self._v)))

    def stretched(self, factor):
        return Sampled(tuple((t * factor, v) for t, v in self.samples))

    def scaled(self, factor):
        return Sampled(tuple((t, v * factor) for t, v in self.samples))

    def shifted(self, dt):
        return Sampled(tuple((t + dt, v) for t, v in self.samples))


PulseSpec = Union[Rectangular, Gaussian, DeltaKick, Sampled]


def zero_pulse(width: float = 1.0) -> Rectangular:
    """``V == 0`` represented as a zero-height rectangle of the given width."""
    return Rectangular(0.0, 0.0, width)
