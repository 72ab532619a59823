"""Closed-form propagators for the limiting regimes of a simply pulsed qubit.

None of these functions checks whether its approximation is *valid*; that is
the job of :mod:`pulsed_qubit.regime_map`. The only enforced precondition is
structural (the adiabatic form needs ``V(t) = V(0)``, the kicked form needs
the kick to have happened).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .core import SystemParams, Unitary2, expm_pauli
from .errors import NoPointwiseValueError, PreconditionError
from .propagator import PropagationSettings, refine_to_tolerance
from .pulses import DeltaKick, Gaussian, Pulse, Sampled
from .quadrature import DEFAULT_TOL, adaptive_simpson


class RegimeKind(str, enum.Enum):
    DEGENERATE = "degenerate"
    DEGENERATE_EXTENDED = "degenerate_extended"
    PERTURBATIVE = "perturbative"
    ZERO_POTENTIAL = "zero_potential"
    ADIABATIC = "adiabatic"
    KICKED = "kicked"


def _panels(length: float, rate: float) -> int:
    """Initial Simpson panels: about four per radian of phase, at least 16."""
    return int(min(max(16, math.ceil(4 * length * rate)), 2_000_000))


@dataclass(frozen=True)
class PhaseIntegrals:
    """Action ``alpha = int V dt / hbar`` and ``theta = int Omega dt / hbar`` up to ``t``.

    ``omega_at`` evaluates ``Omega(t) = sqrt(V(t)^2 + (dE/2)^2)``. For a kick,
    the delta contributes ``|alpha_k|`` to ``theta`` (the zero-width limit of
    the integral of ``sqrt(V^2 + (dE/2)^2)``).
    """

    alpha: float
    theta: float
    omega_at: Callable[[float], float]


def phase_integrals(params: SystemParams, pulse: Pulse, t: float,
                    tol: float = DEFAULT_TOL) -> PhaseIntegrals:
    hbar = params.hbar
    half = 0.5 * params.delta_e
    alpha = pulse.integrated_strength(0.0, t, hbar, tol=tol)

    if isinstance(pulse, DeltaKick):
        def omega_at(s):
            return half + 0.0 * np.asarray(s, dtype=float)
        theta = half * t / hbar + abs(alpha)
        return PhaseIntegrals(alpha, theta, omega_at)

    def omega_at(s):
        v = pulse.value_at(s)
        return np.sqrt(v * v + half * half)

    t_on, t_off = pulse.support
    lo, hi = max(0.0, t_on), min(t, t_off)
    if hi > lo:
        if pulse.peak() == 0:
            inside = half * (hi - lo)
        else:
            cuts = pulse.breakpoints()
            inside = adaptive_simpson(omega_at, lo, hi, tol=tol * hbar, breakpoints=cuts,
                                      min_panels=_panels(hi - lo, 1.0 / _tau_or(pulse, hi - lo)))
        outside = half * (t - (hi - lo))
    else:
        inside, outside = 0.0, half * t
    theta = (inside + outside) / hbar
    return PhaseIntegrals(alpha, theta, omega_at)


def _tau_or(pulse: Pulse, default: float) -> float:
    try:
        tau = pulse.duration_tau()
    except Exception:
        return default
    return tau if tau > 0 else default


def _rotation_x(angle: float) -> np.ndarray:
    """``[[cos a, -i sin a], [-i sin a, cos a]]``."""
    return expm_pauli(0.0, angle, 0.0, 0.0)


def degenerate_u(pulse: Pulse, t: float, hbar: float = 1.0) -> Unitary2:
    """Degenerate-qubit propagator: a pure sigma_x rotation by the action integral."""
    alpha = pulse.integrated_strength(0.0, t, hbar)
    return Unitary2(_rotation_x(alpha))


def degenerate_extended_u(params: SystemParams, pulse: Pulse, t: float,
                          tol: float = DEFAULT_TOL) -> Unitary2:
    """Degenerate form with ``alpha`` replaced by ``theta``.

    ``theta`` is non-negative by construction; the rotation takes the sign of
    the action integral so that flipping ``V -> -V`` conjugates the result by
    sigma_z, as it does the exact propagator.
    """
    ph = phase_integrals(params, pulse, t, tol)
    sign = -1.0 if ph.alpha < 0 else 1.0
    return Unitary2(_rotation_x(sign * ph.theta))


def zero_potential_u(params: SystemParams, t: float) -> Unitary2:
    """Free evolution ``diag(exp(i t dE / 2 hbar), exp(-i t dE / 2 hbar))``."""
    phase = t * params.delta_e / (2 * params.hbar)
    return Unitary2(np.diag([np.exp(1j * phase), np.exp(-1j * phase)]))


def perturbative_u(params: SystemParams, pulse: Pulse, t: float,
                   tol: float = DEFAULT_TOL) -> Unitary2:
    """First-order (in V) propagator.

    Diagonal entries are the free phases; the off-diagonals are
    ``-(i/hbar) int_0^t exp(+-i (t - 2t') dE / 2 hbar) V(t') dt'``.
    The integral is taken up to ``t``, which matches the infinite upper limit
    once the pulse is over. Only unitary to first order in the action.
    """
    hbar = params.hbar
    w = params.delta_e / hbar
    u = zero_potential_u(params, t).matrix.copy()
    if isinstance(pulse, DeltaKick):
        if 0.0 <= pulse.t_k < t or pulse.t_k == t:
            phase = (t - 2 * pulse.t_k) * w / 2
            u[0, 1] = -1j * pulse.alpha_k * np.exp(1j * phase)
            u[1, 0] = -1j * pulse.alpha_k * np.exp(-1j * phase)
        return Unitary2(u)

    t_on, t_off = pulse.support
    lo, hi = max(0.0, t_on), min(t, t_off)
    if hi <= lo or pulse.peak() == 0:
        return Unitary2(u)

    def integrand(s):
        return np.exp(-1j * w * s) * pulse.value_at(s)

    rate = max(w, 1.0 / _tau_or(pulse, hi - lo))
    # int exp(-i w t') V dt'; the t-dependent phase is factored out
    f = adaptive_simpson(integrand, lo, hi, tol=tol * hbar, breakpoints=pulse.breakpoints(),
                         min_panels=_panels(hi - lo, rate)) / hbar
    u[0, 1] = -1j * np.exp(0.5j * w * t) * f
    u[1, 0] = -1j * np.exp(-0.5j * w * t) * np.conj(f)
    return Unitary2(u)


def _value_or_zero(pulse: Pulse, t: float) -> float:
    try:
        return pulse.value_at(t)
    except NoPointwiseValueError:
        if t == pulse.t_k:
            raise PreconditionError("pulse does not return to initial value: evaluated on the kick")
        return 0.0


def adiabatic_u(params: SystemParams, pulse: Pulse, t: float,
                tol: float = DEFAULT_TOL) -> Unitary2:
    """Adiabatic propagator at a time where the pulse is back at its initial level.

    Raises :class:`PreconditionError` when ``|V(t) - V(0)|`` exceeds
    ``1e-9 max|V|``.
    """
    v_t = _value_or_zero(pulse, t)
    v_0 = _value_or_zero(pulse, 0.0)
    peak = 0.0 if isinstance(pulse, DeltaKick) else pulse.peak()
    if abs(v_t - v_0) > 1e-9 * peak:
        raise PreconditionError(
            f"pulse does not return to initial value: V({t:g}) = {v_t:g}, V(0) = {v_0:g}"
        )
    ph = phase_integrals(params, pulse, t, tol)
    half = 0.5 * params.delta_e
    omega = math.hypot(v_t, half)
    if omega == 0:
        return Unitary2(np.eye(2, dtype=complex))
    s, c = math.sin(ph.theta), math.cos(ph.theta)
    return Unitary2(np.array([
        [c + 1j * half / omega * s, -1j * v_t / omega * s],
        [-1j * v_t / omega * s, c - 1j * half / omega * s],
    ]))


def kicked_u(params: SystemParams, kick: DeltaKick, t: float) -> Unitary2:
    """Free evolution to ``t_k``, instantaneous sigma_x rotation, free evolution to ``t``."""
    if t < kick.t_k:
        raise PreconditionError("kick not yet applied; use zero_potential_u")
    w = params.delta_e / (2 * params.hbar)
    a = kick.alpha_k
    c, s = math.cos(a), math.sin(a)
    return Unitary2(np.array([
        [np.exp(1j * w * t) * c, -1j * np.exp(1j * w * (t - 2 * kick.t_k)) * s],
        [-1j * np.exp(-1j * w * (t - 2 * kick.t_k)) * s, np.exp(-1j * w * t) * c],
    ]))


def equivalent_kick(pulse: Pulse, hbar: float = 1.0, tol: float = DEFAULT_TOL) -> DeltaKick:
    """Kick with the pulse's full integrated strength, placed at its centroid.

    The centroid is ``int t V dt / int V dt`` (the support midpoint when the
    area vanishes), clamped to ``t >= 0``.
    """
    if isinstance(pulse, DeltaKick):
        return pulse
    alpha = pulse.integrated_strength(hbar=hbar, tol=tol)
    t_on, t_off = pulse.support
    if isinstance(pulse, Gaussian):
        center = pulse.t_center
    elif alpha != 0:
        moment = adaptive_simpson(lambda s: s * pulse.value_at(s), t_on, t_off,
                                  tol=tol * max(1.0, abs(t_off)), breakpoints=pulse.breakpoints())
        center = moment / (alpha * hbar)
    else:
        center = 0.5 * (t_on + t_off)
    return DeltaKick(alpha, max(0.0, center))


def closed_form(kind: RegimeKind, params: SystemParams, pulse: Pulse, t: float,
                tol: float = DEFAULT_TOL) -> Unitary2:
    """Evaluate one regime's propagator for an arbitrary pulse.

    Non-kick pulses are mapped to :func:`equivalent_kick` for the kicked form.
    """
    kind = RegimeKind(kind)
    if kind is RegimeKind.DEGENERATE:
        return degenerate_u(pulse, t, params.hbar)
    if kind is RegimeKind.DEGENERATE_EXTENDED:
        return degenerate_extended_u(params, pulse, t, tol)
    if kind is RegimeKind.PERTURBATIVE:
        return perturbative_u(params, pulse, t, tol)
    if kind is RegimeKind.ZERO_POTENTIAL:
        return zero_potential_u(params, t)
    if kind is RegimeKind.ADIABATIC:
        return adiabatic_u(params, pulse, t, tol)
    kick = equivalent_kick(pulse, params.hbar, tol)
    if t < kick.t_k:
        return zero_potential_u(params, t)
    return kicked_u(params, kick, t)


def population_transfer(u: Unitary2, initial_state_index: int = 1) -> Tuple[float, float]:
    """``(p_stay, p_transfer)`` for a system starting in basis state 1 or 2."""
    if initial_state_index not in (1, 2):
        raise ValueError("initial_state_index must be 1 or 2")
    i = initial_state_index - 1
    j = 1 - i
    m = u.matrix
    return float(abs(m[i, i]) ** 2), float(abs(m[j, i]) ** 2)


def kick_convergence_study(params: SystemParams, alpha_k: float, t_k: float,
                           widths: Sequence[float], target_tol: float = 1e-11,
                           settings: PropagationSettings = PropagationSettings()
                           ) -> List[Tuple[float, float]]:
    """Frobenius error of :func:`kicked_u` against finite-width Gaussian pulses.

    Each Gaussian has equivalent width ``w`` (``sigma = w / sqrt(2 pi)``),
    integrated strength ``alpha_k`` and centre ``t_k``. All errors are taken
    at the end of the widest pulse's support; free evolution afterwards is
    common to both sides and does not change the distance.
    """
    widths = [float(w) for w in widths]
    if any(w <= 0 for w in widths):
        raise ValueError("widths must be positive")
    if any(b >= a for a, b in zip(widths, widths[1:])):
        raise ValueError("widths must be strictly decreasing")
    sigmas = [w / math.sqrt(2 * math.pi) for w in widths]
    if t_k - 8 * sigmas[0] < 0:
        raise ValueError("t_k too early: the widest pulse would start before t = 0")
    t_end = t_k + 8 * sigmas[0]
    reference = kicked_u(params, DeltaKick(alpha_k, t_k), t_end)
    out = []
    for w, sigma in zip(widths, sigmas):
        g = Gaussian(alpha_k * params.hbar / w, t_k, sigma)
        u, _ = refine_to_tolerance(params, g, t_end, target_tol, settings, record=False)
        out.append((w, u.distance(reference)))
    return out
