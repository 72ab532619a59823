"""Time-ordered evolution operator by a product of exact 2x2 step exponentials.

Each step of length ``h`` contributes ``exp(-i H(t_mid) h / hbar)``, evaluated
in closed form through the Pauli expansion, and later steps multiply from the
left. Every factor is exactly unitary, so the only discretization error is the
commutator (time-ordering) error, which is second order in ``h``.

Step edges are placed on every breakpoint of the pulse (support edges, sample
times, kick time). Segments where V is identically zero are free evolution and
are exact for any step length; they are stepped only as finely as needed for a
readable time series. A delta kick is inserted as the exact jump
``exp(-i alpha_k sigma_x)`` between the free segments around ``t_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import IDENTITY, UNITARITY_TOL, Complex2State, SystemParams, Unitary2
from .errors import DegeneratePulseError, PropagationDivergedError, RefinementExhaustedError
from .pulses import DeltaKick, Pulse

MAX_STEPS = 2 ** 22


@dataclass(frozen=True)
class PropagationSettings:
    """Discretization controls.

    ``step_count`` is the number of steps per characteristic time of the
    problem (see :func:`characteristic_time`), not an absolute count; the
    total grows with ``t_final``.
    """

    step_count: int = 64
    tolerance: float = 1e-10
    record_stride: int = 1

    def __post_init__(self):
        if int(self.step_count) != self.step_count or self.step_count < 16:
            raise ValueError(f"step_count must be an integer >= 16, got {self.step_count}")
        if not (0 < self.tolerance <= 1e-4):
            raise ValueError(f"tolerance must lie in (0, 1e-4], got {self.tolerance}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be an integer >= 1, got {self.record_stride}")

    def doubled(self) -> "PropagationSettings":
        return PropagationSettings(2 * self.step_count, self.tolerance, self.record_stride)


@dataclass(frozen=True, eq=False)
class EvolutionRecord:
    """Sampled trajectory ``U(t)`` (and optionally the state) from ``t = 0``.

    ``propagators`` has shape ``(n, 2, 2)`` and ``states`` shape ``(n, 2)``.
    """

    times: np.ndarray
    propagators: np.ndarray
    states: Optional[np.ndarray] = None
    step_total: int = 0

    @property
    def final(self) -> Unitary2:
        return Unitary2(self.propagators[-1])

    def propagator(self, i: int) -> Unitary2:
        return Unitary2(self.propagators[i])

    def state(self, i: int) -> Complex2State:
        if self.states is None:
            raise ValueError("record was produced without an initial state")
        return Complex2State.from_vector(self.states[i])

    def populations(self) -> np.ndarray:
        """``(n, 2)`` array of ``(P1, P2)`` rows; requires states."""
        if self.states is None:
            raise ValueError("record was produced without an initial state")
        return np.abs(self.states) ** 2

    def unitarity_defects(self) -> np.ndarray:
        u = self.propagators
        gram = np.conj(np.swapaxes(u, -1, -2)) @ u
        return np.linalg.norm(gram - IDENTITY, axis=(-2, -1))


def characteristic_time(params: SystemParams, pulse: Pulse, t_final: float) -> float:
    """Shortest time scale that the step grid has to resolve.

    ``min(tau, 2 pi hbar / max(dE, hbar / tau))``, further capped by the
    field rotation period ``2 pi hbar / max|V|`` so strong pulses are not
    under-resolved.
    """
    hbar = params.hbar
    try:
        tau = pulse.duration_tau()
    except DegeneratePulseError:
        tau = 0.0
    if tau <= 0 or isinstance(pulse, DeltaKick):
        if params.delta_e > 0:
            return 2 * math.pi * hbar / params.delta_e
        return t_final
    t_c = min(tau, 2 * math.pi * hbar / max(params.delta_e, hbar / tau))
    peak = pulse.peak()
    if peak > 0:
        t_c = min(t_c, 2 * math.pi * hbar / peak)
    return t_c


def _free_time(params: SystemParams, length: float) -> float:
    if params.delta_e > 0:
        return min(length, 2 * math.pi * params.hbar / params.delta_e)
    return length


def _is_zero_pulse(pulse: Pulse) -> bool:
    return not isinstance(pulse, DeltaKick) and pulse.peak() == 0


@dataclass
class _Grid:
    edges: np.ndarray          # step boundaries, length n + 1
    driven: np.ndarray         # bool per step: V may be nonzero inside
    kick_after: int = -1       # kick applied right after this step (-1: none; -2: before step 0)
    kick_alpha: float = 0.0


def _build_grid(params: SystemParams, pulse: Pulse, t_final: float,
                settings: PropagationSettings) -> _Grid:
    t_c = characteristic_time(params, pulse, t_final)
    h_driven = t_c / settings.step_count
    kick = isinstance(pulse, DeltaKick)
    zero = kick or _is_zero_pulse(pulse)
    t_on, t_off = pulse.support
    cuts = {0.0, t_final}
    cuts.update(p for p in pulse.breakpoints() if 0.0 < p < t_final)
    cuts = sorted(cuts)

    pieces = []
    flags = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        driven = (not zero) and hi > t_on and lo < t_off
        h = h_driven if driven else _free_time(params, hi - lo) / settings.step_count
        n = max(1, int(math.ceil((hi - lo) / h - 1e-9)))
        pieces.append(np.linspace(lo, hi, n + 1)[:-1])
        flags.append(np.full(n, driven))
    edges = np.concatenate(pieces + [np.array([t_final])])
    if edges.size - 1 > MAX_STEPS:
        raise RefinementExhaustedError(
            f"step refinement exhausted: {edges.size - 1} steps exceed the {MAX_STEPS} ceiling"
        )
    grid = _Grid(edges=edges, driven=np.concatenate(flags))
    if kick and pulse.t_k <= t_final:
        grid.kick_alpha = pulse.alpha_k
        if pulse.t_k == 0.0:
            grid.kick_after = -2
        else:
            grid.kick_after = int(np.searchsorted(edges, pulse.t_k)) - 1
    return grid


def _step_factors(params: SystemParams, pulse: Pulse, grid: _Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Per-step SU(2) factors ``[[a, b], [-conj(b), conj(a)]]`` as arrays ``(a, b)``."""
    edges = grid.edges
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    v = np.zeros_like(mid)
    if grid.driven.any():
        v[grid.driven] = pulse.value_at(mid[grid.driven])
    if not np.all(np.isfinite(v)):
        raise PropagationDivergedError("propagation diverged: non-finite potential value")
    scale = h / params.hbar
    # exp(-i (V sigma_x - (dE/2) sigma_z) h / hbar)
    ax = v * scale
    az = -0.5 * params.delta_e * scale
    r = np.hypot(ax, az)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(r > 0, np.sin(r) / r, 1.0)
    a = np.cos(r) - 1j * az * s
    b = -1j * ax * s
    if grid.kick_after != -1:
        ka, kb = math.cos(grid.kick_alpha), -1j * math.sin(grid.kick_alpha)
        i = 0 if grid.kick_after == -2 else grid.kick_after
        if grid.kick_after == -2:
            a[i], b[i] = _su2_mul(a[i], b[i], ka, kb)
        else:
            a[i], b[i] = _su2_mul(ka, kb, a[i], b[i])
    return a, b


def _su2_mul(a1, b1, a2, b2):
    """``M1 @ M2`` for ``M = [[a, b], [-conj(b), conj(a)]]``."""
    return a1 * a2 - b1 * np.conj(b2), a1 * b2 + b1 * np.conj(a2)


def _renormalize(a, b):
    # roundoff only: every factor is exactly in SU(2)
    n = np.sqrt(a.real ** 2 + a.imag ** 2 + b.real ** 2 + b.imag ** 2)
    return a / n, b / n


def _su2_matrix(a, b) -> np.ndarray:
    a = np.asarray(a)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = -np.conj(b)
    out[..., 1, 1] = np.conj(a)
    return out


def _ordered_product(a: np.ndarray, b: np.ndarray):
    """Time-ordered product along the last axis (later factors on the left)."""
    while a.shape[-1] > 1:
        if a.shape[-1] % 2:
            pad = a.shape[:-1] + (1,)
            a = np.concatenate([a, np.ones(pad, dtype=complex)], axis=-1)
            b = np.concatenate([b, np.zeros(pad, dtype=complex)], axis=-1)
        a, b = _renormalize(*_su2_mul(a[..., 1::2], b[..., 1::2], a[..., 0::2], b[..., 0::2]))
    return a[..., 0], b[..., 0]


def _prefix_products(a: np.ndarray, b: np.ndarray):
    """Inclusive scan: ``out[k] = M[k] @ ... @ M[0]`` (Hillis-Steele)."""
    a, b = a.copy(), b.copy()
    d = 1
    n = a.shape[0]
    while d < n:
        a[d:], b[d:] = _renormalize(*_su2_mul(a[d:], b[d:], a[:-d], b[:-d]))
        d *= 2
    return a, b


def _check(u: np.ndarray, tol: float = UNITARITY_TOL) -> None:
    if not np.all(np.isfinite(u)):
        raise PropagationDivergedError("propagation diverged: non-finite propagator")
    defect = Unitary2(u).unitarity_defect()
    if defect > tol:
        raise PropagationDivergedError(f"propagation diverged: unitarity defect {defect:.3e}")


def final_propagator(params: SystemParams, pulse: Pulse, t_final: float,
                     settings: PropagationSettings = PropagationSettings()) -> Tuple[np.ndarray, int]:
    """``U(t_final)`` only, with the number of steps used."""
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    grid = _build_grid(params, pulse, t_final, settings)
    u = _su2_matrix(*_ordered_product(*_step_factors(params, pulse, grid)))
    _check(u)
    return u, grid.edges.size - 1


def propagate(params: SystemParams, pulse: Pulse, t_final: float,
              settings: PropagationSettings = PropagationSettings(),
              initial: Optional[Complex2State] = None) -> EvolutionRecord:
    """Evolve from ``t = 0`` to ``t_final`` and record ``U(t)`` every ``record_stride`` steps.

    The final time is always recorded. Raises :class:`PropagationDivergedError`
    if the accumulated propagator is non-finite or drifts from unitarity.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    grid = _build_grid(params, pulse, t_final, settings)
    a, b = _step_factors(params, pulse, grid)
    n = a.shape[0]
    stride = settings.record_stride
    m = -(-n // stride)
    pad = m * stride - n
    if pad:
        a = np.concatenate([a, np.ones(pad, dtype=complex)])
        b = np.concatenate([b, np.zeros(pad, dtype=complex)])
    a, b = _prefix_products(*_ordered_product(a.reshape(m, stride), b.reshape(m, stride)))
    props = np.concatenate([IDENTITY[None], _su2_matrix(a, b)])
    idx = np.minimum(np.arange(m + 1) * stride, n)
    times = grid.edges[idx]
    _check(props[-1])
    defects = np.linalg.norm(np.conj(np.swapaxes(props, -1, -2)) @ props - IDENTITY, axis=(-2, -1))
    if np.max(defects) > UNITARITY_TOL:
        raise PropagationDivergedError(f"propagation diverged: unitarity defect {np.max(defects):.3e}")
    props.setflags(write=False)
    times.setflags(write=False)
    states = None
    if initial is not None:
        states = props @ initial.vector
        states.setflags(write=False)
    return EvolutionRecord(times=times, propagators=props, states=states, step_total=n)


def refine_to_tolerance(params: SystemParams, pulse: Pulse, t_final: float, target_tol: float,
                        settings: PropagationSettings = PropagationSettings(),
                        initial: Optional[Complex2State] = None,
                        record: bool = True):
    """Double the step density until successive final propagators agree.

    The error estimate is the Frobenius distance between ``U(t_final)`` at
    ``n`` and ``2n`` steps; the finer run is returned. With ``record=False``
    the first element is the final propagator as a :class:`Unitary2` instead
    of a full :class:`EvolutionRecord`.

    Returns
    -------
    (record, error_estimate)
    """
    if target_tol < 1e-13:
        raise ValueError(f"target_tol must be >= 1e-13, got {target_tol}")
    coarse, _ = final_propagator(params, pulse, t_final, settings)
    while True:
        finer_settings = settings.doubled()
        fine, _ = final_propagator(params, pulse, t_final, finer_settings)
        err = float(np.linalg.norm(fine - coarse))
        if err < target_tol:
            if not record:
                return Unitary2(fine), err
            return propagate(params, pulse, t_final, finer_settings, initial), err
        settings, coarse = finer_settings, fine
