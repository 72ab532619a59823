import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from pulsed_qubit import propagator as prop
from pulsed_qubit.core import IDENTITY, SIGMA_X, SIGMA_Z, Complex2State, SystemParams
from pulsed_qubit.errors import PropagationDivergedError, RefinementExhaustedError
from pulsed_qubit.propagator import (
    PropagationSettings, characteristic_time, final_propagator, propagate, refine_to_tolerance,
)
from pulsed_qubit.pulses import DeltaKick, Gaussian, Rectangular, Sampled, zero_pulse


def ode_oracle(params, pulse, t_final, breaks=()):
    """Independent reference: integrate i hbar dU/dt = H U with a high-order RK."""
    def rhs(t, y):
        h = -0.5 * params.delta_e * SIGMA_Z + pulse.value_at(t) * SIGMA_X
        return (-1j / params.hbar * h @ y.reshape(2, 2)).ravel()
    u = np.eye(2, dtype=complex).ravel()
    cuts = sorted({0.0, t_final, *(b for b in breaks if 0 < b < t_final)})
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        sol = solve_ivp(rhs, (lo, hi), u, method="DOP853", rtol=1e-12, atol=1e-13)
        u = sol.y[:, -1]
    return u.reshape(2, 2)


class TestSettings:
    @pytest.mark.parametrize("kw", [dict(step_count=8), dict(tolerance=0), dict(tolerance=1e-3),
                                    dict(record_stride=0), dict(step_count=32.5)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PropagationSettings(**kw)

    def test_doubled(self):
        assert PropagationSettings(20, 1e-9, 3).doubled() == PropagationSettings(40, 1e-9, 3)


class TestCharacteristicTime:
    def test_formula(self):
        p = Rectangular(0.1, 0.0, 2.0)
        # min(tau=2, 2 pi / max(dE=5, 1/2)) = 2 pi / 5
        assert characteristic_time(SystemParams(5.0), p, 10.0) == pytest.approx(2 * math.pi / 5)

    def test_strong_field_cap(self):
        p = Rectangular(100.0, 0.0, 2.0)
        assert characteristic_time(SystemParams(0.0), p, 10.0) == pytest.approx(2 * math.pi / 100)


class TestExamples:
    def test_free_evolution(self):
        rec = propagate(SystemParams(2.0), zero_pulse(1.0), math.pi / 2)
        np.testing.assert_allclose(rec.final.matrix, np.diag([1j, -1j]), atol=1e-14)

    def test_degenerate_rectangle_full_transfer(self):
        rec = propagate(SystemParams(0.0), Rectangular(1.0, 0.0, math.pi / 2), math.pi / 2,
                        initial=Complex2State(1, 0))
        np.testing.assert_allclose(rec.final.matrix, expm(-1j * math.pi / 2 * SIGMA_X), atol=1e-14)
        assert rec.populations()[-1] == pytest.approx([0, 1], abs=1e-14)

    def test_rabi_formula(self):
        t = math.pi / (2 * math.sqrt(2))
        rec = propagate(SystemParams(2.0), Rectangular(1.0, 0.0, t), t, initial=Complex2State(1, 0))
        assert rec.populations()[-1] == pytest.approx([0.5, 0.5], abs=1e-13)

    @pytest.mark.parametrize("hbar", [1.0, 0.37])
    def test_constant_hamiltonian_vs_expm(self, hbar):
        params = SystemParams(1.3, hbar)
        p = Rectangular(0.8, 0.5, 2.0)
        t = 4.0
        free = lambda d: expm(-1j * d / hbar * (-0.65 * SIGMA_Z))
        ref = free(1.5) @ expm(-1j * 2.0 / hbar * (-0.65 * SIGMA_Z + 0.8 * SIGMA_X)) @ free(0.5)
        u, _ = final_propagator(params, p, t)
        np.testing.assert_allclose(u, ref, atol=1e-13)


class TestAgainstOdeSolver:
    @pytest.mark.parametrize("pulse, de, t", [
        (Gaussian(0.9, 3.0, 0.7), 1.0, 7.0),
        (Gaussian(-2.0, 2.0, 0.3), 3.0, 5.0),
        (Sampled(((0.5, 0.0), (1.0, 1.5), (2.0, -0.5), (3.0, 0.0))), 0.8, 4.0),
    ])
    def test_matches(self, pulse, de, t):
        params = SystemParams(de)
        u, err = refine_to_tolerance(params, pulse, t, 1e-11, record=False)
        ref = ode_oracle(params, pulse, t, pulse.breakpoints())
        assert u.distance(ref) < 1e-9
        assert err < 1e-11


class TestKicks:
    def test_exact_jump(self):
        params, k, t = SystemParams(1.0), DeltaKick(0.3, 0.5), 2.0
        free = lambda d: expm(0.5j * d * SIGMA_Z)
        ref = free(1.5) @ expm(-0.3j * SIGMA_X) @ free(0.5)
        np.testing.assert_allclose(propagate(params, k, t).final.matrix, ref, atol=1e-14)

    def test_kick_at_zero(self):
        u, _ = final_propagator(SystemParams(1.0), DeltaKick(1.1, 0.0), 1.0)
        np.testing.assert_allclose(u, expm(0.5j * SIGMA_Z) @ expm(-1.1j * SIGMA_X), atol=1e-14)

    def test_kick_at_final_time_counts(self):
        u, _ = final_propagator(SystemParams(1.0), DeltaKick(0.4, 1.0), 1.0)
        np.testing.assert_allclose(u, expm(-0.4j * SIGMA_X) @ expm(0.5j * SIGMA_Z), atol=1e-14)

    def test_kick_after_final_time_ignored(self):
        u, _ = final_propagator(SystemParams(1.0), DeltaKick(0.4, 3.0), 1.0)
        np.testing.assert_allclose(u, expm(0.5j * SIGMA_Z), atol=1e-14)

    def test_trajectory_is_right_continuous(self):
        rec = propagate(SystemParams(0.0), DeltaKick(math.pi / 2, 1.0), 2.0, initial=Complex2State(1, 0))
        i = int(np.searchsorted(rec.times, 1.0))
        assert rec.times[i] == 1.0
        assert rec.populations()[i] == pytest.approx([0, 1], abs=1e-15)
        assert rec.populations()[i - 1] == pytest.approx([1, 0], abs=1e-15)


class TestRecord:
    def test_structure(self):
        rec = propagate(SystemParams(1.0), Gaussian(0.5, 2.0, 0.4), 4.0, PropagationSettings(record_stride=7),
                        initial=Complex2State(0.6, 0.8j))
        assert rec.times[0] == 0 and rec.times[-1] == 4.0
        assert np.all(np.diff(rec.times) > 0)
        np.testing.assert_array_equal(rec.propagators[0], IDENTITY)
        assert np.max(rec.unitarity_defects()) < 1e-12
        np.testing.assert_allclose(rec.populations().sum(axis=1), 1, atol=1e-12)
        assert rec.state(len(rec.times) - 1).vector == pytest.approx(rec.states[-1])

    def test_stride_consistent_with_full(self):
        args = (SystemParams(1.0), Gaussian(0.5, 2.0, 0.4), 4.0)
        full = propagate(*args, PropagationSettings(record_stride=1))
        thin = propagate(*args, PropagationSettings(record_stride=5))
        idx = np.searchsorted(full.times, thin.times)
        np.testing.assert_allclose(full.propagators[idx], thin.propagators, atol=1e-14)

    def test_no_state_without_initial(self):
        rec = propagate(SystemParams(1.0), zero_pulse(), 1.0)
        with pytest.raises(ValueError):
            rec.populations()

    def test_t_final_positive(self):
        with pytest.raises(ValueError):
            propagate(SystemParams(1.0), zero_pulse(), 0.0)


class TestProperties:
    def test_composition(self):
        params = SystemParams(1.2)
        g = Gaussian(0.8, 3.0, 0.6)
        rng = np.random.default_rng(7)
        t2 = 6.0
        full, _ = refine_to_tolerance(params, g, t2, 1e-11, record=False)
        for t1 in rng.uniform(0.5, 5.5, 5):
            first, _ = refine_to_tolerance(params, g, t1, 1e-11, record=False)
            second, _ = refine_to_tolerance(params, g.shifted(-t1), t2 - t1, 1e-11, record=False)
            assert (second @ first).distance(full) < 1e-9

    def test_schrodinger_residual(self):
        params = SystemParams(1.0)
        g = Gaussian(0.7, 2.0, 0.5)
        errs = []
        for n in (64, 128, 256):
            rec = propagate(params, g, 4.0, PropagationSettings(step_count=n))
            t, u = rec.times, rec.propagators
            i = np.arange(5, len(t) - 5, max(1, len(t) // 20))
            dt = t[i + 1] - t[i - 1]
            du = (u[i + 1] - u[i - 1]) / dt[:, None, None]
            h = -0.5 * SIGMA_Z + g.value_at(t[i])[:, None, None] * SIGMA_X
            errs.append(np.max(np.abs(du + 1j * h @ u[i])))
        # O(dt^2) residual: about a factor 4 per halving
        assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0

    def test_second_order_on_gaussian(self):
        params = SystemParams(1.0)
        g = Gaussian(1.0, 4.0, 0.8)
        ref, _ = final_propagator(params, g, 8.0, PropagationSettings(step_count=16384))
        ns = np.array([32, 64, 128, 256])
        errs = np.array([np.linalg.norm(final_propagator(params, g, 8.0, PropagationSettings(int(n)))[0] - ref)
                         for n in ns])
        slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert 1.9 <= slope <= 2.1

    def test_rectangle_aligned_steps_exact(self):
        # constant H inside each aligned segment: every step is the exact exponential
        params = SystemParams(1.0)
        p = Rectangular(0.7, 0.3, 1.9)
        free = lambda d: expm(0.5j * d * SIGMA_Z)
        ref = free(0.8) @ expm(-1j * 1.9 * (-0.5 * SIGMA_Z + 0.7 * SIGMA_X)) @ free(0.3)
        for n in (16, 32, 64):
            u, _ = final_propagator(params, p, 3.0, PropagationSettings(n))
            assert np.linalg.norm(u - ref) < 1e-13


class TestRefinement:
    def test_gaussian_converges(self):
        rec, err = refine_to_tolerance(SystemParams(1.0), Gaussian(0.5, 8.0, 1.0), 16.0, 1e-10,
                                       PropagationSettings(record_stride=1024))
        assert err < 1e-10
        assert rec.final.unitarity_defect() < 1e-10

    def test_free_evolution_first_doubling(self):
        _, err = refine_to_tolerance(SystemParams(3.0), zero_pulse(2.0), 5.0, 1e-13, record=False)
        assert err < 1e-13

    def test_tolerance_floor(self):
        with pytest.raises(ValueError):
            refine_to_tolerance(SystemParams(1.0), zero_pulse(), 1.0, 1e-14)

    def test_exhausted(self, monkeypatch):
        monkeypatch.setattr(prop, "MAX_STEPS", 2000)
        with pytest.raises(RefinementExhaustedError):
            refine_to_tolerance(SystemParams(1.0), Gaussian(1.0, 4.0, 1.0), 8.0, 1e-12, record=False)

    def test_nonfinite_potential_diverges(self):
        class Bad(Gaussian):
            def value_at(self, t):
                return np.full_like(np.asarray(t, dtype=float), np.nan)

            def duration_tau(self):
                return 0.5
        with pytest.raises(PropagationDivergedError):
            propagate(SystemParams(1.0), Bad(1.0, 1.0, 0.2), 2.0)
