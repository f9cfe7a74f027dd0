import math

import numpy as np
import pytest

from phasebench import core_sim as cs
from phasebench import gates
from phasebench import noise_model as nm


def excited():
    return cs.DensityMatrix(1, np.diag([0, 1]).astype(complex))


def plus():
    return cs.DensityMatrix(1, 0.5 * np.ones((2, 2), dtype=complex))


class TestDeviceParams:
    def test_t2_bound_enforced(self):
        with pytest.raises(ValueError):
            nm.DeviceParams(t1=10e-6, t2=30e-6)

    def test_probability_ranges(self):
        with pytest.raises(ValueError):
            nm.DeviceParams(p_reset_excited=1.5)

    def test_per_qubit_broadcast(self):
        dev = nm.DeviceParams(t1=(10e-6, 20e-6), t2=(10e-6, 20e-6))
        assert dev.t1_of(0) == 10e-6
        assert dev.t1_of(1) == 20e-6
        scalar = nm.DeviceParams(t1=5e-6, t2=5e-6)
        assert scalar.t1_of(3) == 5e-6

    def test_paper_defaults_shapes(self):
        dev = nm.DeviceParams.paper_defaults()
        assert dev.t1 == (68.20e-6, 49.23e-6)
        assert dev.t2 == (59.93e-6, 41.92e-6)
        assert dev.p_assign_0given1 == 0.0104
        assert dev.epg_cnot == 1.55e-2


class TestAmplitudeDamping:
    def test_zero_time_is_identity(self):
        ks = nm.amplitude_damping_kraus(0.0, 10e-6)
        assert len(ks) == 1
        assert np.allclose(ks[0], np.eye(2))

    def test_full_decay(self):
        out = cs.apply_kraus(excited(),
                             nm.amplitude_damping_kraus(1.0, 10e-6), (0,))
        assert abs(out.population(0)) < 1e-12

    def test_one_lifetime(self):
        out = cs.apply_kraus(excited(),
                             nm.amplitude_damping_kraus(10e-6, 10e-6), (0,))
        assert abs(out.population(0) - math.exp(-1)) < 1e-12

    def test_composition_law(self):
        t1 = 13e-6
        bases = [np.diag([1, 0]), np.diag([0, 1]),
                 0.5 * np.ones((2, 2)),
                 np.array([[0.5, -0.5j], [0.5j, 0.5]])]
        for ta, tb in [(1e-6, 2e-6), (4e-6, 0.5e-6), (7e-6, 7e-6)]:
            for basis in bases:
                dm = cs.DensityMatrix(1, basis.astype(complex))
                seq = cs.apply_kraus(
                    cs.apply_kraus(dm, nm.amplitude_damping_kraus(ta, t1),
                                   (0,)),
                    nm.amplitude_damping_kraus(tb, t1), (0,))
                direct = cs.apply_kraus(
                    dm, nm.amplitude_damping_kraus(ta + tb, t1), (0,))
                assert np.abs(seq.data - direct.data).max() < 1e-9


class TestPureDephasing:
    def test_t1_limited_is_identity(self):
        assert len(nm.pure_dephasing_kraus(5e-6, 10e-6, 20e-6)) == 1

    def test_long_time_fully_mixes_plus(self):
        ks = nm.pure_dephasing_kraus(1.0, float("inf"), 10e-6)
        out = cs.apply_kraus(plus(), ks, (0,))
        assert np.allclose(out.data, np.diag([0.5, 0.5]), atol=1e-12)

    def test_one_tphi_scales_coherence(self):
        t1, t2 = 100e-6, 50e-6
        tphi = 1.0 / (1.0 / t2 - 0.5 / t1)
        out = cs.apply_kraus(plus(), nm.pure_dephasing_kraus(tphi, t1, t2),
                             (0,))
        assert abs(out.data[0, 1] - 0.5 * math.exp(-1)) < 1e-12

    def test_rejects_t2_above_bound(self):
        with pytest.raises(ValueError):
            nm.pure_dephasing_kraus(1e-6, 10e-6, 25e-6)


class TestDepolarizing:
    def test_zero_strength_identity(self):
        assert len(nm.depolarizing_kraus(0.0, 1)) == 1

    def test_full_strength_depolarizes(self):
        dm = cs.DensityMatrix(1, np.array([[0.9, 0.2], [0.2, 0.1]],
                                          dtype=complex))
        out = cs.apply_kraus(dm, nm.depolarizing_kraus(1.0, 1), (0,))
        assert np.allclose(out.data, np.eye(2) / 2, atol=1e-12)

    def test_two_qubit_completeness_at_cnot_epg(self):
        ks = nm.depolarizing_kraus(1.55e-2, 2)
        comp = sum(k.conj().T @ k for k in ks)
        assert np.abs(comp - np.eye(4)).max() < 1e-9

    def test_rejects_bad_target_count(self):
        with pytest.raises(ValueError):
            nm.depolarizing_kraus(0.1, 3)


class TestKrausCompleteness:
    @pytest.mark.parametrize("builder", [
        lambda: nm.amplitude_damping_kraus(3e-6, 11e-6),
        lambda: nm.pure_dephasing_kraus(3e-6, 11e-6, 15e-6),
        lambda: nm.excitation_kraus(0.17),
        lambda: nm.depolarizing_kraus(0.2, 1),
        lambda: nm.depolarizing_kraus(0.03, 2),
        lambda: nm.idle_kraus(2e-6, 9e-6, 13e-6),
    ])
    def test_sum_kdagk_is_identity(self, builder):
        ks = builder()
        d = ks[0].shape[0]
        comp = sum(k.conj().T @ k for k in ks)
        assert np.abs(comp - np.eye(d)).max() < 1e-9


class TestNoisyMeasure:
    def test_zero_rates_bit_identical_to_measure(self):
        dev = nm.DeviceParams()
        state = cs.apply_unitary(cs.DensityMatrix.ground(1), gates.H, (0,))
        rng1 = np.random.default_rng(9)
        rng2 = np.random.default_rng(9)
        seq1 = [nm.noisy_measure(state, 0, dev, rng1)[0] for _ in range(500)]
        seq2 = [cs.measure(state, 0, rng2)[0] for _ in range(500)]
        assert seq1 == seq2

    def test_flip_rate_from_ground(self):
        dev = nm.DeviceParams(p_assign_1given0=0.0062)
        rng = np.random.default_rng(5)
        n = 100_000
        ones = sum(nm.noisy_measure(cs.DensityMatrix.ground(1), 0, dev,
                                    rng)[0] for _ in range(n))
        sigma = math.sqrt(n * 0.0062 * (1 - 0.0062))
        assert abs(ones - n * 0.0062) < 3 * sigma

    def test_flip_rate_from_excited(self):
        dev = nm.DeviceParams(p_assign_0given1=0.0104)
        rng = np.random.default_rng(6)
        n = 100_000
        zeros = sum(1 - nm.noisy_measure(excited(), 0, dev, rng)[0]
                    for _ in range(n))
        sigma = math.sqrt(n * 0.0104 * (1 - 0.0104))
        assert abs(zeros - n * 0.0104) < 3 * sigma


class TestConditionalReset:
    def test_perfect_reset(self):
        dev = nm.DeviceParams()
        out = nm.conditional_reset(excited(), 0, 1, dev)
        assert np.allclose(out.data, np.diag([1, 0]), atol=1e-12)

    def test_residual_excitation(self):
        dev = nm.DeviceParams(p_reset_excited=0.01)
        out = nm.conditional_reset(cs.DensityMatrix.ground(1), 0, 0, dev)
        assert abs(out.population(0) - 0.01) < 1e-12

    def test_misassignment_leaves_qubit_excited(self):
        # channel-composition oracle: no flip, excitation keeps |1> fixed
        dev = nm.DeviceParams(p_reset_excited=0.01)
        out = nm.conditional_reset(excited(), 0, 0, dev)
        assert out.population(0) > 0.99

    def test_spectator_dephasing_during_latency(self):
        dev = nm.DeviceParams(t1=(50e-6, 50e-6), t2=(40e-6, 40e-6),
                              meas_reset_latency=1.4e-6)
        state = cs.DensityMatrix(
            2, np.kron(np.diag([1, 0]), 0.5 * np.ones((2, 2))).astype(complex))
        out = nm.conditional_reset(state, 0, 0, dev)
        coherence = out.reduced([1]).data[0, 1].real
        assert abs(coherence - 0.5 * math.exp(-1.4e-6 / 40e-6)) < 1e-9

    def test_reset_qubit_frozen_during_latency(self):
        dev = nm.DeviceParams(t1=(50e-6, 50e-6), t2=(40e-6, 40e-6),
                              meas_reset_latency=1.4e-6)
        state = cs.DensityMatrix(
            2, np.kron(0.5 * np.ones((2, 2)), np.diag([1, 0])).astype(complex))
        out = nm.conditional_reset(state, 0, 0, dev)
        assert abs(out.reduced([0]).data[0, 1].real - 0.5) < 1e-12


class TestStepSuperop:
    def test_matches_direct_kraus_application(self):
        dev = nm.DeviceParams(t1=(20e-6, 35e-6), t2=(18e-6, 30e-6))
        rng = np.random.default_rng(3)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        dm = cs.DensityMatrix.from_statevector(v)
        fast = nm.apply_timed_noise(dm, dev, 2e-6)
        slow = dm
        for q in (0, 1):
            slow = cs.apply_kraus(
                slow, nm.idle_kraus(2e-6, dev.t1_of(q), dev.t2_of(q)), (q,))
        assert np.abs(fast.data - slow.data).max() < 1e-12

    def test_depolarizing_applied_when_enabled(self):
        dev = nm.DeviceParams(epg_single=(0.5,), gate_depolarizing_enabled=True)
        out = nm.apply_timed_noise(plus(), dev, 40e-9, gate_targets=(0,))
        # coherence shrinks by (1 - p) under the twirl
        assert abs(out.data[0, 1] - 0.25) < 1e-12
