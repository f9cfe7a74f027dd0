import math

import numpy as np
import pytest

from phasebench import core_sim as cs
from phasebench import gates
from phasebench.noise_model import DeviceParams

from oracles import StatevectorSim


def ground(n):
    return cs.DensityMatrix.ground(n)


class TestDensityMatrix:
    def test_register_size_capped(self):
        with pytest.raises(ValueError):
            cs.DensityMatrix.ground(9)
        with pytest.raises(ValueError):
            cs.DensityMatrix.ground(0)

    def test_validate_catches_bad_states(self):
        dm = ground(1)
        dm.data[0, 0] = 0.5
        with pytest.raises(cs.StateCorruptionError):
            dm.validate()
        dm = ground(1)
        dm.data[0, 1] = 0.3
        with pytest.raises(cs.StateCorruptionError):
            dm.validate()

    def test_reduced_of_product_state(self):
        sv = np.kron([1, 0], [1, 1]) / np.sqrt(2)
        dm = cs.DensityMatrix.from_statevector(sv)
        r = dm.reduced([1])
        assert np.allclose(r.data, 0.5 * np.ones((2, 2)))


class TestApplyUnitary:
    def test_identity_leaves_state(self):
        dm = cs.DensityMatrix.from_statevector([1, 1j, -1, 0.5])
        out = cs.apply_unitary(dm, gates.I2, (1,))
        assert np.allclose(out.data, dm.data)

    def test_x_flips_ground(self):
        out = cs.apply_unitary(ground(1), gates.X, (0,))
        assert np.allclose(out.data, np.diag([0, 1]))

    def test_hadamard_matches_direct_product(self):
        # oracle: H |0><0| H^T computed by hand is the all-0.5 matrix
        out = cs.apply_unitary(ground(1), gates.H, (0,))
        assert np.allclose(out.data, 0.5 * np.ones((2, 2)), atol=1e-12)

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            cs.apply_unitary(ground(1), np.array([[1, 0], [0, 0.5]]), (0,))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cs.apply_unitary(ground(2), gates.CNOT, (0,))

    def test_rejects_duplicate_targets(self):
        with pytest.raises(ValueError):
            cs.apply_unitary(ground(2), gates.CNOT, (0, 0))


class TestApplyKraus:
    def test_identity_set(self):
        dm = cs.DensityMatrix.from_statevector([0.6, 0.8j])
        out = cs.apply_kraus(dm, [gates.I2], (0,))
        assert np.allclose(out.data, dm.data)

    def test_perfect_reset_channel(self):
        k0 = np.array([[1, 0], [0, 0]], dtype=complex)
        k1 = np.array([[0, 1], [0, 0]], dtype=complex)
        dm = cs.DensityMatrix.from_statevector([0.6, 0.8j])
        out = cs.apply_kraus(dm, [k0, k1], (0,))
        assert np.allclose(out.data, np.diag([1, 0]), atol=1e-12)

    def test_amplitude_damping_half(self):
        # hand Kraus algebra: gamma = 0.5 on |1><1| gives diag(0.5, 0.5)
        g = 0.5
        k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]], dtype=complex)
        k1 = np.array([[0, math.sqrt(g)], [0, 0]], dtype=complex)
        excited = cs.DensityMatrix(1, np.diag([0, 1]).astype(complex))
        out = cs.apply_kraus(excited, [k0, k1], (0,))
        assert np.allclose(out.data, np.diag([0.5, 0.5]), atol=1e-12)

    def test_rejects_non_cptp(self):
        with pytest.raises(ValueError):
            cs.apply_kraus(ground(1), [0.5 * gates.I2], (0,))


class TestMeasure:
    def test_ground_is_deterministic(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            bit, out = cs.measure(ground(1), 0, rng)
            assert bit == 0
            assert np.allclose(out.data, np.diag([1, 0]))

    def test_plus_state_is_balanced(self):
        rng = np.random.default_rng(1)
        plus = cs.apply_unitary(ground(1), gates.H, (0,))
        n = 10_000
        ones = sum(cs.measure(plus, 0, rng)[0] for _ in range(n))
        sigma = math.sqrt(0.25 * n)
        assert abs(ones - n / 2) < 3 * sigma

    def test_bell_correlations_via_projector_oracle(self):
        bell = cs.DensityMatrix.from_statevector([1, 0, 0, 1])
        # 4x4 projector oracle: P(00) = P(11) = 1/2, cross terms zero
        p0 = np.diag([1, 1, 0, 0]).astype(complex)
        assert abs(np.trace(p0 @ bell.data).real - 0.5) < 1e-12
        rng = np.random.default_rng(2)
        for _ in range(100):
            b0, st = cs.measure(bell, 0, rng)
            b1, st = cs.measure(st, 1, rng)
            assert b0 == b1

    def test_corrupted_state_detected(self):
        dm = cs.DensityMatrix(1, np.zeros((2, 2)))
        with pytest.raises(cs.StateCorruptionError):
            cs.measure(dm, 0, np.random.default_rng(0))


class TestRunCircuit:
    def test_conditional_reset_program(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            prog = [
                cs.Unitary(gates.H, (0,)),
                cs.Measure(0, 0),
                cs.ConditionalUnitary(gates.X, (0,), bit=0),
            ]
            state, creg = cs.run_circuit(prog, ground(1),
                                         cs.ClassicalRegister(1), None, rng)
            assert abs(state.data[0, 0] - 1) < 1e-12

    def test_empty_program(self):
        dm = cs.DensityMatrix.from_statevector([0.6, 0.8])
        state, _ = cs.run_circuit([], dm, cs.ClassicalRegister(0))
        assert np.allclose(state.data, dm.data)

    def test_delay_at_t1_decays_to_1_over_e(self):
        dev = DeviceParams(t1=30e-6, t2=60e-6)
        excited = cs.DensityMatrix(1, np.diag([0, 1]).astype(complex))
        state, _ = cs.run_circuit([cs.Delay(30e-6)], excited,
                                  cs.ClassicalRegister(0), dev,
                                  np.random.default_rng(0))
        assert abs(state.population(0) - math.exp(-1)) < 1e-6

    def test_frame_rz_is_exact_and_free(self):
        plus = cs.apply_unitary(ground(1), gates.H, (0,))
        dev = DeviceParams(t1=1e-6, t2=1e-6)  # harsh noise, must not apply
        state, _ = cs.run_circuit([cs.FrameRz(0, 0.7)], plus,
                                  cs.ClassicalRegister(0), dev,
                                  np.random.default_rng(0))
        expect = gates.rz(0.7) @ plus.data @ gates.rz(0.7).conj().T
        assert np.allclose(state.data, expect, atol=1e-12)

    def test_undeclared_classical_bit_rejected(self):
        prog = [cs.ConditionalUnitary(gates.X, (0,), bit=3)]
        with pytest.raises(IndexError):
            cs.run_circuit(prog, ground(1), cs.ClassicalRegister(1))

    def test_determinism_same_seed_same_bits(self):
        prog = [cs.Unitary(gates.H, (0,)), cs.Measure(0, 0),
                cs.Unitary(gates.H, (1,)), cs.Measure(1, 1)]
        outs = []
        for _ in range(2):
            rng = np.random.default_rng(1234)
            bits = []
            for _ in range(200):
                _, creg = cs.run_circuit(prog, ground(2),
                                         cs.ClassicalRegister(2), None, rng)
                bits.append(creg.as_tuple())
            outs.append(bits)
        assert outs[0] == outs[1]

    def test_invariants_hold_in_debug_mode(self):
        prog = [cs.Unitary(gates.H, (0,), 40e-9),
                cs.Unitary(gates.CNOT, (0, 1), 280e-9),
                cs.Measure(0, 0),
                cs.ConditionalUnitary(gates.X, (1,), bit=0, duration=40e-9),
                cs.Delay(1e-6)]
        dev = DeviceParams(t1=(20e-6, 30e-6), t2=(25e-6, 40e-6),
                           p_assign_1given0=0.02, p_assign_0given1=0.03,
                           p_reset_excited=0.01)
        old = cs.DEBUG_CHECKS
        cs.DEBUG_CHECKS = True
        try:
            rng = np.random.default_rng(7)
            for _ in range(20):
                cs.run_circuit(prog, ground(2), cs.ClassicalRegister(1),
                               dev, rng)
        finally:
            cs.DEBUG_CHECKS = old


class TestAgainstStatevectorOracle:
    """Noiseless runs must match a brute-force pure-state simulator."""

    def _random_program(self, rng, n):
        prog = []
        n_cl = 2
        for _ in range(rng.integers(4, 9)):
            kind = rng.integers(0, 4)
            if kind == 0:
                u = [gates.H, gates.X, gates.S,
                     gates.rz(float(rng.uniform(0, 2 * math.pi)))][
                         rng.integers(0, 4)]
                prog.append(cs.Unitary(u, (int(rng.integers(0, n)),)))
            elif kind == 1 and n >= 2:
                q = list(rng.permutation(n)[:2])
                prog.append(cs.Unitary(gates.CNOT, tuple(int(x) for x in q)))
            elif kind == 2:
                prog.append(cs.Measure(int(rng.integers(0, n)),
                                       int(rng.integers(0, n_cl))))
            else:
                prog.append(cs.ConditionalUnitary(
                    gates.X, (int(rng.integers(0, n)),),
                    bit=int(rng.integers(0, n_cl))))
        prog.append(cs.Measure(0, 0))
        if n >= 2:
            prog.append(cs.Measure(1, 1))
        return prog

    def _run_oracle(self, prog, n, rng):
        sim = StatevectorSim(n)
        creg = [0, 0]
        for instr in prog:
            if isinstance(instr, cs.Unitary):
                sim.apply(instr.matrix, instr.targets)
            elif isinstance(instr, cs.ConditionalUnitary):
                if creg[instr.bit] == instr.value:
                    sim.apply(instr.matrix, instr.targets)
            elif isinstance(instr, cs.Measure):
                creg[instr.cbit] = sim.measure(instr.qubit, rng)
        return tuple(creg)

    @pytest.mark.parametrize("n,case_seed", [(2, 10), (3, 11), (3, 12)])
    def test_outcome_distributions_match(self, n, case_seed):
        rng = np.random.default_rng(case_seed)
        prog = self._random_program(rng, n)
        shots = 10_000
        counts_dm: dict = {}
        counts_sv: dict = {}
        rng_dm = np.random.default_rng(case_seed + 100)
        rng_sv = np.random.default_rng(case_seed + 200)
        for _ in range(shots):
            _, creg = cs.run_circuit(prog, ground(n),
                                     cs.ClassicalRegister(2), None, rng_dm)
            counts_dm[creg.as_tuple()] = counts_dm.get(creg.as_tuple(), 0) + 1
            out = self._run_oracle(prog, n, rng_sv)
            counts_sv[out] = counts_sv.get(out, 0) + 1
        for key in set(counts_dm) | set(counts_sv):
            a = counts_dm.get(key, 0)
            b = counts_sv.get(key, 0)
            p = (a + b) / (2 * shots)
            sigma = math.sqrt(max(2 * shots * p * (1 - p), 1.0))
            assert abs(a - b) < 3 * sigma, (key, a, b)
