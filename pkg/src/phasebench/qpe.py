"""Circuit construction, shot allocation, and estimation for two
phase-estimation protocols on a (system, pointer) qubit pair.

The unknown unitary is fixed to the X eigenbasis: |+> carries eigenvalue
e^{i 2 pi phase} and |-> carries eigenvalue 1, which turns every
controlled power of it into a pure controlled phase in the Hadamard frame.
Qubit 0 is the system (eigenstate) qubit and qubit 1 the pointer.

Kitaev protocol: per bit k, a cosine and a sine Hadamard-test circuit
estimate alpha_k = frac(2^{k-1} phase) via

    cos(2 pi alpha_k) = 2 P(0 | cos circuit) - 1
    sin(2 pi alpha_k) = 1 - 2 P(0 | sin circuit)

and a bit-by-bit backward pass reconstructs an (m+2)-bit phase.

Iterative protocol (one dynamic circuit): bits are measured least
significant first; before the k-th pointer measurement a software frame
rotation by theta_k = -2 pi (0.0 phi_{k+1} ... phi_m) undoes the phase
already pinned down, making each round's measurement deterministic for
exact m-bit phases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import core_sim, gates
from .core_sim import FrameRz, Measure, Unitary
from .noise_model import DeviceParams

SYSTEM = 0
POINTER = 1

IPE_METHODS = ("ensemble_average", "most_likely", "top2_weighted",
               "top2_consecutive_weighted")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseFraction:
    """A phase in units of 2 pi, i.e. value in [0, 1); optional binary bits."""

    value: float
    bits: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.value < 1.0:
            raise ValueError(f"phase value {self.value} outside [0, 1)")
        if self.bits is not None:
            object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
            total = sum(b / 2 ** (i + 1) for i, b in enumerate(self.bits))
            if abs(total - self.value) > 1e-12:
                raise ValueError("bits do not expand to the stated value")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "PhaseFraction":
        bits = tuple(int(b) for b in bits)
        value = sum(b / 2 ** (i + 1) for i, b in enumerate(bits))
        return cls(value, bits)


@dataclass(frozen=True)
class AlphaEstimates:
    """Shifted-phase estimates alpha_k = frac(2^{k-1} phase), k = 1..m."""

    alphas: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas",
                           tuple(float(a) for a in self.alphas))
        for a in self.alphas:
            if not 0.0 <= a < 1.0:
                raise ValueError(f"alpha {a} outside [0, 1)")

    def __len__(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class ResourceBudget:
    """Total measurement budget R distributed over m bits."""

    total: int
    bits: int

    def __post_init__(self):
        if self.total < 1 or self.bits < 1:
            raise ValueError("budget and bit count must be positive")


@dataclass
class RunRecord:
    protocol: str
    true_phase: float
    m: int
    shots_per_circuit: int
    measurements_used: int
    raw: object                 # per-circuit counts (kitaev) or bit tuples (ipe)
    estimate: PhaseFraction
    circular_err: float


# ---------------------------------------------------------------------------
# budgeting
# ---------------------------------------------------------------------------

def allocate_shots(budget: ResourceBudget, protocol: str) -> int:
    """Shots per circuit: floor(R/m) for IPE, floor(R/2m) for Kitaev."""
    if protocol == "ipe":
        shots = budget.total // budget.bits
    elif protocol == "kitaev":
        shots = budget.total // (2 * budget.bits)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    if shots < 1:
        raise ValueError(
            f"budget R={budget.total} cannot give every circuit one shot "
            f"for {protocol} at m={budget.bits}")
    return shots


def hoeffding_samples(epsilon: float, delta: float) -> int:
    """Smallest s with 2 exp(-2 eps^2 s) <= delta."""
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("epsilon and delta must lie in (0, 1)")
    return math.ceil(math.log(2.0 / delta) / (2.0 * epsilon ** 2))


# ---------------------------------------------------------------------------
# circuit builders
# ---------------------------------------------------------------------------

def _frac(x: float) -> float:
    f = x - math.floor(x)
    return f if f < 1.0 else 0.0    # tiny negatives round up to exactly 1.0


def build_ctrl_power_u(phase: float, k: int,
                       device: DeviceParams | None = None) -> list:
    """Pointer-controlled U^{2^{k-1}} as an instruction list.

    In the Hadamard frame of the system qubit this is the two-qubit phase
    diag(1, 1, e^{i theta'}, 1) with theta' = 2 pi frac(2^{k-1} phase),
    realized with exactly two CNOTs; every Z-type rotation is a free frame
    change.
    """
    if k < 1:
        raise ValueError("bit index k starts at 1")
    device = device or DeviceParams.noiseless()
    theta = 2.0 * math.pi * _frac(2.0 ** (k - 1) * phase)
    g1, g2 = device.single_gate_len, device.cnot_len
    return [
        Unitary(gates.H, (SYSTEM,), g1, "h"),
        FrameRz(SYSTEM, -theta / 2.0),
        Unitary(gates.CNOT, (POINTER, SYSTEM), g2, "cx"),
        FrameRz(SYSTEM, theta / 2.0),
        Unitary(gates.CNOT, (POINTER, SYSTEM), g2, "cx"),
        FrameRz(POINTER, theta / 2.0),
        Unitary(gates.H, (SYSTEM,), g1, "h"),
    ]


def build_kitaev_pair(phase: float, k: int,
                      device: DeviceParams | None = None) -> tuple:
    """(cosine circuit, sine circuit) for bit k, both ending in a pointer
    measurement into classical bit 0.

    The sine circuit adds a +pi/2 pointer frame rotation before the final
    Hadamard so that P(0) = (1 - sin(2 pi alpha_k)) / 2.
    """
    device = device or DeviceParams.noiseless()
    g1 = device.single_gate_len
    prefix = [
        Unitary(gates.H, (SYSTEM,), g1, "h"),       # prepare |+> eigenstate
        Unitary(gates.H, (POINTER,), g1, "h"),
        *build_ctrl_power_u(phase, k, device),
    ]
    cos_circ = prefix + [
        Unitary(gates.H, (POINTER,), g1, "h"),
        Measure(POINTER, 0),
    ]
    sin_circ = prefix + [
        FrameRz(POINTER, math.pi / 2.0),
        Unitary(gates.H, (POINTER,), g1, "h"),
        Measure(POINTER, 0),
    ]
    return cos_circ, sin_circ


# ---------------------------------------------------------------------------
# Kitaev estimation
# ---------------------------------------------------------------------------

def kitaev_alpha(p0_cos: float, p0_sin: float) -> float:
    """Recover alpha in [0, 1) from the two circuit probabilities.

    Uses atan2 on the sampled (cos, sin) vector, so inputs need not lie on
    the unit circle.  The degenerate (0.5, 0.5) input maps to 0 with a
    warning.
    """
    if not 0.0 <= p0_cos <= 1.0 or not 0.0 <= p0_sin <= 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    c = 2.0 * p0_cos - 1.0
    s = 1.0 - 2.0 * p0_sin
    if c == 0.0 and s == 0.0:
        warnings.warn("degenerate (0.5, 0.5) input to kitaev_alpha; "
                      "returning alpha = 0")
        return 0.0
    return _frac(math.atan2(s, c) / (2.0 * math.pi))


def kitaev_estimate(alphas: AlphaEstimates | Sequence[float],
                    return_flag: bool = False):
    """Reconstruct an (m+2)-bit phase from the shifted-bit estimates.

    The last alpha fixes the three least significant bits from the nearest
    octant; each remaining bit is then chosen so the resulting 3-bit window
    sits within circular distance 1/4 of its alpha.  When sampling noise
    leaves neither candidate within 1/4, the nearer one is still taken and
    the consistency flag cleared.
    """
    if not isinstance(alphas, AlphaEstimates):
        alphas = AlphaEstimates(tuple(alphas))
    m = len(alphas)
    if m < 1:
        raise ValueError("need at least one alpha")
    consistent = True
    octant = round(alphas.alphas[-1] * 8.0) % 8
    bits = [(octant >> 2) & 1, (octant >> 1) & 1, octant & 1]
    for j in range(m - 2, -1, -1):
        a = alphas.alphas[j]
        best_bit, best_dist = 0, None
        for b in (0, 1):
            cand = (4 * b + 2 * bits[0] + bits[1]) / 8.0
            dist = circular_error(cand, a)
            if best_dist is None or dist < best_dist:
                best_bit, best_dist = b, dist
        if best_dist >= 0.25:
            consistent = False
        bits.insert(0, best_bit)
    result = PhaseFraction.from_bits(bits)
    if return_flag:
        return result, consistent
    return result


def circular_error(estimate: float, truth: float) -> float:
    """Distance on the unit circle of phases: min(|d|, 1 - |d|)."""
    d = abs(estimate - truth) % 1.0
    return min(d, 1.0 - d)


# ---------------------------------------------------------------------------
# iterative protocol
# ---------------------------------------------------------------------------

def ipe_theta(measured_bits: Sequence[int]) -> float:
    """Feedback angle theta_k = -2 pi (0.0 phi_{k+1} phi_{k+2} ...).

    ``measured_bits`` lists (phi_{k+1}, ..., phi_m); an empty list (the
    first round, k = m) gives 0.
    """
    acc = 0.0
    for j, bit in enumerate(measured_bits):
        if bit not in (0, 1):
            raise ValueError("bits must be 0 or 1")
        acc += bit / 2.0 ** (j + 2)
    return -2.0 * math.pi * acc


def run_ipe_shot(phase: float, m: int, device: DeviceParams,
                 rng: np.random.Generator) -> tuple:
    """One dynamic-circuit execution; returns the bits (phi_1, ..., phi_m).

    Rounds run k = m down to 1.  Each round prepares the pointer, applies
    the controlled power, undoes the known tail of the phase with a frame
    rotation, measures with assignment error, and (except after the final
    round) conditionally resets the pointer while the system qubit idles
    through the measurement+reset latency.
    """
    if m < 1:
        raise ValueError("need at least one bit")
    state = core_sim.DensityMatrix.ground(2)
    creg = core_sim.ClassicalRegister(1)
    g1 = device.single_gate_len
    state, _ = core_sim.run_circuit(
        [Unitary(gates.H, (SYSTEM,), g1, "h")], state, creg, device, rng)
    bits_lsb_first: list = []   # phi_m, phi_{m-1}, ...
    from . import noise_model
    for k in range(m, 0, -1):
        theta_k = ipe_theta(list(reversed(bits_lsb_first)))
        round_prog: list = [
            Unitary(gates.H, (POINTER,), g1, "h"),
            *build_ctrl_power_u(phase, k, device),
            FrameRz(POINTER, theta_k),
            Unitary(gates.H, (POINTER,), g1, "h"),
        ]
        state, _ = core_sim.run_circuit(round_prog, state, creg, device, rng)
        reported, state = noise_model.noisy_measure(state, POINTER, device,
                                                    rng)
        if k > 1:
            state = noise_model.conditional_reset(state, POINTER, reported,
                                                  device)
        bits_lsb_first.append(reported)
    return tuple(reversed(bits_lsb_first))


def bits_to_int(bits: Sequence[int]) -> int:
    """(phi_1, ..., phi_m) -> integer with phi_1 as the most significant bit."""
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _circular_mean(values: Sequence[float],
                   weights: Sequence[float] | None = None) -> float:
    phasors = np.exp(2j * np.pi * np.asarray(values, dtype=float))
    if weights is not None:
        phasors = phasors * np.asarray(weights, dtype=float)
    total = phasors.sum()
    if abs(total) < 1e-15:
        return 0.0
    return _frac(float(np.angle(total)) / (2.0 * math.pi))


def _short_arc_average(v_a: float, w_a: float, v_b: float,
                       w_b: float) -> float:
    """Count-weighted average of two phases along the shorter arc."""
    delta = (v_b - v_a) % 1.0
    if delta > 0.5:
        delta -= 1.0
    if w_a + w_b == 0:
        return v_a
    return _frac(v_a + delta * w_b / (w_a + w_b))


def ipe_estimate(shot_bits: Sequence[Sequence[int]], method: str,
                 m: int | None = None) -> PhaseFraction:
    """Combine per-shot bitstrings into one phase estimate.

    Methods: ``ensemble_average`` (circular mean of all shots),
    ``most_likely`` (modal bitstring), ``top2_weighted`` (count-weighted
    short-arc average of the two highest-count bitstrings), and
    ``top2_consecutive_weighted`` (same, restricted to adjacent codes
    v and v+1 mod 2^m).  Count ties break toward the smaller bitstring.
    """
    if method not in IPE_METHODS:
        raise ValueError(f"unknown method {method!r}")
    shots = [tuple(int(b) for b in s) for s in shot_bits]
    if not shots:
        raise ValueError("need at least one shot")
    if m is None:
        m = len(shots[0])
    scale = 2 ** m
    values = [bits_to_int(s) for s in shots]
    if method == "ensemble_average":
        return PhaseFraction(_circular_mean([v / scale for v in values]))
    counts = np.bincount(values, minlength=scale)
    if method == "most_likely":
        v = int(np.argmax(counts))               # argmax takes the smallest tie
        return PhaseFraction(v / scale)
    if method == "top2_weighted":
        order = sorted(range(scale), key=lambda v: (-counts[v], v))
        a, b = order[0], order[1]
        return PhaseFraction(_short_arc_average(
            a / scale, counts[a], b / scale, counts[b]))
    # top2_consecutive_weighted
    best_v, best_total = 0, -1
    for v in range(scale):
        total = counts[v] + counts[(v + 1) % scale]
        if total > best_total:
            best_v, best_total = v, total
    return PhaseFraction(_short_arc_average(
        best_v / scale, counts[best_v],
        ((best_v + 1) % scale) / scale, counts[(best_v + 1) % scale]))


# ---------------------------------------------------------------------------
# full-protocol runners
# ---------------------------------------------------------------------------

def kitaev_born_probabilities(phase: float, k: int,
                              device: DeviceParams) -> tuple:
    """Exact P(0) of the cosine and sine circuits, including gate noise
    but before any assignment-error flip (both circuits share the state
    right before the final pointer operations, so it is evolved once)."""
    g1 = device.single_gate_len
    prefix = [
        Unitary(gates.H, (SYSTEM,), g1, "h"),
        Unitary(gates.H, (POINTER,), g1, "h"),
        *build_ctrl_power_u(phase, k, device),
    ]
    state = core_sim.DensityMatrix.ground(2)
    creg = core_sim.ClassicalRegister(1)
    state, _ = core_sim.run_circuit(prefix, state, creg, device, None)
    cos_state, _ = core_sim.run_circuit(
        [Unitary(gates.H, (POINTER,), g1, "h")], state, creg, device, None)
    sin_state, _ = core_sim.run_circuit(
        [FrameRz(POINTER, math.pi / 2.0),
         Unitary(gates.H, (POINTER,), g1, "h")], state, creg, device, None)
    return (1.0 - cos_state.population(POINTER),
            1.0 - sin_state.population(POINTER))


def _reported_p0(p0: float, device: DeviceParams) -> float:
    return (p0 * (1.0 - device.p_assign_1given0)
            + (1.0 - p0) * device.p_assign_0given1)


def run_kitaev(phase: float, m: int, shots_per_circuit: int,
               device: DeviceParams, rng: np.random.Generator) -> RunRecord:
    """Full Kitaev pipeline with sampled counts.

    Shots of one circuit are i.i.d. Bernoulli draws on its fixed reported-0
    probability (there is no feedback), so counts are sampled binomially.
    """
    counts = []
    alphas = []
    for k in range(1, m + 1):
        p0c, p0s = kitaev_born_probabilities(phase, k, device)
        n0_cos = int(rng.binomial(shots_per_circuit, _reported_p0(p0c, device)))
        n0_sin = int(rng.binomial(shots_per_circuit, _reported_p0(p0s, device)))
        counts.append({"k": k, "cos0": n0_cos, "sin0": n0_sin,
                       "shots": shots_per_circuit})
        alphas.append(kitaev_alpha(n0_cos / shots_per_circuit,
                                   n0_sin / shots_per_circuit))
    est = kitaev_estimate(AlphaEstimates(tuple(alphas)))
    return RunRecord("kitaev", phase, m, shots_per_circuit,
                     2 * m * shots_per_circuit, counts, est,
                     circular_error(est.value, phase))


def kitaev_pipeline_exact(phase: float, m: int,
                          device: DeviceParams | None = None) -> PhaseFraction:
    """Infinite-statistics variant: exact Born probabilities, no sampling."""
    device = device or DeviceParams.noiseless()
    alphas = []
    for k in range(1, m + 1):
        p0c, p0s = kitaev_born_probabilities(phase, k, device)
        alphas.append(kitaev_alpha(_reported_p0(p0c, device),
                                   _reported_p0(p0s, device)))
    return kitaev_estimate(AlphaEstimates(tuple(alphas)))


def run_ipe(phase: float, m: int, shots: int, device: DeviceParams,
            rng: np.random.Generator,
            method: str = "top2_consecutive_weighted") -> RunRecord:
    """Full iterative pipeline: ``shots`` dynamic-circuit executions.

    Uses the precomposed-superoperator kernels (seed-equivalent to
    :func:`run_ipe_shot`, which stays as the instruction-level reference).
    """
    kernels = IpeKernels(phase, m, device)
    shot_bits = [kernels.run_shot(rng) for _ in range(shots)]
    est = ipe_estimate(shot_bits, method, m)
    return RunRecord("ipe", phase, m, shots, m * shots, shot_bits, est,
                     circular_error(est.value, phase))


# ---------------------------------------------------------------------------
# precomposed round kernels (hot path)
# ---------------------------------------------------------------------------

def _unitary_superop(u_full: np.ndarray) -> np.ndarray:
    return np.kron(u_full, u_full.conj())


class IpeKernels:
    """Per-(phase, m, device) superoperators for fast shot sampling.

    Every deterministic segment of a round (gates plus the noise that
    follows each timed instruction) composes into one 16x16 map; the only
    per-history piece, the pointer frame rotation, is a diagonal factor.
    Consumes the rng stream in exactly the same order as
    :func:`run_ipe_shot`: one uniform per measurement plus one per
    assignment flip when the flip rate is non-zero.
    """

    def __init__(self, phase: float, m: int, device: DeviceParams):
        from . import noise_model
        self.m = m
        self.device = device
        n = 2
        ident = np.eye(16, dtype=complex)

        def noise_sop(duration, qubits=(0, 1)):
            if duration <= 0 or device.coherence_free:
                return None
            return noise_model._idle_superop(duration, device.t1, device.t2,
                                             qubits, n)

        def inst(u, targets, duration):
            s = _unitary_superop(core_sim.embed_operator(u, targets, n))
            ns = noise_sop(duration)
            return s if ns is None else ns @ s

        g1, g2 = device.single_gate_len, device.cnot_len
        h_ptr = inst(gates.H, (POINTER,), g1)
        h_sys = inst(gates.H, (SYSTEM,), g1)
        self.prep = h_sys
        self.final = h_ptr
        self.pre = {}
        self.frame_half = {}
        for k in range(1, m + 1):
            theta = 2.0 * math.pi * _frac(2.0 ** (k - 1) * phase)
            rz_m = _unitary_superop(core_sim.embed_operator(
                gates.rz(-theta / 2.0), (SYSTEM,), n))
            rz_p = _unitary_superop(core_sim.embed_operator(
                gates.rz(theta / 2.0), (SYSTEM,), n))
            cx = inst(gates.CNOT, (POINTER, SYSTEM), g2)
            self.pre[k] = h_sys @ cx @ rz_p @ cx @ rz_m @ h_sys @ h_ptr
            self.frame_half[k] = theta / 2.0
        s_exc = ident
        if device.p_reset_excited > 0:
            s_exc = sum(
                _unitary_superop(core_sim.embed_operator(kk, (POINTER,), n))
                for kk in noise_model.excitation_kraus(device.p_reset_excited))
        s_lat = noise_sop(device.meas_reset_latency, qubits=(SYSTEM,))
        s_lat = ident if s_lat is None else s_lat
        s_x = _unitary_superop(core_sim.embed_operator(gates.X, (POINTER,), n))
        self.reset0 = s_lat @ s_exc
        self.reset1 = s_lat @ s_exc @ s_x

    @staticmethod
    def _frame_diag(angle: float) -> np.ndarray:
        a = np.exp(-0.5j * angle)
        d = np.array([a, a.conj(), a, a.conj()])
        return np.outer(d, d.conj()).reshape(-1)

    def run_shot(self, rng: np.random.Generator) -> tuple:
        dev = self.device
        v0 = np.zeros(16, dtype=complex)
        v0[0] = 1.0
        v = self.prep @ v0
        bits_lsb: list = []
        for k in range(self.m, 0, -1):
            theta_k = ipe_theta(list(reversed(bits_lsb)))
            v = self.pre[k] @ v
            v = v * self._frame_diag(self.frame_half[k] + theta_k)
            v = self.final @ v
            # pointer measurement on the vectorized state
            p1 = float(v[5].real + v[15].real)      # rho[1,1] + rho[3,3]
            p0 = float(v[0].real + v[10].real)      # rho[0,0] + rho[2,2]
            if p0 + p1 < 1e-12:
                raise core_sim.StateCorruptionError(
                    "both measurement probabilities vanish")
            p0c = min(max(p0, 0.0), 1.0)
            true_bit = 0 if rng.random() < p0c / (p0 + p1) else 1
            rho = v.reshape(4, 4)
            keep = (1, 3) if true_bit else (0, 2)
            collapsed = np.zeros((4, 4), dtype=complex)
            sel = np.ix_(keep, keep)
            collapsed[sel] = rho[sel] / (p1 if true_bit else p0)
            v = collapsed.reshape(-1)
            flip_p = (dev.p_assign_1given0 if true_bit == 0
                      else dev.p_assign_0given1)
            reported = true_bit
            if flip_p > 0.0 and rng.random() < flip_p:
                reported = 1 - true_bit
            if k > 1:
                v = (self.reset1 if reported else self.reset0) @ v
            bits_lsb.append(reported)
        return tuple(reversed(bits_lsb))
