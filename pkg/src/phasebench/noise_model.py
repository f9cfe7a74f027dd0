"""Device parameters and the concrete channels derived from them.

Idle decoherence over a duration t is modeled as amplitude damping with
gamma = 1 - exp(-t/T1) composed with pure dephasing at rate
1/Tphi = 1/T2 - 1/(2 T1).  Measurement assignment error is a classical flip
of the reported bit without extra back-action; conditional reset is a
reported-bit-conditioned X followed by a partial excitation channel and a
latency window during which spectator qubits idle.  Gate noise defaults to
coherence-limited decay over the gate duration; depolarizing channels at the
configured error-per-gate strengths are opt-in.

All functions are pure over an immutable :class:`DeviceParams`, so parallel
parameter sweeps need no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import core_sim, gates

_INF = float("inf")


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    return (float(value),)


@dataclass(frozen=True)
class DeviceParams:
    """Noise-and-latency model of a small device.

    ``t1``/``t2``/``epg_single`` accept a scalar (applied to every qubit) or
    one value per qubit.  Durations are seconds, rates are probabilities.
    """

    t1: tuple = (_INF,)
    t2: tuple = (_INF,)
    single_gate_len: float = 40e-9          # 30 ns pulse + 10 ns buffer
    cnot_len: float = 280e-9
    meas_reset_latency: float = 1.4e-6      # two measure+reset cycles
    p_assign_1given0: float = 0.0
    p_assign_0given1: float = 0.0
    p_reset_excited: float = 0.0
    epg_single: tuple = (0.0,)
    epg_cnot: float = 0.0
    gate_depolarizing_enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "t1", _as_tuple(self.t1))
        object.__setattr__(self, "t2", _as_tuple(self.t2))
        object.__setattr__(self, "epg_single", _as_tuple(self.epg_single))
        for q in range(max(len(self.t1), len(self.t2))):
            t1, t2 = self.t1_of(q), self.t2_of(q)
            if t1 <= 0 or t2 <= 0:
                raise ValueError("T1 and T2 must be positive")
            if math.isfinite(t2) and t2 > 2 * t1 + 1e-12 * t1:
                raise ValueError(f"qubit {q}: T2={t2} exceeds 2*T1={2 * t1}")
        for name in ("p_assign_1given0", "p_assign_0given1",
                     "p_reset_excited", "epg_cnot"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for v in self.epg_single:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"epg_single={v} outside [0, 1]")
        for name in ("single_gate_len", "cnot_len", "meas_reset_latency"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def _per_qubit(self, values: tuple, q: int) -> float:
        return values[q] if q < len(values) else values[-1]

    def t1_of(self, q: int) -> float:
        return self._per_qubit(self.t1, q)

    def t2_of(self, q: int) -> float:
        return self._per_qubit(self.t2, q)

    def epg_single_of(self, q: int) -> float:
        return self._per_qubit(self.epg_single, q)

    @property
    def coherence_free(self) -> bool:
        return all(not math.isfinite(t) for t in self.t1 + self.t2)

    @classmethod
    def noiseless(cls) -> "DeviceParams":
        return cls()

    @classmethod
    def paper_defaults(cls, assignment: tuple | None = None,
                       reset: float = 0.01) -> "DeviceParams":
        """Median coherences and calibrated error rates of the reference
        two-qubit device (system = qubit 0, pointer = qubit 1)."""
        p10, p01 = assignment if assignment is not None else (0.0062, 0.0104)
        return cls(
            t1=(68.20e-6, 49.23e-6),
            t2=(59.93e-6, 41.92e-6),
            p_assign_1given0=p10,
            p_assign_0given1=p01,
            p_reset_excited=reset,
            epg_single=(7.59e-4, 5.67e-4),
            epg_cnot=1.55e-2,
        )

    def with_(self, **kwargs) -> "DeviceParams":
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# Kraus builders
# ---------------------------------------------------------------------------

def amplitude_damping_kraus(t: float, t1: float) -> list:
    """T1 relaxation over duration t: gamma = 1 - exp(-t/T1)."""
    if t < 0:
        raise ValueError("duration must be non-negative")
    if t1 <= 0:
        raise ValueError("T1 must be positive")
    if t == 0.0 or not math.isfinite(t1):
        return [gates.I2.copy()]
    gamma = 1.0 - math.exp(-t / t1)
    return [
        np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]], dtype=complex),
        np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=complex),
    ]


def pure_dephasing_kraus(t: float, t1: float, t2: float) -> list:
    """Pure dephasing over t at 1/Tphi = 1/T2 - 1/(2 T1).

    T2 = 2 T1 is the T1-limited case and yields the identity channel.
    """
    if math.isfinite(t2) and t2 > 2 * t1 * (1 + 1e-12):
        raise ValueError(f"T2={t2} exceeds 2*T1={2 * t1}")
    inv_t1 = 0.0 if not math.isfinite(t1) else 1.0 / t1
    inv_t2 = 0.0 if not math.isfinite(t2) else 1.0 / t2
    rate = inv_t2 - 0.5 * inv_t1
    if t == 0.0 or rate <= 0.0:
        return [gates.I2.copy()]
    p = 0.5 * (1.0 - math.exp(-t * rate))
    return [math.sqrt(1.0 - p) * gates.I2, math.sqrt(p) * gates.Z]


def excitation_kraus(p: float) -> list:
    """Partial inverse of amplitude damping: |0> gains P(1) = p, |1> stays."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("excitation probability outside [0, 1]")
    if p == 0.0:
        return [gates.I2.copy()]
    return [
        np.array([[math.sqrt(1.0 - p), 0.0], [0.0, 1.0]], dtype=complex),
        np.array([[0.0, 0.0], [math.sqrt(p), 0.0]], dtype=complex),
    ]


def depolarizing_kraus(p: float, n_targets: int) -> list:
    """Uniform Pauli-twirl depolarizing channel with process error p.

    rho -> (1 - p) rho + p I/d, realized with Kraus weights
    (1 - p + p/d^2) on the identity and p/d^2 on each non-trivial Pauli.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing strength outside [0, 1]")
    if n_targets not in (1, 2):
        raise ValueError("depolarizing channel supports 1 or 2 targets")
    paulis = list(gates.PAULIS_1Q)
    if n_targets == 2:
        paulis = [np.kron(a, b) for a in gates.PAULIS_1Q
                  for b in gates.PAULIS_1Q]
    d2 = len(paulis)
    if p == 0.0:
        return [paulis[0].copy()]
    w_id = 1.0 - p + p / d2
    w_other = p / d2
    out = [math.sqrt(w_id) * paulis[0]]
    out.extend(math.sqrt(w_other) * pp for pp in paulis[1:])
    return out


def idle_kraus(t: float, t1: float, t2: float) -> list:
    """Composed relaxation-then-dephasing Kraus set for one idle qubit."""
    ad = amplitude_damping_kraus(t, t1)
    pd = pure_dephasing_kraus(t, t1, t2)
    if len(ad) == 1 and len(pd) == 1:
        return [gates.I2.copy()]
    return [b @ a for b in pd for a in ad]


# ---------------------------------------------------------------------------
# cached per-step superoperators (hot path of the interpreter)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _idle_superop(t: float, t1s: tuple, t2s: tuple, qubits: tuple,
                  n: int) -> np.ndarray | None:
    """Row-major-vec superoperator applying idle decay on ``qubits``.

    Returns None when every channel is the identity.
    """
    d = 2 ** n
    total = None
    for q in qubits:
        ks = idle_kraus(t, t1s[min(q, len(t1s) - 1)],
                        t2s[min(q, len(t2s) - 1)])
        if len(ks) == 1:
            continue
        s = np.zeros((d * d, d * d), dtype=complex)
        for k in ks:
            full = core_sim.embed_operator(k, (q,), n)
            s += np.kron(full, full.conj())
        total = s if total is None else s @ total
    return total


def _apply_superop(state: core_sim.DensityMatrix,
                   sop: np.ndarray) -> core_sim.DensityMatrix:
    d = state.data.shape[0]
    out = (sop @ state.data.reshape(-1)).reshape(d, d)
    return core_sim.DensityMatrix(state.n_qubits, out)


def apply_timed_noise(state: core_sim.DensityMatrix, device: DeviceParams,
                      duration: float, gate_targets: Sequence[int] = (),
                      frozen: Sequence[int] = ()) -> core_sim.DensityMatrix:
    """Apply the per-instruction noise policy.

    All qubits not in ``frozen`` pick up relaxation/dephasing over
    ``duration`` (gate noise on the involved qubits is coherence-limited by
    default).  When depolarizing gate errors are enabled, the configured EPG
    channel additionally hits ``gate_targets``.
    """
    n = state.n_qubits
    if duration > 0 and not device.coherence_free:
        qubits = tuple(q for q in range(n) if q not in frozen)
        if n <= 3:
            sop = _idle_superop(duration, device.t1, device.t2, qubits, n)
            if sop is not None:
                state = _apply_superop(state, sop)
        else:
            for q in qubits:
                ks = idle_kraus(duration, device.t1_of(q), device.t2_of(q))
                if len(ks) > 1:
                    state = core_sim.apply_kraus(state, ks, (q,))
    if device.gate_depolarizing_enabled and gate_targets:
        targets = tuple(gate_targets)
        if len(targets) == 1:
            p = device.epg_single_of(targets[0])
        else:
            p = device.epg_cnot
        if p > 0:
            state = core_sim.apply_kraus(
                state, depolarizing_kraus(p, len(targets)), targets)
    return state


# ---------------------------------------------------------------------------
# measurement and reset
# ---------------------------------------------------------------------------

def noisy_measure(state: core_sim.DensityMatrix, qubit: int,
                  params: DeviceParams, rng: np.random.Generator) -> tuple:
    """Projective measurement whose reported bit may be misassigned.

    Returns (reported bit, collapsed state).  The collapse itself is ideal;
    only the classical report flips, with P(report 1 | true 0) =
    ``p_assign_1given0`` and P(report 0 | true 1) = ``p_assign_0given1``.
    With zero error rates this is bit-identical to :func:`core_sim.measure`
    under the same rng stream.
    """
    true_bit, state = core_sim.measure(state, qubit, rng)
    flip_p = (params.p_assign_1given0 if true_bit == 0
              else params.p_assign_0given1)
    reported = true_bit
    if flip_p > 0.0 and rng.random() < flip_p:
        reported = 1 - true_bit
    return reported, state


def conditional_reset(state: core_sim.DensityMatrix, qubit: int,
                      reported_bit: int, params: DeviceParams,
                      latency: float | None = None) -> core_sim.DensityMatrix:
    """Reported-bit-conditioned X, residual excitation, and latency idling.

    The reset pulse fires only when the measurement reported 1, so a
    misassigned excited qubit stays excited.  The qubit under reset is held
    for the latency window while every spectator idles for
    ``meas_reset_latency`` (or ``latency`` when given).
    """
    if reported_bit == 1:
        state = core_sim.apply_unitary(state, gates.X, (qubit,))
    if params.p_reset_excited > 0.0:
        state = core_sim.apply_kraus(
            state, excitation_kraus(params.p_reset_excited), (qubit,))
    wait = params.meas_reset_latency if latency is None else latency
    state = apply_timed_noise(state, params, wait, frozen=(qubit,))
    return state
