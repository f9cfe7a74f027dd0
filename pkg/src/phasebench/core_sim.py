"""Exact density-matrix simulator for small qubit registers.

Supports unitary gates, generalized (Kraus) channels, projective mid-circuit
measurement into a classical register, classically conditioned unitaries,
conditional reset, timed delays, and zero-duration frame rotations.

States are dense ``2^n x 2^n`` complex matrices with ``n <= 8``; basis index
bit ordering puts qubit 0 in the most significant position.  Operations
return new ``DensityMatrix`` values; instances are never mutated after
construction.  Because of that, independent runs can share nothing and be
executed in parallel freely.

Set ``DEBUG_CHECKS = True`` to re-validate trace, Hermiticity, and positivity
after every instruction executed by :func:`run_circuit`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import gates

MAX_QUBITS = 8

#: when enabled, run_circuit validates the state after every instruction
DEBUG_CHECKS = False


class StateCorruptionError(RuntimeError):
    """The simulated state lost normalization beyond numerical tolerance."""


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DensityMatrix:
    """Mixed state of an ``n_qubits`` register as a dense matrix."""

    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(
                f"register size {self.n_qubits} outside supported range "
                f"1..{MAX_QUBITS}")
        d = 2 ** self.n_qubits
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (d, d):
            raise ValueError(
                f"state matrix shape {self.data.shape} does not match "
                f"{self.n_qubits} qubits")

    @classmethod
    def ground(cls, n_qubits: int) -> "DensityMatrix":
        d = 2 ** n_qubits
        data = np.zeros((d, d), dtype=complex)
        data[0, 0] = 1.0
        return cls(n_qubits, data)

    @classmethod
    def from_statevector(cls, vec: Sequence[complex]) -> "DensityMatrix":
        vec = np.asarray(vec, dtype=complex)
        n = int(round(np.log2(vec.size)))
        if 2 ** n != vec.size:
            raise ValueError("statevector length is not a power of two")
        vec = vec / np.linalg.norm(vec)
        return cls(n, np.outer(vec, vec.conj()))

    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))

    def population(self, qubit: int) -> float:
        """P(qubit = 1), read from the diagonal."""
        diag = np.real(np.diagonal(self.data))
        mask = _bit_mask(self.n_qubits, qubit)
        return float(diag[mask].sum())

    def reduced(self, keep: Sequence[int]) -> "DensityMatrix":
        """Partial trace keeping ``keep`` (in the given order)."""
        keep = list(keep)
        n = self.n_qubits
        drop = [q for q in range(n) if q not in keep]
        t = self.data.reshape((2,) * (2 * n))
        nq = n
        for q in sorted(drop, reverse=True):
            t = np.trace(t, axis1=q, axis2=q + nq)
            nq -= 1
        d = 2 ** len(keep)
        out = t.reshape(d, d)
        if keep != sorted(keep):
            perm = np.argsort(np.argsort(keep))
            out = _permute_qubits(out, list(perm))
        return DensityMatrix(len(keep), out)

    def validate(self, atol: float = 1e-9) -> None:
        """Raise if trace, Hermiticity, or positivity are violated."""
        if abs(self.trace() - 1.0) > atol:
            raise StateCorruptionError(f"trace {self.trace()} != 1")
        if np.max(np.abs(self.data - self.data.conj().T)) > atol:
            raise StateCorruptionError("state is not Hermitian")
        evals = np.linalg.eigvalsh(self.data)
        if evals.min() < -atol:
            raise StateCorruptionError(f"negative eigenvalue {evals.min()}")


class ClassicalRegister:
    """Ordered list of classical bits with checked index access."""

    def __init__(self, width: int):
        if width < 0:
            raise ValueError("register width must be non-negative")
        self.bits = [0] * width

    def __len__(self) -> int:
        return len(self.bits)

    def _check(self, idx: int) -> None:
        if not 0 <= idx < len(self.bits):
            raise IndexError(
                f"classical bit {idx} outside declared width {len(self.bits)}")

    def __getitem__(self, idx: int) -> int:
        self._check(idx)
        return self.bits[idx]

    def __setitem__(self, idx: int, value: int) -> None:
        self._check(idx)
        if value not in (0, 1):
            raise ValueError("classical bits hold 0 or 1")
        self.bits[idx] = value

    def as_tuple(self) -> tuple:
        return tuple(self.bits)


# ---------------------------------------------------------------------------
# instructions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Unitary:
    matrix: np.ndarray
    targets: tuple
    duration: float = 0.0
    label: str = ""

    def __post_init__(self):
        self.targets = tuple(self.targets)


@dataclass(eq=False)
class Measure:
    qubit: int
    cbit: int
    duration: float = 0.0


@dataclass(eq=False)
class ConditionalUnitary:
    """Apply ``matrix`` iff classical bit ``bit`` equals ``value``.

    The wall-clock ``duration`` elapses whether or not the payload runs;
    hardware reserves the slot for both branches.
    """

    matrix: np.ndarray
    targets: tuple
    bit: int
    value: int = 1
    duration: float = 0.0
    label: str = ""

    def __post_init__(self):
        self.targets = tuple(self.targets)


@dataclass(eq=False)
class Reset:
    """Measure-and-flip conditional reset of one qubit.

    ``duration`` defaults to the device measurement+reset latency at run
    time when left as None.
    """

    qubit: int
    duration: float | None = None


@dataclass(eq=False)
class Delay:
    duration: float


@dataclass(eq=False)
class FrameRz:
    """Software frame rotation: exact, zero duration, zero error."""

    qubit: int
    angle: float
    duration: float = field(default=0.0, init=False)


Instruction = Union[Unitary, Measure, ConditionalUnitary, Reset, Delay, FrameRz]


# ---------------------------------------------------------------------------
# operator embedding
# ---------------------------------------------------------------------------

_EMBED_CACHE: dict = {}
_MASK_CACHE: dict = {}


def _bit_mask(n: int, qubit: int) -> np.ndarray:
    """Boolean mask over basis indices where ``qubit`` is 1 (qubit 0 = MSB)."""
    key = (n, qubit)
    m = _MASK_CACHE.get(key)
    if m is None:
        idx = np.arange(2 ** n)
        m = (idx >> (n - 1 - qubit)) & 1 == 1
        _MASK_CACHE[key] = m
    return m


def _permute_qubits(mat: np.ndarray, perm: list) -> np.ndarray:
    """Relabel qubits of a 2^n matrix: new qubit j is old qubit perm[j]."""
    n = len(perm)
    idx = np.arange(2 ** n)
    g = np.zeros_like(idx)
    for j, q in enumerate(perm):
        g |= ((idx >> (n - 1 - j)) & 1) << (n - 1 - q)
    return mat[np.ix_(g, g)]


def embed_operator(u: np.ndarray, targets: Sequence[int], n: int,
                   check_unitary: bool = False) -> np.ndarray:
    """Lift a k-qubit operator on ``targets`` to the full 2^n space.

    With ``check_unitary`` the payload is validated on cache miss (a cache
    hit means the same bytes already passed).
    """
    targets = tuple(targets)
    u = np.asarray(u, dtype=complex)
    key = (u.tobytes(), u.shape, targets, n)
    cached = _EMBED_CACHE.get(key)
    if cached is not None:
        return cached
    if check_unitary and not gates.is_unitary(u, atol=1e-6):
        raise ValueError("payload is not unitary within 1e-6")
    k = len(targets)
    if u.shape != (2 ** k, 2 ** k):
        raise ValueError(
            f"operator dimension {u.shape} does not match {k} target(s)")
    others = [q for q in range(n) if q not in targets]
    grouped = np.kron(u, np.eye(2 ** (n - k), dtype=complex))
    order = list(targets) + others
    # grouped acts on qubit order `order`; map back to natural labels
    idx = np.arange(2 ** n)
    g = np.zeros_like(idx)
    for j, q in enumerate(order):
        g |= ((idx >> (n - 1 - q)) & 1) << (n - 1 - j)
    full = grouped[np.ix_(g, g)]
    if len(_EMBED_CACHE) > 65536:
        _EMBED_CACHE.clear()
    _EMBED_CACHE[key] = full
    return full


def _check_targets(targets: Sequence[int], n: int) -> None:
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits {targets}")
    for q in targets:
        if not 0 <= q < n:
            raise ValueError(f"target qubit {q} outside register of size {n}")


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------

def apply_unitary(state: DensityMatrix, u: np.ndarray,
                  targets: Sequence[int]) -> DensityMatrix:
    """rho -> U rho U^dagger on the given target qubits."""
    _check_targets(targets, state.n_qubits)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2 ** len(targets),) * 2:
        raise ValueError(
            f"unitary of shape {u.shape} does not match {len(targets)} "
            f"target(s)")
    full = embed_operator(u, targets, state.n_qubits, check_unitary=True)
    return DensityMatrix(state.n_qubits, full @ state.data @ full.conj().T)


def apply_kraus(state: DensityMatrix, kraus_set: Sequence[np.ndarray],
                targets: Sequence[int]) -> DensityMatrix:
    """rho -> sum_i K_i rho K_i^dagger; the set must be trace preserving."""
    _check_targets(targets, state.n_qubits)
    kraus_set = [np.asarray(k, dtype=complex) for k in kraus_set]
    d = 2 ** len(targets)
    comp = sum(k.conj().T @ k for k in kraus_set)
    if np.linalg.norm(comp - np.eye(d)) > 1e-6:
        raise ValueError("Kraus set is not completeness-preserving (not CPTP)")
    out = np.zeros_like(state.data)
    for k in kraus_set:
        full = embed_operator(k, targets, state.n_qubits)
        out += full @ state.data @ full.conj().T
    return DensityMatrix(state.n_qubits, out)


def measure(state: DensityMatrix, qubit: int,
            rng: np.random.Generator) -> tuple:
    """Projective Z-basis measurement; returns (outcome, collapsed state)."""
    _check_targets([qubit], state.n_qubits)
    diag = np.real(np.diagonal(state.data))
    mask = _bit_mask(state.n_qubits, qubit)
    p1 = float(diag[mask].sum())
    p0 = float(diag[~mask].sum())
    if p0 + p1 < 1e-12:
        raise StateCorruptionError(
            "both measurement probabilities vanish; state is corrupted")
    p0c = min(max(p0, 0.0), 1.0)
    outcome = 0 if rng.random() < p0c / (p0 + p1) else 1
    keep = mask if outcome == 1 else ~mask
    prob = p1 if outcome == 1 else p0
    new = np.zeros_like(state.data)
    sel = np.where(keep)[0]
    new[np.ix_(sel, sel)] = state.data[np.ix_(sel, sel)] / prob
    return outcome, DensityMatrix(state.n_qubits, new)


# ---------------------------------------------------------------------------
# interpreter
# ---------------------------------------------------------------------------

def run_circuit(instructions: Sequence[Instruction], state: DensityMatrix,
                classical: ClassicalRegister, device=None,
                rng: np.random.Generator | None = None) -> tuple:
    """Execute instructions in order, inserting device noise when given.

    With ``device`` set, every instruction of duration d > 0 is followed by
    relaxation/dephasing over d on all qubits that are not frozen by the
    instruction (a measured/reset qubit is held by projection while
    spectators idle); measurements pick up assignment errors and Reset runs
    the full measure/flip/latency cycle.  With ``device=None`` the run is
    noiseless and zero-duration.

    Returns ``(final_state, classical)``.
    """
    from . import noise_model  # deferred: noise_model builds on this module

    if rng is None:
        rng = np.random.default_rng()

    for instr in instructions:
        if isinstance(instr, Unitary):
            state = apply_unitary(state, instr.matrix, instr.targets)
            if device is not None:
                state = noise_model.apply_timed_noise(
                    state, device, instr.duration, gate_targets=instr.targets)
        elif isinstance(instr, FrameRz):
            state = apply_unitary(state, gates.rz(instr.angle), (instr.qubit,))
        elif isinstance(instr, ConditionalUnitary):
            classical._check(instr.bit)
            fired = classical[instr.bit] == instr.value
            if fired:
                state = apply_unitary(state, instr.matrix, instr.targets)
            if device is not None:
                state = noise_model.apply_timed_noise(
                    state, device, instr.duration,
                    gate_targets=instr.targets if fired else ())
        elif isinstance(instr, Measure):
            classical._check(instr.cbit)
            if device is not None:
                bit, state = noise_model.noisy_measure(
                    state, instr.qubit, device, rng)
            else:
                bit, state = measure(state, instr.qubit, rng)
            classical[instr.cbit] = bit
        elif isinstance(instr, Reset):
            if device is not None:
                reported, state = noise_model.noisy_measure(
                    state, instr.qubit, device, rng)
                state = noise_model.conditional_reset(
                    state, instr.qubit, reported, device,
                    latency=instr.duration)
            else:
                bit, state = measure(state, instr.qubit, rng)
                if bit == 1:
                    state = apply_unitary(state, gates.X, (instr.qubit,))
        elif isinstance(instr, Delay):
            if device is not None:
                state = noise_model.apply_timed_noise(
                    state, device, instr.duration)
        else:
            raise TypeError(f"unknown instruction {instr!r}")
        if DEBUG_CHECKS:
            state.validate(atol=1e-7)
    return state, classical
