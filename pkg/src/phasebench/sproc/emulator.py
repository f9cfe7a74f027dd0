"""Cycle-level emulator bridging SPPrograms to the density-matrix backend.

A program-counter machine executes one instruction per cycle: playouts
resolve through the waveform table to gates, measurements, or delays on the
simulator; ``loop_count`` repeats a playout; unconditional/conditional modes
redirect the program counter, with the conditional consuming the most
recently latched readout bit.  The halt idiom is an unconditional
self-branch with zero sample count.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import core_sim, gates, noise_model
from .assembler import SPProgram, WaveformBlock
from .isa import ControlMode


class EmulationError(RuntimeError):
    pass


@dataclass
class EmulationResult:
    bits: list                    # latched readout results, in order
    state: core_sim.DensityMatrix
    cycles: int
    halted: bool


_FIXED_1Q = {
    "x": gates.X, "y": gates.Y, "z": gates.Z, "h": gates.H,
    "s": gates.S, "sdg": gates.SDG, "sx": gates.SX,
}


@lru_cache(maxsize=65536)
def block_unitary(block: WaveformBlock) -> np.ndarray:
    """Unitary a sample block realizes.

    Parameterized mnemonics (rx/ry/rz) rotate by the block angle; fixed
    mnemonics with an angle carry a pre-baked frame rotation on their last
    qubit (gate @ rz(angle)), which is how the compiler materializes
    feedback phases into waveforms.
    """
    mnem = block.mnemonic
    if mnem == "rx":
        return gates.rx(block.angle)
    if mnem == "ry":
        return gates.ry(block.angle)
    if mnem == "rz":
        return gates.rz(block.angle)
    if mnem == "cx":
        u = gates.CNOT
        if block.angle is not None:
            u = u @ np.kron(gates.I2, gates.rz(block.angle))
        return u
    u = _FIXED_1Q.get(mnem)
    if u is None:
        raise EmulationError(f"no unitary for mnemonic {mnem!r}")
    if block.angle is not None:
        u = u @ gates.rz(block.angle)
    return u


def emulate(program: SPProgram, device: noise_model.DeviceParams | None = None,
            rng: np.random.Generator | None = None,
            max_cycles: int = 1_000_000,
            initial: core_sim.DensityMatrix | None = None) -> EmulationResult:
    """Run a program to halt (or ``max_cycles``) and return the classical
    record plus the final register state."""
    if rng is None:
        rng = np.random.default_rng()
    device = device or noise_model.DeviceParams.noiseless()
    state = initial or core_sim.DensityMatrix.ground(program.n_qubits)
    blocks = program.blocks_by_offset()
    n = len(program.instructions)
    bits: list = []
    latch = 0
    pc = 0
    cycles = 0
    while True:
        if cycles >= max_cycles:
            raise EmulationError(
                f"exceeded {max_cycles} cycles; runaway loop at pc={pc}")
        if not 0 <= pc < n:
            raise EmulationError(f"program counter {pc} out of range")
        instr = program.instructions[pc]
        cycles += 1
        if instr.is_halt(pc):
            return EmulationResult(bits, state, cycles, True)
        if instr.sample_count > 0:
            block = blocks.get(instr.sample_offset)
            if block is None:
                raise EmulationError(
                    f"pc={pc}: no waveform block at offset "
                    f"{instr.sample_offset}")
            plays = max(1, instr.loop_count)
            for _ in range(plays):
                state, latched = _play(block, state, device, rng)
                if latched is not None:
                    latch = latched
                    bits.append(latched)
        if instr.mode == ControlMode.NEXT:
            pc += 1
        elif instr.mode == ControlMode.UNCONDITIONAL:
            pc = instr.branch_index_1
        else:
            pc = instr.branch_index_2 if latch else instr.branch_index_1
    # unreachable


def _play(block: WaveformBlock, state, device, rng):
    if block.kind == "gate":
        state = core_sim.apply_unitary(state, block_unitary(block),
                                       block.qubits)
        state = noise_model.apply_timed_noise(
            state, device, block.duration, gate_targets=block.qubits)
        return state, None
    if block.kind == "delay":
        state = noise_model.apply_timed_noise(state, device, block.duration)
        return state, None
    if block.kind in ("measure", "measure_reset"):
        qubit = block.qubits[0]
        reported, state = noise_model.noisy_measure(state, qubit, device, rng)
        if block.kind == "measure_reset":
            # the lumped measure+reset latency subsumes the readout window
            state = noise_model.conditional_reset(state, qubit, reported,
                                                  device)
        else:
            # projection freezes the measured qubit; spectators idle
            state = noise_model.apply_timed_noise(
                state, device, block.duration, frozen=(qubit,))
        return state, reported
    raise EmulationError(f"unknown block kind {block.kind!r}")
