"""Compile the adaptive phase-estimation circuit into a branch tree.

The instruction set has no arithmetic, so the feedback rotation of each
round cannot be computed at run time; instead every measurement-outcome
history becomes its own code path whose pulse waveforms carry the
accumulated frame phase.  After the k-th measurement a conditional branch
selects the subtree whose pre-baked phases assume bit value 0 or 1.

Per round the emitted playouts mirror the library circuit: pointer
Hadamard, the two-CNOT controlled-phase block (system Hadamard sandwich,
CNOTs with the +-theta'/2 frame deltas folded into their target drive), and
a final pointer Hadamard whose waveform carries theta'/2 plus the feedback
angle.  Qubit reset after each mid-circuit measurement is driven by the
readout result in hardware, not by instructions, so measure blocks of
non-final rounds carry the reset cycle and no reset branches are emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..qpe import ipe_theta
from .assembler import (CNOT_SAMPLES, GATE_SAMPLES, MAX_INSTRUCTIONS,
                        MEASURE_SAMPLES, AssemblyError, SPProgram,
                        WaveformAllocator)
from .isa import ControlMode, SPInstruction


@dataclass(frozen=True)
class PhaseUnitaryDescriptor:
    """Problem unitary: |+> eigenvalue exp(i 2 pi phase), |-> eigenvalue 1."""

    phase: float
    system: int = 0
    pointer: int = 1


def _frac(x: float) -> float:
    return x - math.floor(x)


def compile_ipe(m: int, descriptor: PhaseUnitaryDescriptor) -> SPProgram:
    """Branch-tree program measurement-equivalent to the library's
    per-shot runner; raises when the tree exceeds the 64K instruction store."""
    if m < 1:
        raise ValueError("need at least one bit")
    sys_q, ptr_q = descriptor.system, descriptor.pointer
    alloc = WaveformAllocator()
    instructions: list = []

    def playout(mnemonic, angle, qubits, kind, count, trigger=False):
        blk = alloc.get(mnemonic, angle, qubits, kind, count)
        instructions.append(SPInstruction(
            sample_offset=blk.offset, sample_count=blk.count, loop_count=1,
            trigger_wait=trigger, mode=ControlMode.NEXT))

    def patch_branch(idx, taken):
        old = instructions[idx]
        instructions[idx] = SPInstruction(
            sample_offset=old.sample_offset, sample_count=old.sample_count,
            loop_count=old.loop_count, branch_index_1=idx + 1,
            branch_index_2=taken, trigger_wait=old.trigger_wait,
            mode=ControlMode.CONDITIONAL)

    def emit_round(k: int, tail_bits: tuple):
        """tail_bits = (phi_{k+1}, ..., phi_m) already measured on this path."""
        theta_p = 2.0 * math.pi * _frac(2.0 ** (k - 1) * descriptor.phase)
        playout("h", None, (ptr_q,), "gate", GATE_SAMPLES)
        playout("h", None, (sys_q,), "gate", GATE_SAMPLES)
        playout("cx", -theta_p / 2.0, (ptr_q, sys_q), "gate", CNOT_SAMPLES)
        playout("cx", +theta_p / 2.0, (ptr_q, sys_q), "gate", CNOT_SAMPLES)
        playout("h", None, (sys_q,), "gate", GATE_SAMPLES)
        frame = theta_p / 2.0 + ipe_theta(tail_bits)
        playout("h", frame, (ptr_q,), "gate", GATE_SAMPLES)
        if k == 1:
            playout("measure", None, (ptr_q,), "measure", MEASURE_SAMPLES,
                    trigger=True)
            idx = len(instructions)
            instructions.append(SPInstruction(
                mode=ControlMode.UNCONDITIONAL, branch_index_1=idx))
            return
        playout("measure", None, (ptr_q,), "measure_reset", MEASURE_SAMPLES,
                trigger=True)
        branch_idx = len(instructions)
        instructions.append(SPInstruction(mode=ControlMode.CONDITIONAL))
        emit_round(k - 1, (0,) + tail_bits)          # fall-through: bit 0
        patch_branch(branch_idx, len(instructions))
        emit_round(k - 1, (1,) + tail_bits)          # taken: bit 1

    playout("h", None, (sys_q,), "gate", GATE_SAMPLES)   # eigenstate prep
    emit_round(m, ())
    if len(instructions) > MAX_INSTRUCTIONS:
        raise AssemblyError(
            f"compiled tree needs {len(instructions)} instructions; "
            f"{MAX_INSTRUCTIONS} available")
    n_qubits = max(sys_q, ptr_q) + 1
    return SPProgram(instructions, alloc.table, n_qubits=n_qubits)
