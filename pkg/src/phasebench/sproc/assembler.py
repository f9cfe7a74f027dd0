"""Assembler: statements -> SPProgram (instruction words + waveform table).

Each gate or measure playout becomes one instruction; ``bnz``/``goto``
become conditional/unconditional control transfers; ``id`` exists only for
path-length balancing and is dropped; ``halt`` is encoded as an
unconditional self-branch with zero sample count.  Waveform-table keys
quantize angles to 1e-6 rad so equal-angle pulses share sample blocks.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from . import asm
from .isa import ControlMode, SPInstruction

SAMPLE_RATE = 2.0e9            # samples/s
GATE_SAMPLES = 80              # 40 ns single-qubit slot
CNOT_SAMPLES = 560             # 280 ns echoed two-qubit slot
MEASURE_SAMPLES = 600          # 300 ns readout pulse
MAX_INSTRUCTIONS = 65536
ANGLE_QUANTUM = 1e-6


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class WaveformBlock:
    offset: int
    count: int
    kind: str                 # gate | measure | measure_reset | delay
    mnemonic: str
    angle: float | None
    qubits: tuple

    @property
    def duration(self) -> float:
        return self.count / SAMPLE_RATE


def block_key(mnemonic: str, angle: float | None, qubits) -> tuple:
    q = None if angle is None else int(round((angle % (2 * math.pi))
                                             / ANGLE_QUANTUM))
    return (mnemonic, q, tuple(qubits))


@dataclass
class SPProgram:
    instructions: list
    waveform_table: dict       # block_key -> WaveformBlock
    n_qubits: int = 2
    sample_rate: float = SAMPLE_RATE

    def block_at(self, offset: int) -> WaveformBlock | None:
        for blk in self.waveform_table.values():
            if blk.offset == offset:
                return blk
        return None

    def blocks_by_offset(self) -> dict:
        return {blk.offset: blk for blk in self.waveform_table.values()}

    def usage_ratio(self) -> float:
        return len(self.instructions) / MAX_INSTRUCTIONS

    def to_sidecar_json(self) -> str:
        blocks = [asdict(b) for b in self.waveform_table.values()]
        for b in blocks:
            b["qubits"] = list(b["qubits"])
        return json.dumps({"n_qubits": self.n_qubits,
                           "sample_rate": self.sample_rate,
                           "blocks": blocks}, indent=1)

    @classmethod
    def from_sidecar_json(cls, instructions, text: str) -> "SPProgram":
        data = json.loads(text)
        table = {}
        for b in data["blocks"]:
            blk = WaveformBlock(b["offset"], b["count"], b["kind"],
                                b["mnemonic"], b["angle"],
                                tuple(b["qubits"]))
            table[block_key(blk.mnemonic, blk.angle, blk.qubits)] = blk
        return cls(instructions, table, data["n_qubits"],
                   data["sample_rate"])


class WaveformAllocator:
    """Assigns sample offsets, sharing blocks with equal quantized keys."""

    def __init__(self):
        self.table: dict = {}
        self.next_offset = 0

    def get(self, mnemonic: str, angle: float | None, qubits,
            kind: str, count: int) -> WaveformBlock:
        key = block_key(mnemonic, angle, qubits)
        blk = self.table.get(key)
        if blk is None:
            blk = WaveformBlock(self.next_offset, count, kind, mnemonic,
                                angle, tuple(qubits))
            self.table[key] = blk
            self.next_offset += count
        return blk


def _samples_for(stmt: asm.Gate) -> int:
    if stmt.mnemonic == "delay":
        return max(1, int(round(stmt.angle * SAMPLE_RATE)))
    return GATE_SAMPLES


def build_waveform_table(statements) -> dict:
    """Pre-build a table covering every playout in the statement list."""
    alloc = WaveformAllocator()
    for stmt in statements:
        if isinstance(stmt, asm.Gate):
            kind = "delay" if stmt.mnemonic == "delay" else "gate"
            alloc.get(stmt.mnemonic, stmt.angle, (stmt.qubit,), kind,
                      _samples_for(stmt))
        elif isinstance(stmt, asm.MeasureStmt):
            alloc.get("measure", None, (stmt.qubit,), "measure",
                      MEASURE_SAMPLES)
    return alloc.table


def assemble(statements, waveform_table: dict | None = None,
             n_qubits: int | None = None) -> SPProgram:
    """Two-pass assembly with label resolution and range validation."""
    if waveform_table is None:
        waveform_table = build_waveform_table(statements)

    def lookup(mnemonic, angle, qubits) -> WaveformBlock:
        blk = waveform_table.get(block_key(mnemonic, angle, qubits))
        if blk is None:
            raise AssemblyError(
                f"no waveform-table entry for {mnemonic} on {qubits}")
        return blk

    instructions: list = []
    fixups: list = []            # (instruction index, which field, label)
    labels: dict = {}
    pending: list = []
    max_qubit = -1

    def attach_labels():
        for name in pending:
            labels[name] = len(instructions)
        pending.clear()

    for stmt in statements:
        if isinstance(stmt, asm.Label):
            pending.append(stmt.name)
            continue
        if isinstance(stmt, asm.Id):
            max_qubit = max(max_qubit, stmt.qubit)
            continue                      # optimized out during pulse generation
        attach_labels()
        if isinstance(stmt, asm.Gate):
            blk = lookup(stmt.mnemonic, stmt.angle, (stmt.qubit,))
            max_qubit = max(max_qubit, stmt.qubit)
            instructions.append(SPInstruction(
                sample_offset=blk.offset, sample_count=blk.count,
                loop_count=1, mode=ControlMode.NEXT))
        elif isinstance(stmt, asm.MeasureStmt):
            blk = lookup("measure", None, (stmt.qubit,))
            max_qubit = max(max_qubit, stmt.qubit)
            instructions.append(SPInstruction(
                sample_offset=blk.offset, sample_count=blk.count,
                loop_count=1, trigger_wait=True, mode=ControlMode.NEXT))
        elif isinstance(stmt, asm.Bnz):
            idx = len(instructions)
            instructions.append(SPInstruction(
                mode=ControlMode.CONDITIONAL, branch_index_1=0,
                branch_index_2=0))
            fixups.append((idx, "branch_index_1", None))   # fall-through
            fixups.append((idx, "branch_index_2", stmt.target))
        elif isinstance(stmt, asm.Goto):
            idx = len(instructions)
            instructions.append(SPInstruction(mode=ControlMode.UNCONDITIONAL))
            fixups.append((idx, "branch_index_1", stmt.target))
        elif isinstance(stmt, asm.Halt):
            idx = len(instructions)
            instructions.append(SPInstruction(
                mode=ControlMode.UNCONDITIONAL, branch_index_1=idx,
                sample_count=0))
        else:
            raise AssemblyError(f"cannot assemble {stmt!r}")
    attach_labels()

    resolved = list(instructions)
    for idx, fld, label in fixups:
        if label is None:
            target = idx + 1
        else:
            target = labels[label]
        if target >= len(resolved):
            raise AssemblyError(
                f"branch target {label or 'fall-through'} points past the "
                "end of the program")
        if target >= (1 << 16):
            raise AssemblyError(f"branch target {target} exceeds 16 bits")
        instr = resolved[idx]
        kwargs = {
            "sample_offset": instr.sample_offset,
            "sample_count": instr.sample_count,
            "loop_count": instr.loop_count,
            "branch_index_1": instr.branch_index_1,
            "branch_index_2": instr.branch_index_2,
            "trigger_wait": instr.trigger_wait,
            "mode": instr.mode,
        }
        kwargs[fld] = target
        resolved[idx] = SPInstruction(**kwargs)

    if len(resolved) > MAX_INSTRUCTIONS:
        raise AssemblyError(
            f"program needs {len(resolved)} instructions; "
            f"{MAX_INSTRUCTIONS} available")
    program = SPProgram(resolved, waveform_table,
                        n_qubits=n_qubits or max(max_qubit + 1, 1))
    validate_program(program)
    return program


def validate_program(program: SPProgram) -> None:
    """Structural pass: branch targets in range, playouts resolvable."""
    n = len(program.instructions)
    if n > MAX_INSTRUCTIONS:
        raise AssemblyError("instruction count exceeds 64K")
    offsets = program.blocks_by_offset()
    for i, instr in enumerate(program.instructions):
        if instr.mode == ControlMode.UNCONDITIONAL:
            if instr.branch_index_1 >= n:
                raise AssemblyError(f"instruction {i}: branch target "
                                    f"{instr.branch_index_1} out of range")
        elif instr.mode == ControlMode.CONDITIONAL:
            for t in (instr.branch_index_1, instr.branch_index_2):
                if t >= n:
                    raise AssemblyError(
                        f"instruction {i}: branch target {t} out of range")
        if instr.sample_count > 0 and instr.sample_offset not in offsets:
            raise AssemblyError(
                f"instruction {i}: sample offset {instr.sample_offset} has "
                "no waveform block")
