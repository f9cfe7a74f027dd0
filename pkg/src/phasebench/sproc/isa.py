"""128-bit VLIW instruction word: fields, bit-exact codec, binary file IO.

Fields are packed least-significant-bit first in declaration order:

    sample_offset   bits   0..23
    sample_count    bits  24..47
    loop_count      bits  48..57
    branch_index_1  bits  58..73
    branch_index_2  bits  74..89
    control         bits  90..99   (bit 0 trigger_wait, bits 1-2 mode)
    reserved        bits 100..127  (must be zero)

Program files: 8-byte magic ``SPROG1\\0\\0``, 8-byte little-endian
instruction count, then 16-byte little-endian words.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from enum import IntEnum

MAGIC = b"SPROG1\x00\x00"
WORD_BYTES = 16

FIELDS = (
    ("sample_offset", 24),
    ("sample_count", 24),
    ("loop_count", 10),
    ("branch_index_1", 16),
    ("branch_index_2", 16),
    ("control", 10),
    ("reserved", 28),
)

_TRIGGER_BIT = 0
_MODE_SHIFT = 1
_MODE_MASK = 0b11


class ControlMode(IntEnum):
    NEXT = 0
    UNCONDITIONAL = 1
    CONDITIONAL = 2


@dataclass(frozen=True)
class SPInstruction:
    sample_offset: int = 0
    sample_count: int = 0
    loop_count: int = 0
    branch_index_1: int = 0
    branch_index_2: int = 0
    trigger_wait: bool = False
    mode: ControlMode = ControlMode.NEXT

    def control_field(self) -> int:
        return (int(self.trigger_wait) << _TRIGGER_BIT) \
            | (int(self.mode) << _MODE_SHIFT)

    def is_halt(self, own_index: int) -> bool:
        return (self.mode == ControlMode.UNCONDITIONAL
                and self.branch_index_1 == own_index
                and self.sample_count == 0)


def encode(instr: SPInstruction) -> int:
    """Pack into a 128-bit word; raises on field overflow."""
    values = {
        "sample_offset": instr.sample_offset,
        "sample_count": instr.sample_count,
        "loop_count": instr.loop_count,
        "branch_index_1": instr.branch_index_1,
        "branch_index_2": instr.branch_index_2,
        "control": instr.control_field(),
        "reserved": 0,
    }
    word = 0
    shift = 0
    for name, width in FIELDS:
        v = values[name]
        if not 0 <= v < (1 << width):
            raise ValueError(f"{name}={v} does not fit in {width} bits")
        word |= v << shift
        shift += width
    return word


def decode(word: int | bytes) -> SPInstruction:
    """Inverse of :func:`encode`; warns on non-zero reserved bits."""
    if isinstance(word, (bytes, bytearray)):
        if len(word) != WORD_BYTES:
            raise ValueError(f"expected {WORD_BYTES} bytes")
        word = int.from_bytes(word, "little")
    if not 0 <= word < (1 << 128):
        raise ValueError("word outside 128 bits")
    values = {}
    shift = 0
    for name, width in FIELDS:
        values[name] = (word >> shift) & ((1 << width) - 1)
        shift += width
    if values["reserved"] != 0:
        warnings.warn("non-zero reserved bits in decoded instruction")
    control = values["control"]
    mode_bits = (control >> _MODE_SHIFT) & _MODE_MASK
    if mode_bits > 2:
        raise ValueError(f"invalid mode bits {mode_bits}")
    return SPInstruction(
        sample_offset=values["sample_offset"],
        sample_count=values["sample_count"],
        loop_count=values["loop_count"],
        branch_index_1=values["branch_index_1"],
        branch_index_2=values["branch_index_2"],
        trigger_wait=bool((control >> _TRIGGER_BIT) & 1),
        mode=ControlMode(mode_bits),
    )


def word_to_bytes(word: int) -> bytes:
    return word.to_bytes(WORD_BYTES, "little")


def write_program_file(path, instructions) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(instructions)))
        for instr in instructions:
            fh.write(word_to_bytes(encode(instr)))


def read_program_file(path) -> list:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}; not a program file")
        (count,) = struct.unpack("<Q", fh.read(8))
        out = []
        for _ in range(count):
            word = fh.read(WORD_BYTES)
            if len(word) != WORD_BYTES:
                raise ValueError("truncated program file")
            out.append(decode(word))
        return out
