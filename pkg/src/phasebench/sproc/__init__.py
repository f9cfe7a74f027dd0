"""Sequence-processor toolchain: assembly parser, 128-bit VLIW codec,
assembler, cycle-level emulator, and feedback-tree compiler."""

from .asm import (AsmStatement, Bnz, Gate, Goto, Halt, Id, Label,
                  MeasureStmt, ParseError, parse_asm)
from .isa import (ControlMode, SPInstruction, decode, encode,
                  read_program_file, write_program_file)
from .assembler import (AssemblyError, SPProgram, WaveformBlock, assemble,
                        build_waveform_table, validate_program)
from .emulator import EmulationResult, EmulationError, emulate
from .compiler import PhaseUnitaryDescriptor, compile_ipe

__all__ = [
    "AsmStatement", "Bnz", "Gate", "Goto", "Halt", "Id", "Label",
    "MeasureStmt", "ParseError", "parse_asm",
    "ControlMode", "SPInstruction", "decode", "encode",
    "read_program_file", "write_program_file",
    "AssemblyError", "SPProgram", "WaveformBlock", "assemble",
    "build_waveform_table", "validate_program",
    "EmulationResult", "EmulationError", "emulate",
    "PhaseUnitaryDescriptor", "compile_ipe",
]
