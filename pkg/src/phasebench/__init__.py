"""phasebench: small dynamic-circuit simulator and phase-estimation workbench.

The package is organized as

- ``core_sim``:        exact density-matrix simulator with mid-circuit
                       measurement, classical bits, and feed-forward
- ``noise_model``:     device parameters and the channels derived from them
- ``qpe``:             circuit builders, shot allocation, and estimators for
                       the Kitaev and iterative phase-estimation protocols
- ``readout_physics``: dispersive-readout forward models and fitters
- ``sproc``:           assembler, binary codec, emulator, and compiler for the
                       128-bit VLIW sequence processor
- ``experiments``:     CLI harness producing CSV results and manifests
"""

__version__ = "0.1.0"
