"""Measurement-feedback coherent Ising machine simulators.

Two Gaussian models of the same machine: a continuous-time SDE for
high-finesse cavities (`continuous`) and a per-round-trip map composition
for low-finesse cavities (`discrete`).  Both share the self-diagnosis
feedback law in `feedback` and the trial/TTS interface.
"""
from enum import Enum


class CimMode(str, Enum):
    CLOSED_LOOP = "closed"
    OPEN_LOOP = "open"


# Inferred-spin energy within this distance of the ground energy counts as a
# solve; 21-weight energy levels are spaced at least 0.2 apart.
SUCCESS_TOL = 1e-6
