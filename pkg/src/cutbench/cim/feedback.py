"""Self-diagnosis feedback law shared by both CIM models.

The machine compares the currently inferred Ising energy E with the lowest
energy seen so far and modulates the target squared amplitude a and the pump
rate p through a saturating tanh of the gap:

    a = alpha + rho_a * tanh((E - E_best) / delta)
    p = pi    - rho_p * tanh((E - E_best) / delta)

A large negative gap (a fresh record, including the very first measurement
where E_best is still +inf) saturates to descent mode: full pump, zero
target amplitude.  A large positive gap flips the pump negative to shake the
machine out of a previously visited minimum.
"""
from __future__ import annotations

import numpy as np


def target_and_pump(energy_gap, alpha, rho_a, pi_pump, rho_p, delta_scale):
    """(a, p) from the energy gap; accepts scalars or arrays, gap may be -inf."""
    th = np.tanh(np.asarray(energy_gap, dtype=float) / delta_scale)
    return alpha + rho_a * th, pi_pump - rho_p * th
