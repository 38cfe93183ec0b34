"""Monte Carlo emulation of threshold-descent quantum minimum finding.

The algorithm repeatedly runs an amplitude-amplification search for any
state strictly below a classical energy threshold, then moves the threshold
to the state found.  With the marked count t known at every stage, the
rotation-angle closed forms

    theta = arcsin(sqrt(t/N)),  p_succ = sin^2((2m+1) theta)

give the optimal iteration count m_opt = floor(pi / (4 theta)) and the
per-search failure probability, and each search is repeated K times so that
the whole descent succeeds with a target probability.  Because this needs
only the exact energy histogram of the instance, the descent is emulated as
a Monte Carlo walk over histogram levels; wall-clock TTS and gate totals
come from analytic circuit cost models with configurable coefficients
(register width b = ceil(log2(10 n(n-1))) covers the shifted integer energy
range of 21-weight instances).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import TtsRecord
from .instances import EnergyHistogram


@dataclass(frozen=True)
class QmfCostModel:
    """Per-iteration circuit cost: depth/gate counts of one Grover iteration.

    depth = A1 * n(n-1) * ceil(log2 b) + A2 * b^2 + A3 * n, with b the energy
    register width: serial per-edge Fourier-space additions for two energy
    oracles plus uncompute, the boundary QFT pair and comparator, and the
    diffusion reflection.  Gate counts use the same structure with an extra
    register-width factor on the leading term, per gate family.
    """

    gate_time: float = 10e-9
    prep_meas_time: float = 1.0e-6
    depth_coeffs: tuple = (1.0, 1.0, 1.0)
    gate_coeffs: dict = field(
        default_factory=lambda: {
            "single_qubit": (1.0, 1.0, 1.0),
            "cnot": (1.0, 1.0, 1.0),
            "t_gate": (1.0, 1.0, 1.0),
        }
    )

    def __post_init__(self) -> None:
        if self.gate_time <= 0 or self.prep_meas_time <= 0:
            raise ValueError("cost model times must be positive")


@dataclass(frozen=True)
class GroverStep:
    """One threshold stage: marked count, rotation angle, iteration plan."""

    t: int
    theta: float
    m_opt: int
    wp_fail: float
    k: int
    threshold_energy: float


@dataclass(frozen=True)
class GroverTrajectory:
    steps: tuple
    initial_energy: float
    final_energy: float
    n: int
    p_target: float

    @property
    def num_updates(self) -> int:
        return len(self.steps)

    @property
    def sum_km(self) -> int:
        return sum(s.k * s.m_opt for s in self.steps)


def grover_success_prob(m: int, theta: float) -> tuple[float, float]:
    """(p_succ, p_fail) after m iterations at rotation angle theta."""
    if m < 0:
        raise ValueError("iteration count must be non-negative")
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError(f"theta must be in (0, pi/2], got {theta}")
    s = math.sin((2 * m + 1) * theta) ** 2
    return s, 1.0 - s


def optimal_iterations(t: int, big_n: int) -> tuple[int, float]:
    """(m_opt, theta) for t marked states among big_n.

    m_opt = floor(pi / (4 theta)); at this count the failure probability is
    at most t/N.
    """
    if t < 1:
        raise ValueError("no marked states: the search target is already optimal")
    if t > big_n:
        raise ValueError("marked count exceeds the search space")
    theta = math.asin(math.sqrt(t / big_n))
    return int(math.floor(math.pi / (4.0 * theta))), theta


def boosting_count(wp_fail: float, num_updates: int, p_target: float = 0.99) -> int:
    """Repetitions K so a descent with `num_updates` stages hits p_target.

    K >= ln(1 - p_target^(1/J)) / ln(wp_fail), clamped to at least 1.
    """
    if not 0.0 <= wp_fail < 1.0:
        raise ValueError(f"failure probability must be in [0, 1), got {wp_fail}")
    if num_updates < 1:
        raise ValueError("need at least one threshold update")
    if not 0.0 < p_target < 1.0:
        raise ValueError(f"target probability must be in (0, 1), got {p_target}")
    if wp_fail == 0.0:
        return 1
    per_stage = 1.0 - p_target ** (1.0 / num_updates)
    return max(1, math.ceil(math.log(per_stage) / math.log(wp_fail)))


def simulate_trajectory(
    histogram: EnergyHistogram, p_target: float, rng: np.random.Generator
) -> GroverTrajectory:
    """Sample one threshold-descent path over the histogram levels.

    The initial threshold is a uniformly random state; each search returns a
    uniformly random marked state, i.e. the next level is drawn with
    probability proportional to degeneracy among strictly lower levels.  The
    walk stops when nothing lies below the threshold.  Boosting counts are
    assigned afterwards, once the number of stages J is known.
    """
    cum = np.cumsum(histogram.degeneracies)
    big_n = int(cum[-1])
    level = int(np.searchsorted(cum, rng.integers(0, big_n), side="right"))
    initial_energy = float(histogram.energies[level])

    raw: list[tuple[int, float, int, float, float]] = []
    while level > 0:
        t = int(cum[level - 1])
        m_opt, theta = optimal_iterations(t, big_n)
        _, wp_fail = grover_success_prob(m_opt, theta)
        raw.append((t, theta, m_opt, wp_fail, float(histogram.energies[level])))
        level = int(np.searchsorted(cum, rng.integers(0, t), side="right"))

    num_updates = len(raw)
    steps = tuple(
        GroverStep(t, theta, m, wp, boosting_count(wp, num_updates, p_target), energy)
        for (t, theta, m, wp, energy) in raw
    )
    return GroverTrajectory(
        steps=steps,
        initial_energy=initial_energy,
        final_energy=histogram.ground_energy,
        n=histogram.n,
        p_target=p_target,
    )


def register_bits(n: int) -> int:
    """Energy register width for integerized weights in [-10, 10]."""
    if n < 2:
        raise ValueError("need at least 2 vertices")
    return math.ceil(math.log2(10 * n * (n - 1)))


def circuit_depth(n: int, cost: QmfCostModel = QmfCostModel()) -> float:
    """Gate-layer depth of one search iteration."""
    b = register_bits(n)
    a1, a2, a3 = cost.depth_coeffs
    return a1 * n * (n - 1) * math.ceil(math.log2(b)) + a2 * b**2 + a3 * n


def circuit_gates(n: int, cost: QmfCostModel = QmfCostModel()) -> dict:
    """Gate counts of one search iteration, per gate family."""
    b = register_bits(n)
    loglog = math.ceil(math.log2(b))
    counts = {}
    for family, (g1, g2, g3) in cost.gate_coeffs.items():
        counts[family] = g1 * n * (n - 1) * b * loglog + g2 * b**2 + g3 * n
    return counts


@dataclass(frozen=True)
class QmfResult:
    record: TtsRecord
    sum_km: int
    depth: float
    gate_totals: dict


def qmf_tts(
    trajectory: GroverTrajectory,
    n: int,
    cost: QmfCostModel = QmfCostModel(),
    include_prep_meas: bool = False,
) -> QmfResult:
    """TTS and gate totals for one sampled descent.

    tts_norm counts search iterations (sum_j K_j m_j); wall-clock charges the
    per-iteration circuit depth at gate_time.  Prep/measure overhead per
    boosted search is an opt-in extra.
    """
    if trajectory.n != n:
        raise ValueError("trajectory was sampled for a different instance size")
    sum_km = trajectory.sum_km
    depth = circuit_depth(n, cost)
    wallclock = sum_km * depth * cost.gate_time
    if include_prep_meas:
        wallclock += sum(s.k for s in trajectory.steps) * cost.prep_meas_time
    gates = {fam: sum_km * per for fam, per in circuit_gates(n, cost).items()}
    record = TtsRecord(
        ps=trajectory.p_target,
        r99=1.0,
        tts_norm=float(sum_km),
        tts_wallclock_s=wallclock,
        solver="dhqmf",
        n=n,
    )
    return QmfResult(record, sum_km, depth, gates)


def verify_success_probability(
    histogram: EnergyHistogram,
    p_target: float,
    runs: int,
    rng: np.random.Generator,
) -> float:
    """Empirical success rate of the boosted algorithm.

    Each run samples a descent, then every stage's boosted search succeeds
    with probability 1 - wp_fail^K; one failed stage fails the run (the plan
    requires every boosted search to succeed).
    """
    if runs < 1:
        raise ValueError("need at least one run")
    wins = 0
    for _ in range(runs):
        traj = simulate_trajectory(histogram, p_target, rng)
        ok = True
        for step_ in traj.steps:
            if rng.random() >= 1.0 - step_.wp_fail**step_.k:
                ok = False
                break
        wins += ok
    return wins / runs
