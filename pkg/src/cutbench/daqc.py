"""Exact statevector simulation of annealing-schedule alternating circuits.

The circuit prepares |+>^n and alternates p phase layers exp(-i gamma_k D)
(D diagonal, D(x) = E(x) from the instance) with p transverse-field layers.
The angles come from slicing a cubic anneal schedule

    s(t) = t/T + a * (t/T)(t/T - 1/2)(t/T - 1),   T = p * L,

into p windows and integrating s (phase) and 1-s (mixer) exactly, divided by
the normalized-Frobenius norms |H_P| = sqrt(sum_{i<j} J^2) and |H_M| =
sqrt(n).  The driver whose ground state is |+>^n is -(1/sqrt(n)) sum_i X_i,
so its Trotter factor rotates each qubit by exp(+i beta_k X); run_qaoa
therefore feeds -beta_k to the mixer layer, which itself implements the
conventional exp(-i beta X).

Also provides a dense Schrodinger-equation reference for the same anneal
(for convergence checks), an ideal-hardware shot-time model, R99/TTS, and
the comparison between schedule-based and variationally optimized angles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .analysis import TtsRecord, r99_from_ps
from .instances import IsingInstance, brute_force_ground, energy_table

GROUND_TOL = 1e-6
ADIABATIC_CAP = 12


@dataclass(frozen=True)
class ShotCostModel:
    """Ideal-hardware timing: fixed prep+measure cost plus gate layers."""

    prep_meas_time: float = 1.0e-6
    gate_time: float = 10e-9

    def __post_init__(self) -> None:
        if self.prep_meas_time <= 0 or self.gate_time <= 0:
            raise ValueError("shot cost times must be positive")


@dataclass(frozen=True)
class QaoaSchedule:
    p: int
    gamma: np.ndarray
    beta: np.ndarray
    a: float
    L: float
    T: float


def anneal_fraction(t, T: float, a: float):
    """Cubic schedule s(t); s(0) = 0, s(T) = 1, curvature set by a."""
    u = np.asarray(t, dtype=float) / T
    return u + a * u * (u - 0.5) * (u - 1.0)


def problem_norm(instance: IsingInstance) -> float:
    """sqrt(sum_{i<j} J_ij^2), the normalized Frobenius norm of the diagonal."""
    return math.sqrt(float((instance.couplings**2).sum()) / 2.0)


def build_schedule(instance: IsingInstance, p: int, a: float, L: float) -> QaoaSchedule:
    """Slice the anneal into p windows and integrate the schedule exactly.

    gamma_k = int s(t) dt / |H_P| and beta_k = int (1 - s(t)) dt / |H_M|
    over window k, with the quartic antiderivative of the cubic schedule.
    """
    if p < 1:
        raise ValueError("need at least one layer")
    if not 0.0 <= a <= 4.0:
        raise ValueError(f"cubic coefficient must be in [0, 4], got {a} "
                         "(outside, the schedule is not monotone)")
    if L <= 0:
        raise ValueError("per-layer time must be positive")
    T = p * L

    def antideriv(u: np.ndarray) -> np.ndarray:
        return a * u**4 / 4.0 - a * u**3 / 2.0 + (1.0 + a / 2.0) * u**2 / 2.0

    edges = np.arange(p + 1) / p
    s_integrals = T * (antideriv(edges[1:]) - antideriv(edges[:-1]))
    hp = problem_norm(instance)
    hm = math.sqrt(instance.n)
    gamma = s_integrals / hp if hp > 0 else np.zeros(p)
    beta = (L - s_integrals) / hm
    return QaoaSchedule(p=p, gamma=gamma, beta=beta, a=a, L=L, T=T)


def default_layer_time(n: int) -> float:
    """Tuned per-layer anneal time, growing mildly with problem size."""
    return 1.6 + 0.1 * n


def uniform_state(n: int) -> np.ndarray:
    return np.full(1 << n, 2.0 ** (-n / 2.0), dtype=complex)


def apply_phase_layer(
    state: np.ndarray,
    instance: IsingInstance,
    gamma_k: float,
    diag: np.ndarray | None = None,
) -> np.ndarray:
    """amp[x] *= exp(-i gamma_k E(x)); pass `diag` to reuse the energy table."""
    if diag is None:
        diag = energy_table(instance)
    return state * np.exp(-1j * gamma_k * diag)


def apply_mixer_layer(state: np.ndarray, beta_k: float) -> np.ndarray:
    """exp(-i beta_k X) independently on every qubit."""
    out = state.copy()
    n = int(round(math.log2(out.size)))
    c = math.cos(beta_k)
    s = math.sin(beta_k)
    for q in range(n):
        v = out.reshape(-1, 2, 1 << q)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :].copy()
        v[:, 0, :] = c * a0 - 1j * s * a1
        v[:, 1, :] = -1j * s * a0 + c * a1
    return out


def run_angles(
    instance: IsingInstance,
    gamma: np.ndarray,
    beta: np.ndarray,
    diag: np.ndarray | None = None,
) -> np.ndarray:
    """Circuit for explicit angle vectors; mixer angles enter with the
    driver's sign (see module docstring)."""
    if diag is None:
        diag = energy_table(instance)
    state = uniform_state(instance.n)
    for g_k, b_k in zip(gamma, beta):
        state = apply_phase_layer(state, instance, float(g_k), diag)
        state = apply_mixer_layer(state, -float(b_k))
    return state


def run_qaoa(
    instance: IsingInstance,
    schedule: QaoaSchedule,
    diag: np.ndarray | None = None,
) -> np.ndarray:
    """Run the p-layer circuit from the uniform superposition."""
    return run_angles(instance, schedule.gamma, schedule.beta, diag)


def _sum_x(state: np.ndarray, n: int) -> np.ndarray:
    """(sum_i X_i) |state>."""
    out = np.zeros_like(state)
    for q in range(n):
        v = state.reshape(-1, 2, 1 << q)
        o = out.reshape(-1, 2, 1 << q)
        o[:, 0, :] += v[:, 1, :]
        o[:, 1, :] += v[:, 0, :]
    return out


def adiabatic_reference(
    instance: IsingInstance, T: float, a: float, steps: int
) -> np.ndarray:
    """RK4 integration of the continuous anneal the circuit Trotterizes.

    i d/dt psi = [s(t) H1 + (1 - s(t)) H0] psi with H0 = -(1/sqrt(n)) sum X,
    H1 = diag(E)/|H_P|, from psi(0) = |+>^n.  The Hamiltonian is applied
    matrix-free, which keeps n = 12 tractable.
    """
    n = instance.n
    if n > ADIABATIC_CAP:
        raise ValueError(f"adiabatic reference capped at n <= {ADIABATIC_CAP}")
    psi = uniform_state(n)
    if T == 0:
        return psi
    if steps < 1:
        raise ValueError("need at least one integration step")
    hp = problem_norm(instance)
    d1 = energy_table(instance) / hp if hp > 0 else np.zeros(1 << n)
    inv_sqrt_n = 1.0 / math.sqrt(n)

    def rhs(t: float, v: np.ndarray) -> np.ndarray:
        s = float(anneal_fraction(t, T, a))
        return -1j * (s * d1 * v - (1.0 - s) * inv_sqrt_n * _sum_x(v, n))

    h = T / steps
    t = 0.0
    for _ in range(steps):
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * h, psi + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, psi + 0.5 * h * k2)
        k4 = rhs(t + h, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return psi


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


def ground_probability(
    state: np.ndarray,
    instance: IsingInstance,
    ground_energy: float,
    diag: np.ndarray | None = None,
) -> float:
    """Total probability on basis states at the ground energy."""
    if diag is None:
        diag = energy_table(instance)
    mask = diag <= ground_energy + GROUND_TOL
    return float(np.sum(np.abs(state[mask]) ** 2))


def expected_energy(state: np.ndarray, diag: np.ndarray) -> float:
    return float(np.real(np.sum(diag * np.abs(state) ** 2)))


def zz_rounds(n: int) -> int:
    """Depth of one all-pairs ZZ layer under disjoint-pair parallelism.

    Round-robin edge coloring of the complete graph: n-1 rounds for even n,
    n rounds for odd n.
    """
    return n - 1 if n % 2 == 0 else n


def shot_time(n: int, p: int, cost: ShotCostModel = ShotCostModel()) -> float:
    """Seconds per shot: prep/measure plus p layers of ZZ rounds and one
    mixer round."""
    return cost.prep_meas_time + p * (zz_rounds(n) + 1) * cost.gate_time


@dataclass(frozen=True)
class DaqcResult:
    record: TtsRecord
    ground_prob: float
    shot_time_s: float
    schedule: QaoaSchedule


def daqc_tts(
    instance: IsingInstance,
    p: int,
    cost: ShotCostModel = ShotCostModel(),
    a: float = 4.0,
    L: float | None = None,
    ground_energy: float | None = None,
) -> DaqcResult:
    """Schedule-based circuit TTS: R99(ground probability) x shot time."""
    if L is None:
        L = default_layer_time(instance.n)
    if ground_energy is None:
        ground_energy = brute_force_ground(instance).energy
    diag = energy_table(instance)
    if p == 0:
        schedule = QaoaSchedule(0, np.zeros(0), np.zeros(0), a, L, 0.0)
        state = uniform_state(instance.n)
    else:
        schedule = build_schedule(instance, p, a, L)
        state = run_qaoa(instance, schedule, diag)
    gp = ground_probability(state, instance, ground_energy, diag)
    r99 = r99_from_ps(min(gp, 1.0))
    t_ss = shot_time(instance.n, p, cost)
    record = TtsRecord(
        ps=gp,
        r99=r99,
        tts_norm=r99,  # shots
        tts_wallclock_s=r99 * t_ss,
        solver="daqc",
        instance_id=instance.instance_id(),
        n=instance.n,
    )
    return DaqcResult(record, gp, t_ss, schedule)


class _BudgetExhausted(Exception):
    pass


class _BudgetedObjective:
    """Wraps an objective with a hard evaluation budget and best-seen memory."""

    def __init__(self, fun, budget: int):
        self.fun = fun
        self.budget = budget
        self.calls = 0
        self.best_x = None
        self.best_val = math.inf

    def __call__(self, x):
        if self.calls >= self.budget:
            raise _BudgetExhausted
        self.calls += 1
        val = self.fun(x)
        if val < self.best_val:
            self.best_val = val
            self.best_x = np.array(x, dtype=float)
        return val


def _nelder_mead_budgeted(fun, x0: np.ndarray, evals: int) -> np.ndarray:
    """Nelder-Mead (standard 1/2/0.5/0.5 coefficients) with the best iterate
    returned after exactly `evals` objective evaluations."""
    wrapped = _BudgetedObjective(fun, evals)
    simplex = np.vstack([x0] + [x0 + 0.05 * np.eye(len(x0))[i] for i in range(len(x0))])
    try:
        optimize.minimize(
            wrapped,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxfev": evals,
                "maxiter": 10 * evals,
                "xatol": 1e-12,
                "fatol": 1e-14,
            },
        )
    except _BudgetExhausted:
        pass
    return wrapped.best_x if wrapped.best_x is not None else x0


@dataclass(frozen=True)
class VariationalReport:
    r99_baseline: float
    r99_energy_opt: float
    r99_direct_opt: float

    @property
    def ratio_energy(self) -> float:
        return self.r99_energy_opt / self.r99_baseline

    @property
    def ratio_direct(self) -> float:
        return self.r99_direct_opt / self.r99_baseline


def variational_experiment(
    instance: IsingInstance,
    p: int = 4,
    evals: int = 100,
    a: float = 4.0,
    L: float | None = None,
    ground_energy: float | None = None,
) -> VariationalReport:
    """Compare the schedule baseline against two variational refinements.

    From the schedule's angles, run budgeted Nelder-Mead twice: once
    minimizing the exact expected energy (the practical surrogate) and once
    minimizing the exact R99 (impossible in practice, shown for contrast).
    Returns the resulting R99 values; the energy-optimized one can exceed
    the baseline because expected energy and R99 are not aligned.
    """
    if instance.n > 20:
        raise ValueError("variational experiment capped at n <= 20")
    if L is None:
        L = default_layer_time(instance.n)
    if ground_energy is None:
        ground_energy = brute_force_ground(instance).energy
    diag = energy_table(instance)
    schedule = build_schedule(instance, p, a, L)
    theta0 = np.concatenate([schedule.gamma, schedule.beta])

    def run_theta(theta: np.ndarray) -> np.ndarray:
        return run_angles(instance, theta[:p], theta[p:], diag)

    def r99_of(theta: np.ndarray) -> float:
        return r99_from_ps(min(ground_probability(run_theta(theta), instance, ground_energy, diag), 1.0))

    baseline = r99_of(theta0)
    if evals <= 0:
        return VariationalReport(baseline, baseline, baseline)

    best_energy_theta = _nelder_mead_budgeted(
        lambda th: expected_energy(run_theta(th), diag), theta0, evals
    )
    best_r99_theta = _nelder_mead_budgeted(r99_of, theta0, evals)
    return VariationalReport(
        r99_baseline=baseline,
        r99_energy_opt=r99_of(best_energy_theta),
        r99_direct_opt=r99_of(best_r99_theta),
    )
