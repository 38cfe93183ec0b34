"""Continuous-time Gaussian model of the measurement-feedback CIM.

Each of the n pulses carries a mean field mu_i, an in-phase variance
sigma_i = <dX^2>, and a quadrature variance eta_i = <dP^2>.  One
Euler-Maruyama step of size dt (in units of the signal decay time) does:

  1. draw w_i with w_i*sqrt(dt) standard normal,
  2. infer amplitudes mu~_i = mu_i + sqrt(1/(4j)) w_i from the homodyne
     record, read spins S_i = sign(mu~_i), and score E = -sum_{i<k} J S S,
  3. (closed loop) set the target amplitude a and pump p from the gap
     between E and the best energy seen; (open loop) ramp p linearly,
  4. update mu with the linear gain/loss, gain saturation, Ising feedback
     j*e_i*sum_k J_ik mu~_k, and the measurement drift sqrt(j)(sigma-1/2)w,
     and relax sigma/eta with their deterministic variance flows,
  5. (closed loop) multiply e_i by exp(-beta(g^2 mu~_i^2 - a)dt), which
     keeps every feedback amplitude positive,
  6. fold E into the running minimum.

A trial succeeds when the inferred-spin energy reaches the ground energy
(within SUCCESS_TOL) before t_max.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import CimMode, SUCCESS_TOL
from .feedback import target_and_pump
from ..analysis import TtsRecord, r99_from_ps
from ..instances import IsingInstance
from ..rng import trial_rng


@dataclass
class ContinuousCimParams:
    """Model constants; time is normalized to the signal decay rate.

    j is the out-coupling rate toward the homodyne detector, g2 the gain
    saturation parameter (inverse photon number at twice threshold), dt the
    integration step (one cavity round trip).  The closed-loop constants
    alpha/pi_pump/rho_a/rho_p/delta_scale/beta_rate drive the self-diagnosis
    law; the open loop instead ramps the pump from p_start to p_end and
    freezes e_i = 1.
    """

    j: float = 0.5
    g2: float = 1e-4
    dt: float = 0.025
    t_max: float = 20.0
    mode: CimMode = CimMode.CLOSED_LOOP
    alpha: float = 1.0
    pi_pump: float = 0.2
    rho_a: float = 1.0
    rho_p: float = 1.0
    delta_scale: float = 0.2
    beta_rate: float = 1.0
    p_start: float = 0.5
    p_end: float = 1.0
    gamma_s_wallclock: float = 2.5e6  # 1/s; 400 ns amplitude decay time

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.t_max < 0:
            raise ValueError("dt must be positive and t_max non-negative")
        if self.j <= 0 or self.g2 <= 0 or self.delta_scale <= 0:
            raise ValueError("j, g2, and delta_scale must be positive")
        self.mode = CimMode(self.mode)

    @classmethod
    def open_loop(cls, **kwargs) -> "ContinuousCimParams":
        kwargs.setdefault("mode", CimMode.OPEN_LOOP)
        kwargs.setdefault("beta_rate", 0.0)
        kwargs.setdefault("rho_a", 0.0)
        kwargs.setdefault("rho_p", 0.0)
        return cls(**kwargs)

    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class CimState:
    """Per-pulse Gaussian descriptors plus the feedback bookkeeping."""

    mu: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray
    e: np.ndarray
    t: float = 0.0
    e_opt: float = math.inf
    best_energy: float = math.inf
    best_spins: np.ndarray | None = None
    last_energy: float = math.nan


@dataclass(frozen=True)
class TrialResult:
    success: bool
    hit_time: float | None
    min_energy: float
    steps: int
    trajectory: dict | None = None


@dataclass(frozen=True)
class CimDiagnostics:
    """Extrema recorded across every accepted step of a batch of trials."""

    min_sigma: float
    min_eta: float
    min_e: float
    min_late_product: float  # min of sigma*eta over steps with t > 1


@dataclass(frozen=True)
class SuccessStats:
    ps: float
    stderr: float
    successes: int
    trials: int
    diagnostics: CimDiagnostics | None = None


def init_state(n: int) -> CimState:
    """Vacuum start: mu = 0, sigma = eta = 1/2, e = 1."""
    if n < 1:
        raise ValueError("need at least one pulse")
    return CimState(
        mu=np.zeros(n),
        sigma=np.full(n, 0.5),
        eta=np.full(n, 0.5),
        e=np.ones(n),
    )


def step(
    state: CimState,
    instance: IsingInstance,
    params: ContinuousCimParams,
    rng: np.random.Generator,
) -> CimState:
    """Advance one Euler-Maruyama step; mutates and returns `state`."""
    n = instance.n
    if state.mu.shape[0] != n:
        raise ValueError("state size does not match instance")
    j, g2, dt = params.j, params.g2, params.dt
    z = rng.standard_normal(n)
    w = z / math.sqrt(dt)

    mu_inferred = state.mu + math.sqrt(1.0 / (4.0 * j)) * w
    spins = np.where(mu_inferred >= 0.0, 1.0, -1.0)
    energy = float(-0.5 * spins @ instance.couplings @ spins)

    if params.mode is CimMode.CLOSED_LOOP:
        a, p = target_and_pump(
            energy - state.e_opt,
            params.alpha, params.rho_a, params.pi_pump, params.rho_p,
            params.delta_scale,
        )
    else:
        a = None
        p = params.p_start + (params.p_end - params.p_start) * (state.t / params.t_max)

    mu, sigma, eta = state.mu, state.sigma, state.eta
    mu2 = mu * mu
    lin = -(1.0 + j) + p - g2 * mu2
    pump_noise = (1.0 + j) + 2.0 * g2 * mu2
    mu_new = (
        mu
        + dt * (lin * mu + j * state.e * (instance.couplings @ mu_inferred))
        + math.sqrt(j) * (sigma - 0.5) * z * math.sqrt(dt)
    )
    sigma_new = sigma + dt * (
        2.0 * (lin - 2.0 * g2 * mu2) * sigma - 2.0 * j * (sigma - 0.5) ** 2 + pump_noise
    )
    eta_new = eta + dt * (2.0 * (-(1.0 + j) - p - g2 * mu2) * eta + pump_noise)

    if not (np.isfinite(mu_new).all() and np.isfinite(sigma_new).all() and np.isfinite(eta_new).all()):
        raise RuntimeError(
            "CIM state diverged (non-finite values); the integration step is too large"
        )

    if params.mode is CimMode.CLOSED_LOOP:
        state.e = state.e * np.exp(-params.beta_rate * (g2 * mu_inferred**2 - a) * dt)
    state.mu, state.sigma, state.eta = mu_new, sigma_new, eta_new
    state.e_opt = min(state.e_opt, energy)
    if energy < state.best_energy:
        state.best_energy = energy
        state.best_spins = spins.copy()
    state.last_energy = energy
    state.t += dt
    return state


def run_trial(
    instance: IsingInstance,
    params: ContinuousCimParams,
    ground_energy: float,
    rng: np.random.Generator,
    record_stride: int = 0,
) -> TrialResult:
    """One trial from vacuum to t_max; success on first ground-energy hit."""
    state = init_state(instance.n)
    steps = params.n_steps()
    hit_time = None
    traj: dict[str, list] | None = None
    if record_stride > 0:
        traj = {"t": [], "mu": [], "sigma": [], "eta": [], "e": [], "energy": []}
    for k in range(steps):
        step(state, instance, params, rng)
        if hit_time is None and state.last_energy <= ground_energy + SUCCESS_TOL:
            hit_time = state.t
        if traj is not None and (k % record_stride == 0 or k == steps - 1):
            traj["t"].append(state.t)
            traj["mu"].append(state.mu.copy())
            traj["sigma"].append(state.sigma.copy())
            traj["eta"].append(state.eta.copy())
            traj["e"].append(state.e.copy())
            traj["energy"].append(state.last_energy)
    if traj is not None:
        traj = {k: np.array(v) for k, v in traj.items()}
    return TrialResult(
        success=hit_time is not None,
        hit_time=hit_time,
        min_energy=state.best_energy,
        steps=steps,
        trajectory=traj,
    )


def _batch_trials(
    instance: IsingInstance,
    params: ContinuousCimParams,
    ground_energy: float,
    trials: int,
    seed: int,
    collect_diagnostics: bool,
    chunk: int = 256,
) -> tuple[np.ndarray, np.ndarray, CimDiagnostics | None]:
    """Vectorized trials with one pre-drawn noise stream per trial.

    Returns (success flags, best energies, diagnostics).  Trial t always
    consumes the stream keyed (seed, instance, steps, t), so results do not
    depend on chunking.
    """
    n = instance.n
    coup = instance.couplings
    steps = params.n_steps()
    j, g2, dt = params.j, params.g2, params.dt
    sq_dt = math.sqrt(dt)
    c_meas = math.sqrt(1.0 / (4.0 * j))
    closed = params.mode is CimMode.CLOSED_LOOP

    success = np.zeros(trials, dtype=bool)
    best_all = np.full(trials, math.inf)
    mins = [math.inf, math.inf, math.inf, math.inf]

    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        t_count = hi - lo
        if steps == 0:
            continue
        noise = np.stack(
            [trial_rng(seed, instance, steps, t).standard_normal((steps, n)) for t in range(lo, hi)],
            axis=1,
        )  # (steps, t_count, n)

        mu = np.zeros((t_count, n))
        sigma = np.full((t_count, n), 0.5)
        eta = np.full((t_count, n), 0.5)
        e = np.ones((t_count, n))
        e_opt = np.full(t_count, math.inf)
        best = np.full(t_count, math.inf)

        for k in range(steps):
            z = noise[k]
            mu_inferred = mu + (c_meas / sq_dt) * z
            spins = np.where(mu_inferred >= 0.0, 1.0, -1.0)
            energy = -0.5 * np.einsum("ti,ti->t", spins @ coup, spins)

            if closed:
                a, p = target_and_pump(
                    energy - e_opt,
                    params.alpha, params.rho_a, params.pi_pump, params.rho_p,
                    params.delta_scale,
                )
                p_col = p[:, None]
            else:
                p_col = params.p_start + (params.p_end - params.p_start) * (k * dt / params.t_max)

            mu2 = mu * mu
            lin = -(1.0 + j) + p_col - g2 * mu2
            pump_noise = (1.0 + j) + 2.0 * g2 * mu2
            mu_new = (
                mu
                + dt * (lin * mu + j * e * (mu_inferred @ coup))
                + math.sqrt(j) * (sigma - 0.5) * z * sq_dt
            )
            sigma_new = sigma + dt * (
                2.0 * (lin - 2.0 * g2 * mu2) * sigma - 2.0 * j * (sigma - 0.5) ** 2 + pump_noise
            )
            eta_new = eta + dt * (2.0 * (-(1.0 + j) - p_col - g2 * mu2) * eta + pump_noise)
            if not np.isfinite(mu_new).all():
                raise RuntimeError(
                    "CIM state diverged (non-finite values); the integration step is too large"
                )
            if closed:
                e = e * np.exp(-params.beta_rate * (g2 * mu_inferred**2 - a[:, None]) * dt)
            mu, sigma, eta = mu_new, sigma_new, eta_new
            e_opt = np.minimum(e_opt, energy)
            best = np.minimum(best, energy)

            if collect_diagnostics:
                mins[0] = min(mins[0], float(sigma.min()))
                mins[1] = min(mins[1], float(eta.min()))
                mins[2] = min(mins[2], float(e.min()))
                if (k + 1) * dt > 1.0:
                    mins[3] = min(mins[3], float((sigma * eta).min()))

        success[lo:hi] = best <= ground_energy + SUCCESS_TOL
        best_all[lo:hi] = best

    diag = CimDiagnostics(*mins) if collect_diagnostics else None
    return success, best_all, diag


def success_probability(
    instance: IsingInstance,
    params: ContinuousCimParams,
    ground_energy: float,
    trials: int,
    seed: int,
    collect_diagnostics: bool = False,
) -> SuccessStats:
    """Fraction of independent trials that reach the ground energy."""
    if trials < 1:
        raise ValueError("need at least one trial")
    success, _, diag = _batch_trials(
        instance, params, ground_energy, trials, seed, collect_diagnostics
    )
    wins = int(success.sum())
    ps = wins / trials
    stderr = math.sqrt(ps * (1.0 - ps) / trials)
    return SuccessStats(ps, stderr, wins, trials, diag)


def tts_from_ps(ps: float, t_max: float, gamma_s_wallclock: float) -> TtsRecord:
    """R99 and TTS (normalized and wall-clock seconds) from one Ps estimate."""
    r99 = r99_from_ps(ps)
    tts_norm = r99 * t_max
    return TtsRecord(
        ps=ps,
        r99=r99,
        tts_norm=tts_norm,
        tts_wallclock_s=tts_norm / gamma_s_wallclock,
    )


@dataclass(frozen=True)
class GridPoint:
    t_max: float
    stats: SuccessStats
    record: TtsRecord


@dataclass(frozen=True)
class TtsOptimum:
    """Best TTS over a t_max grid; `solved` is False when every entry failed."""

    solved: bool
    t_max: float
    record: TtsRecord
    grid: tuple


def optimize_tts(
    instance: IsingInstance,
    params: ContinuousCimParams,
    t_max_grid,
    trials: int,
    seed: int,
    ground_energy: float,
) -> TtsOptimum:
    """Evaluate TTS on each runtime and keep the smallest finite one.

    Ties resolve to the smaller t_max; if nothing solves, the returned record
    carries the infinite sentinel and `solved` is False.
    """
    grid = sorted(float(t) for t in t_max_grid)
    if not grid:
        raise ValueError("t_max grid must be non-empty")
    points = []
    for t_max in grid:
        p_t = replace(params, t_max=t_max)
        stats = success_probability(instance, p_t, ground_energy, trials, seed)
        points.append(GridPoint(t_max, stats, tts_from_ps(stats.ps, t_max, params.gamma_s_wallclock)))
    best = None
    for pt in points:
        if math.isfinite(pt.record.tts_norm) and (best is None or pt.record.tts_norm < best.record.tts_norm):
            best = pt
    if best is None:
        last = points[-1]
        return TtsOptimum(False, last.t_max, last.record, tuple(points))
    return TtsOptimum(True, best.t_max, best.record, tuple(points))
