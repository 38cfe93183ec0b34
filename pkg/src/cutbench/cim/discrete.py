"""Discrete-map Gaussian model of the measurement-feedback CIM.

For low-finesse cavities the per-round-trip loss is too large for the
continuous SDE, so each pulse is propagated one full round trip at a time as
a Gaussian state (mean 2-vector, 2x2 covariance) through four maps applied
in fixed order:

  1. background linear loss: a beamsplitter against reservoir vacuum,
  2. crystal propagation: joint signal+pump second-moment ODEs integrated
     over the pass (parametric gain, pump depletion, back-conversion), pump
     refreshed every pass and traced out afterwards,
  3. out-coupling + homodyne: a beamsplitter sends part of the pulse to a
     probe mode whose X quadrature is measured; the internal state is
     conditioned on the result (mean shift, rank-1 variance reduction),
  4. feedback injection: displacement by e_i * j*loss_per_rt *
     sum_{j!=i} J_ij mu~_j, where mu~_j = m_j / r_out is the internal
     amplitude inferred from this round trip's measurement record.  The
     j*loss_per_rt weight is the coupling integrated over one round trip,
     which makes the injection agree with the continuous model's feedback
     term at any finesse (an unweighted record displacement has spectral
     radius > 1 for moderate n and diverges).  The displacement is clipped
     at feedback_sat/g, a dynamic-range limit on the injection circuit that
     is inactive at the operating amplitude but bounds the machine state at
     very low finesse, where one round trip's loop gain exceeds unity and
     the SDE's cubic saturation has no per-pass counterpart.

Calibration against the continuous model (power transmissions and crystal
coupling chosen so small-signal gain per pass is exp(p * loss_per_rt) and
the homodyne SNR matches the SDE's inference noise):

    background transmit^2 = exp(-2 * loss_per_rt)
    out-coupling r_out^2  = 1 - exp(-2 * j * loss_per_rt)
    eps*tau = g * sqrt(2 * loss_per_rt),  pump X = (p/g) * sqrt(loss_per_rt/2)

Closed-loop feedback uses the same self-diagnosis law as the continuous
model with dt = loss_per_rt.  Trial time is counted in round trips.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import CimMode, SUCCESS_TOL
from .continuous import SuccessStats, TrialResult, TtsOptimum, GridPoint
from .feedback import target_and_pump
from ..analysis import TtsRecord, r99_from_ps
from ..instances import IsingInstance
from ..rng import trial_rng

# det(cov) may ride the Heisenberg bound 1/4 exactly; allow roundoff below it.
DET_TOL = 1e-9

_VACUUM_COV = 0.5


@dataclass
class DiscreteCimParams:
    """Round-trip model constants.

    loss_per_rt is the normalized loss per round trip (gamma_s * DT_c); j and
    g2 mean the same as in the continuous model.  The crystal map integrates
    its moment ODEs with `crystal_substeps` RK4 steps per pass.
    """

    loss_per_rt: float = 0.1
    j: float = 0.5
    g2: float = 1e-4
    crystal_substeps: int = 32
    n_roundtrips_max: int = 200
    mode: CimMode = CimMode.CLOSED_LOOP
    alpha: float = 1.0
    pi_pump: float = 0.2
    rho_a: float = 1.0
    rho_p: float = 1.0
    delta_scale: float = 0.2
    beta_rate: float = 1.0
    p_start: float = 0.5
    p_end: float = 1.0
    feedback_sat: float = 2.0  # amplitude clip for the feedback sum, in units of 1/g
    rt_wallclock: float = 10e-9  # seconds per round trip

    def __post_init__(self) -> None:
        if self.loss_per_rt <= 0:
            raise ValueError("loss_per_rt must be positive")
        if self.crystal_substeps < 1:
            raise ValueError("crystal_substeps must be >= 1")
        if self.j <= 0 or self.g2 <= 0:
            raise ValueError("j and g2 must be positive")
        self.mode = CimMode(self.mode)

    @classmethod
    def open_loop(cls, **kwargs) -> "DiscreteCimParams":
        kwargs.setdefault("mode", CimMode.OPEN_LOOP)
        kwargs.setdefault("beta_rate", 0.0)
        kwargs.setdefault("rho_a", 0.0)
        kwargs.setdefault("rho_p", 0.0)
        return cls(**kwargs)

    @property
    def g(self) -> float:
        return math.sqrt(self.g2)

    @property
    def bg_transmit2(self) -> float:
        return math.exp(-2.0 * self.loss_per_rt)

    @property
    def r_out2(self) -> float:
        return 1.0 - math.exp(-2.0 * self.j * self.loss_per_rt)

    @property
    def eps_tau(self) -> float:
        return self.g * math.sqrt(2.0 * self.loss_per_rt)

    def pump_mean(self, p: float) -> float:
        return (p / self.g) * math.sqrt(self.loss_per_rt / 2.0)


@dataclass
class PulseState:
    """Gaussian state of one pulse: mean (X, P) and 2x2 covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.array(self.mean, dtype=float)
        self.cov = np.array(self.cov, dtype=float)
        if self.mean.shape != (2,) or self.cov.shape != (2, 2):
            raise ValueError("mean must be a 2-vector and cov a 2x2 matrix")
        if abs(self.cov[0, 1] - self.cov[1, 0]) > 1e-12:
            raise ValueError("covariance must be symmetric")
        if self.cov[0, 0] <= 0 or self.cov[1, 1] <= 0:
            raise ValueError("covariance diagonal must be positive")

    @classmethod
    def vacuum(cls) -> "PulseState":
        return cls(np.zeros(2), _VACUUM_COV * np.eye(2))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.cov))


def map_background_loss(state: PulseState, transmit2: float) -> PulseState:
    """Beamsplitter against vacuum: mean *= t, cov -> t^2 cov + r^2 I/2."""
    if not 0.0 < transmit2 <= 1.0:
        raise ValueError(f"transmit2 must be in (0, 1], got {transmit2}")
    t = math.sqrt(transmit2)
    r2 = 1.0 - transmit2
    return PulseState(t * state.mean, transmit2 * state.cov + r2 * _VACUUM_COV * np.eye(2))


def _chi_derivs(y: tuple, eps: float) -> tuple:
    """Second-moment flow of the signal+pump pair inside the crystal.

    y = (xi, xb, sxi, spi, sxb, spb, cxx, cpp): signal/pump X means, signal
    X/P variances, pump X/P variances, and the X-X / P-P cross correlations.
    The P means and the X-P correlations stay zero throughout.
    """
    xi, xb, sxi, spi, sxb, spb, cxx, cpp = y
    dxi = eps * (xb * xi + cxx + cpp)
    dxb = -0.5 * eps * ((xi * xi + sxi) + (sxi - spi))
    dsxi = 2.0 * eps * (xb * sxi + xi * cxx)
    dspi = 2.0 * eps * (xi * cpp - xb * spi)
    dsxb = -2.0 * eps * xi * cxx
    dspb = -2.0 * eps * xi * cpp
    dcxx = eps * (xi * (sxb - sxi) + xb * cxx)
    dcpp = eps * (xi * (spb - spi) - xb * cpp)
    return dxi, dxb, dsxi, dspi, dsxb, dspb, dcxx, dcpp


def _stiffness_substeps(y: list, eps: float, substeps: int) -> int:
    """Raise the RK4 substep count when the pass is stiff.

    The mean-field part of the crystal flow conserves Xi^2/2 + Xb^2, which
    bounds the pump excursion along the pass; the local rotation rate is at
    most eps times that radius (variances enter the depletion, so they get
    an allowance too).  `substeps` stays the floor, so the small-gain
    operating regime is integrated exactly as configured.
    """
    xi, xb, sxi = np.asarray(y[0]), np.asarray(y[1]), np.asarray(y[2])
    invariant = 0.5 * float(np.max(xi * xi + 2.0 * sxi)) + float(np.max(np.abs(xb))) ** 2
    rate = eps * math.sqrt(max(invariant, 0.0))
    needed = int(math.ceil(rate / 0.05)) if rate > 0 else 1
    if needed > 16384:
        raise RuntimeError("crystal map too stiff; the machine state has diverged")
    return max(substeps, needed)


def _chi_integrate(y: list, eps: float, substeps: int) -> list:
    """Classical RK4 over unit interaction time; works on scalars or arrays."""
    substeps = _stiffness_substeps(y, eps, substeps)
    h = 1.0 / substeps
    for _ in range(substeps):
        k1 = _chi_derivs(tuple(y), eps)
        k2 = _chi_derivs(tuple(v + 0.5 * h * d for v, d in zip(y, k1)), eps)
        k3 = _chi_derivs(tuple(v + 0.5 * h * d for v, d in zip(y, k2)), eps)
        k4 = _chi_derivs(tuple(v + h * d for v, d in zip(y, k3)), eps)
        y = [
            v + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
            for v, d1, d2, d3, d4 in zip(y, k1, k2, k3, k4)
        ]
    return y


def map_crystal(
    state: PulseState, pump_mean: float, eps_tau: float, substeps: int = 32
) -> PulseState:
    """Propagate through the crystal with a fresh pump, then trace it out.

    Requires the appendix preconditions: zero P means and zero X-P
    correlations on the signal.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if abs(state.mean[1]) > 1e-9 or abs(state.cov[0, 1]) > 1e-9:
        raise ValueError("crystal map requires <P> = 0 and no X-P correlation")
    y = [
        float(state.mean[0]), float(pump_mean),
        float(state.cov[0, 0]), float(state.cov[1, 1]),
        _VACUUM_COV, _VACUUM_COV, 0.0, 0.0,
    ]
    xi, _, sxi, spi, *_ = _chi_integrate(y, eps_tau, substeps)
    if not all(math.isfinite(v) for v in (xi, sxi, spi)):
        raise RuntimeError("crystal map diverged; reduce the coupling or increase substeps")
    return PulseState(np.array([xi, 0.0]), np.diag([sxi, spi]))


def map_outcouple_and_homodyne(
    state: PulseState, r_out2: float, rng: np.random.Generator
) -> tuple[PulseState, float]:
    """Split off a probe, measure its X quadrature, condition the remainder.

    Returns the updated internal state and the homodyne result m.  The
    conditional update subtracts a rank-1 term from the covariance, so the
    internal X variance strictly decreases whenever signal and probe are
    correlated.
    """
    if not 0.0 < r_out2 < 1.0:
        raise ValueError(f"r_out2 must be in (0, 1), got {r_out2}")
    t2 = 1.0 - r_out2
    t = math.sqrt(t2)
    r = math.sqrt(r_out2)
    probe_mean = r * state.mean[0]
    probe_var = r_out2 * state.cov[0, 0] + t2 * _VACUUM_COV
    # Covariance of the kept (X, P) with the probe X after the beamsplitter.
    v = t * r * np.array([state.cov[0, 0] - _VACUUM_COV, state.cov[0, 1]])
    m = float(probe_mean + math.sqrt(probe_var) * rng.standard_normal())
    mean_new = t * state.mean + ((m - probe_mean) / probe_var) * v
    cov_new = t2 * state.cov + r_out2 * _VACUUM_COV * np.eye(2) - np.outer(v, v) / probe_var
    return PulseState(mean_new, cov_new), m


def map_feedback(state: PulseState, v: float) -> PulseState:
    """Displace the X amplitude by v; covariance untouched."""
    return PulseState(state.mean + np.array([v, 0.0]), state.cov.copy())


@dataclass
class FeedbackState:
    """Cross-round-trip bookkeeping: feedback amplitudes and diagnosis."""

    e: np.ndarray
    e_opt: float
    p: float
    a: float
    round_index: int = 0


def init_feedback(n: int, params: DiscreteCimParams) -> FeedbackState:
    if params.mode is CimMode.CLOSED_LOOP:
        # No measurement yet: the gap saturates to descent mode.
        a, p = target_and_pump(
            -math.inf, params.alpha, params.rho_a, params.pi_pump, params.rho_p,
            params.delta_scale,
        )
    else:
        a, p = math.nan, params.p_start
    return FeedbackState(e=np.ones(n), e_opt=math.inf, p=float(p), a=float(a))


@dataclass(frozen=True)
class RoundTripResult:
    measurements: np.ndarray
    inferred_energy: float
    min_det: float


def roundtrip(
    states: list[PulseState],
    instance: IsingInstance,
    params: DiscreteCimParams,
    feedback: FeedbackState,
    rng: np.random.Generator,
) -> RoundTripResult:
    """One full round trip for all pulses; mutates `states` and `feedback`.

    Maps run in the fixed order loss -> crystal -> out-couple/homodyne ->
    feedback displacement.  The pump uses the diagnosis from the previous
    round trip; this round trip's measurements update it afterwards.
    """
    n = instance.n
    if len(states) != n or feedback.e.shape[0] != n:
        raise ValueError("state/feedback size does not match instance")
    pump = params.pump_mean(feedback.p)
    measurements = np.empty(n)
    for i in range(n):
        st = map_background_loss(states[i], params.bg_transmit2)
        st = map_crystal(st, pump, params.eps_tau, params.crystal_substeps)
        st, m = map_outcouple_and_homodyne(st, params.r_out2, rng)
        states[i] = st
        measurements[i] = m

    r_out = math.sqrt(params.r_out2)
    mu_inferred = measurements / r_out
    v_max = params.feedback_sat / params.g
    shift = np.clip(
        (params.j * params.loss_per_rt) * feedback.e * (instance.couplings @ mu_inferred),
        -v_max, v_max)
    for i in range(n):
        states[i] = map_feedback(states[i], float(shift[i]))
    spins = np.where(mu_inferred >= 0.0, 1.0, -1.0)
    energy = float(-0.5 * spins @ instance.couplings @ spins)

    if params.mode is CimMode.CLOSED_LOOP:
        a, p = target_and_pump(
            energy - feedback.e_opt,
            params.alpha, params.rho_a, params.pi_pump, params.rho_p,
            params.delta_scale,
        )
        feedback.e = feedback.e * np.exp(
            -params.beta_rate * (params.g2 * mu_inferred**2 - a) * params.loss_per_rt
        )
        feedback.a, feedback.p = float(a), float(p)
    else:
        frac = (feedback.round_index + 1) / max(params.n_roundtrips_max, 1)
        feedback.p = params.p_start + (params.p_end - params.p_start) * frac
    feedback.e_opt = min(feedback.e_opt, energy)
    feedback.round_index += 1

    min_det = min(st.det for st in states)
    return RoundTripResult(measurements, energy, min_det)


def run_trial(
    instance: IsingInstance,
    params: DiscreteCimParams,
    ground_energy: float,
    rng: np.random.Generator,
) -> TrialResult:
    """One trial of n_roundtrips_max round trips; hit_time is in round trips."""
    states = [PulseState.vacuum() for _ in range(instance.n)]
    feedback = init_feedback(instance.n, params)
    hit_round = None
    best = math.inf
    for _ in range(params.n_roundtrips_max):
        result = roundtrip(states, instance, params, feedback, rng)
        best = min(best, result.inferred_energy)
        if hit_round is None and result.inferred_energy <= ground_energy + SUCCESS_TOL:
            hit_round = feedback.round_index
    return TrialResult(
        success=hit_round is not None,
        hit_time=float(hit_round) if hit_round is not None else None,
        min_energy=best,
        steps=params.n_roundtrips_max,
    )


@dataclass(frozen=True)
class DiscreteDiagnostics:
    """Extrema across every round trip of a batch of trials."""

    min_det: float
    min_sxx: float
    min_spp: float
    min_e: float


def _batch_trials(
    instance: IsingInstance,
    params: DiscreteCimParams,
    ground_energy: float,
    trials: int,
    seed: int,
    collect_diagnostics: bool,
    chunk: int = 256,
) -> tuple[np.ndarray, np.ndarray, DiscreteDiagnostics | None]:
    """Vectorized trials; per-trial homodyne noise streams as in the SDE model.

    Exploits that from vacuum the covariances stay diagonal and the P means
    stay zero, so each pulse carries (mean_x, sxx, spp).
    """
    n = instance.n
    coup = instance.couplings
    rounds = params.n_roundtrips_max
    loss = params.loss_per_rt
    g2 = params.g2
    bg_t2 = params.bg_transmit2
    r2 = params.r_out2
    t2 = 1.0 - r2
    t_amp = math.sqrt(t2)
    r_amp = math.sqrt(r2)
    v_max = params.feedback_sat / params.g
    closed = params.mode is CimMode.CLOSED_LOOP

    success = np.zeros(trials, dtype=bool)
    best_all = np.full(trials, math.inf)
    mins = [math.inf, math.inf, math.inf, math.inf]

    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        t_count = hi - lo
        if rounds == 0:
            continue
        noise = np.stack(
            [trial_rng(seed, instance, rounds, t).standard_normal((rounds, n)) for t in range(lo, hi)],
            axis=1,
        )  # (rounds, t_count, n)

        mx = np.zeros((t_count, n))
        sxx = np.full((t_count, n), _VACUUM_COV)
        spp = np.full((t_count, n), _VACUUM_COV)
        e = np.ones((t_count, n))
        e_opt = np.full(t_count, math.inf)
        best = np.full(t_count, math.inf)
        p_cur = np.full(t_count, init_feedback(n, params).p)

        for k in range(rounds):
            # 1. background loss
            mx = math.sqrt(bg_t2) * mx
            sxx = bg_t2 * sxx + (1.0 - bg_t2) * _VACUUM_COV
            spp = bg_t2 * spp + (1.0 - bg_t2) * _VACUUM_COV

            # 2. crystal with a fresh pump per pulse
            pump = (p_cur / params.g) * math.sqrt(loss / 2.0)
            y = [
                mx,
                np.broadcast_to(pump[:, None], (t_count, n)).copy(),
                sxx,
                spp,
                np.full((t_count, n), _VACUUM_COV),
                np.full((t_count, n), _VACUUM_COV),
                np.zeros((t_count, n)),
                np.zeros((t_count, n)),
            ]
            y = _chi_integrate(y, params.eps_tau, params.crystal_substeps)
            mx, sxx, spp = y[0], y[2], y[3]
            if not np.isfinite(mx).all():
                raise RuntimeError("crystal map diverged in batch run")

            # 3. out-coupling and homodyne conditioning
            probe_mean = r_amp * mx
            probe_var = r2 * sxx + t2 * _VACUUM_COV
            vx = t_amp * r_amp * (sxx - _VACUUM_COV)
            m = probe_mean + np.sqrt(probe_var) * noise[k]
            mx = t_amp * mx + ((m - probe_mean) / probe_var) * vx
            sxx = t2 * sxx + r2 * _VACUUM_COV - vx * vx / probe_var
            spp = t2 * spp + r2 * _VACUUM_COV

            # 4. feedback displacement and diagnosis
            mu_inferred = m / r_amp
            mx = mx + np.clip((params.j * loss) * e * (mu_inferred @ coup),
                              -v_max, v_max)
            spins = np.where(mu_inferred >= 0.0, 1.0, -1.0)
            energy = -0.5 * np.einsum("ti,ti->t", spins @ coup, spins)
            if closed:
                a, p_next = target_and_pump(
                    energy - e_opt,
                    params.alpha, params.rho_a, params.pi_pump, params.rho_p,
                    params.delta_scale,
                )
                e = e * np.exp(-params.beta_rate * (g2 * mu_inferred**2 - a[:, None]) * loss)
                p_cur = p_next
            else:
                p_cur = np.full(
                    t_count,
                    params.p_start + (params.p_end - params.p_start) * ((k + 1) / rounds),
                )
            e_opt = np.minimum(e_opt, energy)
            best = np.minimum(best, energy)

            if collect_diagnostics:
                mins[0] = min(mins[0], float((sxx * spp).min()))
                mins[1] = min(mins[1], float(sxx.min()))
                mins[2] = min(mins[2], float(spp.min()))
                mins[3] = min(mins[3], float(e.min()))

        success[lo:hi] = best <= ground_energy + SUCCESS_TOL
        best_all[lo:hi] = best

    diag = DiscreteDiagnostics(*mins) if collect_diagnostics else None
    return success, best_all, diag


def success_probability(
    instance: IsingInstance,
    params: DiscreteCimParams,
    ground_energy: float,
    trials: int,
    seed: int,
    collect_diagnostics: bool = False,
) -> SuccessStats:
    if trials < 1:
        raise ValueError("need at least one trial")
    success, _, diag = _batch_trials(
        instance, params, ground_energy, trials, seed, collect_diagnostics
    )
    wins = int(success.sum())
    ps = wins / trials
    stderr = math.sqrt(ps * (1.0 - ps) / trials)
    return SuccessStats(ps, stderr, wins, trials, diag)


def tts_from_ps(ps: float, round_trips: int, rt_wallclock: float) -> TtsRecord:
    """TTS with normalized units of round trips."""
    r99 = r99_from_ps(ps)
    tts_rounds = r99 * round_trips
    return TtsRecord(
        ps=ps,
        r99=r99,
        tts_norm=tts_rounds,
        tts_wallclock_s=tts_rounds * rt_wallclock,
    )


def optimize_tts(
    instance: IsingInstance,
    params: DiscreteCimParams,
    rounds_grid,
    trials: int,
    seed: int,
    ground_energy: float,
) -> TtsOptimum:
    """Minimum finite TTS over a grid of trial lengths, in round trips."""
    grid = sorted(int(r) for r in rounds_grid)
    if not grid:
        raise ValueError("rounds grid must be non-empty")
    points = []
    for rounds in grid:
        p_r = replace(params, n_roundtrips_max=rounds)
        stats = success_probability(instance, p_r, ground_energy, trials, seed)
        points.append(GridPoint(float(rounds), stats, tts_from_ps(stats.ps, rounds, params.rt_wallclock)))
    best = None
    for pt in points:
        if math.isfinite(pt.record.tts_norm) and (best is None or pt.record.tts_norm < best.record.tts_norm):
            best = pt
    if best is None:
        last = points[-1]
        return TtsOptimum(False, last.t_max, last.record, tuple(points))
    return TtsOptimum(True, best.t_max, best.record, tuple(points))
