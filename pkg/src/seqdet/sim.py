"""Monte Carlo experiment engine for the full sensors -> channels -> FC system.

Every trial draws from its own generators keyed by
``(seed; hypothesis, trial, sensor, role)`` so a trial's outcome does not
depend on which worker runs it or in what order.  Within a trial, slots are
simulated in chunks: numpy precomputes per-slot observation LLRs and the
FC update each possible emission would produce, and the slot loop in
:mod:`seqdet.kernel` does the sampling and the SPRT.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernel
from .channels import (AWGN, BEC, BSC, CONTINUOUS, ChannelModel, Ideal, Rayleigh, Rician, Signaling,
                       complex_normal, fading_gains)
from .detection import Hypothesis, ObservationModel, SensorConfig, estimate_local_error_probs, first_sample_stats, llr_increment
from .fusion import (FusionConfig, SensorLink, conventional_demodulate, llr_bsc, llr_channel_aware, llr_ideal,
                     llr_unreliable, max_message_llr, ml_error_rate, presence_statistic)

FUSION_MODES = ("channel-aware", "conventional-ideal", "conventional-bsc", "unreliable-timing", "threshold-then-fuse")
_PER_SLOT_MODES = ("unreliable-timing", "threshold-then-fuse")

_ROLE_OBS, _ROLE_CHANNEL = 0, 1
_PREP_KEY = 2 ** 31 - 1
_FIRST_CHUNK, _MAX_CHUNK = 64, 8192
_BLOCK = 256


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One full-system experiment.

    Fusion thresholds default to ``|log target_alpha|`` and
    ``|log target_beta|``.  Local error probabilities left unset on a sensor
    are estimated from ``prep_trials`` first-sample runs.
    """

    sensors: tuple[SensorConfig, ...]
    channels: tuple[ChannelModel, ...]
    signaling: tuple[Signaling, ...]
    target_alpha: float = 0.01
    target_beta: float = 0.01
    fusion_up: float | None = None
    fusion_down: float | None = None
    fusion_mode: str = "channel-aware"
    hypothesis: Hypothesis = Hypothesis.H1
    trials: int = 1000
    max_time: int = 10 ** 6
    seed: int = 0
    prep_trials: int = 50_000
    detection_threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "signaling", tuple(self.signaling))
        object.__setattr__(self, "hypothesis", Hypothesis.parse(self.hypothesis))
        K = len(self.sensors)
        if K == 0:
            raise ConfigError("at least one sensor is required")
        if len(self.channels) != K or len(self.signaling) != K:
            raise ConfigError("sensors, channels and signaling must have equal lengths")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.max_time < 1:
            raise ConfigError("max_time must be >= 1")
        if self.prep_trials < 1:
            raise ConfigError("prep_trials must be >= 1")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion_mode {self.fusion_mode!r}")
        if not (0 < self.target_alpha < 1 and 0 < self.target_beta < 1):
            raise ConfigError("target error probabilities must lie in (0, 1)")
        for t in (self.fusion_up, self.fusion_down):
            if t is not None and not t > 0:
                raise ConfigError("fusion thresholds must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.fusion_mode in _PER_SLOT_MODES and not all(isinstance(c, CONTINUOUS) for c in self.channels):
            raise ConfigError(f"{self.fusion_mode} fusion needs continuous channels")
        if self.detection_threshold is not None and self.detection_threshold < 0:
            raise ConfigError("detection_threshold must be nonnegative")

    @property
    def thresholds(self) -> tuple[float, float]:
        up = self.fusion_up if self.fusion_up is not None else abs(math.log(self.target_alpha))
        down = self.fusion_down if self.fusion_down is not None else abs(math.log(self.target_beta))
        return up, down

    @property
    def channel_label(self) -> str:
        names = sorted({c.name for c in self.channels})
        return "+".join(names)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        from .config import experiment_to_dict
        return experiment_to_dict(self)

    def digest(self) -> str:
        """Checksum of the canonical JSON form of the config."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Prepared:
    """Config plus everything estimated offline before the trials run."""

    config: ExperimentConfig
    links: tuple[SensorLink, ...]
    eps_ml: tuple[float, ...]
    p_send: tuple[tuple[float, float], ...]   # (P_s,1, P_s,0) per sensor
    mean_intersample: tuple[tuple[float, float], ...]

    @property
    def fusion(self) -> FusionConfig:
        up, down = self.config.thresholds
        return FusionConfig(up, down, self.links)

    def with_thresholds(self, up: float, down: float) -> "Prepared":
        return dataclasses.replace(self, config=self.config.replace(fusion_up=up, fusion_down=down))

    def with_config(self, **kw) -> "Prepared":
        return dataclasses.replace(self, config=self.config.replace(**kw))


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))))


def prepare(config: ExperimentConfig) -> Prepared:
    """Estimate local error probabilities, ML bit error rates and send probabilities."""
    links, eps, p_send, taus = [], [], [], []
    n = config.prep_trials
    for k, (s, ch, sig) in enumerate(zip(config.sensors, config.channels, config.signaling)):
        rng = _generator(config.seed, _PREP_KEY, k)
        est = estimate_local_error_probs(s, n, rng)
        alpha = s.alpha_local if s.alpha_local is not None else est.alpha
        beta = s.beta_local if s.beta_local is not None else est.beta
        if not (0 < alpha < 0.5 and 0 < beta < 0.5):
            raise ConfigError(f"sensor {s.sensor_id}: local error probabilities {alpha}, {beta} "
                              "outside (0, 0.5); raise prep_trials or set them explicitly")
        links.append(SensorLink(alpha, beta, ch, sig))
        eps.append(ml_error_rate(ch, sig, n, rng)[0] if isinstance(ch, CONTINUOUS) else
                   (ch.epsilon if isinstance(ch, BSC) else 0.0))
        t1, t0 = est.stats_h1.mean_tau, est.stats_h0.mean_tau
        taus.append((t1, t0))
        p_send.append((1.0 / t1, 1.0 / t0))
    return Prepared(config, tuple(links), tuple(eps), tuple(p_send), tuple(taus))


# --- per-chunk precomputation ----------------------------------------------


def _discrete_updates(ch, link, mode, u):
    a, b = link.alpha_k, link.beta_k
    if isinstance(ch, Ideal):
        pos = np.full(u.size, llr_ideal(1, a, b))
        neg = np.full(u.size, llr_ideal(-1, a, b))
        return pos, neg
    hit = u < ch.epsilon
    if isinstance(ch, BEC):
        return np.where(hit, 0.0, llr_ideal(1, a, b)), np.where(hit, 0.0, llr_ideal(-1, a, b))
    # BSC: received bit is flipped where hit
    fuse = llr_ideal if mode == "conventional-ideal" else (lambda bit, a, b: llr_bsc(bit, a, b, ch.epsilon))
    up, down = fuse(1, a, b), fuse(-1, a, b)
    return np.where(hit, down, up), np.where(hit, up, down)


def _continuous_values(z, prep, k, mode):
    link = prep.links[k]
    ch, sig = link.channel, link.signaling
    a, b = link.alpha_k, link.beta_k
    if mode == "channel-aware":
        return llr_channel_aware(z, ch, a, b, sig)
    if mode == "conventional-ideal":
        return llr_ideal(conventional_demodulate(z, ch, sig), a, b)
    if mode == "conventional-bsc":
        return llr_bsc(conventional_demodulate(z, ch, sig), a, b, prep.eps_ml[k])
    if mode == "unreliable-timing":
        p1, p0 = prep.p_send[k]
        return llr_unreliable(z, ch, a, b, sig, p1, p0)
    # threshold-then-fuse
    keep = presence_statistic(z, ch.noise_var) >= presence_threshold(prep.config, k)
    return np.where(keep, llr_channel_aware(z, ch, a, b, sig), 0.0)


def presence_threshold(cfg: ExperimentConfig, k: int) -> float:
    """Configured presence threshold, or half the weaker level's mean received SNR plus one."""
    if cfg.detection_threshold is not None:
        return cfg.detection_threshold
    ch, sig = cfg.channels[k], cfg.signaling[k]
    gain_power = abs(ch.mean_gain) ** 2 + ch.gain_var
    weak = min(abs(sig.level_a), abs(sig.level_b)) ** 2
    return 0.5 * weak * gain_power / ch.noise_var + 1.0


def _chunk(prep: Prepared, hyp: Hypothesis, n: int, rngs) -> tuple[np.ndarray, ...]:
    cfg = prep.config
    mode = cfg.fusion_mode
    K = len(cfg.sensors)
    obs = np.empty((K, n))
    pos = np.empty((K, n))
    neg = np.empty((K, n))
    idle = np.zeros((K, n))
    for k in range(K):
        r_obs, r_ch = rngs[k]
        model = cfg.sensors[k].model
        obs[k] = llr_increment(model.sample(hyp, n, r_obs), model)
        link = prep.links[k]
        ch = link.channel
        if isinstance(ch, CONTINUOUS):
            h = fading_gains(ch, n, r_ch)
            w = complex_normal(r_ch, n, ch.noise_var)
            pos[k] = _continuous_values(h * link.signaling.level_a + w, prep, k, mode)
            neg[k] = _continuous_values(h * link.signaling.level_b + w, prep, k, mode)
            if mode in _PER_SLOT_MODES:
                idle[k] = _continuous_values(w, prep, k, mode)
        else:
            pos[k], neg[k] = _discrete_updates(ch, link, mode, r_ch.random(n))
    return obs, pos, neg, idle


# --- trials ------------------------------------------------------------------


@dataclass(frozen=True)
class TrialResult:
    trial: int
    hypothesis: Hypothesis
    decision: str                 # "H1", "H0" or "Truncated"
    delay: int
    messages_per_sensor: tuple[int, ...]
    stopped_llr: float
    wait: tuple[int, ...] | None = None          # slots from stop to each sensor's next emission
    next_llr: tuple[float, ...] | None = None    # received LLR of that emission

    @property
    def truncated(self) -> bool:
        return self.decision == "Truncated"


def _as_prepared(obj) -> Prepared:
    if isinstance(obj, Prepared):
        return obj
    if isinstance(obj, ExperimentConfig):
        return prepare(obj)
    raise TypeError("expected an ExperimentConfig or Prepared")


def run_trial(config, trial_index: int, hypothesis: Hypothesis | None = None, record_tail: bool = False,
              impl=None) -> TrialResult:
    """Simulate one trial; a pure function of ``(config, seed, hypothesis, trial_index)``."""
    prep = _as_prepared(config)
    cfg = prep.config
    hyp = Hypothesis.parse(hypothesis if hypothesis is not None else cfg.hypothesis)
    impl = impl if impl is not None else kernel.impl
    K = len(cfg.sensors)
    rngs = [(_generator(cfg.seed, int(hyp), trial_index, k, _ROLE_OBS),
             _generator(cfg.seed, int(hyp), trial_index, k, _ROLE_CHANNEL)) for k in range(K)]
    thr_up = np.array([s.threshold_up for s in cfg.sensors], dtype=float)
    thr_down = np.array([s.threshold_down for s in cfg.sensors], dtype=float)
    fc_up, fc_down = cfg.thresholds
    per_slot = cfg.fusion_mode in _PER_SLOT_MODES
    acc = np.zeros(K)
    counts = np.zeros(K, dtype=np.int64)
    fc = np.zeros(1)
    t0, size = 0, _FIRST_CHUNK
    status = 0
    while t0 < cfg.max_time:
        n = min(size, cfg.max_time - t0)
        obs, pos, neg, idle = _chunk(prep, hyp, n, rngs)
        status, i, k_stop = impl.run_chunk(obs, pos, neg, idle, acc, counts, fc, thr_up, thr_down,
                                          fc_up, fc_down, per_slot)
        if status:
            break
        t0 += n
        size = min(2 * size, _MAX_CHUNK)
    if not status:
        return TrialResult(trial_index, hyp, "Truncated", cfg.max_time, tuple(int(c) for c in counts), float(fc[0]))
    delay = t0 + i + 1
    wait = next_llr = None
    if record_tail:
        start = np.array([i + 1 if k <= k_stop else i for k in range(K)], dtype=np.int64)
        w = np.zeros(K, dtype=np.int64)
        lam = np.zeros(K)
        stop_col = i
        pending = impl.run_tail(obs, pos, neg, acc, thr_up, thr_down, start, w, lam, stop_col)
        t_next = t0 + n
        while pending:
            n = min(size, _MAX_CHUNK)
            obs, pos, neg, _ = _chunk(prep, hyp, n, rngs)
            stop_col = delay - t_next - 1
            pending = impl.run_tail(obs, pos, neg, acc, thr_up, thr_down, start, w, lam, stop_col)
            t_next += n
            size = min(2 * size, _MAX_CHUNK)
        wait = tuple(int(x) for x in w)
        next_llr = tuple(float(x) for x in lam)
    return TrialResult(trial_index, hyp, "H1" if status > 0 else "H0", delay, tuple(int(c) for c in counts),
                       float(fc[0]), wait, next_llr)


def _run_block(args) -> list[TrialResult]:
    prep, hyp, lo, hi, record_tail, backend = args
    impl = kernel.backend(backend) if backend else None
    return [run_trial(prep, t, hyp, record_tail, impl) for t in range(lo, hi)]


def run_trials(config, hypothesis: Hypothesis | None = None, trials: int | None = None, workers: int = 1,
               record_tail: bool = False, backend: str | None = None) -> list[TrialResult]:
    """All trials, ordered by trial index whatever the worker count."""
    prep = _as_prepared(config)
    hyp = Hypothesis.parse(hypothesis if hypothesis is not None else prep.config.hypothesis)
    n = trials if trials is not None else prep.config.trials
    if n < 1:
        raise ConfigError("trials must be >= 1")
    blocks = [(prep, hyp, lo, min(lo + _BLOCK, n), record_tail, backend) for lo in range(0, n, _BLOCK)]
    workers = max(1, int(workers))
    if workers == 1 or len(blocks) == 1:
        parts = [_run_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_block, blocks))
    return [r for part in parts for r in part]


# --- summaries -------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    config_digest: str
    hypothesis: Hypothesis
    mode: str
    channel: str
    error_rate: float
    error_se: float
    mean_delay: float
    delay_se: float
    truncation_rate: float
    trials: int
    seed: int
    decided: int = 0
    mean_messages: tuple[float, ...] = ()

    def as_row(self) -> dict:
        return {
            "config_digest": self.config_digest, "hypothesis": self.hypothesis.name, "mode": self.mode,
            "channel": self.channel, "achieved_error": self.error_rate, "error_se": self.error_se,
            "mean_delay": self.mean_delay, "delay_se": self.delay_se, "truncation_rate": self.truncation_rate,
            "trials": self.trials, "seed": self.seed,
        }


def summarize(results: Sequence[TrialResult], prep: Prepared, hypothesis: Hypothesis) -> RunSummary:
    """Error and delay statistics over decided trials; truncations counted apart."""
    cfg = prep.config
    n = len(results)
    done = [r for r in results if not r.truncated]
    m = len(done)
    wrong = "H0" if hypothesis == Hypothesis.H1 else "H1"
    if m:
        err = sum(r.decision == wrong for r in done) / m
        err_se = math.sqrt(err * (1 - err) / m)
        d = np.array([r.delay for r in done], dtype=float)
        mean_d = math.fsum(d) / m
        delay_se = math.sqrt(math.fsum((d - mean_d) ** 2) / (m - 1) / m) if m > 1 else 0.0
        msgs = tuple(math.fsum(r.messages_per_sensor[k] for r in done) / m for k in range(len(cfg.sensors)))
    else:
        err = err_se = mean_d = delay_se = math.nan
        msgs = ()
    return RunSummary(cfg.digest(), hypothesis, cfg.fusion_mode, cfg.channel_label, err, err_se, mean_d,
                      delay_se, (n - m) / n, n, cfg.seed, m, msgs)


def run_monte_carlo(config, hypothesis: Hypothesis | None = None, trials: int | None = None, workers: int = 1,
                    keep_trials: bool = False, backend: str | None = None):
    """Run and summarise; returns ``(summary, trial_results or None)``."""
    prep = _as_prepared(config)
    hyp = Hypothesis.parse(hypothesis if hypothesis is not None else prep.config.hypothesis)
    res = run_trials(prep, hyp, trials, workers, backend=backend)
    return summarize(res, prep, hyp), (res if keep_trials else None)


# --- operating characteristics --------------------------------------------


@dataclass(frozen=True)
class OcPoint:
    threshold_up: float
    threshold_down: float
    h1: RunSummary
    h0: RunSummary


def sweep_operating_characteristic(config, threshold_grid: Iterable[tuple[float, float]] | None = None,
                                   alpha_grid: Iterable[float] | None = None, trials: int | None = None,
                                   workers: int = 1, hypotheses=(Hypothesis.H1, Hypothesis.H0)) -> list[OcPoint]:
    """One summary per hypothesis per grid point.

    ``alpha_grid`` entries ``a`` map to thresholds ``(|log a|, |log a|)``.
    """
    prep = _as_prepared(config)
    if threshold_grid is None and alpha_grid is None:
        raise ConfigError("empty grid")
    grid = list(threshold_grid) if threshold_grid is not None else [(abs(math.log(a)), abs(math.log(a)))
                                                                    for a in alpha_grid]
    if not grid:
        raise ConfigError("empty grid")
    out = []
    for up, down in grid:
        p = prep.with_thresholds(up, down)
        s = {h: run_monte_carlo(p, h, trials, workers)[0] for h in map(Hypothesis.parse, hypotheses)}
        out.append(OcPoint(up, down, s.get(Hypothesis.H1), s.get(Hypothesis.H0)))
    return out


def delay_at_error(errors: Sequence[float], delays: Sequence[float], target: float,
                   delay_ses: Sequence[float] | None = None) -> tuple[float, float]:
    """Mean delay at ``target`` achieved error by linear interpolation in ``log(error)``.

    Returns ``(delay, se)``, with the standard error interpolated the same way.
    Points with zero error are dropped; raises if ``target`` is not bracketed.
    """
    pts = sorted((math.log(e), d, s) for e, d, s in zip(errors, delays, delay_ses or [0.0] * len(delays)) if e > 0)
    lt = math.log(target)
    for (x0, d0, s0), (x1, d1, s1) in zip(pts, pts[1:]):
        if x0 <= lt <= x1:
            w = 0.0 if x1 == x0 else (lt - x0) / (x1 - x0)
            return d0 + w * (d1 - d0), math.hypot((1 - w) * s0, w * s1)
    raise ValueError("target error not bracketed by the curve")


def observed_llr_bound(prep: Prepared, samples: int = 20_000) -> float:
    """Largest ``|lambda~|`` seen over ``samples`` simulated messages per sensor and bit."""
    cfg = prep.config
    theta = 0.0
    for k in range(len(cfg.sensors)):
        rng = _generator(cfg.seed, _PREP_KEY, k, 99)
        rngs = [(rng, rng)] * len(cfg.sensors)
        _, pos, neg, _ = _chunk(prep, Hypothesis.H1, samples, rngs)
        theta = max(theta, float(np.max(np.abs(pos[k]))), float(np.max(np.abs(neg[k]))))
    return theta


@dataclass(frozen=True)
class Calibration:
    threshold_up: float
    threshold_down: float
    achieved_alpha: float
    achieved_beta: float
    theta: float


def calibrate_thresholds(config, target_alpha: float, target_beta: float, search_trials: int = 20_000,
                         workers: int = 1, iterations: int = 8, rounds: int = 2) -> Calibration:
    """Shrink ``(A~, B~)`` inside ``[|log a| - Theta, |log a|]`` while errors stay within target.

    Bisection on Monte Carlo error estimates with common random numbers; the
    upper bounds are always valid fallbacks.
    """
    prep = _as_prepared(config)
    la, lb = abs(math.log(target_alpha)), abs(math.log(target_beta))
    theta = observed_llr_bound(prep)
    up, down = la, lb

    def rates(u, d):
        p = prep.with_thresholds(u, d)
        s1 = run_monte_carlo(p, Hypothesis.H1, search_trials, workers)[0]
        s0 = run_monte_carlo(p, Hypothesis.H0, search_trials, workers)[0]
        if max(s1.truncation_rate, s0.truncation_rate) > min(target_alpha, target_beta):
            raise RuntimeError("truncation dominates")
        return s0.error_rate, s1.error_rate

    fa, miss = rates(up, down)
    for _ in range(rounds):
        lo, hi = max(la - theta, 1e-9), up
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if rates(mid, down)[0] <= target_alpha:
                hi = mid
            else:
                lo = mid
        up = hi
        lo, hi = max(lb - theta, 1e-9), down
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if rates(up, mid)[1] <= target_beta:
                hi = mid
            else:
                lo = mid
        down = hi
    fa, miss = rates(up, down)
    return Calibration(up, down, fa, miss, theta)


def default_workers() -> int:
    return os.cpu_count() or 1


def two_sensor_setup(channel: ChannelModel, signaling: Signaling | None = None, target_interval: float = 4.0,
                     num_sensors: int = 2, **kw) -> ExperimentConfig:
    """Identical sensors with the default observation model and calibrated local thresholds."""
    from .detection import calibrate_delta
    model = ObservationModel()
    I1 = model.kl_per_observation[1]
    delta = calibrate_delta(target_interval, num_sensors * I1, num_sensors)
    sensors = tuple(SensorConfig.symmetric(k, delta, model) for k in range(num_sensors))
    sig = signaling if signaling is not None else Signaling.unit()
    return ExperimentConfig(sensors, (channel,) * num_sensors, (sig,) * num_sensors, **kw)
