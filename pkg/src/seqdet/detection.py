"""Sensor-side processing: observation LLRs and level-triggered sampling.

Each sensor accumulates the log-likelihood ratio of its own observations and
emits a one-bit message whenever the accumulation since its last emission
leaves the open interval ``(-threshold_down, threshold_up)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class Hypothesis(enum.IntEnum):
    H0 = 0
    H1 = 1

    @classmethod
    def parse(cls, value) -> "Hypothesis":
        if isinstance(value, Hypothesis):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                pass
        elif value in (0, 1):
            return cls(int(value))
        raise ValueError(f"unknown hypothesis {value!r}")


@dataclass(frozen=True)
class ObservationModel:
    """Complex Gaussian mean-shift model ``y = s_i + v`` with ``v ~ CN(0, noise_variance)``."""

    signal_mean_h1: complex = 1.0 + 0.0j
    signal_mean_h0: complex = 0.0j
    noise_variance: float = 1.0

    def __post_init__(self):
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise ValueError("noise_variance must be positive and finite")
        for m in (self.signal_mean_h1, self.signal_mean_h0):
            if not (math.isfinite(complex(m).real) and math.isfinite(complex(m).imag)):
                raise ValueError("signal means must be finite")

    def mean(self, hypothesis: Hypothesis) -> complex:
        return complex(self.signal_mean_h1 if hypothesis == Hypothesis.H1 else self.signal_mean_h0)

    @property
    def kl_per_observation(self) -> tuple[float, float]:
        """``(I_0(1), I_1(1))``; both equal ``|m1 - m0|^2 / noise_variance`` for this model."""
        d = abs(complex(self.signal_mean_h1) - complex(self.signal_mean_h0)) ** 2 / self.noise_variance
        return d, d

    def sample(self, hypothesis: Hypothesis, size, rng: np.random.Generator) -> np.ndarray:
        """Draw observations; consumes ``2 * size`` standard normals from ``rng``."""
        g = rng.standard_normal((*np.atleast_1d(size), 2))
        scale = math.sqrt(self.noise_variance / 2.0)
        return self.mean(hypothesis) + scale * (g[..., 0] + 1j * g[..., 1])


def llr_increment(observation, model: ObservationModel = ObservationModel()):
    """Per-observation LLR ``log f1(y)/f0(y)``.

    Closed form for the complex Gaussian mean shift:
    ``(2 Re{conj(m1 - m0) y} - |m1|^2 + |m0|^2) / noise_variance``.
    Works elementwise on arrays.
    """
    y = np.asarray(observation, dtype=complex)
    if not np.all(np.isfinite(y)):
        raise ValueError("invalid observation")
    m1 = complex(model.signal_mean_h1)
    m0 = complex(model.signal_mean_h0)
    d = m1 - m0
    # d.conjugate() * y, real part, written out to keep the default model exact
    re = d.real * y.real + d.imag * y.imag
    out = (2.0 * re - (abs(m1) ** 2 - abs(m0) ** 2)) / model.noise_variance
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SensorConfig:
    sensor_id: int
    model: ObservationModel = field(default_factory=ObservationModel)
    threshold_up: float = 1.0
    threshold_down: float = 1.0
    alpha_local: float | None = None
    beta_local: float | None = None

    def __post_init__(self):
        if not (self.threshold_up > 0 and self.threshold_down > 0):
            raise ValueError("local thresholds must be positive")
        for p in (self.alpha_local, self.beta_local):
            if p is not None and not 0.0 < p < 1.0:
                raise ValueError("local error probabilities must lie in (0, 1)")
        if self.alpha_local is not None and self.beta_local is not None:
            if self.alpha_local + self.beta_local >= 1.0:
                raise ValueError("alpha_local + beta_local must be < 1")

    @classmethod
    def symmetric(cls, sensor_id: int, delta: float, model: ObservationModel = ObservationModel(), **kw):
        return cls(sensor_id, model, delta, delta, **kw)

    def with_error_probs(self, alpha: float, beta: float) -> "SensorConfig":
        return replace(self, alpha_local=alpha, beta_local=beta)

    @property
    def has_error_probs(self) -> bool:
        return self.alpha_local is not None and self.beta_local is not None


@dataclass
class SamplerState:
    accumulated_llr: float = 0.0
    last_sample_time: int = 0
    messages_emitted: int = 0


@dataclass(frozen=True)
class SampleEvent:
    sensor_id: int
    time: int
    bit: int
    accumulated_llr: float
    overshoot: float


def step_sampler(state: SamplerState, increment: float, config: SensorConfig, time: int) -> SampleEvent | None:
    """Advance one sensor's sampler by one observation; mutates ``state``.

    Reaching a threshold exactly counts as a crossing.
    """
    acc = state.accumulated_llr + increment
    if acc >= config.threshold_up:
        bit, crossed = 1, config.threshold_up
    elif acc <= -config.threshold_down:
        bit, crossed = -1, config.threshold_down
    else:
        state.accumulated_llr = acc
        return None
    state.accumulated_llr = 0.0
    state.last_sample_time = time
    state.messages_emitted += 1
    return SampleEvent(config.sensor_id, time, bit, acc, abs(acc) - crossed)


@dataclass(frozen=True)
class FirstSampleStats:
    """Monte Carlo summary of the first inter-sampling interval under one hypothesis."""

    hypothesis: Hypothesis
    trials: int
    p_up: float
    mean_tau: float
    se_tau: float
    mean_lambda: float
    se_lambda: float
    mean_overshoot_up: float
    mean_overshoot_down: float

    @property
    def p_down(self) -> float:
        return 1.0 - self.p_up


def simulate_first_samples(config: SensorConfig, hypothesis: Hypothesis, trials: int,
                           rng: np.random.Generator, max_steps: int = 10**6):
    """Vectorised simulation of the first sample of ``trials`` independent sensors.

    Returns arrays ``(tau, lam)``: the first sampling time and the accumulated
    LLR at that time.
    """
    if trials < 1:
        raise ValueError("empty estimate")
    acc = np.zeros(trials)
    tau = np.zeros(trials, dtype=np.int64)
    lam = np.zeros(trials)
    active = np.arange(trials)
    up, down = config.threshold_up, config.threshold_down
    t = 0
    while active.size:
        t += 1
        if t > max_steps:
            raise RuntimeError("sampler did not fire within max_steps")
        y = config.model.sample(hypothesis, active.size, rng)
        a = acc[active] + llr_increment(y, config.model)
        acc[active] = a
        fired = (a >= up) | (a <= -down)
        done = active[fired]
        tau[done] = t
        lam[done] = a[fired]
        active = active[~fired]
    return tau, lam


def first_sample_stats(config: SensorConfig, hypothesis: Hypothesis, trials: int,
                       rng: np.random.Generator) -> FirstSampleStats:
    tau, lam = simulate_first_samples(config, hypothesis, trials, rng)
    up = lam >= config.threshold_up
    n = lam.size
    ddof = 1 if n > 1 else 0
    over_up = lam[up] - config.threshold_up
    over_down = -lam[~up] - config.threshold_down
    return FirstSampleStats(
        hypothesis=hypothesis,
        trials=n,
        p_up=float(up.mean()),
        mean_tau=float(tau.mean()),
        se_tau=float(tau.std(ddof=ddof) / math.sqrt(n)),
        mean_lambda=float(lam.mean()),
        se_lambda=float(lam.std(ddof=ddof) / math.sqrt(n)),
        mean_overshoot_up=float(over_up.mean()) if over_up.size else 0.0,
        mean_overshoot_down=float(over_down.mean()) if over_down.size else 0.0,
    )


@dataclass(frozen=True)
class LocalErrorEstimate:
    alpha: float
    beta: float
    alpha_se: float
    beta_se: float
    stats_h0: FirstSampleStats
    stats_h1: FirstSampleStats


def estimate_local_error_probs(config: SensorConfig, trials: int, rng: np.random.Generator) -> LocalErrorEstimate:
    """Estimate ``alpha_k = P0(b = +1)`` and ``beta_k = P1(b = -1)`` from first samples.

    Standard errors are binomial.  The H0 run is drawn before the H1 run so a
    fixed generator state gives common random numbers across threshold values.
    """
    if trials < 1:
        raise ValueError("empty estimate")
    s0 = first_sample_stats(config, Hypothesis.H0, trials, rng)
    s1 = first_sample_stats(config, Hypothesis.H1, trials, rng)
    a, b = s0.p_up, s1.p_down
    return LocalErrorEstimate(
        alpha=a,
        beta=b,
        alpha_se=math.sqrt(a * (1 - a) / trials),
        beta_se=math.sqrt(b * (1 - b) / trials),
        stats_h0=s0,
        stats_h1=s1,
    )


def calibrate_delta(target_interval_T: float, global_kl_I: float, num_sensors: int, tol: float = 1e-10) -> float:
    """Solve ``delta * tanh(delta / 2) = T * I / K`` for ``delta > 0`` by bisection.

    ``global_kl_I`` is the global per-observation KL number ``I_i(1)``; callers
    usually pass the H1 value.
    """
    if not (target_interval_T > 0 and global_kl_I > 0 and num_sensors > 0):
        raise ValueError("calibrate_delta arguments must be positive")
    rhs = target_interval_T * global_kl_I / num_sensors

    def f(d):
        return d * math.tanh(d / 2.0) - rhs

    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        hi *= 2.0
    # near 0 the map is ~d^2/2, so a residual tolerance alone is too loose
    while True:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = f(mid)
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi) * 1e-3 and abs(fm) <= tol:
            break
    return 0.5 * (lo + hi)
