"""Fusion-center rules: channel-aware message LLRs, the global SPRT and the
conventional demodulate-then-fuse baselines.

All mixture LLRs are evaluated with ``logaddexp`` so that high-SNR inputs,
where the exponents are in the thousands, neither overflow nor cancel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .channels import (AWGN, BEC, BSC, CONTINUOUS, Binary, ChannelModel, Complex, Erased,
                       Ideal, Rayleigh, Rician, Signaling, received_batch,
                       received_variances)


def _check_probs(alpha, beta):
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("local error probabilities must lie in (0, 1)")


def _abs2(z):
    return z.real * z.real + z.imag * z.imag


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _binary_llr(bit, alpha, beta):
    bit = np.asarray(bit)
    if not np.all((bit == 1) | (bit == -1)):
        raise ValueError("bit must be +1 or -1")
    up = math.log((1.0 - beta) / alpha)
    down = math.log(beta / (1.0 - alpha))
    return _out(np.where(bit == 1, up, down))


def llr_ideal(bit, alpha_k: float, beta_k: float):
    """LLR of a correctly received bit."""
    _check_probs(alpha_k, beta_k)
    return _binary_llr(bit, alpha_k, beta_k)


def llr_bec(signal, alpha_k: float, beta_k: float):
    """BEC: a received bit counts as on an ideal channel; an erasure is no update.

    ``signal`` is a :class:`Binary`/:class:`Erased` or an int array where 0
    marks an erasure.
    """
    _check_probs(alpha_k, beta_k)
    if isinstance(signal, Erased):
        return 0.0
    if isinstance(signal, Binary):
        return _binary_llr(signal.value, alpha_k, beta_k)
    s = np.asarray(signal)
    if not np.all((s == 1) | (s == -1) | (s == 0)):
        raise ValueError("BEC signal must be +1, -1 or 0 (erased)")
    safe = np.where(s == 0, 1, s)
    return _out(np.where(s == 0, 0.0, _binary_llr(safe, alpha_k, beta_k)))


def bsc_effective_probs(alpha_k: float, beta_k: float, epsilon: float) -> tuple[float, float]:
    """Error probabilities seen at the FC after a BSC with crossover ``epsilon``."""
    k = 1.0 - 2.0 * epsilon
    return k * alpha_k + epsilon, k * beta_k + epsilon


def llr_bsc(bit, alpha_k: float, beta_k: float, epsilon: float):
    _check_probs(alpha_k, beta_k)
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("BSC epsilon must be in [0, 0.5)")
    a_hat, b_hat = bsc_effective_probs(alpha_k, beta_k, epsilon)
    return _binary_llr(bit, a_hat, b_hat)


def _mixture_llr(c, d, alpha, beta, shift):
    """``log[((1-b) e^-c + b e^(shift-d)) / (a e^-c + (1-a) e^(shift-d))]``.

    ``shift = log(var_a / var_b)``; it is exactly 0.0 for equal variances so
    equal-variance channels share one bit-exact code path.  Both exponents
    are offset by their minimum so large distances keep their precision.
    """
    m = np.minimum(c, d)
    c, d = c - m, d - m
    num = np.logaddexp(math.log(1.0 - beta) - c, (math.log(beta) + shift) - d)
    den = np.logaddexp(math.log(alpha) - c, (math.log(1.0 - alpha) + shift) - d)
    return _out(num - den)


def llr_awgn(z, alpha_k: float, beta_k: float, gain_h: complex, noise_var: float, signaling: Signaling):
    _check_probs(alpha_k, beta_k)
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    z = np.asarray(z, dtype=complex)
    h = complex(gain_h)
    c = _abs2(z - h * signaling.level_a) / noise_var
    d = _abs2(z - h * signaling.level_b) / noise_var
    return _mixture_llr(c, d, alpha_k, beta_k, 0.0)


def _variances(gain_var, noise_var, signaling):
    if not (gain_var >= 0 and noise_var > 0):
        raise ValueError("channel variances out of range")
    va = abs(signaling.level_a) ** 2 * gain_var + noise_var
    vb = abs(signaling.level_b) ** 2 * gain_var + noise_var
    return va, vb


def llr_rayleigh(z, alpha_k: float, beta_k: float, gain_var: float, noise_var: float, signaling: Signaling):
    _check_probs(alpha_k, beta_k)
    va, vb = _variances(gain_var, noise_var, signaling)
    z = np.asarray(z, dtype=complex)
    g = _abs2(z)
    shift = 0.0 if va == vb else math.log(va) - math.log(vb)
    return _mixture_llr(g / va, g / vb, alpha_k, beta_k, shift)


def llr_rician(z, alpha_k: float, beta_k: float, gain_mean: complex, gain_var: float,
               noise_var: float, signaling: Signaling):
    _check_probs(alpha_k, beta_k)
    va, vb = _variances(gain_var, noise_var, signaling)
    z = np.asarray(z, dtype=complex)
    mu = complex(gain_mean)
    c = _abs2(z - mu * signaling.level_a) / va
    d = _abs2(z - mu * signaling.level_b) / vb
    shift = 0.0 if va == vb else math.log(va) - math.log(vb)
    return _mixture_llr(c, d, alpha_k, beta_k, shift)


def llr_channel_aware(received, channel: ChannelModel, alpha_k: float, beta_k: float,
                      signaling: Signaling | None = None):
    """Dispatch to the channel-aware LLR for ``channel``.

    Discrete channels take bits (0 = erased for BEC); continuous channels take
    complex samples.
    """
    if isinstance(received, Erased):
        received = 0
    elif isinstance(received, (Binary, Complex)):
        received = received.value
    if isinstance(channel, Ideal):
        return llr_ideal(received, alpha_k, beta_k)
    if isinstance(channel, BEC):
        return llr_bec(received, alpha_k, beta_k)
    if isinstance(channel, BSC):
        return llr_bsc(received, alpha_k, beta_k, channel.epsilon)
    if signaling is None:
        raise ValueError("continuous channels need a signalling scheme")
    if isinstance(channel, AWGN):
        return llr_awgn(received, alpha_k, beta_k, channel.gain_h, channel.noise_var, signaling)
    if isinstance(channel, Rayleigh):
        return llr_rayleigh(received, alpha_k, beta_k, channel.gain_var, channel.noise_var, signaling)
    if isinstance(channel, Rician):
        return llr_rician(received, alpha_k, beta_k, channel.gain_mean, channel.gain_var,
                          channel.noise_var, signaling)
    raise TypeError(f"unknown channel {channel!r}")


def max_message_llr(alpha_k: float, beta_k: float) -> float:
    """Largest magnitude any received-message LLR can take."""
    return max(abs(math.log((1 - beta_k) / alpha_k)), abs(math.log(beta_k / (1 - alpha_k))))


# --- unreliable sampling-time detection ----------------------------------


def _check_send(p):
    if not 0.0 < p <= 1.0:
        raise ValueError("send probability must lie in (0, 1]")


def _log_or_ninf(p):
    return math.log(p) if p > 0 else -math.inf


def _three_way_llr(la, lb, l0, alpha, beta, p1, p0):
    m = np.maximum(np.maximum(la, lb), l0)
    la, lb, l0 = la - m, lb - m, l0 - m
    num = np.logaddexp(np.logaddexp(math.log(1 - beta) + math.log(p1) + la, math.log(beta) + math.log(p1) + lb),
                       _log_or_ninf(1 - p1) + l0)
    den = np.logaddexp(np.logaddexp(math.log(alpha) + math.log(p0) + la, math.log(1 - alpha) + math.log(p0) + lb),
                       _log_or_ninf(1 - p0) + l0)
    return _out(num - den)


def llr_unreliable_awgn(z_t, alpha_k: float, beta_k: float, gain_h: complex, noise_var: float,
                        signaling: Signaling, p_send_h1: float, p_send_h0: float):
    """Per-slot LLR when the FC cannot tell whether a message was sent.

    Applied to every slot's received sample; the "no message" component is
    ``z = w``.  ``p_send_i`` is ``1 / E_i[tau_1]``.
    """
    _check_probs(alpha_k, beta_k)
    _check_send(p_send_h1)
    _check_send(p_send_h0)
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    z = np.asarray(z_t, dtype=complex)
    h = complex(gain_h)
    c = _abs2(z - h * signaling.level_a) / noise_var
    d = _abs2(z - h * signaling.level_b) / noise_var
    g = _abs2(z) / noise_var
    return _three_way_llr(-c, -d, -g, alpha_k, beta_k, p_send_h1, p_send_h0)


def llr_unreliable(z_t, channel: ChannelModel, alpha_k: float, beta_k: float, signaling: Signaling,
                   p_send_h1: float, p_send_h0: float):
    """Unreliable-timing LLR for any continuous channel (fading included)."""
    if isinstance(channel, AWGN):
        return llr_unreliable_awgn(z_t, alpha_k, beta_k, channel.gain_h, channel.noise_var,
                                   signaling, p_send_h1, p_send_h0)
    if not isinstance(channel, (Rayleigh, Rician)):
        raise ValueError("unreliable-timing fusion needs a continuous channel")
    _check_probs(alpha_k, beta_k)
    _check_send(p_send_h1)
    _check_send(p_send_h0)
    va, vb = received_variances(channel, signaling)
    v0 = channel.noise_var
    z = np.asarray(z_t, dtype=complex)
    mu = channel.mean_gain
    la = -math.log(va) - _abs2(z - mu * signaling.level_a) / va
    lb = -math.log(vb) - _abs2(z - mu * signaling.level_b) / vb
    l0 = -math.log(v0) - _abs2(z) / v0
    return _three_way_llr(la, lb, l0, alpha_k, beta_k, p_send_h1, p_send_h0)


def presence_statistic(z, noise_var: float):
    """Energy statistic ``|z|^2 / noise_var`` for message-presence detection."""
    return _out(_abs2(np.asarray(z, dtype=complex)) / noise_var)


def threshold_then_fuse(z_t, detection_threshold: float, llr_op: Callable[[complex], float],
                        noise_var: float) -> Optional[float]:
    """Fuse only if the presence statistic reaches ``detection_threshold``."""
    if detection_threshold < 0:
        raise ValueError("detection threshold must be nonnegative")
    if presence_statistic(z_t, noise_var) < detection_threshold:
        return None
    return float(llr_op(z_t))


def induced_erasure_probability(detection_threshold: float, channel: ChannelModel, signaling: Signaling,
                                trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Miss probability of presence detection, averaged over ``x = a`` and ``x = b``.

    Returns ``(epsilon_tilde, standard_error)``.
    """
    if not isinstance(channel, CONTINUOUS):
        raise ValueError("presence detection needs a continuous channel")
    if trials < 1:
        raise ValueError("empty estimate")
    miss = []
    for x in (signaling.level_a, signaling.level_b):
        z = received_batch(np.full(trials, complex(x)), channel, rng)
        miss.append(presence_statistic(z, channel.noise_var) < detection_threshold)
    m = np.concatenate(miss)
    p = float(m.mean())
    return p, math.sqrt(p * (1 - p) / m.size)


# --- global SPRT ----------------------------------------------------------


class Decision(enum.Enum):
    PENDING = "pending"
    H1 = "H1"
    H0 = "H0"


@dataclass(frozen=True)
class SensorLink:
    alpha_k: float
    beta_k: float
    channel: ChannelModel = field(default_factory=Ideal)
    signaling: Signaling = field(default_factory=Signaling.unit)

    def __post_init__(self):
        if not (0.0 < self.alpha_k < 0.5 and 0.0 < self.beta_k < 0.5):
            raise ValueError("per-sensor error probabilities must lie in (0, 0.5)")


@dataclass(frozen=True)
class FusionConfig:
    threshold_up: float
    threshold_down: float
    per_sensor: Sequence[SensorLink] = ()

    def __post_init__(self):
        if not (self.threshold_up > 0 and self.threshold_down > 0):
            raise ValueError("fusion thresholds must be positive")

    @classmethod
    def from_targets(cls, alpha: float, beta: float, per_sensor: Sequence[SensorLink] = ()):
        """Thresholds at their upper bounds ``|log alpha|``, ``|log beta|``."""
        return cls(abs(math.log(alpha)), abs(math.log(beta)), tuple(per_sensor))


@dataclass(frozen=True)
class LlrUpdate:
    sensor_id: int
    value: float
    time: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("LLR update must be finite")


@dataclass(frozen=True)
class FusionState:
    global_llr: float = 0.0
    decision: Decision = Decision.PENDING
    decision_time: int | None = None
    messages_consumed: int = 0


def sprt_step(state: FusionState, update: LlrUpdate, config: FusionConfig) -> FusionState:
    """One SPRT step; thresholds are closed (reaching one decides)."""
    if state.decision is not Decision.PENDING:
        raise ValueError("already decided")
    llr = state.global_llr + update.value
    n = state.messages_consumed + 1
    if llr >= config.threshold_up:
        return FusionState(llr, Decision.H1, update.time, n)
    if llr <= -config.threshold_down:
        return FusionState(llr, Decision.H0, update.time, n)
    return FusionState(llr, Decision.PENDING, None, n)


# --- conventional receivers ----------------------------------------------


def conventional_demodulate(z, channel: ChannelModel, signaling: Signaling):
    """Hard ML bit decision; ties go to +1.

    AWGN uses the correlation rule ``argmax Re{conj(z) h x}``; fading channels
    compare the complex Gaussian likelihoods of ``x = a`` and ``x = b``.
    """
    z = np.asarray(z, dtype=complex)
    a, b = signaling.level_a, signaling.level_b
    if isinstance(channel, AWGN):
        h = complex(channel.gain_h)
        ma = (np.conj(z) * (h * a)).real
        mb = (np.conj(z) * (h * b)).real
    elif isinstance(channel, (Rayleigh, Rician)):
        va, vb = received_variances(channel, signaling)
        mu = channel.mean_gain
        ma = -math.log(va) - _abs2(z - mu * a) / va
        mb = -math.log(vb) - _abs2(z - mu * b) / vb
    else:
        raise ValueError("not applicable")
    bits = np.where(ma >= mb, 1, -1)
    return int(bits) if bits.ndim == 0 else bits


def conventional_update(bit, mode: str, alpha_k: float, beta_k: float, eps_ml: float = 0.0):
    """LLR applied by a demodulate-then-fuse receiver (``ideal`` or ``bsc`` mode)."""
    if mode in ("ideal", "treat-as-ideal"):
        return llr_ideal(bit, alpha_k, beta_k)
    if mode in ("bsc", "treat-as-bsc"):
        return llr_bsc(bit, alpha_k, beta_k, eps_ml)
    raise ValueError(f"unknown conventional mode {mode!r}")


def ml_error_rate(channel: ChannelModel, signaling: Signaling, trials: int,
                  rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo bit error rate of :func:`conventional_demodulate`, equal priors.

    Returns ``(eps_ml, standard_error)``.
    """
    if trials < 1:
        raise ValueError("empty estimate")
    errs = []
    for bit, x in ((1, signaling.level_a), (-1, signaling.level_b)):
        z = received_batch(np.full(trials, complex(x)), channel, rng)
        errs.append(conventional_demodulate(z, channel, signaling) != bit)
    e = np.concatenate(errs)
    p = float(e.mean())
    return p, math.sqrt(p * (1 - p) / e.size)


__all__ = [
    "Decision", "FusionConfig", "FusionState", "LlrUpdate", "SensorLink",
    "bsc_effective_probs", "conventional_demodulate", "conventional_update",
    "induced_erasure_probability", "llr_awgn", "llr_bec", "llr_bsc", "llr_channel_aware",
    "llr_ideal", "llr_rayleigh", "llr_rician", "llr_unreliable", "llr_unreliable_awgn",
    "max_message_llr", "ml_error_rate", "presence_statistic", "sprt_step", "threshold_then_fuse",
]
