"""Kullback-Leibler information numbers for the sensor -> channel -> FC chain.

Conventions used throughout:

* every information number is reported as a nonnegative divergence, so the
  H0 values carry the sign flip ``I_0 = -E_0[...]``;
* penalties satisfy ``I~_1 = I^_1 + beta * C_1`` and ``I~_0 = I^_0 + alpha * C_0``;
* ``u = |z|^2 / var`` of a circular complex Gaussian is unit exponential,
  and its noncentral version has density ``exp(-(u + lam)) I0(2 sqrt(lam u))``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, special

from .channels import (AWGN, BEC, BSC, CONTINUOUS, ChannelModel, Ideal, Rayleigh, Rician, Signaling,
                       complex_normal, received_batch, received_variances)
from .detection import Hypothesis, SensorConfig, first_sample_stats
from .fusion import bsc_effective_probs, llr_channel_aware


class QuadratureError(RuntimeError):
    pass


class KlPair(NamedTuple):
    """A quantity indexed by hypothesis; unpacks as ``(h1, h0)``."""

    h1: float
    h0: float

    def __getitem__(self, item):
        if isinstance(item, Hypothesis):
            return self.h1 if item == Hypothesis.H1 else self.h0
        return tuple.__getitem__(self, item)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _check_probs(alpha, beta):
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("local error probabilities must lie in (0, 1)")


# --- sensor side ----------------------------------------------------------


@dataclass(frozen=True)
class ObservedKl:
    at_sample: KlPair          # I_i^k(t_1^k)
    at_sample_se: KlPair
    per_obs: KlPair            # I_i^k(1)
    mean_intersample: KlPair   # E_i[tau_1^k]
    mean_intersample_se: KlPair
    alpha: float
    beta: float


def kl_observed_local(config: SensorConfig, trials: int, rng: np.random.Generator) -> ObservedKl:
    """Monte Carlo ``I_i^k(t_1)`` from thresholds plus mean over/undershoots."""
    s0 = first_sample_stats(config, Hypothesis.H0, trials, rng)
    s1 = first_sample_stats(config, Hypothesis.H1, trials, rng)
    up, down = config.threshold_up, config.threshold_down
    beta = s1.p_down
    alpha = s0.p_up
    i1 = (1 - beta) * (up + s1.mean_overshoot_up) - beta * (down + s1.mean_overshoot_down)
    i0 = (1 - alpha) * (down + s0.mean_overshoot_down) - alpha * (up + s0.mean_overshoot_up)
    return ObservedKl(
        at_sample=KlPair(i1, i0),
        at_sample_se=KlPair(s1.se_lambda, s0.se_lambda),
        per_obs=KlPair(*config.model.kl_per_observation[::-1]),
        mean_intersample=KlPair(s1.mean_tau, s0.mean_tau),
        mean_intersample_se=KlPair(s1.se_tau, s0.se_tau),
        alpha=alpha,
        beta=beta,
    )


# --- discrete channels ----------------------------------------------------


def kl_transmitted_hat(alpha_k: float, beta_k: float) -> KlPair:
    """KL numbers of one transmitted bit, ``(I^_1, I^_0)``."""
    _check_probs(alpha_k, beta_k)
    up = math.log((1 - beta_k) / alpha_k)
    down = math.log(beta_k / (1 - alpha_k))
    i1 = (1 - beta_k) * up + beta_k * down
    i0 = -(alpha_k * up + (1 - alpha_k) * down)
    return KlPair(i1, i0)


def kl_received_bec(alpha_k: float, beta_k: float, epsilon: float) -> KlPair:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("BEC epsilon must be in [0, 1]")
    h = kl_transmitted_hat(alpha_k, beta_k)
    return KlPair((1 - epsilon) * h.h1, (1 - epsilon) * h.h0)


def kl_received_bsc(alpha_k: float, beta_k: float, epsilon: float) -> KlPair:
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("BSC epsilon must be in [0, 0.5)")
    _check_probs(alpha_k, beta_k)
    return kl_transmitted_hat(*bsc_effective_probs(alpha_k, beta_k, epsilon))


def received_from_penalty(alpha_k: float, beta_k: float, penalty: KlPair) -> KlPair:
    h = kl_transmitted_hat(alpha_k, beta_k)
    return KlPair(h.h1 + beta_k * penalty.h1, h.h0 + alpha_k * penalty.h0)


def penalty_from_received(alpha_k: float, beta_k: float, received: KlPair) -> KlPair:
    h = kl_transmitted_hat(alpha_k, beta_k)
    return KlPair((received.h1 - h.h1) / beta_k, (received.h0 - h.h0) / alpha_k)


# --- penalty integrands ---------------------------------------------------
#
# With F = (1-alpha)/alpha, G = (1-beta)/beta and exponents zeta_a (message a
# sent), zeta_b (message b sent), the per-sample penalty contributions are
#   C_1: log[(1 + G/r e^zb)/(1 + 1/(F r) e^zb)] + G log[(1 + r/G e^za)/(1 + F r e^za)]
#   C_0: log[(1 + F r e^za)/(1 + r/G e^za)] + F log[(1 + 1/(F r) e^zb)/(1 + G/r e^zb)]
# where r is the variance ratio rho (1 for equal-variance channels).


def _terms(alpha, beta, log_rho, za, zb):
    lF = math.log((1 - alpha) / alpha)
    lG = math.log((1 - beta) / beta)
    tb = _softplus(lG - log_rho + zb) - _softplus(-lF - log_rho + zb)   # message b
    ta = _softplus(-lG + log_rho + za) - _softplus(lF + log_rho + za)   # message a
    return ta, tb


def _combine(alpha, beta, ea, eb) -> KlPair:
    """Penalties from ``ea = E[ta]`` and ``eb = E[tb]``."""
    F = (1 - alpha) / alpha
    G = (1 - beta) / beta
    return KlPair(eb + G * ea, -ea - F * eb)


@functools.lru_cache(maxsize=16)
def _gh(n: int):
    x, w = hermegauss(n)
    return x, w / math.sqrt(2.0 * math.pi)


def _awgn_gh(alpha, beta, s, n) -> KlPair:
    x, w = _gh(n)
    za = -s * s - math.sqrt(2.0) * s * x
    zb = -s * s + math.sqrt(2.0) * s * x
    ta, tb = _terms(alpha, beta, 0.0, za, zb)
    return _combine(alpha, beta, float(w @ ta), float(w @ tb))


def _awgn_adaptive(alpha, beta, s) -> tuple[KlPair, float]:
    """Adaptive quadrature of the same expectations, split at the softplus knees."""
    lF = math.log((1 - alpha) / alpha)
    lG = math.log((1 - beta) / beta)
    r2s = math.sqrt(2.0) * s
    knees = sorted({(s * s - c) / r2s for c in (lG, -lF)} | {(c - s * s) / r2s for c in (-lG, lF)})
    edges = [-13.0] + [k for k in knees if -13.0 < k < 13.0] + [13.0]
    norm = 1.0 / math.sqrt(2.0 * math.pi)
    ea = eb = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        for which in (0, 1):
            def f(x, which=which):
                ta, tb = _terms(alpha, beta, 0.0, -s * s - r2s * x, -s * s + r2s * x)
                return float((ta, tb)[which]) * norm * math.exp(-0.5 * x * x)
            v, e = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)
            err += e
            if which:
                eb += v
            else:
                ea += v
    F = (1 - alpha) / alpha
    G = (1 - beta) / beta
    return _combine(alpha, beta, ea, eb), err * max(F, G, 1.0)


def penalty_awgn(alpha_k: float, beta_k: float, s: float, nodes: int = 64, refine: bool = True,
                 tol: float = 1e-11, max_nodes: int = 256) -> KlPair:
    """AWGN penalties ``(C_1, C_0)`` at normalised distance ``s = |a-b||h|/sigma``.

    Gauss-Hermite over the standard normal projection of the noise.  With
    ``refine`` the node count doubles from ``nodes`` until two successive
    rules agree to ``tol`` (relative to the penalty scale); otherwise the
    ``nodes``-point rule is returned as is.  When the rules stall (large
    ``s`` makes the integrand nearly piecewise linear) an adaptive rule split
    at the knees takes over, and it must meet the same tolerance.
    """
    _check_probs(alpha_k, beta_k)
    if not s >= 0:
        raise ValueError("s must be nonnegative")
    if nodes < 64:
        raise ValueError("use at least 64 Gauss-Hermite nodes")
    if max_nodes > 256:
        raise ValueError("Gauss-Hermite weights are unreliable above 256 nodes")
    cur = _awgn_gh(alpha_k, beta_k, s, nodes)
    if not refine:
        return cur
    scale = max(1.0, abs(_awgn_gh(alpha_k, beta_k, 0.0, 64).h1), abs(_awgn_gh(alpha_k, beta_k, 0.0, 64).h0))
    n = nodes
    while n < max_nodes:
        n *= 2
        nxt = _awgn_gh(alpha_k, beta_k, s, n)
        if max(abs(nxt.h1 - cur.h1), abs(nxt.h0 - cur.h0)) <= tol * scale:
            return nxt
        cur = nxt
    val, err = _awgn_adaptive(alpha_k, beta_k, s)
    if err <= tol * scale:
        return val
    raise QuadratureError("quadrature unconverged")


def monotone_region(alpha_k: float, beta_k: float) -> bool:
    """Sufficient region for the AWGN penalties to increase with ``s``."""
    _check_probs(alpha_k, beta_k)
    F = (1 - alpha_k) / alpha_k
    G = (1 - beta_k) / beta_k
    return F * F >= G and G * G >= F


def _expect(f, lam: float = 0.0) -> float:
    """``E[f(u)]`` for ``u`` unit exponential (``lam = 0``) or its noncentral version."""
    if lam == 0.0:
        upper = 60.0

        def integrand(u):
            return f(u) * math.exp(-u)
        pts = None
    else:
        r = math.sqrt(lam)
        upper = (r + 12.0) ** 2

        def integrand(u):
            # exp(-(u+lam)) I0(2 sqrt(lam u)) = exp(-(sqrt u - sqrt lam)^2) i0e(2 sqrt(lam u))
            q = math.sqrt(u)
            return f(u) * math.exp(-(q - r) ** 2) * special.i0e(2.0 * q * r)
        pts = [lam] if lam < upper else None
    val, err = integrate.quad(integrand, 0.0, upper, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
    if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureError("quadrature unconverged")
    return val


def penalty_rayleigh_quad(alpha_k: float, beta_k: float, rho: float) -> KlPair:
    """Rayleigh penalties by adaptive quadrature against the unit exponential."""
    _check_probs(alpha_k, beta_k)
    if not rho > 0:
        raise ValueError("rho must be positive")
    lr = math.log(rho)

    def ea_f(u):
        ta, _ = _terms(alpha_k, beta_k, lr, u * (1.0 - rho), 0.0)
        return float(ta)

    def eb_f(u):
        _, tb = _terms(alpha_k, beta_k, lr, 0.0, u * (1.0 - 1.0 / rho))
        return float(tb)
    return _combine(alpha_k, beta_k, _expect(ea_f), _expect(eb_f))


def rayleigh_realisation(rho: float, gain_var: float = 1.0, noise_var: float = 1.0) -> tuple[Rayleigh, Signaling]:
    """A Rayleigh channel plus signalling whose variance ratio is ``rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    # |b|^2 fixed at 1 unless rho is so small that |a|^2 would go negative
    vb = max(gain_var + noise_var, noise_var / rho * 1.0000001)
    va = rho * vb
    a_pow = (va - noise_var) / gain_var
    b_pow = (vb - noise_var) / gain_var
    a, b = math.sqrt(max(a_pow, 0.0)), math.sqrt(max(b_pow, 0.0))
    P = max(a, b, 1e-300)
    return Rayleigh(gain_var, noise_var), Signaling(complex(a), complex(-b), P, min(a, b))


@dataclass(frozen=True)
class OracleEstimate:
    received: KlPair
    received_se: KlPair
    penalty: KlPair
    penalty_se: KlPair
    trials: int


def kl_received_monte_carlo(channel: ChannelModel, alpha_k: float, beta_k: float, signaling: Signaling | None,
                            trials: int, rng: np.random.Generator) -> OracleEstimate:
    """Direct estimate of ``E_i[lambda~]`` by pushing messages through ``channel``.

    Stratified on the transmitted bit: ``trials`` samples for each of ``a`` and
    ``b``, recombined with the hypothesis-dependent bit probabilities.
    """
    if trials < 2:
        raise ValueError("need at least two oracle trials")
    _check_probs(alpha_k, beta_k)
    cond = []
    for bit in (1, -1):
        if isinstance(channel, CONTINUOUS):
            x = signaling.level_a if bit == 1 else signaling.level_b
            z = received_batch(np.full(trials, complex(x)), channel, rng)
        elif isinstance(channel, Ideal):
            z = np.full(trials, bit)
        elif isinstance(channel, BEC):
            z = np.where(rng.random(trials) < channel.epsilon, 0, bit)
        elif isinstance(channel, BSC):
            z = np.where(rng.random(trials) < channel.epsilon, -bit, bit)
        else:
            raise TypeError(f"unknown channel {channel!r}")
        lam = np.asarray(llr_channel_aware(z, channel, alpha_k, beta_k, signaling), dtype=float)
        cond.append((float(lam.mean()), float(lam.var(ddof=1)) / trials))
    (ma, va), (mb, vb) = cond
    i1 = (1 - beta_k) * ma + beta_k * mb
    i0 = -(alpha_k * ma + (1 - alpha_k) * mb)
    se1 = math.sqrt((1 - beta_k) ** 2 * va + beta_k ** 2 * vb)
    se0 = math.sqrt(alpha_k ** 2 * va + (1 - alpha_k) ** 2 * vb)
    received = KlPair(i1, i0)
    return OracleEstimate(received, KlPair(se1, se0), penalty_from_received(alpha_k, beta_k, received),
                          KlPair(se1 / beta_k, se0 / alpha_k), 2 * trials)


def _check_agreement(value: KlPair, oracle: OracleEstimate, nse: float = 3.0, slack: float = 1e-9):
    for v, o, se in zip(value, oracle.penalty, oracle.penalty_se):
        if abs(v - o) > nse * se + slack * max(1.0, abs(v)):
            raise QuadratureError("quadrature unconverged: disagreement with Monte Carlo oracle")


def penalty_rayleigh(alpha_k: float, beta_k: float, rho: float, oracle_trials: int = 0,
                     rng: np.random.Generator | None = None) -> KlPair:
    """Rayleigh penalties ``(C_1, C_0)`` as a function of ``rho = var_a / var_b``.

    With ``oracle_trials > 0`` the quadrature is cross-checked against a
    channel simulation and a disagreement beyond three standard errors raises.
    """
    q = penalty_rayleigh_quad(alpha_k, beta_k, rho)
    if oracle_trials:
        ch, sig = rayleigh_realisation(rho)
        oracle = kl_received_monte_carlo(ch, alpha_k, beta_k, sig, oracle_trials,
                                         rng if rng is not None else np.random.default_rng(0))
        _check_agreement(q, oracle)
    return q


# --- Rician ---------------------------------------------------------------


def rician_symmetric_s(signaling: Signaling, gain_mean: complex, gain_var: float, noise_var: float) -> float:
    """Normalised distance ``|a-b||mu|/sigma_a`` of the equal-power Rician case."""
    va = abs(signaling.level_a) ** 2 * gain_var + noise_var
    return abs(signaling.level_a - signaling.level_b) * abs(complex(gain_mean)) / math.sqrt(va)


def penalty_rician_quad(alpha_k: float, beta_k: float, signaling: Signaling, gain_mean: complex,
                        gain_var: float, noise_var: float) -> KlPair:
    """Rician penalties by 1-D quadrature over (noncentral) exponential variables."""
    _check_probs(alpha_k, beta_k)
    a, b = complex(signaling.level_a), complex(signaling.level_b)
    mu = complex(gain_mean)
    pa, pb = abs(a) ** 2, abs(b) ** 2
    if gain_var == 0.0 or pa == pb:
        return penalty_awgn(alpha_k, beta_k, rician_symmetric_s(signaling, mu, gain_var, noise_var))
    va, vb = pa * gain_var + noise_var, pb * gain_var + noise_var
    rho = va / vb
    lr = math.log(rho)
    m2 = abs(a - b) ** 2 * abs(mu) ** 2
    shift_a = m2 / ((pa - pb) * gain_var)
    lam_a = m2 * va / ((pa - pb) ** 2 * gain_var ** 2)
    lam_b = m2 * vb / ((pa - pb) ** 2 * gain_var ** 2)

    def ea_f(u):
        ta, _ = _terms(alpha_k, beta_k, lr, u * (1.0 - rho) + shift_a, 0.0)
        return float(ta)

    def eb_f(u):
        _, tb = _terms(alpha_k, beta_k, lr, 0.0, u * (1.0 - 1.0 / rho) - shift_a)
        return float(tb)
    return _combine(alpha_k, beta_k, _expect(ea_f, lam_a), _expect(eb_f, lam_b))


class RicianSamples(NamedTuple):
    """Standard complex normals shared across Rician evaluations (common random numbers)."""

    gain: np.ndarray
    noise: np.ndarray

    @classmethod
    def draw(cls, trials: int, rng: np.random.Generator) -> "RicianSamples":
        return cls(complex_normal(rng, trials), complex_normal(rng, trials))


def penalty_rician_mc(alpha_k: float, beta_k: float, signaling: Signaling, gain_mean: complex,
                      gain_var: float, noise_var: float, samples: RicianSamples) -> tuple[KlPair, KlPair]:
    """Monte Carlo Rician penalties and their standard errors.

    ``z = h x + w`` is built from the shared unit samples, so evaluations at
    different signalling levels are strongly correlated and a grid search is
    smooth.
    """
    ch = Rician(gain_mean, gain_var, noise_var)
    h = complex(gain_mean) + math.sqrt(gain_var) * samples.gain
    w = math.sqrt(noise_var) * samples.noise
    cond = []
    for x in (signaling.level_a, signaling.level_b):
        lam = np.asarray(llr_channel_aware(h * x + w, ch, alpha_k, beta_k, signaling))
        cond.append((float(lam.mean()), float(lam.var(ddof=1)) / lam.size))
    (ma, va), (mb, vb) = cond
    i1 = (1 - beta_k) * ma + beta_k * mb
    i0 = -(alpha_k * ma + (1 - alpha_k) * mb)
    pen = penalty_from_received(alpha_k, beta_k, KlPair(i1, i0))
    se1 = math.sqrt((1 - beta_k) ** 2 * va + beta_k ** 2 * vb) / beta_k
    se0 = math.sqrt(alpha_k ** 2 * va + (1 - alpha_k) ** 2 * vb) / alpha_k
    return pen, KlPair(se1, se0)


def penalty_rician(alpha_k: float, beta_k: float, signaling: Signaling, gain_mean: complex, gain_var: float,
                   noise_var: float, trials: int = 200_000, rng: np.random.Generator | None = None,
                   samples: RicianSamples | None = None, cross_check: bool = True) -> KlPair:
    """Rician penalties ``(C_1, C_0)``.

    Equal-power levels reduce to the AWGN form with ``s = |a-b||mu|/sigma_a``.
    Otherwise the Monte Carlo evaluator is primary; ``cross_check`` compares
    it with the quadrature route and raises on a disagreement beyond three
    standard errors.
    """
    _check_probs(alpha_k, beta_k)
    if abs(signaling.level_a) == abs(signaling.level_b) or gain_var == 0.0:
        return penalty_awgn(alpha_k, beta_k, rician_symmetric_s(signaling, gain_mean, gain_var, noise_var))
    if samples is None:
        samples = RicianSamples.draw(trials, rng if rng is not None else np.random.default_rng(0))
    pen, se = penalty_rician_mc(alpha_k, beta_k, signaling, gain_mean, gain_var, noise_var, samples)
    if cross_check:
        q = penalty_rician_quad(alpha_k, beta_k, signaling, gain_mean, gain_var, noise_var)
        for v, o, s in zip(q, pen, se):
            if abs(v - o) > 3.0 * s + 1e-9 * max(1.0, abs(v)):
                raise QuadratureError("quadrature unconverged: Rician quadrature and Monte Carlo disagree")
    return pen


# --- dispatch -------------------------------------------------------------


def penalty(channel: ChannelModel, alpha_k: float, beta_k: float, signaling: Signaling | None = None) -> KlPair:
    """Deterministic (quadrature / closed form) penalties for any channel."""
    if isinstance(channel, Ideal):
        return KlPair(0.0, 0.0)
    if isinstance(channel, (BEC, BSC)):
        rec = kl_received_bec if isinstance(channel, BEC) else kl_received_bsc
        return penalty_from_received(alpha_k, beta_k, rec(alpha_k, beta_k, channel.epsilon))
    if isinstance(channel, AWGN):
        s = abs(signaling.level_a - signaling.level_b) * abs(complex(channel.gain_h)) / math.sqrt(channel.noise_var)
        return penalty_awgn(alpha_k, beta_k, s)
    if isinstance(channel, Rayleigh):
        va, vb = received_variances(channel, signaling)
        return penalty_rayleigh_quad(alpha_k, beta_k, va / vb)
    if isinstance(channel, Rician):
        return penalty_rician_quad(alpha_k, beta_k, signaling, channel.gain_mean, channel.gain_var,
                                   channel.noise_var)
    raise TypeError(f"unknown channel {channel!r}")


@dataclass(frozen=True)
class ReceivedKl:
    value: KlPair          # closed form or I^ + penalty reconstruction
    monte_carlo: KlPair    # direct E_i[lambda~] through the channel
    monte_carlo_se: KlPair

    def agrees(self, nse: float = 3.0, slack: float = 1e-12) -> bool:
        return all(abs(v - m) <= nse * s + slack for v, m, s in zip(self.value, self.monte_carlo, self.monte_carlo_se))


def kl_received(channel: ChannelModel, alpha_k: float, beta_k: float, signaling: Signaling | None = None,
                oracle_trials: int = 100_000, rng: np.random.Generator | None = None) -> ReceivedKl:
    """Received KL numbers ``(I~_1, I~_0)`` plus an independent Monte Carlo estimate."""
    if isinstance(channel, Ideal):
        value = kl_transmitted_hat(alpha_k, beta_k)
    elif isinstance(channel, BEC):
        value = kl_received_bec(alpha_k, beta_k, channel.epsilon)
    elif isinstance(channel, BSC):
        value = kl_received_bsc(alpha_k, beta_k, channel.epsilon)
    else:
        value = received_from_penalty(alpha_k, beta_k, penalty(channel, alpha_k, beta_k, signaling))
    oracle = kl_received_monte_carlo(channel, alpha_k, beta_k, signaling, oracle_trials,
                                     rng if rng is not None else np.random.default_rng(0))
    return ReceivedKl(value, oracle.received, oracle.received_se)


# --- reports and delay predictions ---------------------------------------


@dataclass(frozen=True)
class KlReport:
    observed_I: KlPair
    transmitted_I_hat: KlPair
    received_I_tilde: KlPair
    per_obs_I: KlPair
    ratio_hat: KlPair
    ratio_tilde: KlPair
    penalty_C: KlPair
    mean_intersample: KlPair

    @property
    def effective_received(self) -> KlPair:
        """``I~_i^k(1) = eta~_i^k I_i^k(1)``."""
        return KlPair(self.ratio_tilde.h1 * self.per_obs_I.h1, self.ratio_tilde.h0 * self.per_obs_I.h0)

    @property
    def effective_transmitted(self) -> KlPair:
        return KlPair(self.ratio_hat.h1 * self.per_obs_I.h1, self.ratio_hat.h0 * self.per_obs_I.h0)


def kl_report(config: SensorConfig, channel: ChannelModel, signaling: Signaling | None,
              trials: int, rng: np.random.Generator, observed: ObservedKl | None = None) -> KlReport:
    """Full information chain for one sensor.

    Local error probabilities come from ``config`` when set, otherwise from
    the same first-sample run that estimates ``I_i^k(t_1)``.
    """
    obs = observed if observed is not None else kl_observed_local(config, trials, rng)
    alpha = config.alpha_local if config.alpha_local is not None else obs.alpha
    beta = config.beta_local if config.beta_local is not None else obs.beta
    hat = kl_transmitted_hat(alpha, beta)
    pen = penalty(channel, alpha, beta, signaling)
    tilde = received_from_penalty(alpha, beta, pen)
    I = obs.at_sample
    return KlReport(
        observed_I=I,
        transmitted_I_hat=hat,
        received_I_tilde=tilde,
        per_obs_I=obs.per_obs,
        ratio_hat=KlPair(hat.h1 / I.h1, hat.h0 / I.h0),
        ratio_tilde=KlPair(tilde.h1 / I.h1, tilde.h0 / I.h0),
        penalty_C=pen,
        mean_intersample=obs.mean_intersample,
    )


@dataclass(frozen=True)
class DelayPrediction:
    asymptotic_slope: KlPair   # 1 / I~_i(1)
    predicted_delay: KlPair    # leading term only; the O(1) constant is not modelled
    alpha: float
    beta: float


def global_received_information(reports: Sequence[KlReport]) -> KlPair:
    """``I~_i(1) = sum_k eta~_i^k I_i^k(1)``."""
    return KlPair(sum(r.effective_received.h1 for r in reports), sum(r.effective_received.h0 for r in reports))


def predict_delay(I_tilde_1_global: float, I_tilde_0_global: float, alpha: float, beta: float) -> DelayPrediction:
    if not (I_tilde_1_global > 0 and I_tilde_0_global > 0):
        raise ValueError("information numbers must be positive")
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("target error probabilities must lie in (0, 1)")
    slope = KlPair(1.0 / I_tilde_1_global, 1.0 / I_tilde_0_global)
    return DelayPrediction(slope, KlPair(abs(math.log(alpha)) * slope.h1, abs(math.log(beta)) * slope.h0),
                           alpha, beta)
