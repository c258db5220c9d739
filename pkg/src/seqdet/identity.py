"""Monte Carlo check of the non-asymptotic decision-delay identity.

Per sensor, Wald's identity on the message renewal process gives

    r_k (E[T] + E[Y_k]) = E[L~_T^k] + E[lambda~_{N+1}^k],    r_k = E[lambda~_1^k] / E[tau_1^k],

where ``Y_k`` is the wait from the stop to sensor ``k``'s next emission and
``lambda~_{N+1}^k`` the received LLR of that emission.  Summing over sensors,

    E[T] = (E[L~_T] + sum_k E[lambda~_{N+1}^k] - sum_k r_k E[Y_k]) / sum_k r_k.

Both sides are estimated from the same trials; the ``r_k`` come from an
independent first-message run through the actual channel.  Under H0 every
LLR term enters with a minus sign so that all information rates are positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import CONTINUOUS, BEC, BSC, Ideal, received_batch
from .detection import Hypothesis, simulate_first_samples
from .fusion import llr_channel_aware
from .sim import Prepared, _PREP_KEY, _as_prepared, _generator, run_trials


@dataclass(frozen=True)
class RateEstimate:
    """``E[lambda~_1] / E[tau_1]`` for one sensor with its delta-method standard error."""

    rate: float
    se: float
    mean_tau: float
    mean_llr: float
    tau_se: float


def _received_first_llr(prep: Prepared, k: int, bits: np.ndarray, rng) -> np.ndarray:
    link = prep.links[k]
    ch = link.channel
    if prep.config.fusion_mode != "channel-aware":
        raise ValueError("the delay identity is checked for channel-aware fusion")
    if isinstance(ch, CONTINUOUS):
        x = np.where(bits > 0, complex(link.signaling.level_a), complex(link.signaling.level_b))
        z = received_batch(x, ch, rng)
    elif isinstance(ch, Ideal):
        z = bits
    else:
        hit = rng.random(bits.size) < ch.epsilon
        z = np.where(hit, 0 if isinstance(ch, BEC) else -bits, bits)
    return np.asarray(llr_channel_aware(z, ch, link.alpha_k, link.beta_k, link.signaling), dtype=float)


def message_rate(prep: Prepared, k: int, hypothesis: Hypothesis, trials: int) -> RateEstimate:
    """Received information per slot of sensor ``k``, sign-adjusted by hypothesis."""
    rng = _generator(prep.config.seed, _PREP_KEY, k, 7, int(hypothesis))
    tau, lam = simulate_first_samples(prep.config.sensors[k], hypothesis, trials, rng)
    bits = np.where(lam > 0, 1, -1)
    sign = 1.0 if hypothesis == Hypothesis.H1 else -1.0
    llr = sign * _received_first_llr(prep, k, bits, rng)
    mt, ml = float(tau.mean()), float(llr.mean())
    cov = np.cov(np.vstack([llr, tau.astype(float)]), ddof=1) / trials
    r = ml / mt
    # delta method for a ratio of means
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (mt * mt)
    return RateEstimate(r, math.sqrt(max(var, 0.0)), mt, ml, math.sqrt(cov[1, 1]))


@dataclass(frozen=True)
class IdentityReport:
    hypothesis: Hypothesis
    trials: int
    lhs: float                # E[T]
    lhs_se: float
    rhs: float                # assembled right side
    rhs_se: float
    difference: float         # E[T - X/R]
    difference_se: float      # combined, includes the rate-estimate uncertainty
    rates: tuple[RateEstimate, ...]
    mean_wait: tuple[float, ...]
    mean_messages: tuple[float, ...]
    wald_gap: tuple[float, ...]      # E[tau](E[N]+1) - (E[T] + E[Y_k]) per sensor
    wald_gap_se: tuple[float, ...]
    truncated: int

    @property
    def z_score(self) -> float:
        return self.difference / self.difference_se if self.difference_se > 0 else math.inf

    def holds(self, nse: float = 3.0) -> bool:
        return abs(self.difference) <= nse * self.difference_se

    def wald_holds(self, nse: float = 3.0) -> bool:
        return all(abs(g) <= nse * s for g, s in zip(self.wald_gap, self.wald_gap_se))


def verify_delay_identity(config, trials: int, hypothesis: Hypothesis | None = None, rate_trials: int | None = None,
                          workers: int = 1) -> IdentityReport:
    """Both sides of the delay identity with combined standard errors."""
    prep = _as_prepared(config)
    hyp = Hypothesis.parse(hypothesis if hypothesis is not None else prep.config.hypothesis)
    K = len(prep.config.sensors)
    rates = tuple(message_rate(prep, k, hyp, rate_trials or max(trials, 10_000)) for k in range(K))
    allres = run_trials(prep, hyp, trials, workers, record_tail=True)
    res = [r for r in allres if not r.truncated]
    n = len(res)
    if n < 2:
        raise ValueError("too few decided trials for the identity check")
    sign = 1.0 if hyp == Hypothesis.H1 else -1.0
    T = np.array([r.delay for r in res], dtype=float)
    L = sign * np.array([r.stopped_llr for r in res])
    Y = np.array([r.wait for r in res], dtype=float)
    lam_next = sign * np.array([r.next_llr for r in res])
    N = np.array([r.messages_per_sensor for r in res], dtype=float)
    r_vec = np.array([e.rate for e in rates])
    r_se = np.array([e.se for e in rates])
    R = float(r_vec.sum())
    X = L + lam_next.sum(axis=1) - Y @ r_vec
    D = T - X / R
    sem = lambda v: float(np.std(v, ddof=1) / math.sqrt(n))
    mean_X = float(X.mean())
    # d mean(D) / d r_k = E[Y_k]/R + E[X]/R^2
    grad = Y.mean(axis=0) / R + mean_X / R ** 2
    rate_var = float(np.sum((grad * r_se) ** 2))
    d_se = math.sqrt(sem(D) ** 2 + rate_var)
    rhs = mean_X / R
    rhs_grad = -Y.mean(axis=0) / R - mean_X / R ** 2
    rhs_se = math.sqrt(sem(X / R) ** 2 + float(np.sum((rhs_grad * r_se) ** 2)))

    gaps, gap_ses = [], []
    for k, e in enumerate(rates):
        lhs_k = e.mean_tau * (N[:, k].mean() + 1.0)
        v = T + Y[:, k]
        gaps.append(float(lhs_k - v.mean()))
        gap_ses.append(math.sqrt(sem(v - e.mean_tau * N[:, k]) ** 2 + ((N[:, k].mean() + 1.0) * e.tau_se) ** 2))
    return IdentityReport(hyp, n, float(T.mean()), sem(T), rhs, rhs_se, float(D.mean()), d_se, rates,
                          tuple(float(x) for x in Y.mean(axis=0)), tuple(float(x) for x in N.mean(axis=0)),
                          tuple(gaps), tuple(gap_ses), len(allres) - n)
