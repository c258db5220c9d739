"""Invariant suites run by ``seqdet verify``.

Families: ``monotonicity`` (AWGN penalties increase with ``s``; ``lemma2`` is
accepted as an alias), ``identity`` (delay
identity and the per-sensor Wald sub-identity), ``data-processing``
(information chain, penalty signs, reconstruction and LLR consistency
through the actual channel) and ``quadrature`` (quadrature against Monte
Carlo oracles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analysis, kl
from .channels import AWGN, BSC, CONTINUOUS, BEC, ChannelModel, Ideal, Rician, Signaling, received_batch
from .detection import Hypothesis
from .fusion import llr_channel_aware
from .identity import verify_delay_identity
from .sim import Prepared, _as_prepared

FAMILIES = ("monotonicity", "identity", "data-processing", "quadrature")
ALIASES = {"lemma2": "monotonicity"}


@dataclass(frozen=True)
class CheckResult:
    family: str
    name: str
    passed: bool
    value: float
    reference: float
    tolerance: float
    detail: str = ""


HEADER = ["family", "check", "passed", "value", "reference", "tolerance", "detail"]


def as_rows(results) -> list[list]:
    return [[r.family, r.name, int(r.passed), r.value, r.reference, r.tolerance, r.detail] for r in results]


def check_monotonicity(pairs: int = 100, seed: int = 0, nodes: int = 64, tol: float = 1e-9) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    s = np.geomspace(0.05, 20.0, 400)
    worst, where = math.inf, ""
    for a, b in analysis.sample_monotone_pairs(pairs, rng):
        c = analysis.awgn_s_grid(a, b, s, nodes=nodes)
        d = float(np.diff(c, axis=0).min())
        if d < worst:
            worst, where = d, f"alpha={a:.6g} beta={b:.6g}"
    return [CheckResult("monotonicity", "min_finite_difference", worst >= -tol, worst, 0.0, tol, where)]


def _receive(bits: np.ndarray, channel: ChannelModel, signaling, rng) -> np.ndarray:
    if isinstance(channel, CONTINUOUS):
        x = np.where(bits > 0, complex(signaling.level_a), complex(signaling.level_b))
        return received_batch(x, channel, rng)
    if isinstance(channel, Ideal):
        return bits
    hit = rng.random(bits.size) < channel.epsilon
    return np.where(hit, 0 if isinstance(channel, BEC) else -bits, bits)


def check_data_processing(prep: Prepared, trials: int = 200_000, seed: int = 0, actual_channels=None,
                          nse: float = 4.0) -> list[CheckResult]:
    """Per-sensor information chain through the channel that is actually used.

    ``actual_channels`` replaces the transmission channel while the fusion
    rule keeps the labelled one, which is how a mislabelled configuration is
    simulated.
    """
    out = []
    rng = np.random.default_rng(seed)
    cfg = prep.config
    for k, link in enumerate(prep.links):
        tag = f"sensor{k}"
        label, sig = link.channel, link.signaling
        actual = actual_channels[k] if actual_channels is not None else label
        obs = kl.kl_observed_local(cfg.sensors[k], min(trials, 100_000), rng)
        hat = kl.kl_transmitted_hat(link.alpha_k, link.beta_k)
        pen = kl.penalty(label, link.alpha_k, link.beta_k, sig)
        tilde = kl.received_from_penalty(link.alpha_k, link.beta_k, pen)
        for i, h in enumerate(("H1", "H0")):
            chain = -1e-12 <= tilde[i] <= hat[i] + 1e-12 and hat[i] <= obs.at_sample[i] + 3 * obs.at_sample_se[i]
            out.append(CheckResult("data-processing", f"{tag}_chain_{h}", chain, tilde[i], hat[i], 0.0,
                                   f"I={obs.at_sample[i]:.6g}"))
            out.append(CheckResult("data-processing", f"{tag}_penalty_sign_{h}", pen[i] <= 1e-12, pen[i], 0.0, 1e-12))
        # monte carlo through the actual channel, fused with the labelled rule
        for hyp, flip in ((Hypothesis.H1, 1.0), (Hypothesis.H0, -1.0)):
            p_up = (1 - link.beta_k) if hyp == Hypothesis.H1 else link.alpha_k
            bits = np.where(rng.random(trials) < p_up, 1, -1)
            z = _receive(bits, actual, sig, rng)
            lam = np.asarray(llr_channel_aware(z, label, link.alpha_k, link.beta_k, sig), dtype=float)
            est = flip * lam.mean()
            se = lam.std(ddof=1) / math.sqrt(trials)
            ref = tilde[0 if hyp == Hypothesis.H1 else 1]
            out.append(CheckResult("data-processing", f"{tag}_received_kl_{hyp.name}",
                                   abs(est - ref) <= nse * se + 1e-12, float(est), ref, nse * se))
            # a correctly specified LLR satisfies E_1[exp(-lam)] = 1 and E_0[exp(lam)] = 1
            w = np.exp(-flip * lam)
            m, wse = float(w.mean()), float(w.std(ddof=1) / math.sqrt(trials))
            out.append(CheckResult("data-processing", f"{tag}_llr_consistency_{hyp.name}",
                                   abs(m - 1.0) <= nse * wse + 1e-12, m, 1.0, nse * wse))
    return out


def check_identity(prep: Prepared, trials: int, workers: int = 1, nse: float = 4.0) -> list[CheckResult]:
    out = []
    if prep.config.fusion_mode != "channel-aware":
        return [CheckResult("identity", "skipped", True, math.nan, math.nan, 0.0, "needs channel-aware fusion")]
    for hyp in (Hypothesis.H1, Hypothesis.H0):
        r = verify_delay_identity(prep, trials, hyp, workers=workers)
        out.append(CheckResult("identity", f"delay_identity_{hyp.name}", r.holds(nse), r.lhs, r.rhs,
                               nse * r.difference_se, f"z={r.z_score:.3f}"))
        for k, (g, s) in enumerate(zip(r.wald_gap, r.wald_gap_se)):
            out.append(CheckResult("identity", f"wald_sensor{k}_{hyp.name}", abs(g) <= nse * s, g, 0.0, nse * s))
    return out


def check_quadrature(prep: Prepared | None = None, trials: int = 400_000, seed: int = 0,
                     nse: float = 4.0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    cases: list[tuple[str, ChannelModel, Signaling, float, float]] = [
        ("awgn_s1", AWGN(1.0, 4.0), Signaling.unit(), 0.1, 0.1),
        ("awgn_asym", AWGN(1.0 + 1.0j, 2.0), Signaling.unit(), 0.05, 0.2),
    ]
    for rho in (0.25, 4.0):
        ch, sig = kl.rayleigh_realisation(rho)
        cases.append((f"rayleigh_rho{rho:g}", ch, sig, 0.1, 0.1))
    cases.append(("rician_ook", Rician(1 + 1j, 1.0, 1.0), Signaling.ook_like(math.sqrt(10.0), 1.0), 0.1, 0.1))
    if prep is not None:
        for k, link in enumerate(prep.links):
            if isinstance(link.channel, CONTINUOUS):
                cases.append((f"sensor{k}", link.channel, link.signaling, link.alpha_k, link.beta_k))
    for name, ch, sig, a, b in cases:
        q = kl.penalty(ch, a, b, sig)
        o = kl.kl_received_monte_carlo(ch, a, b, sig, trials, rng)
        for i, h in enumerate(("C1", "C0")):
            diff = q[i] - o.penalty[i]
            out.append(CheckResult("quadrature", f"{name}_{h}", abs(diff) <= nse * o.penalty_se[i], q[i],
                                   o.penalty[i], nse * o.penalty_se[i]))
    return out


def run_checks(config=None, families=FAMILIES, trials: int = 20_000, workers: int = 1, seed: int = 0,
               actual_channels=None) -> list[CheckResult]:
    families = tuple(dict.fromkeys(ALIASES.get(f, f) for f in families))
    unknown = [f for f in families if f not in FAMILIES]
    if unknown:
        raise ValueError(f"unknown check family {unknown[0]!r}; expected one of {', '.join(FAMILIES)}")
    prep = _as_prepared(config) if config is not None else None
    out = []
    for fam in families:
        if fam == "monotonicity":
            out += check_monotonicity(seed=seed)
        elif fam == "identity":
            out += check_identity(prep, trials, workers)
        elif fam == "data-processing":
            out += check_data_processing(prep, seed=seed, actual_channels=actual_channels)
        elif fam == "quadrature":
            out += check_quadrature(prep, seed=seed)
    return out
