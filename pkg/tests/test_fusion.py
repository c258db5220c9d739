import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqdet import kl
from seqdet.channels import AWGN, BEC, BSC, Binary, Erased, Ideal, Rayleigh, Rician, Signaling, received_batch
from seqdet.fusion import (Decision, FusionConfig, FusionState, LlrUpdate, SensorLink, conventional_demodulate,
                           conventional_update, induced_erasure_probability, llr_awgn, llr_bec, llr_bsc,
                           llr_channel_aware, llr_ideal, llr_rayleigh, llr_rician, llr_unreliable,
                           llr_unreliable_awgn, max_message_llr, ml_error_rate, sprt_step, threshold_then_fuse)

LOG9 = math.log(9.0)
probs = st.floats(0.001, 0.499)
cplx = st.builds(complex, st.floats(-50, 50), st.floats(-50, 50))


def test_llr_ideal_examples():
    assert llr_ideal(1, 0.1, 0.1) == pytest.approx(2.1972245773362196, abs=1e-12)
    assert llr_ideal(1, 0.5, 0.5) == 0.0 and llr_ideal(-1, 0.5, 0.5) == 0.0
    assert llr_ideal(-1, 0.1, 0.1) == pytest.approx(-LOG9)
    for bad in ((0.0, 0.1), (0.1, 1.0)):
        with pytest.raises(ValueError):
            llr_ideal(1, *bad)


def test_llr_bec_examples():
    assert llr_bec(Erased(), 0.1, 0.1) == 0.0
    assert llr_bec(Binary(1), 0.1, 0.1) == pytest.approx(LOG9)
    assert llr_bec(Binary(-1), 0.2, 0.05) == pytest.approx(-2.7725887222397812, abs=1e-12)
    np.testing.assert_allclose(llr_bec(np.array([1, 0, -1]), 0.1, 0.1), [LOG9, 0.0, -LOG9], rtol=0, atol=1e-15)


def test_llr_bsc_examples():
    assert llr_bsc(1, 0.1, 0.1, 0.1) == pytest.approx(1.5163474893680884, abs=1e-12)
    assert abs(llr_bsc(1, 0.1, 0.1, 0.1)) < abs(llr_ideal(1, 0.1, 0.1))
    with pytest.raises(ValueError):
        llr_bsc(1, 0.1, 0.1, 0.5)


@settings(max_examples=100, deadline=None)
@given(probs, probs)
def test_bsc_zero_is_ideal(a, b):
    for bit in (1, -1):
        assert llr_bsc(bit, a, b, 0.0) == llr_ideal(bit, a, b)
        assert llr_bec(Binary(bit), a, b) == llr_ideal(bit, a, b)


def test_llr_awgn_examples():
    sig = Signaling.unit()
    # equidistant point
    assert llr_awgn(0j, 0.1, 0.1, 1.0, 1.0, sig) == pytest.approx(0.0, abs=1e-15)
    # high-precision reference for z = 0.5
    v = llr_awgn(0.5 + 0j, 0.1, 0.1, 1.0, 1.0, sig)
    assert v == pytest.approx(1.4155360912639720392, abs=1e-13)
    assert abs(v) <= LOG9
    assert llr_awgn(1 + 0j, 0.1, 0.2, 1.0, 1e-6, sig) == pytest.approx(math.log(0.8 / 0.1), abs=1e-9)
    with pytest.raises(ValueError):
        llr_awgn(0j, 0.1, 0.1, 1.0, 0.0, sig)


def test_llr_awgn_no_overflow_at_high_snr():
    v = llr_awgn(np.array([1e3 + 0j, -1e3 + 0j]), 0.1, 0.1, 1.0, 1e-8, Signaling.unit())
    assert np.all(np.isfinite(v))
    np.testing.assert_allclose(v, [LOG9, -LOG9], atol=1e-12)


def test_llr_rayleigh_examples(rng):
    same = Signaling(1 + 0j, -1 + 0j, 1.0)
    z = rng.normal(size=20) + 1j * rng.normal(size=20)
    np.testing.assert_allclose(llr_rayleigh(z, 0.1, 0.2, 1.0, 1.0, same), 0.0, rtol=0, atol=1e-15)
    ook = Signaling.ook_like(3.0, 0.5)
    assert llr_rayleigh(1e4 + 0j, 0.1, 0.2, 1.0, 1.0, ook) == pytest.approx(math.log(0.8 / 0.1), abs=1e-9)


def test_rician_limits():
    sig = Signaling.unit()
    z = 0.5 + 0.5j
    assert llr_rician(z * 1, 0.1, 0.1, 0.5 + 0.5j, 0.0, 1e-6, sig) == pytest.approx(LOG9, abs=1e-9)


def test_reduction_lattice_bit_identical(rng):
    n = 10_000
    z = rng.normal(size=n) * 3 + 1j * rng.normal(size=n) * 3
    sig = Signaling(1.3 - 0.2j, -0.4 + 0.9j, 2.0)
    a, b = 0.07, 0.13
    mu = 0.6 - 0.8j
    np.testing.assert_array_equal(llr_rician(z, a, b, mu, 0.0, 0.7, sig), llr_awgn(z, a, b, mu, 0.7, sig))
    np.testing.assert_array_equal(llr_rician(z, a, b, 0j, 0.9, 0.7, sig), llr_rayleigh(z, a, b, 0.9, 0.7, sig))
    bits = rng.choice([-1, 1], n)
    ideal = llr_channel_aware(bits, Ideal(), a, b)
    np.testing.assert_array_equal(llr_channel_aware(bits, BEC(0.0), a, b), ideal)
    np.testing.assert_array_equal(llr_channel_aware(bits, BSC(0.0), a, b), ideal)


@settings(max_examples=300, deadline=None)
@given(cplx, probs, probs, st.sampled_from(["awgn", "rayleigh", "rician"]))
def test_data_processing_bound(z, a, b, kind):
    sig = Signaling.ook_like(2.0, 0.5)
    ch = {"awgn": AWGN(1 - 1j, 0.3), "rayleigh": Rayleigh(1.0, 0.3), "rician": Rician(0.5 + 0.5j, 0.5, 0.3)}[kind]
    v = llr_channel_aware(z, ch, a, b, sig)
    assert abs(v) <= max_message_llr(a, b) + 1e-12


def test_rayleigh_bound_random_draws(rng):
    sig = Signaling.ook_like(3.0, 1.0)
    z = received_batch(rng.choice([sig.level_a, sig.level_b], 100_000), Rayleigh(1.0, 1.0), rng)
    v = llr_rayleigh(z, 0.05, 0.2, 1.0, 1.0, sig)
    assert np.max(np.abs(v)) <= max_message_llr(0.05, 0.2) + 1e-12


def test_sprt_examples():
    cfg = FusionConfig(2.0, 2.0)
    s = sprt_step(FusionState(), LlrUpdate(0, 1.5, 1), cfg)
    assert s.decision is Decision.PENDING
    s = sprt_step(s, LlrUpdate(1, 0.8, 4), cfg)
    assert s.decision is Decision.H1 and s.global_llr == pytest.approx(2.3) and s.decision_time == 4
    with pytest.raises(ValueError, match="already decided"):
        sprt_step(s, LlrUpdate(0, 0.1), cfg)
    s = sprt_step(FusionState(), LlrUpdate(0, -2.0, 7), cfg)
    assert s.decision is Decision.H0 and s.decision_time == 7
    s = FusionState()
    for t in range(100):
        s = sprt_step(s, LlrUpdate(0, 0.0, t), cfg)
    assert s.decision is Decision.PENDING and s.messages_consumed == 100


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=50), st.floats(0.1, 5), st.floats(0.1, 5))
def test_sprt_state_machine(values, up, down):
    cfg = FusionConfig(up, down)
    s = FusionState()
    for v in values:
        if s.decision is not Decision.PENDING:
            with pytest.raises(ValueError):
                sprt_step(s, LlrUpdate(0, v), cfg)
            break
        s = sprt_step(s, LlrUpdate(0, v), cfg)
        if s.decision is Decision.PENDING:
            assert -down < s.global_llr < up
        elif s.decision is Decision.H1:
            assert s.global_llr >= up
        else:
            assert s.global_llr <= -down


def test_fusion_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        SensorLink(0.6, 0.1)
    f = FusionConfig.from_targets(0.01, 0.001)
    assert f.threshold_up == pytest.approx(math.log(100)) and f.threshold_down == pytest.approx(math.log(1000))
    with pytest.raises(ValueError):
        LlrUpdate(0, math.inf)


def test_conventional_demodulate():
    sig = Signaling.unit()
    assert conventional_demodulate(0.7 + 0j, AWGN(), sig) == 1
    assert conventional_demodulate(0j, AWGN(), sig) == 1
    assert conventional_demodulate(-0.1 + 5j, AWGN(), sig) == -1
    ook = Signaling.ook_like(3.0, 0.5)
    assert conventional_demodulate(1e3 + 0j, Rayleigh(), ook) == 1
    assert conventional_demodulate(1e3 + 0j, Rayleigh(), Signaling.ook_like(3.0, 0.5, swap=True)) == -1
    for ch in (Ideal(), BSC(0.1), BEC(0.1)):
        with pytest.raises(ValueError, match="not applicable"):
            conventional_demodulate(0j, ch, sig)


def test_conventional_demodulate_tie_on_fading_boundary():
    # equal-power levels on a Rayleigh channel: likelihoods always tie
    assert conventional_demodulate(0.3 - 2j, Rayleigh(), Signaling.unit()) == 1


def test_conventional_update():
    for bit in (1, -1):
        assert conventional_update(bit, "treat-as-ideal", 0.1, 0.1) == conventional_update(bit, "treat-as-bsc", 0.1, 0.1, 0.0)
    assert conventional_update(1, "treat-as-bsc", 0.1, 0.1, 0.1) == pytest.approx(math.log(0.82 / 0.18))
    assert conventional_update(-1, "bsc", 0.1, 0.1, 0.1) == pytest.approx(-math.log(0.82 / 0.18))
    with pytest.raises(ValueError):
        conventional_update(1, "soft", 0.1, 0.1)


def test_ml_error_rate_awgn(rng):
    from scipy.stats import norm
    # antipodal unit levels, total noise var 1: error = Q(1 / sqrt(1/2))
    p, se = ml_error_rate(AWGN(1.0, 1.0), Signaling.unit(), 100_000, rng)
    assert abs(p - norm.sf(math.sqrt(2.0))) <= 4 * se


def test_unreliable_limits():
    sig = Signaling.antipodal(20.0)
    v = llr_unreliable_awgn(0j, 0.1, 0.1, 1.0, 1.0, sig, 0.2, 0.3)
    assert v == pytest.approx(math.log(0.8 / 0.7), abs=1e-12)
    z = np.array([0.3 + 1j, 19 - 2j, -21 + 0.5j])
    np.testing.assert_allclose(llr_unreliable_awgn(z, 0.1, 0.2, 1.0, 1.0, sig, 1.0, 1.0),
                               llr_awgn(z, 0.1, 0.2, 1.0, 1.0, sig), rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        llr_unreliable_awgn(z, 0.1, 0.1, 1.0, 1.0, sig, 0.0, 0.5)
    with pytest.raises(ValueError):
        llr_unreliable_awgn(z, 0.1, 0.1, 1.0, 1.0, sig, 0.5, 1.5)


def test_unreliable_fading_matches_awgn_form():
    sig = Signaling.antipodal(2.0)
    z = np.array([0.3 + 1j, 1.9 - 0.2j])
    np.testing.assert_allclose(llr_unreliable(z, Rician(1.0, 0.0, 0.5), 0.1, 0.2, sig, 0.3, 0.25),
                               llr_unreliable_awgn(z, 0.1, 0.2, 1.0, 0.5, sig, 0.3, 0.25), atol=1e-12)


def test_threshold_then_fuse():
    op = lambda z: 1.25
    assert threshold_then_fuse(0j, 0.0, op, 1.0) == 1.25
    assert threshold_then_fuse(1e6 + 0j, math.inf, op, 1.0) is None
    assert threshold_then_fuse(0.1 + 0j, 1.0, op, 1.0) is None
    with pytest.raises(ValueError):
        threshold_then_fuse(0j, -1.0, op, 1.0)


def test_induced_erasure_limits(rng):
    ch, sig = AWGN(1.0, 1.0), Signaling.antipodal(2.0)
    assert induced_erasure_probability(0.0, ch, sig, 1000, rng)[0] == 0.0
    assert induced_erasure_probability(math.inf, ch, sig, 1000, rng)[0] == 1.0


def test_induced_erasure_scales_received_kl(rng):
    ch, sig, a, b = AWGN(1.0, 1.0), Signaling.antipodal(2.0), 0.1, 0.1
    thr, n = 4.0, 200_000
    eps, _ = induced_erasure_probability(thr, ch, sig, n, rng)
    assert 0.2 < eps < 0.8
    vals = []
    for x, w in ((sig.level_a, 1 - b), (sig.level_b, b)):
        z = received_batch(np.full(n, x), ch, rng)
        keep = np.abs(z) ** 2 >= thr
        vals.append((w, np.where(keep, llr_awgn(z, a, b, 1.0, 1.0, sig), 0.0)))
    est = sum(w * v.mean() for w, v in vals)
    se = math.sqrt(sum((w * v.std() / math.sqrt(n)) ** 2 for w, v in vals))
    full = kl.received_from_penalty(a, b, kl.penalty(ch, a, b, sig)).h1
    assert abs(est - (1 - eps) * full) <= 4 * se + 0.01 * full
