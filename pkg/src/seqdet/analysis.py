"""Grids of KL numbers and penalty terms over signalling and channel parameters."""

from __future__ import annotations

import math

import numpy as np

from . import kl
from .channels import Signaling

Table = tuple[list[str], list[list]]


def bec_bsc_grid(n: int = 50, lo: float = 0.01, hi: float = 0.49) -> Table:
    """Received KL under H1 for BEC and BSC over ``alpha = beta`` and ``epsilon``."""
    vals = np.linspace(lo, hi, n)
    rows = []
    for a in vals:
        for e in vals:
            bec = kl.kl_received_bec(a, a, e).h1
            bsc = kl.kl_received_bsc(a, a, e).h1
            rows.append([float(a), float(e), bec, bsc])
    return ["alpha", "epsilon", "I_tilde_bec", "I_tilde_bsc"], rows


def rho_range(P: float, Q: float, gain_var: float = 1.0, noise_var: float = 1.0) -> tuple[float, float]:
    """Variance ratios reachable with ``Q <= |a|, |b| <= P``."""
    hi = (P * P * gain_var + noise_var) / (Q * Q * gain_var + noise_var)
    return 1.0 / hi, hi


def rayleigh_rho_grid(alpha: float = 0.1, beta: float = 0.1, P: float = math.sqrt(10.0), Q: float = 1.0,
                      gain_var: float = 1.0, noise_var: float = 1.0, n: int = 101) -> Table:
    """Penalties against ``rho`` on a log grid symmetric about 1."""
    lo, hi = rho_range(P, Q, gain_var, noise_var)
    rhos = np.geomspace(lo, hi, n)
    if n % 2:
        rhos[n // 2] = 1.0
    rows = []
    for r in rhos:
        c = kl.penalty_rayleigh_quad(alpha, beta, float(r))
        rows.append([float(r), c.h1, c.h0])
    return ["rho", "C1", "C0"], rows


def rician_level_grid(alpha: float = 0.1, beta: float = 0.1, gain_mean: complex = 1 + 1j, gain_var: float = 1.0,
                      noise_var: float = 1.0, P: float = math.sqrt(10.0), Q: float = 1.0, n: int = 21,
                      trials: int = 200_000, seed: int = 0, cross_check: bool = True) -> Table:
    """Penalties over ``(|a|, |b|)`` with opposite phases; common random numbers across the grid."""
    mags = np.linspace(Q, P, n)
    samples = kl.RicianSamples.draw(trials, np.random.default_rng(seed))
    rows = []
    for ma in mags:
        for mb in mags:
            sig = Signaling(complex(ma), complex(-mb), P, Q)
            c = kl.penalty_rician(alpha, beta, sig, gain_mean, gain_var, noise_var, samples=samples,
                                  cross_check=cross_check)
            rows.append([float(ma), float(mb), float(c.h1), float(c.h0)])
    return ["abs_a", "abs_b", "C1", "C0"], rows


def rician_antipodal_grid(alpha: float = 0.1, beta: float = 0.1, P: float = math.sqrt(10.0), noise_var: float = 1.0,
                          mu2_values=None, gain_var_values=None) -> Table:
    """Penalties of antipodal Rician signalling over ``(|mu|^2, sigma_h^2)``."""
    mu2_values = np.linspace(0.0, 2.0, 21) if mu2_values is None else mu2_values
    gain_var_values = np.linspace(0.1, 2.0, 20) if gain_var_values is None else gain_var_values
    sig = Signaling.antipodal(P)
    rows = []
    for gv in gain_var_values:
        for m2 in mu2_values:
            s = kl.rician_symmetric_s(sig, complex(math.sqrt(m2)), float(gv), noise_var)
            c = kl.penalty_awgn(alpha, beta, s)
            rows.append([float(m2), float(gv), s, c.h1, c.h0])
    return ["mu2", "gain_var", "s", "C1", "C0"], rows


def awgn_s_grid(alpha: float, beta: float, s_values, nodes: int = 64, refine: bool = False) -> np.ndarray:
    """``(C1, C0)`` rows over ``s`` with a fixed Gauss-Hermite rule."""
    return np.array([tuple(kl.penalty_awgn(alpha, beta, float(s), nodes=nodes, refine=refine)) for s in s_values])


def sample_monotone_pairs(count: int, rng: np.random.Generator, lo: float = 0.005, hi: float = 0.495) -> list:
    """Uniform ``(alpha, beta)`` draws conditioned on the monotonicity region (rejection sampling)."""
    out = []
    while len(out) < count:
        a, b = rng.uniform(lo, hi, 2)
        if kl.monotone_region(a, b):
            out.append((float(a), float(b)))
    return out
