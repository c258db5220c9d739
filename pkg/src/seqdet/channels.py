"""Sensor-to-fusion-center channels and transmission signalling.

Complex Gaussian convention: a circular variable with variance ``v`` has real
and imaginary parts each of variance ``v / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


def complex_normal(rng: np.random.Generator, size, variance: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian draws; consumes ``2 * size`` standard normals."""
    g = rng.standard_normal((*np.atleast_1d(size), 2))
    s = math.sqrt(variance / 2.0)
    return s * (g[..., 0] + 1j * g[..., 1])


@dataclass(frozen=True)
class Signaling:
    """Transmission levels: ``level_a`` for bit +1, ``level_b`` for bit -1."""

    level_a: complex
    level_b: complex
    peak_power_P: float
    floor_power_Q: float = 0.0

    def __post_init__(self):
        if not self.peak_power_P > 0 or self.floor_power_Q < 0:
            raise ValueError("need P > 0 and Q >= 0")
        if self.floor_power_Q > self.peak_power_P:
            raise ValueError("floor power Q exceeds peak power P")
        ea, eb = abs(self.level_a) ** 2, abs(self.level_b) ** 2
        p2, q2 = self.peak_power_P ** 2, self.floor_power_Q ** 2
        rtol = 1e-12
        if max(ea, eb) > p2 * (1 + rtol):
            raise ValueError("signalling violates the peak power constraint")
        if min(ea, eb) < q2 * (1 - rtol):
            raise ValueError("signalling violates the floor power constraint")

    @classmethod
    def antipodal(cls, P: float) -> "Signaling":
        return cls(complex(P), complex(-P), P, P)

    @classmethod
    def ook_like(cls, P: float, Q: float, swap: bool = False) -> "Signaling":
        """``|a| = P, |b| = Q`` (or swapped), opposite phases."""
        a, b = (complex(Q), complex(-P)) if swap else (complex(P), complex(-Q))
        return cls(a, b, P, Q)

    @classmethod
    def unit(cls) -> "Signaling":
        return cls.antipodal(1.0)


# --- channel models -------------------------------------------------------


@dataclass(frozen=True)
class Ideal:
    name = "ideal"
    discrete = True


@dataclass(frozen=True)
class BEC:
    epsilon: float
    name = "bec"
    discrete = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("BEC epsilon must be in [0, 1]")


@dataclass(frozen=True)
class BSC:
    epsilon: float
    name = "bsc"
    discrete = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("BSC epsilon must be in [0, 0.5)")


@dataclass(frozen=True)
class AWGN:
    gain_h: complex = 1.0 + 0.0j
    noise_var: float = 1.0
    name = "awgn"
    discrete = False

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError("noise variance must be positive")

    @property
    def mean_gain(self) -> complex:
        return complex(self.gain_h)

    @property
    def gain_var(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Rayleigh:
    gain_var: float = 1.0
    noise_var: float = 1.0
    name = "rayleigh"
    discrete = False

    def __post_init__(self):
        if not (self.gain_var > 0 and self.noise_var > 0):
            raise ValueError("Rayleigh variances must be positive")

    @property
    def mean_gain(self) -> complex:
        return 0j


@dataclass(frozen=True)
class Rician:
    gain_mean: complex = 1.0 + 0.0j
    gain_var: float = 1.0
    noise_var: float = 1.0
    name = "rician"
    discrete = False

    def __post_init__(self):
        # gain_var = 0 is allowed: degenerate fading, used for reductions to AWGN
        if not (self.gain_var >= 0 and self.noise_var > 0):
            raise ValueError("Rician variances out of range")

    @property
    def mean_gain(self) -> complex:
        return complex(self.gain_mean)


ChannelModel = Union[Ideal, BEC, BSC, AWGN, Rayleigh, Rician]
CONTINUOUS = (AWGN, Rayleigh, Rician)
DISCRETE = (Ideal, BEC, BSC)


def for_snr(kind: str, snr_db: float, **kw) -> ChannelModel:
    """Continuous channel with ``E|h|^2 = 1`` and ``noise_var = 1 / SNR``.

    Rician defaults split the gain power evenly, ``sigma_h^2 = |mu|^2 = 0.5``.
    """
    noise_var = 10.0 ** (-snr_db / 10.0)
    if kind == "awgn":
        return AWGN(kw.get("gain_h", 1.0 + 0j), noise_var)
    if kind == "rayleigh":
        return Rayleigh(kw.get("gain_var", 1.0), noise_var)
    if kind == "rician":
        return Rician(kw.get("gain_mean", complex(0.5, 0.5)), kw.get("gain_var", 0.5), noise_var)
    raise ValueError(f"no SNR parameterisation for channel {kind!r}")


# --- received signals -----------------------------------------------------


@dataclass(frozen=True)
class Binary:
    value: int


@dataclass(frozen=True)
class Erased:
    pass


@dataclass(frozen=True)
class Complex:
    value: complex


ReceivedSignal = Union[Binary, Erased, Complex]


def transmit(bit: int, signaling: Signaling) -> complex:
    if bit == 1:
        return complex(signaling.level_a)
    if bit == -1:
        return complex(signaling.level_b)
    raise ValueError("bit must be +1 or -1")


def propagate(symbol, channel: ChannelModel, rng: np.random.Generator) -> ReceivedSignal:
    """Pass one bit (discrete channels) or one complex symbol (continuous channels)."""
    if isinstance(channel, DISCRETE):
        if isinstance(symbol, (bool, np.bool_)) or symbol not in (1, -1) or isinstance(symbol, complex):
            raise ValueError("channel/input mismatch")
        bit = int(symbol)
        if isinstance(channel, Ideal):
            return Binary(bit)
        u = rng.random()
        if isinstance(channel, BEC):
            return Erased() if u < channel.epsilon else Binary(bit)
        return Binary(-bit if u < channel.epsilon else bit)
    if isinstance(channel, CONTINUOUS):
        if not isinstance(symbol, (complex, np.complexfloating)):
            raise ValueError("channel/input mismatch")
        z = received_batch(np.array([symbol]), channel, rng)[0]
        return Complex(complex(z))
    raise TypeError(f"unknown channel {channel!r}")


def fading_gains(channel: ChannelModel, size, rng: np.random.Generator) -> np.ndarray:
    """Per-message gains, fresh for every message; AWGN gains are constant."""
    if isinstance(channel, AWGN):
        return np.full(size, complex(channel.gain_h))
    if isinstance(channel, Rayleigh):
        return complex_normal(rng, size, channel.gain_var)
    if isinstance(channel, Rician):
        return complex(channel.gain_mean) + complex_normal(rng, size, channel.gain_var)
    raise TypeError("fading gains only exist for continuous channels")


def received_batch(x: np.ndarray, channel: ChannelModel, rng: np.random.Generator) -> np.ndarray:
    """``z = h x + w`` elementwise; draws gains first, then noise."""
    x = np.asarray(x, dtype=complex)
    h = fading_gains(channel, x.shape, rng)
    w = complex_normal(rng, x.shape, channel.noise_var)
    return h * x + w


def received_variances(channel: ChannelModel, signaling: Signaling) -> tuple[float, float]:
    """Conditional variances of ``z`` given ``x = a`` and ``x = b``."""
    gv = 0.0 if isinstance(channel, AWGN) else channel.gain_var
    return (abs(signaling.level_a) ** 2 * gv + channel.noise_var,
            abs(signaling.level_b) ** 2 * gv + channel.noise_var)
