"""Channel model: Gray-mapped square QAM, Rayleigh channel, AWGN.

Randomness comes from :class:`Rng`, a thin layer over the Philox-4x64
counter-based generator. Uniforms and Gaussians are derived from raw 64-bit
words with fixed formulas (53-bit mantissa, Box-Muller), so a given
``(seed, stream)`` pair yields the same numbers on every platform and numpy
version that ships Philox.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cxmat import as_matrix, as_vector
from .errors import DimensionError

__all__ = [
    "Constellation",
    "Rng",
    "demodulate_hard",
    "draw_bits",
    "draw_channel",
    "modulate",
    "noise_variance_for_snr",
    "transmit",
]

_TWO_PI = 2.0 * math.pi
_INV_2_53 = 2.0 ** -53


class Rng:
    """Seeded generator with an explicit stream split.

    ``Rng(seed, stream=(a, b))`` keys Philox with ``seed`` and starts its
    256-bit counter at ``(0, 0, a, b)``. Each draw advances the two low
    counter words only, so streams with different ``(a, b)`` never overlap.
    The harness uses ``(snr_index, trial_index)`` as the stream.
    """

    def __init__(self, seed: int, stream: tuple[int, int] = (0, 0)):
        mask = (1 << 64) - 1
        a, b = stream
        self.seed = seed & mask
        self.stream = (a & mask, b & mask)
        self._bitgen = np.random.Philox(key=[self.seed, 0], counter=[0, 0, *self.stream])

    def raw(self, n: int) -> np.ndarray:
        return self._bitgen.random_raw(n)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in ``[0, 1)`` from the top 53 bits of each word."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def bits(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(63)).astype(np.uint8)

    def complex_normal(self, shape, variance: float = 1.0) -> np.ndarray:
        """Circularly-symmetric CN(0, variance) samples via Box-Muller.

        Each complex sample consumes two uniforms ``u1, u2``; the real and
        imaginary parts are the cosine and sine branches of one Box-Muller
        pair.
        """
        n = int(np.prod(shape))
        u = self.uniform(2 * n)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = _TWO_PI * u2
        scale = math.sqrt(variance / 2.0)
        z = scale * r * (np.cos(theta) + 1j * np.sin(theta))
        return z.reshape(shape)


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    """Unit-energy square M-QAM with independent Gray coding per axis.

    A symbol's bit pattern is ``[I bits | Q bits]``, most significant bit
    first. On each axis, Gray code 0 sits at the most positive level, so for
    QPSK the pattern ``00`` maps to ``(1 + 1j) / sqrt(2)``.
    """

    order: int
    points: np.ndarray = field(init=False, repr=False, compare=False)
    levels: np.ndarray = field(init=False, repr=False, compare=False)
    scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order not in (4, 16, 64, 256):
            raise ValueError(f"unsupported QAM order {self.order}; use 4, 16, 64 or 256")
        L = self.side
        # Mean energy of a square QAM with odd-integer levels is 2(M-1)/3.
        scale = 1.0 / math.sqrt(2.0 * (self.order - 1) / 3.0)
        # Amplitude of the level whose per-axis Gray code is g.
        levels = np.empty(L)
        for idx in range(L):
            levels[_gray(idx)] = ((L - 1) - 2 * idx) * scale
        k = self.bits_per_axis
        points = np.empty(self.order, dtype=np.complex128)
        for p in range(self.order):
            points[p] = levels[p >> k] + 1j * levels[p & (L - 1)]
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "points", points)

    @property
    def side(self) -> int:
        return math.isqrt(self.order)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def bits_per_axis(self) -> int:
        return self.bits_per_symbol // 2

    def _axis_gray(self, a: np.ndarray) -> np.ndarray:
        L = self.side
        idx = np.rint(((L - 1) - a / self.scale) / 2.0)
        idx = np.clip(idx, 0, L - 1).astype(np.int64)
        return idx ^ (idx >> 1)

    def nearest_index(self, z) -> np.ndarray:
        """Index (bit pattern) of the nearest point, per axis slicing."""
        z = np.asarray(z, dtype=np.complex128)
        return (self._axis_gray(z.real) << self.bits_per_axis) | self._axis_gray(z.imag)


def _pack(bits: np.ndarray, k: int) -> np.ndarray:
    weights = 1 << np.arange(k - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, k).astype(np.int64) @ weights


def _unpack(idx: np.ndarray, k: int) -> np.ndarray:
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def modulate(bits, c: Constellation, U: int) -> np.ndarray:
    """Map ``U * bits_per_symbol`` bits to ``U`` constellation points."""
    bits = np.asarray(bits).ravel()
    k = c.bits_per_symbol
    if bits.size != U * k:
        raise DimensionError(f"need {U * k} bits for {U} symbols of {c.order}-QAM, got {bits.size}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0 or 1")
    return c.points[_pack(bits, k)]


def demodulate_hard(xhat, c: Constellation) -> np.ndarray:
    """Bits of the nearest constellation point for every entry of ``xhat``."""
    x = np.atleast_1d(np.asarray(xhat, dtype=np.complex128))
    return _unpack(c.nearest_index(x), c.bits_per_symbol)


def draw_bits(n: int, rng: Rng) -> np.ndarray:
    return rng.bits(n)


def draw_channel(B: int, U: int, rng: Rng) -> np.ndarray:
    """``B x U`` matrix with i.i.d. CN(0, 1) entries (Rayleigh fading)."""
    if not B >= U >= 1:
        raise DimensionError(f"need B >= U >= 1, got B={B}, U={U}")
    return rng.complex_normal((B, U), 1.0)


def noise_variance_for_snr(snr_db: float, U: int, c: Constellation | None = None) -> float:
    """Noise variance for a per-receive-antenna SNR of ``snr_db``.

    With unit-energy symbols and unit-variance channel taps, each antenna
    receives signal power ``U``, so ``sigma2 = U / 10**(snr_db / 10)``.
    """
    if U < 1:
        raise ValueError(f"U must be positive, got {U}")
    es = 1.0  # constellations are unit-energy
    return U * es / 10.0 ** (snr_db / 10.0)


def transmit(x, H, sigma2: float, rng: Rng) -> np.ndarray:
    """Return ``y = H x + n`` with ``n`` i.i.d. CN(0, sigma2)."""
    H = as_matrix(H)
    x = as_vector(x)
    if H.shape[1] != x.shape[0]:
        raise DimensionError(f"H has {H.shape[1]} columns but x has length {x.shape[0]}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    y = H @ x
    if sigma2 > 0:
        y = y + rng.complex_normal(H.shape[0], sigma2)
    return y
