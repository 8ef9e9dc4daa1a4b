"""Bit-exact two's-complement fixed-point emulation.

Values are carried as raw integers (numpy ``int64`` arrays or Python ints)
together with a :class:`QFormat`. Every requantization rounds the fraction
half away from zero and wraps the integer part modulo ``2**W``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np

__all__ = [
    "DEFAULT_PROFILE",
    "FxComplex",
    "FxpProfile",
    "QFormat",
    "ReciprocalLUT",
    "dequantize",
    "fx_add",
    "fx_mul",
    "fx_neg",
    "fx_real_mul",
    "newton_mantissa",
    "newton_reciprocal",
    "quantize",
    "quantize_complex",
    "quantize_matrix",
    "quantize_vector",
    "rescale",
    "round_shift",
    "wrap",
]


@dataclass(frozen=True)
class QFormat:
    """Signed Q format with ``total_bits`` W and ``frac_bits`` F."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits <= self.total_bits - 1:
            raise ValueError(f"frac_bits must be in [0, {self.total_bits - 1}], got {self.frac_bits}")

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.raw_min * self.resolution

    @property
    def max_value(self) -> float:
        return self.raw_max * self.resolution

    def __str__(self) -> str:
        return f"{self.total_bits}.{self.frac_bits}"

    @classmethod
    def parse(cls, text: str) -> "QFormat":
        m = re.fullmatch(r"\s*(\d+)\.(\d+)\s*", text)
        if not m:
            raise ValueError(f"bad Q format {text!r}; expected W.F, e.g. 12.8")
        return cls(int(m.group(1)), int(m.group(2)))


def _is_array(v) -> bool:
    return isinstance(v, np.ndarray)


def wrap(raw, bits: int):
    """Two's-complement reduction of ``raw`` into ``bits`` bits."""
    half = 1 << (bits - 1)
    if _is_array(raw):
        return ((raw + half) & ((1 << bits) - 1)) - half
    return ((int(raw) + half) & ((1 << bits) - 1)) - half


def round_shift(raw, shift: int):
    """``raw / 2**shift`` rounded half away from zero (``shift`` may be <= 0)."""
    if shift <= 0:
        return raw * (1 << -shift) if _is_array(raw) else int(raw) << -shift
    half = 1 << (shift - 1)
    if _is_array(raw):
        mag = (np.abs(raw) + half) >> shift
        return np.where(raw < 0, -mag, mag)
    raw = int(raw)
    mag = (abs(raw) + half) >> shift
    return -mag if raw < 0 else mag


def rescale(raw, from_frac: int, fmt: QFormat):
    """Requantize a raw value with ``from_frac`` fraction bits into ``fmt``."""
    return wrap(round_shift(raw, from_frac - fmt.frac_bits), fmt.total_bits)


def quantize(x, fmt: QFormat):
    """Raw integer(s) of ``x`` in ``fmt``: round half away from zero, then wrap."""
    if _is_array(x) or isinstance(x, (list, tuple)):
        a = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise ValueError("cannot quantize non-finite values")
        scaled = np.ldexp(a, fmt.frac_bits)
        r = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
        return wrap(r.astype(np.int64), fmt.total_bits)
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("cannot quantize non-finite values")
    scaled = Fraction(x) * (1 << fmt.frac_bits)
    mag = int(abs(scaled) + Fraction(1, 2))
    return wrap(-mag if scaled < 0 else mag, fmt.total_bits)


def dequantize(raw, fmt: QFormat):
    if _is_array(raw):
        return np.ldexp(raw.astype(np.float64), -fmt.frac_bits)
    return float(raw) * fmt.resolution


@dataclass(frozen=True)
class FxComplex:
    """Complex fixed-point value(s): raw real/imaginary parts plus format.

    ``re`` and ``im`` are Python ints for a scalar or equally-shaped
    ``int64`` arrays for a vector or matrix.
    """

    re: object
    im: object
    fmt: QFormat

    @property
    def value(self):
        re = dequantize(self.re, self.fmt)
        im = dequantize(self.im, self.fmt)
        if _is_array(re):
            return re + 1j * im
        return complex(re, im)

    @property
    def shape(self):
        return np.shape(self.re)

    def __getitem__(self, key) -> "FxComplex":
        return FxComplex(self.re[key], self.im[key], self.fmt)


def quantize_complex(z, fmt: QFormat) -> FxComplex:
    z = complex(z)
    return FxComplex(quantize(z.real, fmt), quantize(z.imag, fmt), fmt)


def quantize_vector(values, fmt: QFormat) -> FxComplex:
    z = np.asarray(values, dtype=np.complex128)
    return FxComplex(quantize(z.real, fmt), quantize(z.imag, fmt), fmt)


quantize_matrix = quantize_vector


def _widen(a):
    # Exact Python-int arithmetic when int64 products could overflow.
    if _is_array(a) and a.dtype != object:
        return a.astype(object)
    return a


def _prod_fits(fa: QFormat, fb: QFormat) -> bool:
    # Sum of two products of W-bit values needs Wa + Wb bits plus sign.
    return fa.total_bits + fb.total_bits + 1 <= 63


def fx_mul(a: FxComplex, b: FxComplex, out_fmt: QFormat) -> FxComplex:
    """Complex multiply with four real products and a single final rescale."""
    ar, ai, br, bi = a.re, a.im, b.re, b.im
    if not _prod_fits(a.fmt, b.fmt):
        ar, ai = _widen(ar), _widen(ai)
    re = ar * br - ai * bi
    im = ar * bi + ai * br
    f = a.fmt.frac_bits + b.fmt.frac_bits
    re, im = rescale(re, f, out_fmt), rescale(im, f, out_fmt)
    if _is_array(re) and re.dtype == object:
        re, im = re.astype(np.int64), im.astype(np.int64)
    return FxComplex(re, im, out_fmt)


def fx_real_mul(a: FxComplex, r, r_fmt: QFormat, out_fmt: QFormat) -> FxComplex:
    """Complex times real raw value(s): two real products, one rescale."""
    f = a.fmt.frac_bits + r_fmt.frac_bits
    return FxComplex(rescale(a.re * r, f, out_fmt), rescale(a.im * r, f, out_fmt), out_fmt)


def fx_add(a: FxComplex, b: FxComplex, out_fmt: QFormat) -> FxComplex:
    """Sum aligned to the finer input fraction, then requantized to ``out_fmt``."""
    f = max(a.fmt.frac_bits, b.fmt.frac_bits)
    sa, sb = f - a.fmt.frac_bits, f - b.fmt.frac_bits
    re = round_shift(a.re, -sa) + round_shift(b.re, -sb)
    im = round_shift(a.im, -sa) + round_shift(b.im, -sb)
    return FxComplex(rescale(re, f, out_fmt), rescale(im, f, out_fmt), out_fmt)


def fx_neg(a: FxComplex) -> FxComplex:
    w = a.fmt.total_bits
    return FxComplex(wrap(-a.re, w), wrap(-a.im, w), a.fmt)


class ReciprocalLUT:
    """Seed table for the Newton-Raphson reciprocal on ``[1/2, 1)``.

    The interval is split into ``2**index_bits`` equal cells addressed by the
    fraction bits just below the leading one. Each entry is the reciprocal of
    its cell midpoint, computed exactly and rounded to ``frac_bits``.
    """

    def __init__(self, index_bits: int = 6, frac_bits: int = 16):
        self.index_bits = index_bits
        self.frac_bits = frac_bits
        n = 1 << index_bits
        table = []
        for i in range(n):
            mid = Fraction(1, 2) + Fraction(2 * i + 1, 4 * n)
            table.append(round_shift_fraction(1 / mid, frac_bits))
        self.table = np.array(table, dtype=np.int64)

    def seed(self, mant, mant_frac: int):
        """Seed for mantissa raw ``mant`` (value in [1/2, 1), ``mant_frac`` bits)."""
        idx = (mant >> (mant_frac - 1 - self.index_bits)) & ((1 << self.index_bits) - 1)
        return self.table[idx]


def round_shift_fraction(q: Fraction, frac_bits: int) -> int:
    scaled = q * (1 << frac_bits)
    mag = int(abs(scaled) + Fraction(1, 2))
    return -mag if scaled < 0 else mag


_LUTS: dict[tuple[int, int], ReciprocalLUT] = {}


def _lut(index_bits: int, frac_bits: int) -> ReciprocalLUT:
    key = (index_bits, frac_bits)
    if key not in _LUTS:
        _LUTS[key] = ReciprocalLUT(index_bits, frac_bits)
    return _LUTS[key]


def newton_mantissa(mant, recip_bits: int = 18, iters: int = 2, lut_bits: int = 6):
    """Reciprocal of a normalized mantissa by LUT seed plus Newton steps.

    ``mant`` holds values in ``[1/2, 1)`` with ``recip_bits`` fraction bits.
    The result lies in ``(1, 2]`` and carries ``recip_bits - 2`` fraction bits
    in an unsigned ``recip_bits`` word. Each step computes
    ``r <- 2 r - m r**2`` with one rounding. Works elementwise on arrays.
    """
    fm = recip_bits
    fr = recip_bits - 2
    lut = _lut(lut_bits, fr)
    r = lut.seed(mant, fm)
    for _ in range(iters):
        # m * r^2 carries fm + 2 fr fraction bits.
        r = 2 * r - round_shift(mant * r * r, fm + fr)
        r = r & ((1 << recip_bits) - 1)
    return r


def newton_reciprocal(x_raw: int, fmt: QFormat, iters: int = 2, recip_bits: int = 18,
                      lut_bits: int = 6) -> tuple[int, int]:
    """Reciprocal of a positive fixed-point scalar.

    The input is shifted into ``[1/2, 1)``, inverted there by
    :func:`newton_mantissa`, and the shift is folded back into the binary
    point. Returns ``(raw, frac_bits)`` with ``1/x ~= raw * 2**-frac_bits``;
    ``raw`` fits in ``recip_bits`` unsigned bits.
    """
    x_raw = int(x_raw)
    if x_raw <= 0:
        raise ValueError(f"reciprocal needs a positive input, got raw {x_raw}")
    # Normalize: mant = x * 2**s in [1/2, 1) with recip_bits fraction bits.
    msb = x_raw.bit_length() - 1
    shift = recip_bits - 1 - msb
    mant = x_raw << shift if shift >= 0 else round_shift(x_raw, -shift)
    exp_adj = shift  # mant / 2**recip_bits == x * 2**(shift + F - recip_bits)
    if mant >> recip_bits:  # rounding carried into the next bit
        mant >>= 1
        exp_adj -= 1
    r = int(newton_mantissa(mant, recip_bits, iters, lut_bits))
    # x = mant * 2**(recip_bits - F - exp_adj - recip_bits) => 1/x = r_val * 2**(exp_adj + F - recip_bits)
    s = exp_adj + fmt.frac_bits - recip_bits
    return r, (recip_bits - 2) - s


@dataclass(frozen=True)
class FxpProfile:
    """Word lengths for each stage of the fixed-point stair detector."""

    gram: QFormat = QFormat(13, 9)
    mf: QFormat = QFormat(15, 10)
    sinv: QFormat = QFormat(17, 14)
    prod: QFormat = QFormat(20, 16)
    xhat: QFormat = QFormat(12, 8)
    recip: int = 18
    newton_iters: int = 2
    lut_bits: int = 6

    def to_text(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            parts.append(f"{f.name}={v}")
        return ", ".join(parts)

    @classmethod
    def parse(cls, text: str, base: "FxpProfile | None" = None) -> "FxpProfile":
        """Parse a ``key=value`` block separated by commas or newlines.

        Keys not mentioned keep their value from ``base`` (default profile).
        """
        base = base or cls()
        kwargs = {f.name: getattr(base, f.name) for f in fields(cls)}
        for item in re.split(r"[,\n]", text):
            item = item.strip()
            if not item:
                continue
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in kwargs:
                raise ValueError(f"bad fixed-point profile entry {item!r}")
            if isinstance(kwargs[key], QFormat):
                kwargs[key] = QFormat.parse(value)
            else:
                kwargs[key] = int(value)
        return cls(**kwargs)


DEFAULT_PROFILE = FxpProfile()
