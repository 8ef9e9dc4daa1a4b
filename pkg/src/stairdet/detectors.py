"""Linear detectors for ``G x = x_mf``.

Every iterative detector takes the Gramian ``G`` (``H^H H`` or
``H^H H + sigma2 I``) and the matched-filter output ``x_mf = H^H y`` and
returns an estimate of ``x``. Iteration counts follow one convention:

=============  ===========================================================
detector       ``t`` / ``K`` counts
=============  ===========================================================
stair          updates after the stair-inverse initial estimate
gs             forward-substitution sweeps after ``D^-1 x_mf``
nsa            series terms, including the zeroth ``D^-1 x_mf``
cg             conjugate-gradient steps from ``x = 0``
richardson     updates after ``omega * x_mf``
=============  ===========================================================

Stair matrices keep off-diagonal entries on the even rows (1-based), i.e.
0-based rows ``1, 3, 5, ...``; each such row couples to its two neighbours.

Each detector accepts an optional :class:`OpTally` and records the real
multiplications and divisions it performs: 4 per complex-by-complex product,
2 per complex-by-real, 1 per real-by-real. Counts depend only on sizes and
structure, never on the values of ``G``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import fxp
from .cxmat import as_matrix, as_vector, solve_hermitian
from .errors import DimensionError, NumericError
from .fxp import FxComplex, FxpProfile

__all__ = [
    "Algorithm",
    "DetectorConfig",
    "NumericMode",
    "OpTally",
    "StairInverse",
    "StairMatrix",
    "detect",
    "detect_cg",
    "detect_exact",
    "detect_gs",
    "detect_nsa",
    "detect_richardson",
    "detect_stair",
    "extract_stair",
    "invert_stair",
    "stair_iteration_matrix",
]


class Algorithm(str, enum.Enum):
    MMSE_EXACT = "mmse"
    ZF_EXACT = "zf"
    NSA = "nsa"
    GS = "gs"
    CG = "cg"
    RICHARDSON = "richardson"
    STAIR = "stair"


class NumericMode(str, enum.Enum):
    FLOAT64 = "float"
    FIXED = "fixed"


@dataclass
class OpTally:
    """Running count of real multiplications and divisions.

    Work done once per detection (stair inversion, initial estimate) goes to
    ``setup_mults``; work repeated per iteration goes to ``iter_mults``.
    """

    setup_mults: int = 0
    iter_mults: int = 0
    divisions: int = 0

    @property
    def total_mults(self) -> int:
        return self.setup_mults + self.iter_mults

    def setup(self, n: int):
        self.setup_mults += n

    def iteration(self, n: int):
        self.iter_mults += n

    def divide(self, n: int):
        self.divisions += n


class _NoTally(OpTally):
    def setup(self, n):
        pass

    def iteration(self, n):
        pass

    def divide(self, n):
        pass


def _tally(t: OpTally | None) -> OpTally:
    return _NoTally() if t is None else t


def _check_system(G, xmf) -> tuple[np.ndarray, np.ndarray]:
    G = as_matrix(G)
    xmf = as_vector(xmf)
    U = G.shape[0]
    if G.shape != (U, U):
        raise DimensionError(f"G must be square, got {G.shape}")
    if xmf.shape[0] != U:
        raise DimensionError(f"G is {U}x{U} but x_mf has length {xmf.shape[0]}")
    return G, xmf


def _diag_reciprocal(G: np.ndarray, tally: OpTally) -> np.ndarray:
    d = np.diag(G).real
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise NumericError(f"zero diagonal entry at index {zero[0]}", index=int(zero[0]))
    tally.divide(G.shape[0])
    return 1.0 / d


# -- stair matrix -------------------------------------------------------------

def _stair_support(U: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (row, col) of stair off-diagonals, ordered by row."""
    rows, cols = [], []
    for i in range(1, U, 2):
        rows.append(i)
        cols.append(i - 1)
        if i + 1 < U:
            rows.append(i)
            cols.append(i + 1)
    return np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp)


@dataclass(frozen=True)
class StairMatrix:
    """Diagonal plus the even-row (1-based) neighbours of a square matrix.

    ``rows``/``cols`` are 0-based indices of the off-diagonal entries, whose
    values are in ``off``.
    """

    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    off: np.ndarray

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    @property
    def entries(self) -> list[tuple[int, int, complex]]:
        return [(int(i), int(j), complex(v)) for i, j, v in zip(self.rows, self.cols, self.off)]

    def to_dense(self) -> np.ndarray:
        S = np.diag(self.diag.astype(np.complex128))
        S[self.rows, self.cols] = self.off
        return S


@dataclass(frozen=True)
class StairInverse(StairMatrix):
    """Inverse of a stair matrix; same support as its source.

    ``fmt`` is set when the values came out of the fixed-point pipeline, in
    which case every value is exactly representable in that format.
    """

    fmt: fxp.QFormat | None = field(default=None)


def extract_stair(G) -> StairMatrix:
    """Copy the diagonal and the even-row neighbours of ``G``."""
    G = as_matrix(G)
    U = G.shape[0]
    if G.shape != (U, U):
        raise DimensionError(f"G must be square, got {G.shape}")
    rows, cols = _stair_support(U)
    return StairMatrix(np.diag(G).copy(), rows, cols, G[rows, cols].copy())


def invert_stair(S: StairMatrix, numeric_mode: NumericMode | str = NumericMode.FLOAT64,
                 profile: FxpProfile | None = None, tally: OpTally | None = None) -> StairInverse:
    """Closed-form inverse of a stair matrix.

    Diagonal entries are reciprocals; an off-diagonal entry ``(i, j)`` becomes
    ``-S[i, j] / (S[i, i] S[j, j])``, evaluated as a product with the two
    inverted diagonals. The diagonal is taken as real (Gramian diagonals are).
    In fixed mode the reciprocals come from the Newton-Raphson divider and
    ``S`` is read in the profile's Gramian format.
    """
    tally = _tally(tally)
    mode = NumericMode(numeric_mode)
    d = S.diag.real
    bad = np.flatnonzero(d == 0)
    if bad.size:
        raise NumericError(f"zero stair diagonal at index {bad[0]}", index=int(bad[0]))
    tally.divide(S.dim)
    # Two products per off-diagonal: real x real, then complex x real.
    tally.setup(3 * S.off.size)
    if mode is NumericMode.FLOAT64:
        dinv = 1.0 / d
        off = -S.off * (dinv[S.rows] * dinv[S.cols])
        return StairInverse(dinv.astype(np.complex128), S.rows, S.cols, off)
    return _invert_stair_fixed(S, profile or fxp.DEFAULT_PROFILE)


def _invert_stair_fixed(S: StairMatrix, p: FxpProfile) -> StairInverse:
    gd = fxp.quantize(S.diag.real, p.gram)
    dinv = np.empty(S.dim, dtype=np.int64)
    for i, raw in enumerate(gd):
        if raw <= 0:
            raise NumericError(f"stair diagonal {i} is not positive after quantization", index=i)
        r, frac = fxp.newton_reciprocal(int(raw), p.gram, p.newton_iters, p.recip, p.lut_bits)
        dinv[i] = fxp.rescale(r, frac, p.sinv)
    dd = fxp.rescale(dinv[S.rows] * dinv[S.cols], 2 * p.sinv.frac_bits, p.sinv)
    g = fxp.quantize_vector(S.off, p.gram)
    off = fxp.fx_neg(fxp.fx_real_mul(g, dd, p.sinv, p.sinv))
    return StairInverse(fxp.dequantize(dinv, p.sinv).astype(np.complex128),
                        S.rows, S.cols, off.value, fmt=p.sinv)


def _apply_stair_inverse(Sinv: StairInverse, v: np.ndarray, count) -> np.ndarray:
    count(2 * Sinv.dim + 4 * Sinv.off.size)
    out = Sinv.diag * v
    np.add.at(out, Sinv.rows, Sinv.off * v[Sinv.cols])
    return out


def stair_iteration_matrix(G) -> np.ndarray:
    """``S - G``: ``-G`` with the stair support zeroed (no subtraction needed)."""
    G = as_matrix(G)
    U = G.shape[0]
    T = -G
    T[np.diag_indices(U)] = 0
    rows, cols = _stair_support(U)
    T[rows, cols] = 0
    return T


def detect_stair(G, xmf, t: int, numeric_mode: NumericMode | str = NumericMode.FLOAT64,
                 profile: FxpProfile | None = None, tally: OpTally | None = None) -> np.ndarray:
    """Stair-matrix iteration: ``x0 = S^-1 x_mf``, ``x <- S^-1((S - G) x + x_mf)``."""
    G, xmf = _check_system(G, xmf)
    if t < 0:
        raise ValueError(f"iteration count must be >= 0, got {t}")
    if NumericMode(numeric_mode) is NumericMode.FIXED:
        return _detect_stair_fixed(G, xmf, t, profile or fxp.DEFAULT_PROFILE, tally)
    tally = _tally(tally)
    U = G.shape[0]
    Sinv = invert_stair(extract_stair(G), NumericMode.FLOAT64, tally=tally)
    T = stair_iteration_matrix(G)
    n_off = Sinv.off.size
    x = _apply_stair_inverse(Sinv, xmf, tally.setup)
    for _ in range(t):
        tally.iteration(4 * (U * U - U - n_off))
        x = _apply_stair_inverse(Sinv, T @ x + xmf, tally.iteration)
    return x


# -- fixed-point stair pipeline ---------------------------------------------

def prescale_shift(G: np.ndarray) -> int:
    """Power-of-two exponent bringing the mean Gramian diagonal near 1.

    Scaling ``G`` and ``x_mf`` by the same factor leaves the solution of
    ``G x = x_mf`` unchanged, so this is a pure shift at the datapath input.
    """
    m = float(np.mean(np.diag(G).real))
    if m <= 0:
        return 0
    return int(np.round(np.log2(m)))


def _fx_matvec(A: FxComplex, v: FxComplex, p: FxpProfile, out_fmt: fxp.QFormat) -> FxComplex:
    # Multiplier array: each product lands in the product format; the adder
    # tree sums in that width and the result is requantized once.
    prods = fxp.fx_mul(A, FxComplex(v.re[None, :], v.im[None, :], v.fmt), p.prod)
    w = p.prod.total_bits
    acc = FxComplex(fxp.wrap(prods.re.sum(axis=1), w), fxp.wrap(prods.im.sum(axis=1), w), p.prod)
    return FxComplex(fxp.rescale(acc.re, p.prod.frac_bits, out_fmt),
                     fxp.rescale(acc.im, p.prod.frac_bits, out_fmt), out_fmt)


def _detect_stair_fixed(G, xmf, t, p: FxpProfile, tally) -> np.ndarray:
    tally = _tally(tally)
    U = G.shape[0]
    scale = 2.0 ** -prescale_shift(G)
    Gq = fxp.quantize_matrix(G * scale, p.gram)
    xq = fxp.quantize_vector(xmf * scale, p.mf)
    # Diagonal of a Gramian is real; drop any imaginary rounding residue.
    Gq = FxComplex(Gq.re, np.where(np.eye(U, dtype=bool), 0, Gq.im), p.gram)
    Sinv = invert_stair(extract_stair(Gq.value), NumericMode.FIXED, p, tally=tally)
    Sq = fxp.quantize_matrix(Sinv.to_dense(), p.sinv)
    T = fxp.quantize_matrix(stair_iteration_matrix(Gq.value), p.gram)
    n_off = Sinv.off.size
    tally.setup(2 * U + 4 * n_off)
    x = _fx_matvec(Sq, xq, p, p.xhat)
    for _ in range(t):
        tally.iteration(4 * (U * U - U - n_off) + 2 * U + 4 * n_off)
        r = fxp.fx_add(_fx_matvec(T, x, p, p.prod), xq, p.prod)
        x = _fx_matvec(Sq, r, p, p.xhat)
    return x.value


# -- classical iterative detectors ---------------------------------------------

def detect_gs(G, xmf, t: int, tally: OpTally | None = None) -> np.ndarray:
    """Gauss-Seidel sweeps ``(D + L) x_t = x_mf - R x_{t-1}`` from ``D^-1 x_mf``."""
    G, xmf = _check_system(G, xmf)
    if t < 1:
        raise ValueError(f"GS needs at least one sweep, got {t}")
    tally = _tally(tally)
    U = G.shape[0]
    dinv = _diag_reciprocal(G, tally)
    x = dinv * xmf
    tally.setup(2 * U)
    for _ in range(t):
        x = x.copy()
        for i in range(U):
            # Entries before i are already updated this sweep.
            acc = xmf[i] - G[i, :i] @ x[:i] - G[i, i + 1:] @ x[i + 1:]
            x[i] = dinv[i] * acc
        tally.iteration(4 * U * (U - 1) + 2 * U)
    return x


def detect_nsa(G, xmf, K: int, tally: OpTally | None = None) -> np.ndarray:
    """Neumann series ``sum_{n<K} (-D^-1 E)^n D^-1 x_mf`` with ``E = G - D``."""
    G, xmf = _check_system(G, xmf)
    if K < 1:
        raise ValueError(f"NSA needs at least one term, got {K}")
    tally = _tally(tally)
    U = G.shape[0]
    dinv = _diag_reciprocal(G, tally)
    E = G.copy()
    E[np.diag_indices(U)] = 0
    term = dinv * xmf
    tally.setup(2 * U)
    x = term.copy()
    for _ in range(K - 1):
        term = -dinv * (E @ term)
        tally.iteration(4 * U * (U - 1) + 2 * U)
        x = x + term
    return x


def detect_cg(G, xmf, K: int, tally: OpTally | None = None, tol: float = 1e-300) -> np.ndarray:
    """``K`` conjugate-gradient steps on ``G x = x_mf`` from ``x = 0``.

    Stops early once the residual is exactly zero (e.g. ``G = I``).
    """
    G, xmf = _check_system(G, xmf)
    if K < 1:
        raise ValueError(f"CG needs at least one step, got {K}")
    tally = _tally(tally)
    U = G.shape[0]
    x = np.zeros(U, dtype=np.complex128)
    r = xmf.copy()
    p = r.copy()
    rr = np.vdot(r, r).real
    tally.setup(2 * U)
    scale = max(rr, 1.0)
    for _ in range(K):
        if rr <= tol * scale:
            break
        Gp = G @ p
        curv = np.vdot(p, Gp).real
        if curv <= tol * scale:
            raise NumericError(f"CG breakdown: non-positive curvature {curv:.3e}")
        alpha = rr / curv
        x = x + alpha * p
        r = r - alpha * Gp
        rr_new = np.vdot(r, r).real
        beta = rr_new / rr
        p = r + beta * p
        rr = rr_new
        tally.divide(2)
        tally.iteration(4 * U * U + 10 * U)
    return x


def detect_richardson(G, xmf, K: int, omega: float, tally: OpTally | None = None) -> np.ndarray:
    """``x <- x + omega (x_mf - G x)`` from ``x0 = omega x_mf``."""
    G, xmf = _check_system(G, xmf)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if K < 1:
        raise ValueError(f"Richardson needs at least one update, got {K}")
    tally = _tally(tally)
    U = G.shape[0]
    x = omega * xmf
    tally.setup(2 * U)
    for _ in range(K):
        x = x + omega * (xmf - G @ x)
        tally.iteration(4 * U * U + 2 * U)
    return x


def detect_exact(G, xmf) -> np.ndarray:
    """Exact linear detection via Cholesky (MMSE or ZF depending on ``G``)."""
    G, xmf = _check_system(G, xmf)
    return solve_hermitian(G, xmf)


# -- configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    algorithm: Algorithm
    iterations: int = 2
    numeric_mode: NumericMode = NumericMode.FLOAT64
    richardson_omega: float | None = None
    fxp_profile: FxpProfile | None = None

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "numeric_mode", NumericMode(self.numeric_mode))
        if self.numeric_mode is NumericMode.FIXED and self.algorithm is not Algorithm.STAIR:
            raise ValueError("fixed-point mode is only defined for the stair detector")
        if self.iterations < 0 or (self.iterations == 0 and self.algorithm is not Algorithm.STAIR):
            raise ValueError(f"invalid iteration count {self.iterations} for {self.algorithm.value}")
        if self.richardson_omega is not None and not self.richardson_omega > 0:
            raise ValueError("richardson_omega must be positive")

    @property
    def label(self) -> str:
        if self.algorithm in (Algorithm.MMSE_EXACT, Algorithm.ZF_EXACT):
            return self.algorithm.value
        name = self.algorithm.value
        if self.numeric_mode is NumericMode.FIXED:
            name += "-fxp"
        return name

    @property
    def regularized(self) -> bool:
        """Whether the detector works on the MMSE (``sigma2``-loaded) Gramian."""
        return self.algorithm is not Algorithm.ZF_EXACT


def default_omega(B: int, U: int) -> float:
    """Richardson step ``1 / (B + U)`` for i.i.d. unit-variance channels."""
    return 1.0 / (B + U)


def detect(cfg: DetectorConfig, G, xmf, B: int | None = None,
           tally: OpTally | None = None) -> np.ndarray:
    """Run the detector described by ``cfg``.

    ``B`` (number of receive antennas) is only used for Richardson's default
    step size when ``cfg.richardson_omega`` is unset.
    """
    a = cfg.algorithm
    if a in (Algorithm.MMSE_EXACT, Algorithm.ZF_EXACT):
        return detect_exact(G, xmf)
    if a is Algorithm.STAIR:
        return detect_stair(G, xmf, cfg.iterations, cfg.numeric_mode, cfg.fxp_profile, tally)
    if a is Algorithm.GS:
        return detect_gs(G, xmf, cfg.iterations, tally)
    if a is Algorithm.NSA:
        return detect_nsa(G, xmf, cfg.iterations, tally)
    if a is Algorithm.CG:
        return detect_cg(G, xmf, cfg.iterations, tally)
    omega = cfg.richardson_omega
    if omega is None:
        if B is None:
            raise ValueError("Richardson needs either richardson_omega or B")
        omega = default_omega(B, np.shape(G)[0])
    return detect_richardson(G, xmf, cfg.iterations, omega, tally)
