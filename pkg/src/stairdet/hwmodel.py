"""Complexity formulas, instrumented operation counts and the cycle model.

Closed-form real-multiplication counts per algorithm (``U`` users, ``K``
iterations):

==========  =============================
cg          ``(K + 1)(4U^2 + 20U)``
nsa         ``(K - 1)(2U^3 + 2U^2 - 2U)``
gs          ``6 K U^2``
stair       ``K (4U^2 - 2U)``
==========  =============================

The closed forms carry no constant term, so they describe the work repeated
per iteration. :func:`instrument` therefore reports the measured iteration
work as ``instrumented_mults`` and the one-off work (stair inversion,
initial estimate) separately as ``setup_mults``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .airlink import Rng, draw_channel
from .cxmat import gramian
from .detectors import Algorithm, OpTally, detect_cg, detect_gs, detect_nsa, detect_stair

__all__ = [
    "ComplexityReport",
    "TimingModel",
    "formula_mults",
    "instrument",
    "render_csv",
    "render_text",
    "throughput_bps",
]

TABLE_ALGORITHMS = (Algorithm.CG, Algorithm.NSA, Algorithm.GS, Algorithm.STAIR)


def formula_mults(algorithm: Algorithm | str, U: int, K: int) -> int:
    try:
        a = Algorithm(algorithm)
    except ValueError:
        raise ValueError(f"unknown algorithm {algorithm!r}") from None
    if U < 1 or K < 1:
        raise ValueError(f"need U >= 1 and K >= 1, got U={U}, K={K}")
    if a is Algorithm.CG:
        return (K + 1) * (4 * U * U + 20 * U)
    if a is Algorithm.NSA:
        return (K - 1) * (2 * U**3 + 2 * U * U - 2 * U)
    if a is Algorithm.GS:
        return 6 * K * U * U
    if a is Algorithm.STAIR:
        return K * (4 * U * U - 2 * U)
    raise ValueError(f"no closed-form complexity for {a.value!r}")


@dataclass(frozen=True)
class ComplexityReport:
    algorithm: str
    U: int
    K: int
    formula_mults: int
    instrumented_mults: int
    setup_mults: int
    divisions: int

    @property
    def total_mults(self) -> int:
        return self.instrumented_mults + self.setup_mults


_RUNNERS = {
    Algorithm.STAIR: detect_stair,
    Algorithm.GS: detect_gs,
    Algorithm.NSA: detect_nsa,
    Algorithm.CG: detect_cg,
}


def instrument(algorithm: Algorithm | str, U: int, K: int, seed: int = 0,
               B: int | None = None, G=None) -> ComplexityReport:
    """Run a detector with operation counting and compare to its closed form.

    The instance is a seeded i.i.d. Rayleigh Gramian with ``B = 16 U`` rows
    unless ``G`` is given.
    """
    a = Algorithm(algorithm)
    if a not in _RUNNERS:
        raise ValueError(f"cannot instrument {a.value!r}")
    if G is None:
        rng = Rng(seed, (0, 0))
        H = draw_channel(B or 16 * U, U, rng)
        G = gramian(H, 1.0)
        xmf = rng.complex_normal(U)
    else:
        xmf = np.ones(np.shape(G)[0], dtype=np.complex128)
    tally = OpTally()
    _RUNNERS[a](G, xmf, K, tally=tally)
    return ComplexityReport(a.value, U, K, formula_mults(a, U, K),
                            tally.iter_mults, tally.setup_mults, tally.divisions)


@dataclass(frozen=True)
class TimingModel:
    """Cycle budget of the time-shared stair detector.

    ``total_cycles(t) = load + overhead + per_iteration * t``. The defaults
    (64 + 2 + 25 t) give 116 cycles at ``t = 2``; other ``t`` values are an
    extrapolation of that decomposition.
    """

    clock_hz: float = 258e6
    load_cycles: int = 64
    per_iteration_cycles: int = 25
    overhead_cycles: int = 2
    users: int = 8
    bits_per_symbol: int = 8

    def __post_init__(self):
        if not self.clock_hz > 0:
            raise ValueError(f"clock must be positive, got {self.clock_hz}")
        if self.users < 1 or self.bits_per_symbol < 1:
            raise ValueError("users and bits_per_symbol must be positive")

    def total_cycles(self, t: int) -> int:
        return self.load_cycles + self.overhead_cycles + self.per_iteration_cycles * t


def throughput_bps(tm: TimingModel, t: int) -> float:
    """Detected bits per second: ``U * bits_per_symbol * clock / cycles``."""
    if t < 1:
        raise ValueError(f"need t >= 1, got {t}")
    return tm.users * tm.bits_per_symbol * tm.clock_hz / tm.total_cycles(t)


CSV_FIELDS = ("algorithm", "U", "K", "formula_mults", "instrumented_mults", "divisions", "throughput_bps")


def _row(r: ComplexityReport | dict, throughput: float | None) -> dict:
    d = asdict(r) if isinstance(r, ComplexityReport) else dict(r)
    row = {k: d.get(k, "") for k in CSV_FIELDS}
    row["throughput_bps"] = "" if throughput is None else f"{throughput:.6g}"
    return row


def render_csv(rows: list[tuple[ComplexityReport | dict, float | None]]) -> str:
    """CSV with header ``algorithm,U,K,formula_mults,instrumented_mults,divisions,throughput_bps``.

    Each row is a report (or a dict with at least algorithm/U/K/formula_mults)
    paired with an optional throughput.
    """
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r, tp in rows:
        w.writerow(_row(r, tp))
    return buf.getvalue()


def render_text(rows: list[tuple[ComplexityReport | dict, float | None]]) -> str:
    table = [_row(r, tp) for r, tp in rows]
    widths = {k: max(len(k), *(len(str(t[k])) for t in table)) for k in CSV_FIELDS}
    lines = ["  ".join(k.rjust(widths[k]) for k in CSV_FIELDS)]
    for t in table:
        lines.append("  ".join(str(t[k]).rjust(widths[k]) for k in CSV_FIELDS))
    return "\n".join(lines)
