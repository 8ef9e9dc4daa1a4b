"""Monte-Carlo BER/SER simulation over SNR sweeps.

Each trial draws its own generator ``Rng(master_seed, (snr_index, trial))``,
so a trial's outcome depends only on those three numbers. Adding trials never
changes earlier ones, and the split of work across processes has no effect
on the totals.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .airlink import (
    Constellation,
    Rng,
    demodulate_hard,
    draw_bits,
    draw_channel,
    modulate,
    noise_variance_for_snr,
    transmit,
)
from .cxmat import gramian, matched_filter
from .detectors import DetectorConfig, detect
from .errors import NumericError

__all__ = ["BerCurve", "Realization", "SimConfig", "SnrPoint", "draw_realization", "run_sweep", "run_trial"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    B: int = 128
    U: int = 8
    modulation: int = 256
    detectors: tuple[DetectorConfig, ...] = ()
    snr_db_list: tuple[float, ...] = (8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0)
    trials: int = 2000
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        if not self.B >= self.U >= 1:
            raise ValueError(f"need B >= U >= 1, got B={self.B}, U={self.U}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_db_list:
            raise ValueError("snr_db_list must not be empty")
        if not self.detectors:
            raise ValueError("at least one detector is required")
        labels = [d.label for d in self.detectors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate detector labels: {labels}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        Constellation(self.modulation)


@dataclass(frozen=True)
class Realization:
    bits: np.ndarray
    x: np.ndarray
    H: np.ndarray
    y: np.ndarray
    sigma2: float

    @property
    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in (self.bits, self.H, self.y):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


def draw_realization(cfg: SimConfig, snr_index: int, trial_index: int) -> Realization:
    """Bits, symbols, channel and received vector for one trial."""
    c = Constellation(cfg.modulation)
    rng = Rng(cfg.master_seed, (snr_index, trial_index))
    bits = draw_bits(cfg.U * c.bits_per_symbol, rng)
    x = modulate(bits, c, cfg.U)
    H = draw_channel(cfg.B, cfg.U, rng)
    sigma2 = noise_variance_for_snr(cfg.snr_db_list[snr_index], cfg.U, c)
    y = transmit(x, H, sigma2, rng)
    return Realization(bits, x, H, y, sigma2)


def run_trial(cfg: SimConfig, snr_index: int, trial_index: int) -> np.ndarray:
    """Error counts of every detector on one shared realization.

    Returns an ``int64`` array of shape ``(n_detectors, 3)`` holding
    ``(bit_errors, symbol_errors, failures)``. A detector that raises
    :class:`NumericError` scores every bit and symbol wrong for the trial.
    """
    c = Constellation(cfg.modulation)
    r = draw_realization(cfg, snr_index, trial_index)
    xmf = matched_filter(r.H, r.y)
    G_mmse = gramian(r.H, r.sigma2)
    G_zf = None
    out = np.zeros((len(cfg.detectors), 3), dtype=np.int64)
    k = c.bits_per_symbol
    for n, d in enumerate(cfg.detectors):
        if d.regularized:
            G = G_mmse
        else:
            G = G_zf if G_zf is not None else gramian(r.H, 0.0)
            G_zf = G
        try:
            xhat = detect(d, G, xmf, B=cfg.B)
            if not np.all(np.isfinite(xhat)):
                raise NumericError("detector produced non-finite output")
        except NumericError as exc:
            log.debug("trial %d/%d: %s failed: %s", snr_index, trial_index, d.label, exc)
            out[n] = (r.bits.size, cfg.U, 1)
            continue
        wrong = demodulate_hard(xhat, c) != r.bits
        out[n, 0] = int(wrong.sum())
        out[n, 1] = int(wrong.reshape(cfg.U, k).any(axis=1).sum())
    return out


def _run_block(args) -> tuple[int, np.ndarray]:
    cfg, snr_index, start, stop = args
    acc = np.zeros((len(cfg.detectors), 3), dtype=np.int64)
    for t in range(start, stop):
        acc += run_trial(cfg, snr_index, t)
    return snr_index, acc


@dataclass(frozen=True)
class SnrPoint:
    snr_db: float
    trials: int
    bit_errors: int
    bits_total: int
    symbol_errors: int
    symbols_total: int
    failures: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols_total


@dataclass
class BerCurve:
    label: str
    points: list[SnrPoint] = field(default_factory=list)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])

    @property
    def ser(self) -> np.ndarray:
        return np.array([p.ser for p in self.points])


def _blocks(cfg: SimConfig, block_size: int):
    for s in range(len(cfg.snr_db_list)):
        for start in range(0, cfg.trials, block_size):
            yield cfg, s, start, min(start + block_size, cfg.trials)


def run_sweep(cfg: SimConfig, block_size: int = 100) -> list[BerCurve]:
    """Aggregate :func:`run_trial` over every SNR point and trial."""
    totals = np.zeros((len(cfg.snr_db_list), len(cfg.detectors), 3), dtype=np.int64)
    blocks = list(_blocks(cfg, block_size))
    if cfg.workers == 1:
        results = map(_run_block, blocks)
        for s, acc in results:
            totals[s] += acc
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for s, acc in pool.map(_run_block, blocks):
                totals[s] += acc

    k = Constellation(cfg.modulation).bits_per_symbol
    curves = []
    for n, d in enumerate(cfg.detectors):
        curve = BerCurve(d.label)
        for s, snr in enumerate(cfg.snr_db_list):
            be, se, fails = (int(v) for v in totals[s, n])
            curve.points.append(SnrPoint(snr, cfg.trials, be, cfg.trials * cfg.U * k,
                                         se, cfg.trials * cfg.U, fails))
        curves.append(curve)
    return curves


def default_workers() -> int:
    return os.cpu_count() or 1
