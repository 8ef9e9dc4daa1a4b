"""Command-line entry point: ``stairdet {ber,complexity,throughput}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .airlink import Constellation
from .detectors import Algorithm, DetectorConfig, NumericMode
from .fxp import FxpProfile
from .harness import SimConfig, default_workers, run_sweep
from .hwmodel import TABLE_ALGORITHMS, TimingModel, formula_mults, instrument, render_csv, render_text, throughput_bps

BER_FIELDS = ("detector", "snr_db", "trials", "bit_errors", "bits_total", "ber",
              "symbol_errors", "symbols_total", "ser", "failures")
SEED_ENV = "STAIRDET_SEED"
PAPER_ITERATIONS = 2


class UsageError(Exception):
    pass


def parse_snr(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma list of values."""
    if ":" not in text:
        return [float(v) for v in text.split(",") if v.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"bad SNR range {text!r}; expected start:step:stop")
    start, step, stop = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise UsageError(f"bad SNR range {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _names(text: str) -> list[str]:
    return [v.strip().lower() for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_detectors(args) -> list[DetectorConfig]:
    names = _names(args.detectors)
    profile = FxpProfile.parse(args.fxp) if args.fxp else None
    out = []
    for name in names:
        try:
            alg = Algorithm(name)
        except ValueError:
            raise UsageError(f"unknown detector {name!r}; choose from "
                             f"{', '.join(a.value for a in Algorithm)}") from None
        omega = args.omega if alg is Algorithm.RICHARDSON else None
        out.append(DetectorConfig(alg, args.iters, richardson_omega=omega))
        if alg is Algorithm.STAIR and args.fixed_point:
            out.append(DetectorConfig(alg, args.iters, NumericMode.FIXED, fxp_profile=profile))
    if args.fixed_point and Algorithm.STAIR.value not in names:
        raise UsageError("--fixed-point requires the stair detector in --detectors")
    if args.fxp and not args.fixed_point:
        raise UsageError("--fxp only applies together with --fixed-point")
    return out


def write_ber_csv(curves, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BER_FIELDS)
        for c in curves:
            for p in c.points:
                w.writerow([c.label, f"{p.snr_db:g}", p.trials, p.bit_errors, p.bits_total,
                            f"{p.ber:.6e}", p.symbol_errors, p.symbols_total, f"{p.ser:.6e}",
                            p.failures])


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if obj is not None and not isinstance(obj, (int, float, str, bool)):
        return str(obj)
    return obj


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def cmd_ber(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get(SEED_ENV, "0"))
    try:
        c = Constellation(args.mod)
        cfg = SimConfig(B=args.bs, U=args.users, modulation=c.order, detectors=build_detectors(args),
                        snr_db_list=parse_snr(args.snr), trials=args.trials, master_seed=seed,
                        workers=args.workers or default_workers())
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    curves = run_sweep(cfg)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ber_csv(curves, out)
    resolved = _jsonable(cfg)
    resolved.pop("workers")  # results do not depend on it
    manifest = {
        "tool": "stairdet",
        "version": __version__,
        "command": "ber",
        "argv": sys.argv[1:],
        "config": resolved,
        "master_seed": seed,
        "workers": cfg.workers,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": {"csv": str(out)},
    }
    manifest_path(out).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    print(f"{cfg.B}x{cfg.U} {cfg.modulation}-QAM, {cfg.trials} trials/SNR, seed {seed}, "
          f"{elapsed:.1f} s")
    header = "snr_db  " + "  ".join(f"{c.label:>12}" for c in curves)
    print(header)
    for s, snr in enumerate(cfg.snr_db_list):
        print(f"{snr:6g}  " + "  ".join(f"{c.points[s].ber:12.4e}" for c in curves))
    for c in curves:
        fails = sum(p.failures for p in c.points)
        if fails:
            print(f"warning: {c.label} failed numerically on {fails} trials (scored as all-wrong)")
    print(f"wrote {out} and {manifest_path(out)}")
    return 0


def cmd_complexity(args) -> int:
    rows = []
    tm = TimingModel()
    for name in _names(args.algs):
        try:
            alg = Algorithm(name)
        except ValueError:
            raise UsageError(f"unknown algorithm {name!r}") from None
        if alg not in TABLE_ALGORITHMS:
            raise UsageError(f"no complexity formula for {name!r}; choose from "
                             f"{', '.join(a.value for a in TABLE_ALGORITHMS)}")
        for U in _ints(args.users):
            for K in _ints(args.iters):
                if args.instrument:
                    rep = instrument(alg, U, K, seed=args.seed)
                else:
                    rep = {"algorithm": alg.value, "U": U, "K": K,
                           "formula_mults": formula_mults(alg, U, K)}
                tp = None
                if alg is Algorithm.STAIR and U == tm.users:
                    tp = throughput_bps(tm, K)
                rows.append((rep, tp))
    print(render_text(rows))
    if args.out:
        Path(args.out).write_text(render_csv(rows), encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def cmd_throughput(args) -> int:
    if not args.clock_mhz > 0:
        raise UsageError("--clock-mhz must be positive")
    try:
        c = Constellation(args.mod)
        tm = TimingModel(clock_hz=args.clock_mhz * 1e6, users=args.users,
                         bits_per_symbol=c.bits_per_symbol, load_cycles=args.load_cycles,
                         per_iteration_cycles=args.iter_cycles, overhead_cycles=args.overhead_cycles)
        bps = throughput_bps(tm, args.iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"cycles per detection: {tm.total_cycles(args.iters)} "
          f"({tm.load_cycles} load + {tm.overhead_cycles} overhead + "
          f"{tm.per_iteration_cycles} x {args.iters} iterations)")
    print(f"throughput: {bps / 1e6:.2f} Mbps")
    if args.iters != PAPER_ITERATIONS:
        print(f"note: cycle model is anchored at t={PAPER_ITERATIONS}; t={args.iters} is an extrapolation")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stairdet", description="Stair-matrix massive MIMO detection toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("ber", help="Monte-Carlo BER/SER sweep")
    b.add_argument("--bs", type=int, default=128, help="BS antennas B")
    b.add_argument("--users", type=int, default=8, help="users U")
    b.add_argument("--mod", type=int, default=256, help="QAM order (4, 16, 64, 256)")
    b.add_argument("--detectors", default="mmse,stair,gs,nsa,cg,richardson")
    b.add_argument("--iters", type=int, default=2, help="iterations t/K for iterative detectors")
    b.add_argument("--omega", type=float, default=None, help="Richardson step (default 1/(B+U))")
    b.add_argument("--snr", default="8:2:20", help="start:step:stop in dB, or a comma list")
    b.add_argument("--trials", type=int, default=2000)
    b.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    b.add_argument("--fixed-point", action="store_true", help="also run the fixed-point stair detector")
    b.add_argument("--fxp", default=None, help="profile override, e.g. 'sinv=17.13,xhat=12.8'")
    b.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    b.add_argument("--out", default="ber.csv")
    b.set_defaults(func=cmd_ber)

    c = sub.add_parser("complexity", help="real-multiplication counts")
    c.add_argument("--users", default="8", help="U values, comma separated")
    c.add_argument("--iters", default="2", help="K values, comma separated")
    c.add_argument("--algs", default="stair,gs,nsa,cg")
    c.add_argument("--instrument", action="store_true", help="also count operations on a seeded instance")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None, help="optional CSV path")
    c.set_defaults(func=cmd_complexity)

    t = sub.add_parser("throughput", help="cycle-model throughput")
    t.add_argument("--clock-mhz", type=float, default=258.0)
    t.add_argument("--users", type=int, default=8)
    t.add_argument("--mod", type=int, default=256)
    t.add_argument("--iters", type=int, default=PAPER_ITERATIONS)
    t.add_argument("--load-cycles", type=int, default=64)
    t.add_argument("--iter-cycles", type=int, default=25)
    t.add_argument("--overhead-cycles", type=int, default=2)
    t.set_defaults(func=cmd_throughput)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
