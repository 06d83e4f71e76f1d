"""Command-line sweeps: bounds and Monte-Carlo SIR to CSV, figure data plus gnuplot scripts."""

from __future__ import annotations

import argparse
import io
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .channel import ChannelResponse, builtin_names, get_builtin, load_channel
from .errors import ChannelError, IsiBoundsError, PipelineError
from .quadrature import ADAPTIVE, DEFAULT_RULE, GH96, QuadratureRule
from .sir_mc import estimate_sir, thread_count

log = logging.getLogger("isibounds")

BOUNDS_COLUMNS = ["snr_db", "M", "R", "phi", "rho_max", "sigma_rho", "F_SLC", "F_l",
                  "F_u1", "F_u2", "C_SLC", "C_L1", "C_L2"]
SIR_COLUMNS = ["snr_db", "sir_bits", "stderr_bits", "n_symbols", "seed"]
FIGURE_COLUMNS = BOUNDS_COLUMNS + ["dF_l", "dF_u1", "dF_u2", "sir_bits", "stderr_bits"]

QUAD_RULES = {"split": DEFAULT_RULE, "gh96": GH96, "adaptive": ADAPTIVE}

# channel and cluster counts for each figure; the last M is the tight one
FIGURES = {
    4: ("ch1", [0, 2, 4]),
    5: ("ch2", [0, 4, 8]),
    6: ("ch3", [0, 4, 6]),
    7: ("ch4", [0, 1, 2]),
    8: ("ch5", [0, 2, 4]),
}
FIGURE_SNR = "-10:14:0.5"


class UsageError(Exception):
    pass


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def snr_grid(text: str) -> np.ndarray:
    """``start:stop:step`` in dB, inclusive of ``stop`` when it lies on the grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--snr expects start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--snr expects numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise UsageError("--snr values must be finite")
    if step <= 0:
        raise UsageError("--snr step must be positive")
    if stop < start:
        raise UsageError("--snr stop must not be below start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 10)


def m_list(text: str) -> list[int]:
    try:
        ms = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--M expects comma-separated integers, got {text!r}") from None
    if not ms or any(m < 0 for m in ms):
        raise UsageError("--M needs nonnegative integers")
    return ms


@dataclass
class SweepConfig:
    channel: ChannelResponse
    snr_db: np.ndarray
    M: list[int] = field(default_factory=lambda: [0])
    P_X: float = 1.0
    rule: QuadratureRule = DEFAULT_RULE
    n_symbols: int = 10 ** 6
    seed: int = 0
    with_sir: bool = True


def _pmap(fn, items):
    workers = min(thread_count(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


def bound_rows(cfg: SweepConfig) -> list[bnd.BoundPoint]:
    def one(snr):
        eq = bnd.equalize(cfg.channel, cfg.P_X, bnd.snr_to_N0(snr, cfg.P_X))
        return [bnd.bounds_at(eq, m, cfg.rule) for m in cfg.M]

    out = []
    for pts in _pmap(one, list(cfg.snr_db)):
        out.extend(pts)
    return out


def _sir_at(cfg, snr):
    try:
        return estimate_sir(cfg.channel, cfg.P_X, bnd.snr_to_N0(snr, cfg.P_X),
                            cfg.n_symbols, cfg.seed, workers=1)
    except PipelineError:
        raise
    except (IsiBoundsError, ValueError) as e:
        raise PipelineError("estimate_sir", e) from e


def sir_rows(cfg: SweepConfig):
    return _pmap(lambda s: _sir_at(cfg, s), list(cfg.snr_db))


def _bound_values(b: bnd.BoundPoint) -> list:
    return [b.snr_db, b.M, b.R, b.phi, b.rho_max, b.sigma_rho, b.F_SLC, b.F_l,
            b.F_u1, b.F_u2, b.C_SLC, b.C_L1, b.C_L2]


def write_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return cols, data.reshape(-1, len(cols))


def bounds_csv(cfg: SweepConfig) -> str:
    return write_csv(BOUNDS_COLUMNS, [_bound_values(b) for b in bound_rows(cfg)])


def sir_csv(cfg: SweepConfig) -> str:
    rows = [[s, e.rate, e.stderr, e.n_symbols, e.seed] for s, e in zip(cfg.snr_db, sir_rows(cfg))]
    return write_csv(SIR_COLUMNS, rows)


def figure_csv(cfg: SweepConfig) -> str:
    pts = bound_rows(cfg)
    sirs = sir_rows(cfg) if cfg.with_sir else [None] * len(cfg.snr_db)
    by_snr = dict(zip((float(s) for s in cfg.snr_db), sirs))
    rows = []
    for b in pts:
        e = by_snr[float(np.round(b.snr_db, 10))] if cfg.with_sir else None
        rows.append(_bound_values(b) + [
            b.F_l - b.F_SLC, b.F_u1 - b.F_SLC, b.F_u2 - b.F_SLC,
            math.nan if e is None else e.rate, math.nan if e is None else e.stderr,
        ])
    return write_csv(FIGURE_COLUMNS, rows)


def gnuplot_script(fig: int, csv_name: str, ms: list[int], cap_bits: float) -> str:
    col = {c: i + 1 for i, c in enumerate(FIGURE_COLUMNS)}
    m0 = ms[0]
    a = [f"'{csv_name}' using 1:($2=={m0} ? ${col['sir_bits']} : 1/0) with lines lw 2 title 'SIR'",
         f"'' using 1:($2=={m0} ? ${col['C_SLC']} : 1/0) with lines dt 2 title 'C_{{SLC}}'"]
    for m in ms:
        a.append(f"'' using 1:($2=={m} ? ${col['C_L1']} : 1/0) with lines title 'C_L, M={m}'")
    b = []
    for m in ms:
        b.append(f"'{csv_name}' using 1:($2=={m} ? ${col['dF_u1']} : 1/0) with lines title 'F^u-F_{{SLC}}, M={m}'")
        b.append(f"'' using 1:($2=={m} ? ${col['dF_l']} : 1/0) with lines dt 3 title 'F^l-F_{{SLC}}, M={m}'")
    return "\n".join([
        f"# figure {fig}: rate curves (a) and bound differences (b)",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set terminal pngcairo size 900,1200",
        f"set output 'figure{fig}.png'",
        "set multiplot layout 2,1",
        "set xlabel 'SNR (dB)'",
        "set ylabel 'bits/channel use'",
        f"set yrange [0:{cap_bits:g}]",
        "set title '(a)'",
        "plot " + ", \\\n     ".join(a),
        "set autoscale y",
        "set ylabel 'bits'",
        "set title '(b)'",
        "plot " + ", \\\n     ".join(b),
        "unset multiplot",
        "",
    ])


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _channel_from(args) -> ChannelResponse:
    if args.channel_file:
        return load_channel(args.channel_file)
    return get_builtin(args.channel)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isi-bounds",
                                description="Information-rate bounds for ISI channels")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, grid=True):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--channel", help="built-in channel name")
        src.add_argument("--channel-file", help="channel description file")
        if grid:
            sp.add_argument("--snr", required=True, help="start:stop:step in dB")
        sp.add_argument("--px", type=float, default=1.0, help="average symbol power")
        sp.add_argument("--out", help="output CSV (default stdout)")

    def mc(sp):
        sp.add_argument("--n-symbols", type=int, default=10 ** 6)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("bounds", help="bound sweep to CSV")
    common(sp)
    sp.add_argument("--M", default="0", help="comma-separated cluster counts")
    sp.add_argument("--quad", choices=sorted(QUAD_RULES), default="split")

    sp = sub.add_parser("sir", help="Monte-Carlo SIR sweep to CSV")
    common(sp)
    mc(sp)

    sp = sub.add_parser("figure", help="figure data (CSV) and gnuplot script")
    sp.add_argument("figure_id", type=int, choices=sorted(FIGURES))
    sp.add_argument("--snr", default=FIGURE_SNR)
    sp.add_argument("--quad", choices=sorted(QUAD_RULES), default="split")
    sp.add_argument("--no-sir", action="store_true", help="skip the Monte-Carlo column")
    sp.add_argument("--out-dir", default=".")
    mc(sp)

    sub.add_parser("channels", help="list built-in channels")
    return p


def run(argv=None) -> int:
    parser = _parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # negative grid starts such as "-10:14:1" would otherwise look like flags
    for i in range(len(argv) - 1):
        if argv[i] == "--snr":
            argv[i:i + 2] = [f"--snr={argv[i + 1]}", ""]
    argv = [a for a in argv if a != ""]
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.verb == "channels":
            for name in builtin_names():
                h = get_builtin(name)
                sys.stdout.write(f"{name}\t{h.alphabet.value}\t{h.label}\n")
            return 0
        if args.verb == "figure":
            name, ms = FIGURES[args.figure_id]
            cfg = SweepConfig(get_builtin(name), snr_grid(args.snr), ms,
                              rule=QUAD_RULES[args.quad], n_symbols=args.n_symbols,
                              seed=args.seed, with_sir=not args.no_sir)
            if cfg.with_sir and cfg.n_symbols < 10_000:
                raise UsageError("--n-symbols must be at least 10000")
            outdir = Path(args.out_dir)
            outdir.mkdir(parents=True, exist_ok=True)
            csv_name = f"figure{args.figure_id}.csv"
            (outdir / csv_name).write_text(figure_csv(cfg), encoding="utf-8")
            cap = cfg.channel.alphabet.log_size / math.log(2.0)
            (outdir / f"figure{args.figure_id}.gp").write_text(
                gnuplot_script(args.figure_id, csv_name, ms, cap), encoding="utf-8")
            return 0
        cfg = SweepConfig(_channel_from(args), snr_grid(args.snr), P_X=args.px)
        if not (args.px > 0 and math.isfinite(args.px)):
            raise UsageError("--px must be positive")
        if args.verb == "bounds":
            cfg.M = m_list(args.M)
            cfg.rule = QUAD_RULES[args.quad]
            _emit(bounds_csv(cfg), args.out)
        else:
            if args.n_symbols < 10_000:
                raise UsageError("--n-symbols must be at least 10000")
            cfg.n_symbols, cfg.seed = args.n_symbols, args.seed
            _emit(sir_csv(cfg), args.out)
        return 0
    except (UsageError, ChannelError, OSError) as e:
        sys.stderr.write(f"isi-bounds: error: {e}\n")
        return 2
    except PipelineError as e:
        sys.stderr.write(f"isi-bounds: pipeline error: {e}\n")
        return 3
    except IsiBoundsError as e:
        sys.stderr.write(f"isi-bounds: pipeline error: [{type(e).__name__}] {e}\n")
        return 3


def main():
    sys.exit(run())
