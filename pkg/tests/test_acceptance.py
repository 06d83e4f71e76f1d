"""Acceptance checks. Each prints one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
The Monte-Carlo criteria take several minutes on one core.
"""

import functools
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from isibounds.bounds import (F_exact, F_exact_taps, F_l, F_slc, F_u1, F_u2, bounds_at, equalize,
                              snr_to_N0, two_point_rho, uniform_rho)
from isibounds.channel import IDENTITY, autocorrelation, builtin_channels, get_builtin
from isibounds.cli import FIGURES, read_csv, run, snr_grid
from isibounds.dfe import PrecursorProfile, select_clusters
from isibounds.quadrature import ADAPTIVE, DEFAULT_RULE, GH96
from isibounds.sir_mc import estimate_sir
from isibounds.spectral import compute_P0, noise_decomposition, spectral_factorize

N_MC = 10 ** 6
SEED = 0
FIG_GRID = "-10:14:0.5"
GOLDEN = Path(__file__).parent / "golden"
GOLDEN_ARGS = ["--snr", "-10:14:1", "--n-symbols", "20000", "--seed", "0"]


def report(label, ok, detail, capsys=None):
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


@functools.lru_cache(maxsize=None)
def sir(name, snr):
    return estimate_sir(get_builtin(name), 1.0, snr_to_N0(snr), N_MC, SEED)


@functools.lru_cache(maxsize=None)
def eq_at(name, snr):
    return equalize(get_builtin(name), 1.0, snr_to_N0(snr))


def biawgn_bits(snr):
    N_0 = snr_to_N0(snr)
    s = math.sqrt(N_0)

    def f(y):
        return (math.exp(-0.5 * ((y - 1) / s) ** 2) / (s * math.sqrt(2 * math.pi))
                * (math.log(2) - np.logaddexp(0.0, -2 * y / N_0)))

    val = integrate.quad(f, 1 - 14 * s, 1 + 14 * s, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    return val / math.log(2)


def random_corpus(n=200, seed=2024):
    rng = np.random.default_rng(seed)
    return [rng.uniform(-0.8, 0.8, size=rng.integers(1, 13)) for _ in range(n)]


def check_1():
    t0 = time.time()
    worst = -math.inf
    count = 0
    for d in random_corpus():
        prof = PrecursorProfile(d)
        for R in (0.1, 1.0, 10.0):
            for phi in (0.5, 0.9, 1.0):
                ex = F_exact_taps(d, R, phi)
                for M in range(d.size + 1):
                    cs = select_clusters(prof, M)
                    worst = max(worst, F_l(cs, R, phi) - ex, ex - F_u1(cs, R, phi),
                                ex - F_u2(cs, R, phi))
                    count += 1
    dt = time.time() - t0
    ok = worst <= 1e-9 and dt < 120
    return ok, f"{count} cases, max violation {worst:.2e} (slack 1e-9), {dt:.0f} s"


def check_2():
    worst = 0.0
    for d in random_corpus():
        cs = select_clusters(PrecursorProfile(d), d.size)
        for R in (0.1, 1.0, 10.0):
            for phi in (0.5, 0.9, 1.0):
                ex = F_exact_taps(d, R, phi)
                worst = max(worst, *(abs(f(cs, R, phi) - ex) for f in (F_l, F_u1, F_u2)))
    return worst < 1e-9, f"max |F - F_exact| at M = length: {worst:.2e} (tol 1e-9)"


def check_3():
    worst = 0.0
    phi_ok = True
    mc_bad = []
    for snr in range(-10, 15):
        b = bounds_at(equalize(IDENTITY, 1.0, snr_to_N0(snr)), 0)
        worst = max(worst, abs(b.C_L1 - b.C_SLC), abs(b.C_L2 - b.C_SLC))
        phi_ok &= b.phi == 1.0
        e = estimate_sir(IDENTITY, 1.0, snr_to_N0(snr), N_MC, SEED)
        oracle = biawgn_bits(snr)
        if abs(e.rate - oracle) > 3 * e.stderr:
            mc_bad.append((snr, e.rate, oracle, e.stderr))
    o0 = biawgn_bits(0)
    ok = worst < 1e-9 and phi_ok and not mc_bad and abs(o0 - 0.4859) < 1e-4
    return ok, (f"max |C_L - C_SLC| {worst:.1e}, phi == 1: {phi_ok}, oracle(0 dB) {o0:.5f}, "
                f"MC outside 3 stderr at {[m[0] for m in mc_bad]}")


def check_4():
    bad = []
    slc_flags = []
    t0 = time.time()
    for name in ("ch1", "ch2", "ch3", "ch4", "ch5"):
        for snr in range(-10, 15, 2):
            e = sir(name, float(snr))
            eq = eq_at(name, float(snr))
            for M in (0, 4):
                b = bounds_at(eq, M)
                if b.C_L1 > e.rate + 3 * e.stderr:
                    bad.append((name, snr, M, "C_L1"))
                if b.C_L2 > e.rate + 3 * e.stderr:
                    bad.append((name, snr, M, "C_L2"))
            if b.C_SLC > e.rate + 3 * e.stderr:
                slc_flags.append((name, snr))
    dt = time.time() - t0
    return (not bad and dt < 1800,
            f"violations {bad}, SLC above SIR (flag only) {slc_flags}, {dt:.0f} s")


def check_5():
    msgs = []
    ok = True
    for fig, (name, ms) in FIGURES.items():
        M = ms[-1]
        diffs = []
        for s in snr_grid(FIG_GRID):
            b = bounds_at(eq_at(name, float(s)), M)
            diffs.append(min(b.F_u1, b.F_u2) - b.F_SLC)
        diffs = np.array(diffs)
        n_neg = int(np.sum(diffs < 0))
        if name == "ch5":
            good = n_neg == diffs.size
        else:
            good = n_neg > 0
        ok &= good
        msgs.append(f"{name} M={M}: {n_neg}/{diffs.size} negative{'' if good else ' (FAIL)'}")
    return ok, "; ".join(msgs)


def check_6():
    name = "ch4"
    grid = np.round(np.arange(6.0, 11.0 + 1e-9, 0.1), 1)
    cl = np.array([bounds_at(eq_at(name, float(s)), 2).C_L1 for s in grid])
    x_cl = float(np.interp(0.9, cl, grid))
    # bracket the SIR crossing on a 0.5 dB grid, then refine on the 0.1 dB grid
    coarse = np.arange(7.0, 10.01, 0.5)
    rates = [sir(name, float(s)).rate for s in coarse]
    i = int(np.argmax(np.array(rates) >= 0.9))
    fine = np.round(np.arange(coarse[i - 1], coarse[i] + 1e-9, 0.1), 1)
    fr = np.array([sir(name, float(s)).rate for s in fine])
    j = int(np.argmax(fr >= 0.9))
    x0, x1, y0, y1 = fine[j - 1], fine[j], fr[j - 1], fr[j]
    x_sir = float(x0 + (0.9 - y0) * (x1 - x0) / (y1 - y0))
    gap = x_cl - x_sir
    return abs(gap - 0.84) <= 0.15, (f"C_L1(M=2) reaches 0.9 at {x_cl:.3f} dB, SIR at {x_sir:.3f} dB, "
                                     f"gap {gap:.3f} dB (target 0.84 +- 0.15)")


def check_7():
    worst_s = worst_p = 0.0
    for h in builtin_channels():
        r = autocorrelation(h)
        for s in snr_grid(FIG_GRID):
            N_0 = snr_to_N0(float(s))
            sf = spectral_factorize(r, 1.0, N_0)
            P0 = compute_P0(r, 1.0, N_0)
            worst_p = max(worst_p, abs(sf.P0 / P0 - 1))
            nd = noise_decomposition(r, 1.0, N_0, P0)
            prof = eq_at(h.label.split(":")[0], float(s)).profile
            target = nd.sigmaS2
            lo = prof.sigma_rho ** 2 - prof.tail_bound ** 2
            hi = prof.sigma_rho ** 2
            excess = max(lo - target, target - hi, 0.0) / target
            worst_s = max(worst_s, excess)
    worst_d = 0.0
    for s in snr_grid(FIG_GRID):
        N_0 = snr_to_N0(float(s))
        a, b = 1.0 + N_0, 1.0
        closed = (a + math.sqrt(a * a - b * b)) / 2
        P0 = compute_P0(autocorrelation(get_builtin("dicode")), 1.0, N_0)
        worst_d = max(worst_d, abs(P0 - closed))
    ok = worst_s < 1e-6 and worst_p < 1e-8 and worst_d < 1e-9
    return ok, (f"sigma_rho^2 vs sigma_S^2 rel {worst_s:.1e} (1e-6), P0 routes rel {worst_p:.1e} (1e-8), "
                f"dicode closed form {worst_d:.1e} (1e-9)")


def _quad_worst(rule):
    worst = 0.0
    for fig, (name, ms) in FIGURES.items():
        for s in snr_grid(FIG_GRID):
            eq = eq_at(name, float(s))
            for M in ms:
                a = bounds_at(eq, M, ADAPTIVE)
                b = bounds_at(eq, M, rule)
                for f in ("F_SLC", "F_l", "F_u1", "F_u2"):
                    worst = max(worst, abs(getattr(a, f) - getattr(b, f)))
    return worst


def check_8():
    worst = _quad_worst(GH96)
    return worst < 1e-8, f"max |GaussHermite(96) - adaptive| {worst:.2e} bits (tol 1e-8)"


def check_8_default():
    worst = _quad_worst(DEFAULT_RULE)
    return worst < 1e-8, f"max |default rule - adaptive| {worst:.2e} bits (tol 1e-8)"


def check_9():
    msgs = []
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        for fig in sorted(FIGURES):
            run(["figure", str(fig), "--out-dir", tmp] + GOLDEN_ARGS)
            text = (Path(tmp) / f"figure{fig}.csv").read_text()
            same = text == (GOLDEN / f"figure{fig}.csv").read_text()
            cols, data = read_csv(text)
            cap = 2.0 if fig == 8 else 1.0
            mono = bounded = True
            for m in np.unique(data[:, 1]):
                rows = data[data[:, 1] == m]
                for c in ("C_SLC", "C_L1", "C_L2"):
                    v = rows[:, cols.index(c)]
                    mono &= bool(np.all(np.diff(v) > 0))
                    bounded &= bool(np.all((v >= -1e-9) & (v <= cap + 1e-9)))
            good = same and mono and bounded
            ok &= good
            msgs.append(f"fig{fig} golden={same} monotone={mono} bounded={bounded}")
    return ok, "; ".join(msgs)


def check_shapes():
    Rs = np.logspace(-1, math.log10(30.0), 40)

    def crosses(rho_fn, phi):
        d = np.array([F_exact(*rho_fn(phi, R), R, phi) - F_slc(R) for R in Rs])
        return bool(np.any(d > 0) and np.any(d < 0))

    small = all(crosses(fn, phi) for fn in (two_point_rho, uniform_rho) for phi in (0.5, 0.8))
    high = [crosses(fn, 0.98) for fn in (two_point_rho, uniform_rho)]
    ok = small and not any(high)
    return ok, (f"sign change for phi in {{0.5, 0.8}}: {small}; "
                f"sign change at phi = 0.98 (two-point, uniform): {high} (expected none)")


CHECKS = [
    ("criterion 1 (sandwich)", check_1),
    ("criterion 2 (full clustering)", check_2),
    ("criterion 3 (no-ISI collapse)", check_3),
    ("criterion 4 (ordering chain)", check_4),
    ("criterion 5 (SLC crossing)", check_5),
    ("criterion 6 (0.84 dB gap)", check_6),
    ("criterion 7 (dual routes)", check_7),
    ("criterion 8 (GH96 vs adaptive)", check_8),
    ("criterion 8 companion (default rule vs adaptive)", check_8_default),
    ("criterion 9 (figure regressions)", check_9),
    ("synthetic rho shapes", check_shapes),
]


@pytest.mark.parametrize("label,fn", CHECKS, ids=[c[0].split(" (")[0].replace(" ", "_") for c in CHECKS])
def test_acceptance(label, fn, capsys):
    ok, detail = fn()
    assert report(label, ok, detail, capsys), detail


if __name__ == "__main__":
    results = [report(label, *fn()) for label, fn in CHECKS]
    print(f"{sum(results)}/{len(results)} passed")
    sys.exit(0 if all(results) else 1)
