"""Monte-Carlo symmetric information rate via the forward (alpha) recursion.

State encoding: a state is the last ``nu`` symbol indices written as
base-``A`` digits, the most recent symbol in the least significant digit.
Input ``j`` from state ``s`` leads to ``(s * A + j) mod A**nu``.

Randomness: ``numpy.random.SeedSequence(seed).spawn(n_batches)`` gives one
PCG64 stream per batch. Each batch draws, in order, its symbol indices
(``integers``) and then its noise as Box-Muller pairs of ``random()``
uniforms, so the result depends only on ``(seed, n_batches, n_symbols)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .channel import Alphabet, ChannelResponse
from .errors import NumericalUnderflow, StateSpaceTooLarge

LN2 = math.log(2.0)
MIN_SYMBOLS = 10_000
DEFAULT_BATCHES = 20
MAX_MEMORY = {Alphabet.BPSK: 20, Alphabet.QPSK: 10}
BURN_IN_PER_TAP = 10
UNDERFLOW = 1e-250


def thread_count() -> int:
    """Worker cap from ``ISI_BOUNDS_THREADS`` (default: CPU count)."""
    env = os.environ.get("ISI_BOUNDS_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class TrellisSpec:
    memory: int
    n_states: int
    alphabet: Alphabet
    next_state: np.ndarray  # (n_states, A) int64
    output: np.ndarray  # (n_states, A) noiseless outputs
    P_X: float

    @property
    def n_inputs(self) -> int:
        return self.alphabet.size


def build_trellis(channel: ChannelResponse, P_X: float = 1.0) -> TrellisSpec:
    A = channel.alphabet.size
    nu = channel.memory
    if nu > MAX_MEMORY[channel.alphabet]:
        raise StateSpaceTooLarge(f"memory {nu} gives {A}**{nu} states")
    S = A ** nu
    sym = channel.alphabet.symbols(P_X)
    h = channel.taps
    states = np.arange(S)
    # digits[s, n] = symbol index sent n+1 steps ago
    digits = (states[:, None] // (A ** np.arange(nu))[None, :]) % A
    past = h[1:][None, :] * sym[digits] if nu else np.zeros((S, 0))
    out = h[0] * sym[None, :] + past.sum(axis=1)[:, None]
    if channel.alphabet is Alphabet.BPSK:
        out = out.real.astype(float)
    nxt = (states[:, None] * A + np.arange(A)[None, :]) % S
    out.setflags(write=False)
    nxt.setflags(write=False)
    return TrellisSpec(nu, S, channel.alphabet, nxt.astype(np.int64), out, P_X)


@dataclass(frozen=True)
class SirEstimate:
    rate: float  # bits per channel use
    stderr: float
    n_symbols: int
    seed: int
    batch_rates: np.ndarray


@numba.njit(nogil=True, cache=True)
def _forward(nxt, dist2_scale, out_re, out_im, y_re, y_im, burn):
    """Sum of ``-log`` of the scaled observation likelihoods after ``burn`` steps.

    The likelihood kernel is ``exp(-|y - m|^2 * dist2_scale)`` without the
    Gaussian normalization, averaged over the uniform input.
    """
    S, A = nxt.shape
    n = y_re.shape[0]
    alpha = np.full(S, 1.0 / S)
    new = np.empty(S)
    metric = np.empty((S, A))
    acc = 0.0
    inv_a = 1.0 / A
    for k in range(n):
        emax = -np.inf
        for s in range(S):
            for j in range(A):
                dr = y_re[k] - out_re[s, j]
                di = y_im[k] - out_im[s, j]
                e = -(dr * dr + di * di) * dist2_scale
                metric[s, j] = e
                if e > emax:
                    emax = e
        new[:] = 0.0
        for s in range(S):
            a = alpha[s] * inv_a
            if a == 0.0:
                continue
            for j in range(A):
                new[nxt[s, j]] += a * math.exp(metric[s, j] - emax)
        total = 0.0
        for s in range(S):
            total += new[s]
        if not (total > UNDERFLOW) or not math.isfinite(total):
            # log-domain step: log new[t] = logsumexp over incoming branches
            lg = np.full(S, -np.inf)
            for s in range(S):
                if alpha[s] <= 0.0:
                    continue
                la = math.log(alpha[s] * inv_a)
                for j in range(A):
                    t = nxt[s, j]
                    v = la + metric[s, j]
                    if lg[t] == -np.inf:
                        lg[t] = v
                    else:
                        hi = max(lg[t], v)
                        lg[t] = hi + math.log(math.exp(lg[t] - hi) + math.exp(v - hi))
            top = -np.inf
            for s in range(S):
                if lg[s] > top:
                    top = lg[s]
            if top == -np.inf:
                return np.nan
            total = 0.0
            for s in range(S):
                new[s] = math.exp(lg[s] - top)
                total += new[s]
            logp = top + math.log(total)
        else:
            logp = emax + math.log(total)
        for s in range(S):
            alpha[s] = new[s] / total
        if k >= burn:
            acc -= logp
    return acc


def _box_muller(rng, n):
    u1 = rng.random(n)
    u2 = rng.random(n)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 is in (0, 1]
    return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


def _batch(trellis: TrellisSpec, taps, N_0, n, burn, seq):
    rng = np.random.Generator(np.random.PCG64(seq))
    A = trellis.n_inputs
    nu = trellis.memory
    total = n + burn + nu
    idx = rng.integers(0, A, size=total)
    x = trellis.alphabet.symbols(trellis.P_X)[idx]
    clean = np.convolve(x, taps)[nu:total]  # only steps with a full history
    g1, g2 = _box_muller(rng, clean.size)
    if trellis.alphabet is Alphabet.BPSK:
        y_re = clean.real + math.sqrt(N_0) * g1
        y_im = np.zeros_like(y_re)
        scale = 1.0 / (2.0 * N_0)
        h_noise = 0.5
    else:
        sd = math.sqrt(N_0 / 2.0)
        y_re = clean.real + sd * g1
        y_im = clean.imag + sd * g2
        scale = 1.0 / N_0
        h_noise = 1.0
    out = np.asarray(trellis.output)
    acc = _forward(trellis.next_state, scale, np.ascontiguousarray(out.real, dtype=float),
                   np.ascontiguousarray(np.imag(out), dtype=float), y_re, y_im, burn)
    if not math.isfinite(acc):
        raise NumericalUnderflow("forward recursion lost all probability mass")
    # h(Y) - h(N): the Gaussian normalizations cancel, leaving the -1/2 or -1
    return acc / n - h_noise


def estimate_sir(channel: ChannelResponse, P_X: float, N_0: float, n_symbols: int = 10 ** 6,
                 seed: int = 0, n_batches: int = DEFAULT_BATCHES, workers: int | None = None) -> SirEstimate:
    """Batch-means estimate of the i.u.d. rate in bits per channel use."""
    if n_symbols < MIN_SYMBOLS:
        raise ValueError(f"n_symbols must be at least {MIN_SYMBOLS}")
    if n_batches < 2:
        raise ValueError("need at least two batches")
    if not (P_X > 0 and N_0 > 0):
        raise ValueError("P_X and N_0 must be positive")
    trellis = build_trellis(channel, P_X)
    per = n_symbols // n_batches
    burn = BURN_IN_PER_TAP * trellis.memory
    seqs = np.random.SeedSequence(seed).spawn(n_batches)
    taps = channel.taps

    def run(sq):
        return _batch(trellis, taps, N_0, per, burn, sq)

    workers = min(workers or thread_count(), n_batches)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rates = np.array(list(ex.map(run, seqs)))
    else:
        rates = np.array([run(s) for s in seqs])
    rates = rates / LN2
    return SirEstimate(
        rate=float(rates.mean()),
        stderr=float(rates.std(ddof=1) / math.sqrt(n_batches)),
        n_symbols=per * n_batches,
        seed=seed,
        batch_rates=rates,
    )
