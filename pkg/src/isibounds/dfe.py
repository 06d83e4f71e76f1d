"""Precursor ISI at the unbiased MMSE-DFE output and cluster identification.

The precursor taps follow from ``d(D) = N_0/(P_0 - N_0) (1 - 1/g*(D^-*))``.
Taps are dimensionless: ``rho = sum_k d_{-k} X_k / sqrt(P_X)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .channel import Alphabet
from .errors import (
    EnumerationTooLarge,
    InvalidClusterSet,
    MExceedsTaps,
    RepeatedPoles,
    RootFindingFailure,
    TailNotConverged,
    TooManyClusters,
)
from .spectral import SpectralFactors

K_MAX = 200_000
TAIL_TOL = 1e-10
POLE_SEPARATION = 1e-6
MAX_CLUSTER_TERMS = 2 ** 20


@dataclass(frozen=True)
class PrecursorProfile:
    """Truncated precursor taps ``d_{-1}, d_{-2}, ...`` with a certified tail.

    ``tail_bound`` bounds ``sum_{k > K_used} |d_{-k}|``. Since the squared
    tail is at most the square of the absolute tail, ``sigma_rho`` includes
    ``tail_bound**2`` and is an upper bound on the true standard deviation.
    """

    d: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.d)
        d = d.astype(complex) if np.iscomplexobj(d) else d.astype(float)
        if d.ndim != 1:
            raise ValueError("taps must be one-dimensional")
        if not (self.tail_bound >= 0 and math.isfinite(self.tail_bound)):
            raise ValueError("tail_bound must be finite and nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def K_used(self) -> int:
        return self.d.size

    @property
    def abs_sum(self) -> float:
        return float(np.sum(np.abs(self.d)))

    @property
    def rho_max(self) -> float:
        return self.abs_sum + self.tail_bound

    @property
    def sigma_rho(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.d) ** 2)) + self.tail_bound ** 2)

    def truncated(self, K: int) -> "PrecursorProfile":
        """Keep the first ``K`` taps, folding the rest into the tail bound."""
        if not 0 <= K <= self.K_used:
            raise ValueError("K out of range")
        extra = float(np.sum(np.abs(self.d[K:])))
        return PrecursorProfile(self.d[:K], self.tail_bound + extra)


def _poles_and_residues(g: np.ndarray):
    """Poles of ``1/g*(D^-*)`` in ``D^-1`` and their partial-fraction residues.

    ``1/sum_m conj(g_m) z^m = sum_i c_i / (1 - p_i z)`` so that
    ``a_{-k} = sum_i c_i p_i**k``.
    """
    try:
        q = np.roots(g)
    except np.linalg.LinAlgError as e:
        raise RootFindingFailure(str(e)) from None
    if q.size != g.size - 1 or not np.all(np.isfinite(q)):
        raise RootFindingFailure("root solver returned the wrong number of roots")
    p = np.conj(q).astype(complex)
    if np.any(np.abs(p) >= 1.0):
        raise RootFindingFailure("g is not minimum phase")
    n = p.size
    if n > 1:
        sep = np.abs(p[:, None] - p[None, :])
        sep[np.diag_indices(n)] = np.inf
        if sep.min() <= POLE_SEPARATION:
            raise RepeatedPoles(f"pole separation {sep.min():.2e}")
    c = np.empty(n, dtype=complex)
    for i in range(n):
        others = np.delete(p, i)
        c[i] = p[i] ** (n - 1) / np.prod(p[i] - others) if n > 1 else 1.0
    return p, c


def _inverse_series(g: np.ndarray, n: int) -> np.ndarray:
    """``a_0 .. a_{-(n-1)}`` of ``1/g*(D^-*)`` by the recursion a_{-k} = -sum conj(g_m) a_{-(k-m)}."""
    impulse = np.zeros(n, dtype=complex if np.iscomplexobj(g) else float)
    impulse[0] = 1.0
    return signal.lfilter([1.0], np.conj(g), impulse)


def _geometric_tail(p, c, K):
    """``sum_i |c_i| |p_i|**(K+1) / (1 - |p_i|)`` for an array of ``K``."""
    K = np.asarray(K, dtype=float)
    ap = np.abs(p)
    return np.sum(np.abs(c)[:, None] * ap[:, None] ** (K[None, :] + 1) / (1 - ap)[:, None], axis=0)


def _ratio_tail(a_abs: np.ndarray):
    """Fallback envelope from the last 16 taps: doubled geometric extrapolation."""
    if a_abs.size < 16:
        return math.inf
    last, prev = a_abs[-8:].max(), a_abs[-16:-8].max()
    if prev == 0:
        return 0.0 if last == 0 else math.inf
    ratio = (last / prev) ** (1 / 8)
    if ratio >= 1:
        return math.inf
    return 2.0 * last * ratio / (1 - ratio)


def precursor_taps(sf: SpectralFactors, N_0: float | None = None, K_max: int = K_MAX,
                   tail_tol: float = TAIL_TOL) -> PrecursorProfile:
    """Compute ``d_{-k}`` until the certified tail falls below ``tail_tol * sum |d|``."""
    N_0 = sf.N_0 if N_0 is None else N_0
    if not sf.P0 > N_0:
        raise ValueError("P0 must exceed N_0")
    g = sf.g
    if g.size == 1:
        return PrecursorProfile(np.zeros(0), 0.0)
    scale = N_0 / (sf.P0 - N_0)
    try:
        p, c = _poles_and_residues(g)
    except (RepeatedPoles, RootFindingFailure):
        p = c = None
    L = 256
    while True:
        L = min(L, K_max)
        a = _inverse_series(g, L + 1)
        d = -scale * a[1:]
        csum = np.cumsum(np.abs(d))
        if p is not None:
            tails = scale * _geometric_tail(p, c, np.arange(1, L + 1))
            ok = np.nonzero(tails <= tail_tol * csum)[0]
            if ok.size:
                K = int(ok[0]) + 1
                return PrecursorProfile(d[:K], float(tails[K - 1]))
        else:
            tail = _ratio_tail(np.abs(d))
            if tail <= tail_tol * csum[-1]:
                return PrecursorProfile(d, float(tail))
        if L >= K_max:
            raise TailNotConverged(f"tail above tolerance after {K_max} taps")
        L *= 2


def rho_max_direct(p: PrecursorProfile) -> float:
    """Certified upper bound on ``|rho|_max``: retained absolute sum plus tail."""
    return p.rho_max


def rho_max_partial_fraction(sf: SpectralFactors, N_0: float | None, K: int) -> float:
    """``sum_{k<=K} |d_{-k}| + N_0/(P_0-N_0) sum_i |c_i p_i^{K+1}| / (1-|p_i|)``.

    With ``K = 0`` this is the plain partial-fraction bound. Raises
    :class:`RepeatedPoles` when the poles are not simple.
    """
    N_0 = sf.N_0 if N_0 is None else N_0
    if K < 0:
        raise ValueError("K must be nonnegative")
    if sf.g.size == 1:
        return 0.0
    scale = N_0 / (sf.P0 - N_0)
    p, c = _poles_and_residues(sf.g)
    head = 0.0
    if K:
        head = float(np.sum(np.abs(scale * _inverse_series(sf.g, K + 1)[1:])))
    return head + float(scale * _geometric_tail(p, c, [K])[0])


@dataclass(frozen=True)
class ClusterSet:
    """Split ``rho = lambda + mu`` around the ``M`` dominant taps.

    ``lam`` holds the cluster centres in the domain the bound formulas use:
    ``rho`` itself for BPSK and the real part of ``rho`` for QPSK (which has
    the same distribution as the imaginary part). ``sigma_mu`` and
    ``mu_max`` are in ``rho`` units; ``theta_sigma`` and ``theta_max`` are
    the matching residual spread and certified half-width in the bound
    domain.
    """

    M: int
    alphabet: Alphabet
    dominant_indices: tuple
    lam: np.ndarray
    lambda_max: float
    sigma_rho: float
    rho_max: float
    sigma_mu: float
    mu_max: float
    theta_sigma: float
    theta_max: float

    def validate(self):
        if self.sigma_mu < 0 or self.theta_sigma < 0:
            raise InvalidClusterSet("negative residual spread")
        if self.sigma_mu > self.mu_max * (1 + 1e-12) + 1e-300:
            raise InvalidClusterSet("sigma_mu exceeds mu_max")
        if self.theta_sigma > self.theta_max * (1 + 1e-12) + 1e-300:
            raise InvalidClusterSet("residual spread exceeds its half-width")
        if self.lam.size == 0:
            raise InvalidClusterSet("empty cluster set")
        return self


def _sum_combinations(contrib: np.ndarray) -> np.ndarray:
    """All sums picking one entry from each row of ``contrib``."""
    out = np.zeros(1)
    for row in contrib:
        out = np.add.outer(out, row).ravel()
    return out


def select_clusters(p: PrecursorProfile, M: int, alphabet: Alphabet = Alphabet.BPSK) -> ClusterSet:
    """Enumerate cluster centres over the ``M`` largest-magnitude taps."""
    alphabet = Alphabet(alphabet)
    if M < 0:
        raise ValueError("M must be nonnegative")
    if M > 20 or alphabet.size ** M > MAX_CLUSTER_TERMS:
        raise TooManyClusters(f"M = {M} gives {alphabet.size}**{M} clusters")
    if M > p.K_used:
        raise MExceedsTaps(f"M = {M} but only {p.K_used} taps")
    mags = np.abs(p.d)
    order = np.argsort(-mags, kind="stable")
    dom = np.sort(order[:M])
    res = np.ones(p.K_used, dtype=bool)
    res[dom] = False
    dd, rd = p.d[dom], p.d[res]
    t2 = p.tail_bound ** 2
    sigma_mu = math.sqrt(float(np.sum(np.abs(rd) ** 2)) + t2)
    mu_max = float(np.sum(np.abs(rd))) + p.tail_bound
    if alphabet is Alphabet.BPSK:
        dd = np.real(dd)
        contrib = np.stack([dd, -dd], axis=1) if M else np.zeros((0, 2))
        theta_sigma, theta_max = sigma_mu, mu_max
    else:
        dd = dd.astype(complex)
        s = alphabet.symbols(1.0) * math.sqrt(2.0)  # +-1 +-j
        contrib = np.real(dd[:, None] * s[None, :]) / math.sqrt(2.0) if M else np.zeros((0, 4))
        theta_sigma = sigma_mu / math.sqrt(2.0)
        rd = rd.astype(complex)
        theta_max = float(np.sum(np.abs(rd.real) + np.abs(rd.imag))) / math.sqrt(2.0) + p.tail_bound
    lam = _sum_combinations(contrib)
    lam.setflags(write=False)
    lambda_max = float(np.sum(np.max(np.abs(contrib), axis=1))) if M else 0.0
    return ClusterSet(
        M=M,
        alphabet=alphabet,
        dominant_indices=tuple(int(i) for i in dom),
        lam=lam,
        lambda_max=lambda_max,
        sigma_rho=p.sigma_rho,
        rho_max=p.rho_max,
        sigma_mu=sigma_mu,
        mu_max=mu_max,
        theta_sigma=theta_sigma,
        theta_max=theta_max,
    ).validate()


def enumerate_rho(d, alphabet: Alphabet = Alphabet.BPSK, max_terms: int = 2 ** 24):
    """All equiprobable values of ``rho`` (BPSK) or its real part (QPSK) for finite taps.

    Returns ``(values, probabilities)`` with duplicates merged.
    """
    alphabet = Alphabet(alphabet)
    d = np.asarray(d)
    n = alphabet.size ** d.size
    if n > max_terms:
        raise EnumerationTooLarge(f"{n} terms exceeds the limit of {max_terms}")
    if alphabet is Alphabet.BPSK:
        dr = np.real(d).astype(float)
        contrib = np.stack([dr, -dr], axis=1) if d.size else np.zeros((0, 2))
    else:
        s = alphabet.symbols(1.0) * math.sqrt(2.0)
        contrib = np.real(d.astype(complex)[:, None] * s[None, :]) / math.sqrt(2.0) if d.size else np.zeros((0, 4))
    vals = _sum_combinations(contrib)
    uniq, counts = np.unique(vals, return_counts=True)
    return uniq, counts / vals.size


__all__ = [
    "PrecursorProfile",
    "ClusterSet",
    "precursor_taps",
    "rho_max_direct",
    "rho_max_partial_fraction",
    "select_clusters",
    "enumerate_rho",
]
