"""Spectral factorization and the unbiased MMSE-DFE noise split.

``R_ss(D) = P_X R_hh(D) + N_0 = P_0 g(D) g*(D^-*)`` with ``g`` monic and
minimum phase. ``P_0`` is available two ways: the log-integral of the
spectrum (adaptive quadrature) and the zero-lag cepstral coefficient of
the FFT factorization. They are computed independently and must agree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .channel import Autocorrelation
from .errors import DegenerateDFE, FactorizationDiverged, NonPositiveSpectrum, QuadratureFailure

QUAD_RTOL = 1e-10
QUAD_MAX_EVALS = 2 ** 20
FACT_GRID = 2 ** 16
FACT_MAX_GRID = 2 ** 20
FACT_TOL = 1e-9
SIGMA_S_CLAMP = 1e-9
ROUNDOFF = 1e-13


def _adaptive(fn, what):
    # QUADPACK qags uses 21-point Kronrod rules; the limit caps total evaluations.
    limit = QUAD_MAX_EVALS // 21
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *msg = integrate.quad(
            fn, -np.pi, np.pi, epsabs=0.0, epsrel=QUAD_RTOL, limit=limit, full_output=1
        )
    if msg and not (err <= QUAD_RTOL * abs(val) * 10 or err < 1e-14):
        raise QuadratureFailure(f"{what}: {msg[0].splitlines()[0]} (est. error {err:.2e})")
    return val


def compute_P0(r: Autocorrelation, P_X: float, N_0: float) -> float:
    """Geometric mean of ``P_X R_hh + N_0`` over the unit circle."""
    if not (P_X > 0 and N_0 > 0):
        raise ValueError("P_X and N_0 must be positive")
    val = _adaptive(lambda t: math.log(P_X * float(r.spectrum(t)) + N_0), "log-integral")
    return math.exp(val / (2.0 * math.pi))


@dataclass(frozen=True)
class SpectralFactors:
    P0: float
    g: np.ndarray
    residual: float
    P_X: float
    N_0: float

    def roots(self) -> np.ndarray:
        """Zeros of ``G(z) = sum_m g_m z^-m``; all lie inside the unit circle."""
        if self.g.size < 2:
            return np.zeros(0, dtype=complex)
        return np.roots(self.g).astype(complex)

    def reconstruct(self) -> np.ndarray:
        """Lags ``-nu .. nu`` of ``P_0 g(D) g*(D^-*)``."""
        full = self.P0 * np.correlate(self.g, self.g, mode="full")
        return full


def _rss_lags(r: Autocorrelation, P_X, N_0) -> np.ndarray:
    lags = P_X * r.lags.astype(complex)
    lags[r.span] += N_0
    return lags


def _cepstral(rss: np.ndarray, nu: int, n: int):
    circ = np.zeros(n, dtype=complex)
    circ[: nu + 1] = rss[nu:]
    if nu:
        circ[-nu:] = rss[:nu]
    S = np.fft.fft(circ).real
    if S.min() <= 0:
        raise NonPositiveSpectrum(f"min sampled R_ss = {S.min():.3e}")
    c = np.fft.ifft(np.log(S))
    logP0 = c[0].real
    causal = np.zeros(n, dtype=complex)
    causal[1 : n // 2] = c[1 : n // 2]
    g = np.fft.ifft(np.exp(np.fft.fft(causal)))
    return logP0, g


def _truncate(g: np.ndarray, nu: int) -> np.ndarray:
    mag = np.abs(g)
    small = mag < 1e-14 * mag.max()
    run = 0
    end = g.size
    for k in range(1, g.size):
        run = run + 1 if small[k] else 0
        if run == 8:
            end = k - 7
            break
    # the exact factor of a degree-nu Laurent polynomial has degree nu
    return g[: min(end, nu + 1)]


def spectral_factorize(r: Autocorrelation, P_X: float, N_0: float, tol: float = FACT_TOL) -> SpectralFactors:
    """Cepstral (FFT) minimum-phase factorization of ``P_X R_hh + N_0``.

    The grid starts at 2**16 points and is quadrupled until the
    reconstruction residual (relative to the zero lag of ``R_ss``) is
    below ``tol``.
    """
    if not (P_X > 0 and N_0 > 0):
        raise ValueError("P_X and N_0 must be positive")
    nu = r.span
    rss = _rss_lags(r, P_X, N_0)
    r0 = rss[nu].real
    n = FACT_GRID
    while True:
        logP0, g = _cepstral(rss, nu, n)
        g = _truncate(g, nu)
        g = g / g[0]
        g[0] = 1.0
        if np.all(np.abs(g.imag) <= 1e-15 * np.abs(g).max()) and np.all(rss.imag == 0):
            g = g.real.copy()
        P0 = math.exp(logP0)
        rec = P0 * np.correlate(g.astype(complex), g.astype(complex), mode="full")
        m = g.size - 1
        target = rss[nu - m : nu + m + 1]
        resid = float(np.max(np.abs(rec - target)) / r0)
        if resid < tol:
            g.setflags(write=False)
            return SpectralFactors(P0=P0, g=g, residual=resid, P_X=P_X, N_0=N_0)
        if n >= FACT_MAX_GRID:
            raise FactorizationDiverged(f"residual {resid:.3e} at grid {n}")
        n *= 4


@dataclass(frozen=True)
class NoiseDecomposition:
    sigmaV2: float
    sigmaN2: float
    sigmaS2: float
    R: float
    phi: float


def noise_decomposition(r: Autocorrelation, P_X: float, N_0: float, P0: float) -> NoiseDecomposition:
    """Variances of the total disturbance ``V``, its Gaussian part ``N`` and the ISI part ``S``."""
    if not P0 > N_0:
        raise DegenerateDFE(f"P0 = {P0!r} does not exceed N_0 = {N_0!r}")
    gap = P0 - N_0
    sigmaV2 = P_X * N_0 / gap
    ratio = N_0 / P_X

    def frac(t):
        s = float(r.spectrum(t))
        return s / (s + ratio)

    if r.span == 0:
        # no ISI: the split is exact
        sigmaN2 = sigmaV2
    else:
        integral = _adaptive(frac, "sigma_N integral")
        sigmaN2 = P_X * P0 * N_0 / (2.0 * math.pi * gap * gap) * integral
    sigmaS2 = sigmaV2 - sigmaN2
    if sigmaS2 < -SIGMA_S_CLAMP * sigmaV2:
        raise DegenerateDFE(f"sigma_S^2 = {sigmaS2:.3e} is negative")
    if abs(sigmaS2) <= ROUNDOFF * sigmaV2:
        sigmaS2 = 0.0
        sigmaN2 = sigmaV2
    elif sigmaS2 < 0:
        sigmaS2 = 0.0
        sigmaN2 = sigmaV2
    return NoiseDecomposition(
        sigmaV2=sigmaV2,
        sigmaN2=sigmaN2,
        sigmaS2=sigmaS2,
        R=P_X / sigmaV2,
        phi=math.sqrt(sigmaN2 / sigmaV2),
    )
