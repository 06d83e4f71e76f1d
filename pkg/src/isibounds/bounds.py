"""Mismatched-MI gap ``F`` and its cluster-based upper and lower bounds.

All quantities are in nats internally. For one cluster centre ``lam`` and
a residual half-width ``theta`` define::

    Phi(theta; lam) = E_tau[ 1/2 log(1 + 2 cosh(2 k R theta) e^{u} + e^{2u}) ]
    u = -2 phi k sqrt(R) tau - 2R - 2 k R lam

with ``k = 1`` for BPSK and ``k = sqrt(2)`` for QPSK (where ``tau`` has
variance 1/2 and the result is doubled). The log factors as
``softplus(u + c) + softplus(u - c)`` which is how it is evaluated, so no
cosh is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dfe, spectral
from .channel import Alphabet, ChannelResponse, autocorrelation
from .dfe import ClusterSet, enumerate_rho
from .errors import EnumerationTooLarge, InvalidClusterSet, IsiBoundsError, PipelineError
from .quadrature import DEFAULT_RULE, Convention, QuadratureRule, softplus_expectation

LN2 = math.log(2.0)
EXACT_TERMS = 2 ** 16


@dataclass(frozen=True)
class _Geometry:
    weight: float
    kappa: float
    convention: Convention


_GEOM = {
    Alphabet.BPSK: _Geometry(1.0, 1.0, Convention.REAL_NORMAL),
    Alphabet.QPSK: _Geometry(2.0, math.sqrt(2.0), Convention.COMPLEX_HALF),
}


def _setup(R, phi, alphabet, rule):
    if not R > 0:
        raise ValueError("R must be positive")
    if not 0 < phi <= 1:
        raise ValueError("phi must be in (0, 1]")
    geo = _GEOM[Alphabet(alphabet)]
    return geo, rule.with_convention(geo.convention)


def _esp(shift, scale, rule):
    return softplus_expectation(shift, scale, rule)


def _centres(lam):
    vals, counts = np.unique(np.asarray(lam, dtype=float), return_counts=True)
    return vals, counts / counts.sum()


def F_slc(R: float, alphabet=Alphabet.BPSK, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Gap of the Gaussian-noise (SLC) rate to ``log|alphabet|``."""
    geo, rule = _setup(R, 1.0, alphabet, rule)
    k = geo.kappa
    return geo.weight * float(_esp([-2.0 * R], 2.0 * k * math.sqrt(R), rule)[0])


def F_exact(rho_values, probs, R: float, phi: float, alphabet=Alphabet.BPSK,
            rule: QuadratureRule = DEFAULT_RULE, max_terms: int = 2 ** 24) -> float:
    """Exact ``F`` for an enumerated, symmetric ``rho`` distribution.

    For QPSK pass the values of the real part of ``rho``.
    """
    rho = np.asarray(rho_values, dtype=float)
    p = np.asarray(probs, dtype=float)
    if rho.size > max_terms:
        raise EnumerationTooLarge(f"{rho.size} terms")
    if rho.shape != p.shape or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must match the values and sum to one")
    geo, rule = _setup(R, phi, alphabet, rule)
    k = geo.kappa
    vals = _esp(-2.0 * R - 2.0 * k * R * rho, 2.0 * phi * k * math.sqrt(R), rule)
    return geo.weight * float(p @ vals)


def F_exact_taps(d, R: float, phi: float, alphabet=Alphabet.BPSK,
                 rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Exact ``F`` when the finite tap list ``d`` is the whole ISI."""
    vals, probs = enumerate_rho(d, alphabet)
    return F_exact(vals, probs, R, phi, alphabet, rule)


def two_point_rho(phi: float, R: float):
    """``rho = +-sqrt((1 - phi^2) / R)``, the single-tap case consistent with ``phi``."""
    r = math.sqrt((1.0 - phi * phi) / R)
    return np.array([-r, r]), np.array([0.5, 0.5])


def uniform_rho(phi: float, R: float, K: int = 1000):
    """``2K + 1`` equally likely, equally spaced values whose spread matches ``phi``.

    ``phi^2 = 1 - R rho_max (rho_max + delta) / 3`` with ``delta = rho_max / K``.
    """
    top = math.sqrt(3.0 * (1.0 - phi * phi) / (R * (1.0 + 1.0 / K)))
    vals = np.linspace(-top, top, 2 * K + 1)
    return vals, np.full(vals.size, 1.0 / vals.size)


def _phi_pair(lam, offset, R, phi, geo, rule):
    """``1/2 [E sp(base + offset) + E sp(base - offset)]`` per centre."""
    k = geo.kappa
    base = -2.0 * R - 2.0 * k * R * lam
    scale = 2.0 * phi * k * math.sqrt(R)
    if offset == 0.0:
        return _esp(base, scale, rule)
    both = _esp(np.concatenate([base + offset, base - offset]), scale, rule)
    return 0.5 * (both[: lam.size] + both[lam.size :])


def _check(cs: ClusterSet):
    if not isinstance(cs, ClusterSet):
        raise InvalidClusterSet("expected a ClusterSet")
    cs.validate()


def F_l(cs: ClusterSet, R: float, phi: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Lower bound: Jensen over the residual ``mu`` collapses it to zero."""
    _check(cs)
    geo, rule = _setup(R, phi, cs.alphabet, rule)
    lam, w = _centres(cs.lam)
    return geo.weight * float(w @ _phi_pair(lam, 0.0, R, phi, geo, rule))


def F_u1(cs: ClusterSet, R: float, phi: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Upper bound from the chord of ``Phi(., lam)`` between 0 and the residual half-width."""
    _check(cs)
    geo, rule = _setup(R, phi, cs.alphabet, rule)
    lam, w = _centres(cs.lam)
    at0 = _phi_pair(lam, 0.0, R, phi, geo, rule)
    sig, top = cs.theta_sigma, cs.theta_max
    if sig == 0.0 or top == 0.0:
        return geo.weight * float(w @ at0)
    attop = _phi_pair(lam, 2.0 * geo.kappa * R * top, R, phi, geo, rule)
    chord = at0 + (sig / top) * (attop - at0)
    return geo.weight * float(w @ chord)


def _log_cosh_minus_one(x):
    """``log(cosh(x) - 1)`` for ``x > 0`` without overflow."""
    y = 0.5 * x
    # cosh(x) - 1 = 2 sinh(y)^2, log sinh(y) = y + log(1 - e^{-2y}) - log 2
    return math.log(2.0) + 2.0 * (y + math.log(-math.expm1(-2.0 * y)) - math.log(2.0))


def _arccosh_one_plus(log_eps):
    """``arccosh(1 + eps)`` given ``log(eps)``."""
    if log_eps < 700.0:
        eps = math.exp(log_eps)
        return math.log1p(eps + math.sqrt(eps * (eps + 2.0)))
    return math.log(2.0) + log_eps  # eps >> 1


def slope_offset(theta_sigma: float, theta_max: float, R: float, kappa: float = 1.0) -> float:
    """``arccosh(s * sigma + 1)`` with ``s = (cosh(2 k R m) - 1) / m``.

    Writing the replaced ``cosh`` as ``cosh(gamma)`` keeps the softplus
    factorization; ``gamma -> 0`` as the residual vanishes.
    """
    if theta_sigma == 0.0 or theta_max == 0.0:
        return 0.0
    x = 2.0 * kappa * R * theta_max
    log_eps = math.log(theta_sigma) - math.log(theta_max) + _log_cosh_minus_one(x)
    return _arccosh_one_plus(log_eps)


def F_u2(cs: ClusterSet, R: float, phi: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Upper bound replacing ``cosh(2 k R mu)`` by its chord ``s_M sigma_mu + 1``."""
    _check(cs)
    geo, rule = _setup(R, phi, cs.alphabet, rule)
    lam, w = _centres(cs.lam)
    gamma = slope_offset(cs.theta_sigma, cs.theta_max, R, geo.kappa)
    return geo.weight * float(w @ _phi_pair(lam, gamma, R, phi, geo, rule))


def to_bits(nats: float) -> float:
    return nats / LN2


@dataclass(frozen=True)
class BoundPoint:
    """All bound values at one SNR; rates and gaps in bits per channel use."""

    snr_db: float
    M: int
    M_used: int
    R: float
    phi: float
    rho_max: float
    sigma_rho: float
    K_used: int
    F_SLC: float
    F_exact: float | None
    F_l: float
    F_u1: float
    F_u2: float
    C_SLC: float
    C_L1: float
    C_L2: float
    alphabet: Alphabet

    @property
    def C_L(self) -> float:
        """The tighter of the two provable lower bounds."""
        return max(self.C_L1, self.C_L2)


def snr_to_N0(snr_db: float, P_X: float = 1.0) -> float:
    return P_X / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class Equalized:
    """Everything the bounds need from the channel at one SNR."""

    channel: ChannelResponse
    P_X: float
    N_0: float
    factors: spectral.SpectralFactors
    noise: spectral.NoiseDecomposition
    profile: dfe.PrecursorProfile

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.P_X / self.N_0)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except IsiBoundsError as e:
        if isinstance(e, PipelineError):
            raise
        raise PipelineError(name, e) from e
    except (ValueError, ArithmeticError) as e:
        raise PipelineError(name, e) from e


def equalize(channel: ChannelResponse, P_X: float, N_0: float) -> Equalized:
    """Autocorrelation, factorization, noise split and precursor taps."""
    r = _stage("autocorrelation", autocorrelation, channel)
    sf = _stage("spectral_factorize", spectral.spectral_factorize, r, P_X, N_0)
    P0 = _stage("compute_P0", spectral.compute_P0, r, P_X, N_0)
    nd = _stage("noise_decomposition", spectral.noise_decomposition, r, P_X, N_0, P0)
    prof = _stage("precursor_taps", dfe.precursor_taps, sf, N_0)
    return Equalized(channel, P_X, N_0, sf, nd, prof)


def bounds_at(eq: Equalized, M: int, rule: QuadratureRule = DEFAULT_RULE) -> BoundPoint:
    """Bound values for one cluster count on an already equalized channel.

    ``M`` larger than the number of retained taps is clamped.
    """
    alphabet = eq.channel.alphabet
    R, phi = eq.noise.R, eq.noise.phi
    M_used = min(M, eq.profile.K_used)
    cs = _stage("select_clusters", dfe.select_clusters, eq.profile, M_used, alphabet)
    fslc = _stage("F_slc", F_slc, R, alphabet, rule)
    fl = _stage("F_l", F_l, cs, R, phi, rule)
    fu1 = _stage("F_u1", F_u1, cs, R, phi, rule)
    fu2 = _stage("F_u2", F_u2, cs, R, phi, rule)
    fex = None
    # over the retained taps only; exact up to the (tiny) certified tail
    if alphabet.size ** eq.profile.K_used <= EXACT_TERMS:
        fex = _stage("F_exact", F_exact_taps, eq.profile.d, R, phi, alphabet, rule)
    cap = alphabet.log_size
    return BoundPoint(
        snr_db=eq.snr_db,
        M=M,
        M_used=M_used,
        R=R,
        phi=phi,
        rho_max=eq.profile.rho_max,
        sigma_rho=eq.profile.sigma_rho,
        K_used=eq.profile.K_used,
        F_SLC=to_bits(fslc),
        F_exact=None if fex is None else to_bits(fex),
        F_l=to_bits(fl),
        F_u1=to_bits(fu1),
        F_u2=to_bits(fu2),
        C_SLC=to_bits(cap - fslc),
        C_L1=to_bits(cap - fu1),
        C_L2=to_bits(cap - fu2),
        alphabet=alphabet,
    )


def bound_point(channel: ChannelResponse, P_X: float, N_0: float, M: int,
                rule: QuadratureRule = DEFAULT_RULE) -> BoundPoint:
    """Run the whole pipeline for one SNR and one ``M``."""
    return bounds_at(equalize(channel, P_X, N_0), M, rule)
