import math

import numpy as np
import pytest

from isibounds.channel import Autocorrelation, autocorrelation, builtin_channels, get_builtin
from isibounds.errors import DegenerateDFE, NonPositiveSpectrum
from isibounds.spectral import compute_P0, noise_decomposition, spectral_factorize


def dicode_P0(P_X, N_0):
    # geometric mean of a + b cos(theta) is (a + sqrt(a^2 - b^2)) / 2
    a, b = P_X + N_0, P_X
    return (a + math.sqrt(a * a - b * b)) / 2


@pytest.mark.parametrize("N_0", [10.0, 1.0, 0.1, 0.01])
def test_dicode_closed_form(N_0):
    r = autocorrelation(get_builtin("dicode"))
    sf = spectral_factorize(r, 1.0, N_0)
    assert compute_P0(r, 1.0, N_0) == pytest.approx(dicode_P0(1.0, N_0), rel=1e-12)
    assert sf.P0 == pytest.approx(dicode_P0(1.0, N_0), rel=1e-12)
    # P0 (1 + g1^2) = 1 + N_0 and P0 g1 = 1/2
    g1 = sf.g[1]
    assert sf.P0 * g1 == pytest.approx(0.5, rel=1e-12)
    assert sf.P0 * (1 + g1 * g1) == pytest.approx(1 + N_0, rel=1e-12)


def test_dicode_g1_at_10db():
    sf = spectral_factorize(autocorrelation(get_builtin("dicode")), 1.0, 0.1)
    assert sf.g[1] == pytest.approx(0.6417424305044159, abs=1e-12)


@pytest.mark.parametrize("idx", range(5))
@pytest.mark.parametrize("snr", [-10.0, 0.0, 14.0])
def test_factorization_reconstructs(idx, snr):
    h = builtin_channels()[idx]
    r = autocorrelation(h)
    N_0 = 10 ** (-snr / 10)
    sf = spectral_factorize(r, 1.0, N_0)
    assert sf.g[0] == 1.0
    assert sf.residual < 1e-9
    assert np.all(np.abs(sf.roots()) < 1.0)
    assert sf.P0 == pytest.approx(compute_P0(r, 1.0, N_0), rel=1e-8)
    target = r.lags * 1.0
    target[r.span] += N_0
    np.testing.assert_allclose(sf.reconstruct(), target, atol=1e-9 * target[r.span].real)


def test_identity_noise_split():
    r = autocorrelation(get_builtin("identity"))
    nd = noise_decomposition(r, 1.0, 0.5, compute_P0(r, 1.0, 0.5))
    assert nd.sigmaS2 == 0.0
    assert nd.phi == 1.0
    assert nd.R == pytest.approx(2.0)


def test_noise_split_positive():
    for h in builtin_channels():
        r = autocorrelation(h)
        nd = noise_decomposition(r, 1.0, 0.1, compute_P0(r, 1.0, 0.1))
        assert 0 < nd.sigmaS2 < nd.sigmaV2
        assert 0 < nd.phi < 1
        assert nd.sigmaN2 + nd.sigmaS2 == pytest.approx(nd.sigmaV2, rel=1e-12)


def test_degenerate():
    r = autocorrelation(get_builtin("identity"))
    with pytest.raises(DegenerateDFE):
        noise_decomposition(r, 1.0, 1.0, 0.5)
    # a spectrum with a zero is still fine once noise is added; negative is not
    bad = Autocorrelation(np.array([1.0, 1.0, 1.0]))
    with pytest.raises(NonPositiveSpectrum):
        spectral_factorize(bad, 1.0, 1e-3)
