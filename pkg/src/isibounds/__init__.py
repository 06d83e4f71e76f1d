"""Lower bounds on the i.u.d. information rate of finite-ISI Gaussian channels."""

from .bounds import (BoundPoint, F_exact, F_exact_taps, F_l, F_slc, F_u1, F_u2, bound_point,
                     bounds_at, equalize, snr_to_N0)
from .channel import (IDENTITY, Alphabet, Autocorrelation, ChannelResponse, autocorrelation,
                      builtin_channels, get_builtin, load_channel, parse_channel)
from .dfe import ClusterSet, PrecursorProfile, enumerate_rho, precursor_taps, select_clusters
from .quadrature import ADAPTIVE, DEFAULT_RULE, GH96, QuadKind, QuadratureRule
from .sir_mc import SirEstimate, TrellisSpec, build_trellis, estimate_sir
from .spectral import compute_P0, noise_decomposition, spectral_factorize

__version__ = "0.1.0"
