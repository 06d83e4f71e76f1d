"""Finite-ISI channel responses, their autocorrelation and the built-in examples.

Taps are indexed causally from zero, so ``taps[i]`` is the coefficient of
``D**i`` in ``h(D)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChannelError, ChannelParseError, HermitianViolation

log = logging.getLogger(__name__)

PSD_SLACK = 1e-12
PSD_GRID = 4096


class Alphabet(enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"

    @property
    def size(self) -> int:
        return 2 if self is Alphabet.BPSK else 4

    @property
    def log_size(self) -> float:
        """Maximum rate in nats."""
        return math.log(self.size)

    def symbols(self, P_X: float = 1.0) -> np.ndarray:
        """Constellation points with average power ``P_X``, in index order."""
        if self is Alphabet.BPSK:
            return math.sqrt(P_X) * np.array([1.0, -1.0])
        a = math.sqrt(P_X / 2.0)
        return a * np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelResponse:
    """Discrete-time channel ``h(D)`` together with its input alphabet."""

    taps: np.ndarray
    alphabet: Alphabet = Alphabet.BPSK
    label: str = ""

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        if taps.ndim != 1 or taps.size == 0:
            raise ChannelError("channel needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise ChannelError("channel taps must be finite")
        if not np.any(np.abs(taps) > 0):
            raise ChannelError("channel has no nonzero tap")
        alphabet = Alphabet(self.alphabet)
        if alphabet is Alphabet.BPSK:
            if np.any(taps.imag != 0):
                raise ChannelError("BPSK channels must have real taps")
            taps = taps.real.astype(float)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "taps", _frozen(taps))

    @property
    def memory(self) -> int:
        return self.taps.size - 1

    @property
    def is_complex(self) -> bool:
        return self.alphabet is Alphabet.QPSK

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


@dataclass(frozen=True)
class Autocorrelation:
    """Lags ``r_{-nu} .. r_{nu}`` of ``R_hh(D) = h(D) h*(D^-*)``."""

    lags: np.ndarray = field(repr=False)

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=complex)
        if lags.ndim != 1 or lags.size % 2 == 0:
            raise HermitianViolation("autocorrelation needs an odd number of lags")
        nu = lags.size // 2
        if np.any(lags[:nu][::-1] != np.conj(lags[nu + 1 :])):
            raise HermitianViolation("r_{-k} != conj(r_k)")
        if lags[nu].imag != 0 or lags[nu].real < 0:
            raise HermitianViolation("r_0 must be real and nonnegative")
        object.__setattr__(self, "lags", _frozen(lags))

    @property
    def span(self) -> int:
        """Largest lag index nu."""
        return self.lags.size // 2

    @property
    def r0(self) -> float:
        return float(self.lags[self.span].real)

    def causal(self) -> np.ndarray:
        """``r_0 .. r_nu``."""
        return self.lags[self.span :]

    def lag(self, k: int) -> complex:
        if abs(k) > self.span:
            return 0j
        return complex(self.lags[self.span + k])

    def spectrum(self, theta) -> np.ndarray:
        """Real-valued ``R_hh(e^{-j theta})`` built from the causal half only."""
        theta = np.asarray(theta, dtype=float)
        r = self.causal()
        out = np.full(theta.shape, r[0].real)
        for k in range(1, r.size):
            out += 2.0 * (r[k].real * np.cos(k * theta) + r[k].imag * np.sin(k * theta))
        return out


def autocorrelation(h: ChannelResponse) -> Autocorrelation:
    """``r_k = sum_n h_n conj(h_{n-k})``; the negative lags are mirrored exactly."""
    taps = h.taps.astype(complex)
    nu = taps.size - 1
    # np.correlate(a, v)[k] = sum_n a[n+k] conj(v[n])
    full = np.correlate(taps, taps, mode="full")
    causal = full[nu:].copy()
    causal[0] = causal[0].real
    lags = np.concatenate([np.conj(causal[1:][::-1]), causal])
    return Autocorrelation(lags)


def psd_eval(r: Autocorrelation, theta):
    """Evaluate ``sum_k r_k e^{-j k theta}`` and return the real part.

    Raises :class:`HermitianViolation` if the imaginary residue is not
    negligible, which can only happen for lags that are not conjugate
    symmetric.
    """
    theta = np.asarray(theta, dtype=float)
    k = np.arange(-r.span, r.span + 1)
    val = np.exp(-1j * np.multiply.outer(theta, k)) @ r.lags
    if np.any(np.abs(val.imag) >= 1e-9 * np.abs(val.real) + 1e-12):
        raise HermitianViolation("spectrum has a non-negligible imaginary part")
    out = val.real
    return float(out) if out.ndim == 0 else out


def psd_grid(n: int = PSD_GRID) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


def _ch4_taps() -> np.ndarray:
    i = np.arange(11)
    return 1.6099 ** -0.5 / (1.0 + (i - 5.0) ** 2)


def builtin_channels() -> list[ChannelResponse]:
    """The five example channels, in the order they are studied."""
    chans = [
        ChannelResponse(2 ** -0.5 * np.array([1.0, 1.0]), Alphabet.BPSK,
                        "ch1: 2^-1/2 (1 + D)"),
        ChannelResponse(0.5 * np.array([1.0, 1.0, -1.0, -1.0]), Alphabet.BPSK,
                        "ch2: 2^-1 (1 + D - D^2 - D^3)"),
        ChannelResponse(np.array([0.19, 0.35, 0.46, 0.5, 0.46, 0.35, 0.19]), Alphabet.BPSK,
                        "ch3: 0.19 + 0.35D + 0.46D^2 + 0.5D^3 + 0.46D^4 + 0.35D^5 + 0.19D^6"),
        ChannelResponse(_ch4_taps(), Alphabet.BPSK,
                        "ch4: 1.6099^-1/2 sum_{i=0}^{10} D^i / (1 + (i-5)^2)"),
        ChannelResponse(0.5 * np.array([1 + 1j, 1 - 1j]), Alphabet.QPSK,
                        "ch5: 2^-1 ((1+j) + (1-j) D)"),
    ]
    for ch in chans:
        if abs(ch.energy - 1.0) > 1e-3:
            log.info("%s has tap energy %.6f (not unit)", ch.label, ch.energy)
    return chans


IDENTITY = ChannelResponse(np.array([1.0]), Alphabet.BPSK, "identity")

_NAMES = {
    "ch1": 0, "dicode": 0,
    "ch2": 1,
    "ch3": 2,
    "ch4": 3,
    "ch5": 4,
}


def builtin_names() -> list[str]:
    return ["identity", "ch1", "ch2", "ch3", "ch4", "ch5"]


def get_builtin(name: str) -> ChannelResponse:
    """Look up a built-in channel by name (``identity``, ``dicode``, ``ch1`` .. ``ch5``)."""
    key = name.strip().lower()
    if key == "identity":
        return IDENTITY
    if key not in _NAMES:
        raise ChannelError(f"unknown built-in channel {name!r}; choose from {builtin_names()}")
    return builtin_channels()[_NAMES[key]]


def _parse_tap(tok: str, line_no: int) -> complex:
    parts = tok.split(":")
    if len(parts) > 2:
        raise ChannelParseError(line_no, f"bad tap {tok!r}")
    try:
        re = float(parts[0])
        im = float(parts[1]) if len(parts) == 2 else 0.0
    except ValueError:
        raise ChannelParseError(line_no, f"bad tap {tok!r}") from None
    if not (math.isfinite(re) and math.isfinite(im)):
        raise ChannelParseError(line_no, f"non-finite tap {tok!r}")
    return complex(re, im)


def parse_channel(text: str) -> ChannelResponse:
    """Parse the line-oriented channel description format.

    ::

        # comment
        alphabet bpsk|qpsk
        taps <re>[:<im>] <re>[:<im>] ...
        label free text
    """
    alphabet = None
    taps = None
    taps_line = 0
    label = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        key = key.lower()
        rest = rest.strip()
        if key == "alphabet":
            if alphabet is not None:
                raise ChannelParseError(line_no, "duplicate alphabet directive")
            try:
                alphabet = Alphabet(rest.lower())
            except ValueError:
                raise ChannelParseError(line_no, f"unknown alphabet {rest!r}") from None
        elif key == "taps":
            if taps is not None:
                raise ChannelParseError(line_no, "duplicate taps directive")
            if not rest:
                raise ChannelParseError(line_no, "taps directive needs at least one value")
            taps = [_parse_tap(t, line_no) for t in rest.split()]
            taps_line = line_no
        elif key == "label":
            label = rest
        else:
            raise ChannelParseError(line_no, f"unknown directive {key!r}")
    if taps is None:
        raise ChannelParseError(0, "missing taps directive")
    alphabet = alphabet or Alphabet.BPSK
    if alphabet is Alphabet.BPSK and any(t.imag != 0 for t in taps):
        raise ChannelParseError(taps_line, "complex taps are only allowed with alphabet qpsk")
    try:
        return ChannelResponse(np.array(taps), alphabet, label)
    except ChannelError as e:
        raise ChannelParseError(taps_line, str(e)) from None


def load_channel(path) -> ChannelResponse:
    return parse_channel(Path(path).read_text(encoding="utf-8"))


def format_channel(h: ChannelResponse) -> str:
    """Inverse of :func:`parse_channel`."""
    toks = []
    for t in h.taps.astype(complex):
        re, im = repr(float(t.real)), repr(float(t.imag))
        toks.append(re if t.imag == 0 else f"{re}:{im}")
    lines = [f"alphabet {h.alphabet.value}", "taps " + " ".join(toks)]
    if h.label:
        lines.append(f"label {h.label}")
    return "\n".join(lines) + "\n"
