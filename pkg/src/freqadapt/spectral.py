"""Per-channel 2D Fourier transforms and amplitude/phase machinery.

Conventions, fixed so round-trip and cross-implementation tests are
unambiguous:

* transforms act on the H x W plane of each channel independently;
* the forward transform is unnormalized (DC bin = sum of spatial values),
  the inverse carries the 1/(H*W) factor;
* amplitude is sqrt(re^2 + im^2 + 1e-24); the epsilon keeps the gradient
  of amplitude defined at zero bins and perturbs any bin with magnitude
  above 1e-6 by less than 1e-12;
* phase is atan2(im, re), normalized to (-pi, pi].

Optional per-channel threading is controlled by the env var
``FREQADAPT_THREADS`` (unset/1 = sequential, 0 = one worker per CPU,
N = N workers). Channels are computed independently either way, so the
result is bitwise identical to sequential evaluation.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ShapeMismatchError, SymmetryViolationError
from .tensor import FeatureMap, Matrix, _frozen

AMP_EPS = 1e-24

ORACLE_MAX_PLANE = 4096  # H*W guard for the quadratic-time oracle


def _locked(arr: np.ndarray) -> bool:
    return arr.dtype == np.float64 and not arr.flags.writeable and arr.base is None


class Spectrum:
    """Complex frequency bins (c, u, v) for a C x H x W map."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.complex128)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"Spectrum needs 3 axes, got shape {arr.shape}")
        self.data = _frozen(arr, dtype=np.complex128)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def real_part(self) -> np.ndarray:
        return self.data.real

    @property
    def imag_part(self) -> np.ndarray:
        return self.data.imag

    def conjugate_asymmetry(self) -> float:
        """Max |Z(u, v) - conj(Z(-u, -v))| over all bins; ~0 for spectra of real maps."""
        flipped = self.data[:, ::-1, ::-1]
        mirrored = np.roll(flipped, shift=(1, 1), axis=(1, 2))
        return float(np.abs(self.data - np.conj(mirrored)).max())

    def __repr__(self):
        c, h, w = self.shape
        return f"Spectrum({c}x{h}x{w})"


class AmpPhase:
    """Polar form of a spectrum: amplitude and phase arrays, bins (c, u, v).

    Amplitude is nonnegative when produced by :func:`decompose`; signed
    values are permitted (they compose back exactly as pi phase flips).
    """

    __slots__ = ("amplitude", "phase")

    def __init__(self, amplitude, phase):
        amp = np.asarray(amplitude, dtype=np.float64)
        ph = np.asarray(phase, dtype=np.float64)
        if amp.ndim != 3 or ph.shape != amp.shape:
            raise ShapeMismatchError(
                f"amplitude/phase shapes disagree: {amp.shape} vs {ph.shape}"
            )
        # already-locked owning arrays pass through so phase stays bit-identical
        self.amplitude = amp if _locked(amp) else _frozen(amp)
        self.phase = ph if _locked(ph) else _frozen(ph)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.amplitude.shape

    def __repr__(self):
        c, h, w = self.shape
        return f"AmpPhase({c}x{h}x{w})"


def _thread_count() -> int:
    raw = os.environ.get("FREQADAPT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"FREQADAPT_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"FREQADAPT_THREADS must be >= 0, got {n}")
    if n == 0:
        return os.cpu_count() or 1
    return n


def _map_channels(fn, arr: np.ndarray) -> np.ndarray:
    channels = [np.ascontiguousarray(arr[c]) for c in range(arr.shape[0])]
    workers = min(_thread_count(), len(channels))
    if workers <= 1 or len(channels) == 1:
        results = [fn(ch) for ch in channels]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, channels))
    return np.stack(results)


def fft2(x: FeatureMap) -> Spectrum:
    """Unnormalized forward transform of each channel's H x W plane."""
    return Spectrum(_map_channels(np.fft.fft2, x.data.astype(np.complex128)))


def ifft2(s: Spectrum) -> tuple[FeatureMap, float]:
    """Inverse transform with 1/(H*W) normalization.

    Returns the real part together with the max absolute imaginary
    residue. A residue above 1e-6 of the output magnitude means the
    spectrum was not conjugate-symmetric and raises
    :class:`SymmetryViolationError`.
    """
    full = _map_channels(np.fft.ifft2, s.data)
    real = np.ascontiguousarray(full.real)
    residue = float(np.abs(full.imag).max())
    limit = 1e-6 * float(np.abs(real).max())
    if residue > limit:
        raise SymmetryViolationError(
            f"imaginary residue {residue:.3e} exceeds {limit:.3e}; spectrum is not conjugate-symmetric"
        )
    return FeatureMap(real), residue


def dft2_oracle(x: FeatureMap) -> Spectrum:
    """Direct double-sum 2D DFT, the quadratic-time correctness oracle.

    Evaluates the defining sums via explicit transform matrices; no fast
    factorization of any kind is involved.
    """
    c, h, w = x.shape
    if h * w > ORACLE_MAX_PLANE:
        raise ValueError(f"oracle plane {h}x{w} exceeds guard of {ORACLE_MAX_PLANE} bins")
    eh = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    ew = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    out = np.empty((c, h, w), dtype=np.complex128)
    for ch in range(c):
        out[ch] = eh @ x.data[ch].astype(np.complex128) @ ew.T
    return Spectrum(out)


def decompose(s: Spectrum) -> AmpPhase:
    """Split a spectrum into amplitude and phase."""
    amp = np.sqrt(s.data.real**2 + s.data.imag**2 + AMP_EPS)
    phase = np.arctan2(s.data.imag, s.data.real)
    phase = np.where(phase == -np.pi, np.pi, phase)  # keep phase in (-pi, pi]
    return AmpPhase(amp, phase)


def compose(ap: AmpPhase) -> Spectrum:
    """Rebuild a spectrum as amplitude * exp(i * phase).

    Negative amplitudes are legal and exact: they are the same spectrum as
    |amplitude| with the phase flipped by pi.
    """
    re = ap.amplitude * np.cos(ap.phase)
    im = ap.amplitude * np.sin(ap.phase)
    return Spectrum(re + 1j * im)


def _radius_grid(h: int, w: int) -> np.ndarray:
    cy, cx = h // 2, w // 2
    dy = (np.arange(h) - cy) / max(cy, 1)
    dx = (np.arange(w) - cx) / max(cx, 1)
    return np.sqrt(dy[:, None] ** 2 + dx[None, :] ** 2) / math.sqrt(2.0)


def band_energy(ap: AmpPhase, radial_cut: float) -> tuple[float, float]:
    """Squared-amplitude energy below/above a normalized radial cut.

    The spectrum is centered (DC at the array center) and every bin gets a
    radius in [0, 1] (corner bins at 1). Returns (low, high) sums averaged
    over channels.
    """
    if not 0.0 < radial_cut < 1.0:
        raise ValueError(f"radial_cut must be in (0, 1), got {radial_cut}")
    _, h, w = ap.shape
    power = np.fft.fftshift(ap.amplitude**2, axes=(1, 2))
    low_mask = _radius_grid(h, w) <= radial_cut
    low = float(power[:, low_mask].sum(axis=1).mean())
    high = float(power[:, ~low_mask].sum(axis=1).mean())
    return low, high


def heatmap(ap: AmpPhase) -> Matrix:
    """Channel-averaged log(1 + amplitude), centered with DC in the middle."""
    avg = np.log1p(ap.amplitude).mean(axis=0)
    return Matrix(np.fft.fftshift(avg))
