"""Signal conditioning for raw PPG segments.

Chain: median filter -> zero-phase Chebyshev-II low-pass -> linear detrend
-> z-score normalization, with optional winsorizing.  Filter design and the
forward-backward pass are delegated to scipy.signal; the surrounding
contracts (edge handling, conventions, validation) live here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .dataset import PpgSegment


class PreprocessError(Exception):
    pass


class EvenKernel(PreprocessError):
    pass


class KernelTooLarge(PreprocessError):
    pass


class InvalidSpec(PreprocessError):
    pass


class SignalTooShort(PreprocessError):
    pass


class TooShort(PreprocessError):
    pass


class ZeroVariance(PreprocessError):
    pass


@dataclass(frozen=True)
class IirFilter:
    b: np.ndarray
    a: np.ndarray
    order: int
    cutoff_hz: float
    stopband_attenuation_db: float
    sample_rate_hz: float

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex response H(f) evaluated directly from the coefficients."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate_hz
        z = np.exp(-1j * w)
        num = np.polynomial.polynomial.polyval(z, self.b)
        den = np.polynomial.polynomial.polyval(z, self.a)
        return num / den

    def is_stable(self) -> bool:
        poles = np.roots(self.a)
        return bool(np.all(np.abs(poles) < 1.0))


@dataclass(frozen=True)
class PreprocessConfig:
    median_kernel: int = 3
    filter_order: int = 4
    cutoff_hz: float = 25.0
    stopband_attenuation_db: float = 10.0
    sample_rate_hz: float = 1000.0
    detrend: str = "linear"
    normalize: str = "zscore"
    # winsorize at +/- clip_sigma standard deviations; disabled by default
    clip_sigma: float | None = None


def median_filter(signal, kernel: int) -> np.ndarray:
    """Sliding median with boundary samples replicated at the edges."""
    x = np.asarray(signal, dtype=np.float64)
    if kernel % 2 == 0 or kernel < 1:
        raise EvenKernel(f"kernel must be odd and >= 1, got {kernel}")
    if kernel > len(x):
        raise KernelTooLarge(f"kernel {kernel} exceeds signal length {len(x)}")
    if kernel == 1:
        return x.copy()
    half = kernel // 2
    padded = np.concatenate([np.full(half, x[0]), x, np.full(half, x[-1])])
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel)
    return np.median(windows, axis=1)


def design_cheby2(order: int = 4, cutoff_hz: float = 25.0, atten_db: float = 10.0,
                  fs_hz: float = 1000.0) -> IirFilter:
    """Chebyshev-II low-pass; cutoff is the stopband edge where the
    attenuation spec is met exactly."""
    if order < 1:
        raise InvalidSpec(f"order must be >= 1, got {order}")
    if not (0 < cutoff_hz < fs_hz / 2):
        raise InvalidSpec(f"cutoff {cutoff_hz} Hz outside (0, Nyquist={fs_hz / 2})")
    if atten_db <= 0:
        raise InvalidSpec(f"attenuation must be > 0 dB, got {atten_db}")
    b, a = scipy.signal.cheby2(order, atten_db, cutoff_hz, btype="low", fs=fs_hz)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64) / a[0]
    a = a / a[0]
    filt = IirFilter(b=b, a=a, order=order, cutoff_hz=cutoff_hz,
                     stopband_attenuation_db=atten_db, sample_rate_hz=fs_hz)
    if not filt.is_stable():
        raise InvalidSpec("designed filter is unstable")
    return filt


def filtfilt(filt: IirFilter, signal) -> np.ndarray:
    """Zero-phase forward-backward filtering with odd-reflection padding of
    3 x order on each side."""
    x = np.asarray(signal, dtype=np.float64)
    padlen = 3 * filt.order
    if len(x) <= padlen:
        raise SignalTooShort(f"signal length {len(x)} must exceed {padlen}")
    return scipy.signal.filtfilt(filt.b, filt.a, x, padtype="odd", padlen=padlen)


def detrend(signal) -> np.ndarray:
    """Remove the least-squares linear trend."""
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < 2:
        raise TooShort(f"need length >= 2, got {len(x)}")
    return scipy.signal.detrend(x, type="linear")


def normalize(signal) -> np.ndarray:
    """Z-score with population (divide-by-N) standard deviation."""
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < 2:
        raise TooShort(f"need length >= 2, got {len(x)}")
    std = x.std()
    if std == 0:
        raise ZeroVariance("constant signal has no z-score")
    return (x - x.mean()) / std


def winsorize(signal, n_sigma: float) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    mu, sd = x.mean(), x.std()
    return np.clip(x, mu - n_sigma * sd, mu + n_sigma * sd)


def preprocess_signal(signal, config: PreprocessConfig = PreprocessConfig()) -> np.ndarray:
    x = median_filter(signal, config.median_kernel)
    filt = design_cheby2(config.filter_order, config.cutoff_hz,
                         config.stopband_attenuation_db, config.sample_rate_hz)
    x = filtfilt(filt, x)
    x = detrend(x)
    if config.clip_sigma is not None:
        x = winsorize(x, config.clip_sigma)
    return normalize(x)


def preprocess_pipeline(raw: PpgSegment, config: PreprocessConfig = PreprocessConfig()) -> PpgSegment:
    processed = preprocess_signal(raw.samples, config)
    return PpgSegment(samples=processed, sample_rate_hz=raw.sample_rate_hz, record=raw.record)
