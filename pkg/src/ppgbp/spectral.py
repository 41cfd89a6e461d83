"""Time-frequency and source-separation front-ends: STFT and FastICA.

The STFT is framed as hop-strided windows times a one-sided DFT (optionally
zero-padded).  FastICA is the symmetric fixed-point variant with a tanh
contrast function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

LOG_EPS = 1e-10


class SpectralError(Exception):
    pass


class InvalidLength(SpectralError):
    pass


class SignalTooShort(SpectralError):
    pass


class TooFewSamples(SpectralError):
    pass


class NoConvergence(SpectralError):
    def __init__(self, max_iters):
        super().__init__(f"no convergence after {max_iters} iterations")
        self.max_iters = max_iters


class RankDeficient(SpectralError):
    pass


@dataclass(frozen=True)
class StftConfig:
    window_length: int = 256
    hop: int = 64
    window: str = "hann"
    fft_length: int | None = None

    def __post_init__(self):
        n = self.window_length
        nfft = self.fft_length if self.fft_length is not None else n
        if not (1 <= self.hop <= n <= nfft):
            raise InvalidLength(f"require 1 <= hop <= window_length <= fft_length, got {self}")

    @property
    def nfft(self) -> int:
        return self.fft_length if self.fft_length is not None else self.window_length


def make_window(kind: str, n: int) -> np.ndarray:
    if n < 2:
        raise InvalidLength(f"window length must be >= 2, got {n}")
    if kind == "hann":
        # periodic form: w[k] = 0.5 (1 - cos(2 pi k / n))
        k = np.arange(n)
        return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))
    if kind == "rectangular":
        return np.ones(n)
    raise ValueError(f"unknown window kind {kind!r}")


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # (frames, bins) complex
    config: StftConfig
    sample_rate_hz: float

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path):
        mags = log_magnitude(self)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"bin_{k}" for k in range(self.n_bins)])
            for row in mags:
                writer.writerow([repr(v) for v in row])


def stft(signal, config: StftConfig, sample_rate_hz: float = 1000.0) -> Spectrogram:
    """Frame m covers samples [m*hop, m*hop + window_length)."""
    x = np.asarray(signal, dtype=np.float64)
    n = config.window_length
    if len(x) < n:
        raise SignalTooShort(f"signal length {len(x)} < window length {n}")
    w = make_window(config.window, n)
    frames = np.lib.stride_tricks.sliding_window_view(x, n)[::config.hop]
    values = np.fft.rfft(frames * w, n=config.nfft, axis=1)
    return Spectrogram(values=values, config=config, sample_rate_hz=sample_rate_hz)


def log_magnitude(spec: Spectrogram) -> np.ndarray:
    return np.log(np.abs(spec.values) + LOG_EPS)


def ica_center(X) -> tuple[np.ndarray, np.ndarray]:
    """Subtract each row's mean; X is (n signals) x (T samples)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] < 2:
        raise TooFewSamples(f"need T >= 2 samples, got {X.shape[1]}")
    means = X.mean(axis=1)
    return X - means[:, None], means


@dataclass(frozen=True)
class IcaModel:
    rotation: np.ndarray   # orthogonal components-in-whitened-space matrix
    whitening: np.ndarray  # maps centered data to unit covariance
    mean: np.ndarray
    n_iter: int

    @property
    def unmixing(self) -> np.ndarray:
        return self.rotation @ self.whitening

    @property
    def mixing(self) -> np.ndarray:
        return np.linalg.pinv(self.unmixing)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self.unmixing @ (X - self.mean[:, None])


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    # W <- (W W^T)^(-1/2) W
    vals, vecs = np.linalg.eigh(W @ W.T)
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.T @ W


def whiten(X, n_components: int):
    """Whitening transform K with cov(K X) = I."""
    X = np.asarray(X, dtype=np.float64)
    cov = X @ X.T / X.shape[1]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:n_components]
    vals, vecs = vals[order], vecs[:, order]
    if np.min(vals) < 1e-12 * np.max(vals):
        raise RankDeficient("observation covariance is (near) singular")
    K = (vecs / np.sqrt(vals)).T
    return K @ X, K


def fastica_fit(X, n_components: int | None = None, seed: int = 0,
                max_iters: int = 500, tol: float = 1e-6) -> IcaModel:
    """Symmetric fixed-point ICA with tanh nonlinearity.

    X is (n signals) x (T samples); centering is applied internally.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n_components is None:
        n_components = n
    if n_components > n:
        raise ValueError(f"n_components {n_components} > n signals {n}")
    Xc, mean = ica_center(X)
    Z, K = whiten(Xc, n_components)
    T = Z.shape[1]

    rng = np.random.default_rng(seed)
    W = _sym_decorrelate(rng.standard_normal((n_components, n_components)))
    for it in range(1, max_iters + 1):
        G = np.tanh(W @ Z)
        g_prime = (1.0 - G**2).mean(axis=1)
        W_new = _sym_decorrelate(G @ Z.T / T - g_prime[:, None] * W)
        delta = np.max(np.abs(1.0 - np.abs(np.sum(W_new * W, axis=1))))
        W = W_new
        if delta <= tol:
            return IcaModel(rotation=W, whitening=K, mean=mean, n_iter=it)
    raise NoConvergence(max_iters)
