"""CSI window -> bounded time-frequency features.

Pipeline: optional uniform resampling on timestamps, per-subcarrier STFT
magnitude averaged across subcarriers, then log compression with
per-frequency min-max normalization fitted on the training split (values
outside the training range clamp to [0, 1]).

Frames are left-aligned: frame ``m`` covers samples ``[m*H, m*H + N)``.
The input is complex, so the two-sided transform is folded to ``N/2 + 1``
bins by summing the magnitudes at ``+k`` and ``-k``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .signal_gen import CsiWindow


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 256
    hop: int = 64
    window_fn: str = "hann"
    eps0: float = 1e-6

    def __post_init__(self) -> None:
        n = self.fft_size
        if n < 2 or (n & (n - 1)) != 0:
            raise InvalidArgument("fft_size must be a power of two")
        if not 1 <= self.hop <= n:
            raise InvalidArgument("hop must be in [1, fft_size]")
        if self.window_fn != "hann":
            raise InvalidArgument(f"unsupported window_fn {self.window_fn!r}")
        if self.eps0 <= 0:
            raise InvalidArgument("eps0 must be positive")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def num_frames(self, num_samples: int) -> int:
        return (num_samples - self.fft_size) // self.hop + 1


@dataclass
class Spectrogram:
    values: np.ndarray       # nonnegative [T_f x F]
    frame_rate: float
    freq_resolution: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidArgument("spectrogram must be 2-D")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise InvalidArgument("spectrogram entries must be finite and >= 0")


@dataclass
class NormStats:
    """Per-frequency min/max of log(1 + S) over the training split."""

    log_min: np.ndarray      # [F]
    log_max: np.ndarray      # [F]
    eps0: float
    stats_id: str = ""

    def __post_init__(self) -> None:
        self.log_min = np.asarray(self.log_min, dtype=np.float64)
        self.log_max = np.asarray(self.log_max, dtype=np.float64)
        if self.log_min.shape != self.log_max.shape or self.log_min.ndim != 1:
            raise InvalidArgument("norm stats must be two aligned 1-D rows")
        if np.any(self.log_max < self.log_min):
            raise InvalidArgument("per-frequency max must be >= min")
        if not self.stats_id:
            digest = hashlib.sha256()
            digest.update(self.log_min.tobytes())
            digest.update(self.log_max.tobytes())
            digest.update(np.float64(self.eps0).tobytes())
            self.stats_id = digest.hexdigest()[:12]

    @property
    def num_bins(self) -> int:
        return self.log_min.shape[0]


@dataclass
class BoundedFeature:
    values: np.ndarray       # [T_f x F] in [0, 1]
    norm_stats_id: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise InvalidArgument("bounded feature entries must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def resample_uniform(w: CsiWindow, target_len: int) -> CsiWindow:
    """Linear interpolation onto a uniform grid spanning [t_0, t_last].

    Real and imaginary parts are interpolated independently per subcarrier.
    """
    if target_len < 2:
        raise InvalidArgument("target_len must be >= 2")
    if w.num_samples < 2:
        raise DegenerateInput("need at least 2 surviving rows to resample")
    t_new = np.linspace(w.timestamps[0], w.timestamps[-1], target_len)
    out = np.empty((target_len, w.num_subcarriers), dtype=np.complex128)
    for c in range(w.num_subcarriers):
        re = np.interp(t_new, w.timestamps, w.samples[:, c].real)
        im = np.interp(t_new, w.timestamps, w.samples[:, c].imag)
        out[:, c] = re + 1j * im
    return CsiWindow(
        samples=out,
        timestamps=t_new,
        activity_label=w.activity_label,
        subject_id=w.subject_id,
        room_id=w.room_id,
        member_flag=w.member_flag,
        resp_rate_hz=w.resp_rate_hz,
    )


def stft_magnitude(w: CsiWindow, cfg: StftConfig, sample_rate: float | None = None) -> Spectrogram:
    """Subcarrier-averaged STFT magnitude with folded negative frequencies."""
    t_len = w.num_samples
    n, hop = cfg.fft_size, cfg.hop
    if t_len < n:
        raise InvalidArgument(f"window has {t_len} samples, need >= fft_size {n}")
    t_f = cfg.num_frames(t_len)
    win = hann_window(n)

    # [T_f x N x N_c] view of the framed signal.
    idx = (np.arange(t_f) * hop)[:, None] + np.arange(n)[None, :]
    frames = w.samples[idx] * win[None, :, None]
    spec = np.fft.fft(frames, axis=1)
    mag = np.abs(spec)

    half = n // 2
    folded = np.empty((t_f, half + 1, w.num_subcarriers))
    folded[:, 0] = mag[:, 0]
    folded[:, half] = mag[:, half]
    if half > 1:
        # bin k collects |X[k]| + |X[n - k]| for k = 1 .. half-1
        folded[:, 1:half] = mag[:, 1:half] + mag[:, n - 1: half: -1]

    avg = folded.mean(axis=2)

    if sample_rate is None:
        dt = np.diff(w.timestamps)
        sample_rate = 1.0 / float(np.mean(dt))
    return Spectrogram(
        values=avg,
        frame_rate=sample_rate / hop,
        freq_resolution=sample_rate / n,
    )


def fit_norm_stats(train: list[Spectrogram], eps0: float = 1e-6) -> NormStats:
    """Per-frequency min/max of log(1 + S) across all frames and windows."""
    if not train:
        raise InvalidArgument("need at least one training spectrogram")
    f = train[0].values.shape[1]
    log_min = np.full(f, np.inf)
    log_max = np.full(f, -np.inf)
    for s in train:
        if s.values.shape[1] != f:
            raise InvalidArgument("inconsistent frequency bin counts in training set")
        logs = np.log1p(s.values)
        log_min = np.minimum(log_min, logs.min(axis=0))
        log_max = np.maximum(log_max, logs.max(axis=0))
    return NormStats(log_min=log_min, log_max=log_max, eps0=eps0)


def normalize_bounded(s: Spectrogram, stats: NormStats) -> BoundedFeature:
    """clamp((log(1+S) - min_f) / (max_f - min_f + eps0), 0, 1) per entry."""
    if s.values.shape[1] != stats.num_bins:
        raise InvalidArgument(
            f"spectrogram has {s.values.shape[1]} bins, stats expect {stats.num_bins}"
        )
    logs = np.log1p(s.values)
    span = stats.log_max - stats.log_min + stats.eps0
    x = (logs - stats.log_min[None, :]) / span[None, :]
    return BoundedFeature(values=np.clip(x, 0.0, 1.0), norm_stats_id=stats.stats_id)
