"""WAV ingestion and log-mel patches in the layout the embedding extractor expects.

The STFT and mel constants follow the released VGGish feature frontend:
25 ms periodic Hann window, 10 ms hop, 512-point FFT magnitude, 64 HTK mel
bands between 125 and 7500 Hz, and ``log(mel + 0.01)``.  Resampling is plain
linear interpolation, which aliases content above the new Nyquist rate.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, FormatError, UnsupportedFormatError


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: int = 16000
    window_seconds: float = 0.025
    hop_seconds: float = 0.010
    num_mel_bins: int = 64
    mel_min_hz: float = 125.0
    mel_max_hz: float = 7500.0
    log_offset: float = 0.01
    patch_frames: int = 96

    @property
    def window_length(self) -> int:
        return int(round(self.window_seconds * self.sample_rate))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_seconds * self.sample_rate))

    @property
    def fft_length(self) -> int:
        return 2 ** int(np.ceil(np.log2(self.window_length)))

    @property
    def patch_seconds(self) -> float:
        return self.patch_frames * self.hop_seconds


DEFAULT_FRONTEND = FrontendConfig()


@dataclass(frozen=True)
class PcmSignal:
    """Float samples in [-1, 1], shaped ``(n,)`` for mono or ``(n, channels)``."""

    samples: np.ndarray
    sample_rate: int

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MelPatch:
    frames: np.ndarray  # (96, 64)
    start_time: float


def load_wav(path) -> PcmSignal:
    """Read a 16-bit PCM RIFF/WAVE file.

    Other encodings raise :class:`UnsupportedFormatError`; convert them
    externally (e.g. with ffmpeg) first.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            width = wf.getsampwidth()
            channels = wf.getnchannels()
            rate = wf.getframerate()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        if msg.startswith("unknown format"):
            raise UnsupportedFormatError(
                f"{path}: {msg}; only integer PCM is decoded, convert externally"
            ) from exc
        raise FormatError(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV header") from exc
    if width != 2:
        raise UnsupportedFormatError(
            f"{path}: {8 * width}-bit PCM; only 16-bit is decoded, convert externally"
        )
    if rate <= 0 or channels <= 0:
        raise FormatError(f"{path}: invalid rate {rate} or channel count {channels}")
    ints = np.frombuffer(raw, dtype="<i2")
    usable = len(ints) - len(ints) % channels
    samples = ints[:usable].astype(np.float64) / 32768.0
    if channels > 1:
        samples = samples.reshape(-1, channels)
    return PcmSignal(samples, rate)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write float samples in [-1, 1] as 16-bit PCM (clipped, round-to-nearest)."""
    samples = np.asarray(samples, dtype=np.float64)
    channels = 1 if samples.ndim == 1 else samples.shape[1]
    ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(ints.tobytes())


def resample_mono(signal: PcmSignal, target_rate: int = 16000) -> PcmSignal:
    samples = np.asarray(signal.samples, dtype=np.float64)
    if samples.shape[0] == 0:
        raise EmptyInputError("cannot resample an empty signal")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    n_in = samples.shape[0]
    if signal.sample_rate == target_rate:
        return PcmSignal(samples, target_rate)
    n_out = int(np.floor(n_in * target_rate / signal.sample_rate + 0.5))
    positions = np.arange(n_out) * (signal.sample_rate / target_rate)
    out = np.interp(positions, np.arange(n_in), samples)
    return PcmSignal(out, target_rate)


def frame_signal(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Non-padded framing: ``1 + (len - window) // hop`` rows, zero rows if too short."""
    n = samples.shape[0]
    if n < window:
        return np.zeros((0, window), dtype=samples.dtype)
    count = 1 + (n - window) // hop
    view = np.lib.stride_tricks.sliding_window_view(samples, window)
    return view[: (count - 1) * hop + 1 : hop]


def periodic_hann(length: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2 * np.pi / length * np.arange(length))


def hertz_to_mel(hz):
    return 1127.0 * np.log(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_filterbank(cfg: FrontendConfig = DEFAULT_FRONTEND) -> np.ndarray:
    """Triangular HTK-mel weights, shape ``(fft_length // 2 + 1, num_mel_bins)``."""
    n_bins = cfg.fft_length // 2 + 1
    nyquist = cfg.sample_rate / 2.0
    if not 0.0 <= cfg.mel_min_hz < cfg.mel_max_hz <= nyquist:
        raise ValueError("mel band edges must satisfy 0 <= low < high <= nyquist")
    bin_mel = hertz_to_mel(np.linspace(0.0, nyquist, n_bins))
    edges = np.linspace(
        hertz_to_mel(cfg.mel_min_hz), hertz_to_mel(cfg.mel_max_hz), cfg.num_mel_bins + 2
    )
    weights = np.empty((n_bins, cfg.num_mel_bins))
    for i in range(cfg.num_mel_bins):
        lower, center, upper = edges[i : i + 3]
        rising = (bin_mel - lower) / (center - lower)
        falling = (upper - bin_mel) / (upper - center)
        weights[:, i] = np.maximum(0.0, np.minimum(rising, falling))
    weights[0, :] = 0.0  # DC bin never contributes
    return weights


def log_mel_spectrogram(signal: PcmSignal, cfg: FrontendConfig = DEFAULT_FRONTEND) -> np.ndarray:
    """Log-mel frames of a mono signal at ``cfg.sample_rate``, shape ``(frames, 64)``."""
    samples = np.asarray(signal.samples, dtype=np.float64)
    if samples.ndim != 1 or signal.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"expected mono audio at {cfg.sample_rate} Hz; call resample_mono first"
        )
    frames = frame_signal(samples, cfg.window_length, cfg.hop_length)
    if frames.shape[0] == 0:
        return np.zeros((0, cfg.num_mel_bins))
    spectrum = np.abs(np.fft.rfft(frames * periodic_hann(cfg.window_length), cfg.fft_length))
    mel = spectrum @ mel_filterbank(cfg)
    return np.log(mel + cfg.log_offset)


def frame_examples(frames: np.ndarray, cfg: FrontendConfig = DEFAULT_FRONTEND) -> list[MelPatch]:
    n = frames.shape[0] // cfg.patch_frames
    return [
        MelPatch(
            frames[i * cfg.patch_frames : (i + 1) * cfg.patch_frames],
            start_time=i * cfg.patch_seconds,
        )
        for i in range(n)
    ]


def wav_to_patches(path, cfg: FrontendConfig = DEFAULT_FRONTEND) -> list[MelPatch]:
    signal = resample_mono(load_wav(path), cfg.sample_rate)
    return frame_examples(log_mel_spectrogram(signal, cfg), cfg)


def write_frames_csv(path, frames: np.ndarray) -> None:
    """One log-mel frame per row, 64 columns, full float precision."""
    np.savetxt(path, frames, delimiter=",", fmt="%.17g")
