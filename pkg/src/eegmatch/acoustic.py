"""Acoustic speech features: subband envelope, mel spectrogram and VAD.

All three return 64 Hz streams time-aligned to the preprocessed EEG. The
envelope and mel spectrogram are band-limited to 0.5-32 Hz with the same
filter family as the EEG; the binary VAD is not filtered.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

from .errors import InvalidInputError
from .preproc import band_filter_stream, resample
from .tensors import TimeSeriesTensor

FRAME_RATE = 64.0
ENVELOPE_BANDS = 28
ENVELOPE_EXPONENT = 0.6
MEL_BANDS = 28
MEL_FMIN = 50.0
MEL_FMAX = 5000.0
VAD_FRAME_S = 0.015
VAD_PERCENTILE = 75.0
PREEMPHASIS = 0.97

# Glasberg & Moore ERB-rate constants for gammatone center-frequency spacing.
_EAR_Q = 9.26449
_MIN_BW = 24.7


def read_wav(path: str | Path) -> TimeSeriesTensor:
    """Mono WAV (16-bit or float PCM) as a 1 x T tensor in [-1, 1]."""
    fs, data = wavfile.read(path)
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    else:
        data = data.astype(np.float64)
    return TimeSeriesTensor(data[None, :], float(fs))


def write_wav(path: str | Path, audio: TimeSeriesTensor) -> None:
    if audio.n_channels != 1:
        raise InvalidInputError("only mono audio is written")
    wavfile.write(path, int(audio.fs), audio.data[0].astype(np.float32))


def _check_mono(audio: TimeSeriesTensor, min_fs: float) -> np.ndarray:
    if audio.n_channels != 1:
        raise InvalidInputError(f"expected mono audio, got {audio.n_channels} channels")
    if audio.fs < min_fs:
        raise InvalidInputError(f"audio rate {audio.fs} Hz below required {min_fs} Hz")
    return audio.data[0]


def erb_space(low_hz: float, high_hz: float, n: int) -> np.ndarray:
    """n center frequencies equally spaced on the ERB-rate scale."""
    lo = np.log(1.0 + low_hz / (_EAR_Q * _MIN_BW))
    hi = np.log(1.0 + high_hz / (_EAR_Q * _MIN_BW))
    return _EAR_Q * _MIN_BW * (np.exp(np.linspace(lo, hi, n)) - 1.0)


def gammatone_subbands(x: np.ndarray, fs: float, center_hz: np.ndarray) -> np.ndarray:
    """Apply an IIR gammatone bank; returns bands x time.

    Filters run as second-order sections; the direct ba form is numerically
    unusable at low center frequencies relative to fs.
    """
    out = np.empty((center_hz.size, x.size))
    for i, fc in enumerate(center_hz):
        b, a = signal.gammatone(fc, "iir", fs=fs)
        out[i] = signal.sosfilt(signal.tf2sos(b, a), x)
    return out


def envelope_powerlaw(
    audio: TimeSeriesTensor,
    exponent: float = ENVELOPE_EXPONENT,
    n_bands: int = ENVELOPE_BANDS,
    band_limit: bool = True,
) -> TimeSeriesTensor:
    """Auditory-subband amplitude envelope with power-law compression.

    A 28-band gammatone filterbank spaced 50-5000 Hz on the ERB scale feeds
    per-band magnitudes raised to ``exponent``; bands are averaged, the
    result band-limited to 0.5-32 Hz and resampled to 64 Hz. Disable
    ``band_limit`` to inspect the raw nonnegative envelope at audio rate.
    """
    x = _check_mono(audio, min_fs=8000.0)
    cfs = erb_space(MEL_FMIN, min(MEL_FMAX, audio.fs / 2.0 * 0.9), n_bands)
    sub = np.abs(gammatone_subbands(x, audio.fs, cfs)) ** exponent
    env = TimeSeriesTensor(sub.mean(axis=0, keepdims=True), audio.fs)
    if not band_limit:
        return env
    env = band_filter_stream(env)
    return resample(env, FRAME_RATE)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, fs: float, fmin: float, fmax: float) -> np.ndarray:
    """Unit-height triangular filters, mel-spaced; shape (n_bands, n_fft//2+1)."""
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_bands + 2))
    bin_hz = np.fft.rfftfreq(n_fft, 1.0 / fs)
    bank = np.zeros((n_bands, bin_hz.size))
    for i in range(n_bands):
        lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        bank[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def stft_frames_64hz(x: np.ndarray, fs: float, window_s: float = 0.025) -> np.ndarray:
    """Magnitude STFT with frames centered on the 64 Hz grid.

    Frame ``n`` is centered at ``n / 64`` s; a 25 ms Hann window is applied
    and the FFT zero-padded to the next power of two. Returns
    (n_fft//2 + 1) x n_frames.
    """
    n_frames = int(round(x.size / fs * FRAME_RATE))
    win_len = int(round(window_s * fs))
    n_fft = 1 << (win_len - 1).bit_length()
    window = np.hanning(win_len)
    centers = np.round(np.arange(n_frames) * fs / FRAME_RATE).astype(int)
    starts = centers - win_len // 2
    padded = np.pad(x, (win_len, win_len))
    frames = np.stack([padded[s + win_len : s + 2 * win_len] for s in starts])
    return np.abs(np.fft.rfft(frames * window, n=n_fft, axis=1)).T


def mel_spectrogram(audio: TimeSeriesTensor, band_limit: bool = True) -> TimeSeriesTensor:
    """28-band mel magnitude spectrogram, 50-5000 Hz, at exactly 64 frames/s.

    No log compression is applied; after the filterbank each band is
    band-limited to 0.5-32 Hz (realized as the 0.5 Hz highpass at fs = 64).
    """
    x = _check_mono(audio, min_fs=2 * MEL_FMAX)
    spec = stft_frames_64hz(x, audio.fs)
    bank = mel_filterbank(MEL_BANDS, 2 * (spec.shape[0] - 1), audio.fs, MEL_FMIN, MEL_FMAX)
    mel = TimeSeriesTensor(bank @ spec, FRAME_RATE)
    if not band_limit:
        return mel
    return band_filter_stream(mel)


def vad_frame_energies(audio: TimeSeriesTensor) -> np.ndarray:
    """Pre-emphasized energy of consecutive non-overlapping 15 ms frames."""
    x = _check_mono(audio, min_fs=1.0 / VAD_FRAME_S)
    frame_len = int(round(VAD_FRAME_S * audio.fs))
    n_frames = x.size // frame_len
    if n_frames < 1:
        raise InvalidInputError(
            f"story of {x.size} samples shorter than one {frame_len}-sample frame"
        )
    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - PREEMPHASIS * x[:-1]
    frames = emphasized[: n_frames * frame_len].reshape(n_frames, frame_len)
    return (frames**2).sum(axis=1)


def vad_frames(audio: TimeSeriesTensor) -> np.ndarray:
    """Binary VAD at the native 15 ms frame rate (story-global threshold)."""
    energies = vad_frame_energies(audio)
    threshold = np.percentile(energies, VAD_PERCENTILE)
    return (energies > threshold).astype(np.float64)


def vad(audio: TimeSeriesTensor) -> TimeSeriesTensor:
    """Voice activity at 64 Hz: frame energy above the story's 75th percentile.

    The threshold is global to the story; 15 ms decisions are nearest-frame
    upsampled to the 64 Hz grid.
    """
    flags = vad_frames(audio)
    n_out = int(round(audio.duration_s * FRAME_RATE))
    centers = (np.arange(n_out) + 0.5) / FRAME_RATE
    idx = np.minimum((centers / VAD_FRAME_S).astype(int), flags.size - 1)
    return TimeSeriesTensor(flags[idx][None, :], FRAME_RATE)
