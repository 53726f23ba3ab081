"""Deterministic signal processing: waveform/spectrogram conversion, MCEP, vocoding.

Fixed configuration: 22050 Hz audio, 275-sample hop (12.5 ms), 1102-sample
Hann window (50 ms), 2048-point FFT, 80-channel mel filterbank spanning
0-8000 Hz, natural-log compression floored at 1e-5.
"""

from dataclasses import dataclass, field
import json
import wave
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.fft import dct, irfft, rfft
from scipy.signal import resample_poly

from .errors import InvalidInputError
from .validation import check_mel_frames, check_waveform_samples

SAMPLE_RATE = 22050
HOP_SAMPLES = 275
WIN_SAMPLES = 1102
FFT_SIZE = 2048
MEL_CHANNELS = 80
MEL_FMIN = 0.0
MEL_FMAX = 8000.0
LOG_FLOOR = 1e-5
MCEP_ORDER = 13

FRAME_HOP_SECONDS = HOP_SAMPLES / SAMPLE_RATE
FRAME_SIZE_SECONDS = WIN_SAMPLES / SAMPLE_RATE


@dataclass(frozen=True)
class Waveform:
    """Mono audio: float samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        arr = check_waveform_samples(self.samples, self.sample_rate)
        object.__setattr__(self, "samples", arr)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MelSpectrogram:
    """T x 80 matrix of log-compressed mel energies."""

    frames: np.ndarray
    frame_hop: float = FRAME_HOP_SECONDS
    frame_size: float = FRAME_SIZE_SECONDS

    def __post_init__(self):
        object.__setattr__(self, "frames", check_mel_frames(self.frames))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class MCEPSequence:
    """T x 13 mel-cepstral coefficients (c1..c13, c0 dropped)."""

    coeffs: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.coeffs.shape[0]


class VocoderPort(Protocol):
    """Anything that can turn a mel-spectrogram back into audio."""

    def synthesize(self, mel: MelSpectrogram) -> Waveform: ...


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = MEL_CHANNELS,
    fft_size: int = FFT_SIZE,
    sample_rate: int = SAMPLE_RATE,
    fmin: float = MEL_FMIN,
    fmax: float = MEL_FMAX,
) -> np.ndarray:
    """Triangular mel filterbank, (n_mels, fft_size//2 + 1), unnormalized."""
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)

    weights = np.zeros((n_mels, len(bin_freqs)))
    for k in range(n_mels):
        left, center, right = hz_points[k], hz_points[k + 1], hz_points[k + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        weights[k] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights


def _hann_window(length: int) -> np.ndarray:
    # Periodic Hann, zero-padded symmetrically to the FFT size.
    n = np.arange(length)
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    pad = FFT_SIZE - length
    return np.pad(win, (pad // 2, pad - pad // 2))


def _frame_count(num_samples: int) -> int:
    return 1 + num_samples // HOP_SAMPLES


def _stft(samples: np.ndarray) -> np.ndarray:
    """Center-padded complex STFT, (T, FFT_SIZE//2 + 1)."""
    pad = FFT_SIZE // 2
    mode = "reflect" if len(samples) > 1 else "edge"
    padded = np.pad(samples.astype(np.float64), pad, mode=mode)
    window = _hann_window(WIN_SAMPLES)
    n_frames = _frame_count(len(samples))
    idx = np.arange(FFT_SIZE)[None, :] + HOP_SAMPLES * np.arange(n_frames)[:, None]
    frames = padded[idx] * window[None, :]
    return rfft(frames, n=FFT_SIZE, axis=1)


def stft_magnitude(samples: np.ndarray) -> np.ndarray:
    return np.abs(_stft(samples))


def mel_spectrogram(wave_in: Waveform) -> MelSpectrogram:
    """Log-mel analysis; T = 1 + floor(num_samples / hop)."""
    if wave_in.sample_rate != SAMPLE_RATE:
        raise InvalidInputError(
            f"expected {SAMPLE_RATE} Hz audio, got {wave_in.sample_rate} (use load_wav to resample)"
        )
    mag = stft_magnitude(wave_in.samples)
    energies = mag @ mel_filterbank().T
    frames = np.log(np.clip(energies, LOG_FLOOR, None))
    return MelSpectrogram(frames=frames.astype(np.float32))


def mcep(mel: MelSpectrogram) -> MCEPSequence:
    """Per-frame orthonormal DCT-II of the log-mel vector, keeping c1..c13."""
    coeffs = dct(mel.frames.astype(np.float64), type=2, norm="ortho", axis=1)
    return MCEPSequence(coeffs=coeffs[:, 1 : MCEP_ORDER + 1])


def _istft(spectrum: np.ndarray, num_samples: int) -> np.ndarray:
    """Overlap-add inverse STFT with squared-window normalization."""
    window = _hann_window(WIN_SAMPLES)
    pad = FFT_SIZE // 2
    total = num_samples + 2 * pad
    out = np.zeros(total)
    norm = np.zeros(total)
    segments = irfft(spectrum, n=FFT_SIZE, axis=1)
    for t in range(spectrum.shape[0]):
        start = t * HOP_SAMPLES
        out[start : start + FFT_SIZE] += segments[t] * window
        norm[start : start + FFT_SIZE] += window**2
    out /= np.maximum(norm, 1e-10)
    return out[pad : pad + num_samples]


def griffin_lim(mel: MelSpectrogram, iterations: int = 60) -> Waveform:
    """Reference vocoder: mel -> linear magnitude (clipped pseudo-inverse) ->
    iterative phase recovery from a zero-phase start. Deterministic."""
    if iterations < 1:
        raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
    energies = np.exp(mel.frames.astype(np.float64))
    pinv = np.linalg.pinv(mel_filterbank())
    magnitudes = np.clip(energies @ pinv.T, 0.0, None)

    # Length chosen so re-analysis yields exactly num_frames again.
    num_samples = mel.num_frames * HOP_SAMPLES - HOP_SAMPLES // 2
    angles = np.zeros_like(magnitudes)
    for _ in range(iterations):
        samples = _istft(magnitudes * np.exp(1j * angles), num_samples)
        angles = np.angle(_stft(samples))
    samples = _istft(magnitudes * np.exp(1j * angles), num_samples)

    peak = np.max(np.abs(samples))
    if peak > 1.0:
        samples = samples / peak
    return Waveform(samples=samples, sample_rate=SAMPLE_RATE)


@dataclass
class GriffinLimVocoder:
    """VocoderPort backed by griffin_lim."""

    iterations: int = 60

    def synthesize(self, mel: MelSpectrogram) -> Waveform:
        return griffin_lim(mel, iterations=self.iterations)


@dataclass
class CommandVocoder:
    """Adapter slot for an external neural vocoder.

    Runs `command` with two appended arguments: a mel file path (raw f32 +
    JSON sidecar, see save_mel) and the output WAV path.
    """

    command: list[str] = field(default_factory=list)

    def synthesize(self, mel: MelSpectrogram) -> Waveform:
        import subprocess
        import tempfile

        if not self.command:
            raise InvalidInputError("external vocoder command not configured")
        with tempfile.TemporaryDirectory() as tmp:
            mel_path = Path(tmp) / "input.mel"
            wav_path = Path(tmp) / "output.wav"
            save_mel(mel, mel_path)
            subprocess.run([*self.command, str(mel_path), str(wav_path)], check=True)
            return load_wav(wav_path)


def load_wav(path, target_rate: int = SAMPLE_RATE) -> Waveform:
    """Read 16-bit PCM mono WAV, resampling to the target rate on ingest."""
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise InvalidInputError(f"{path}: expected mono audio, got {f.getnchannels()} channels")
        if f.getsampwidth() != 2:
            raise InvalidInputError(f"{path}: expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
        rate = f.getframerate()
        raw = f.readframes(f.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise InvalidInputError(f"{path}: empty waveform")
    if rate != target_rate:
        samples = resample_poly(samples, target_rate, rate)
        samples = np.clip(samples, -1.0, 1.0)
    return Waveform(samples=samples, sample_rate=target_rate)


def save_wav(wave_out: Waveform, path) -> None:
    pcm = np.clip(np.round(wave_out.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(wave_out.sample_rate)
        f.writeframes(pcm.tobytes())


def save_mel(mel: MelSpectrogram, path) -> None:
    """Raw little-endian float32 row-major T x 80 payload plus JSON sidecar."""
    path = Path(path)
    path.write_bytes(mel.frames.astype("<f4").tobytes(order="C"))
    sidecar = {
        "frames": int(mel.num_frames),
        "channels": MEL_CHANNELS,
        "hop_samples": HOP_SAMPLES,
        "sample_rate": SAMPLE_RATE,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def load_mel(path) -> MelSpectrogram:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    if sidecar["channels"] != MEL_CHANNELS:
        raise InvalidInputError(f"{path}: unsupported channel count {sidecar['channels']}")
    frames = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(
        sidecar["frames"], MEL_CHANNELS
    )
    return MelSpectrogram(frames=frames.copy())
