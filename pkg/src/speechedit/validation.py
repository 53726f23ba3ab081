"""Input validation helpers, in the spirit of sklearn's check_* utilities."""

import numpy as np

from .errors import InvalidInputError

MEL_CHANNELS = 80


def as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64) if np.asarray(x).dtype != np.float32 else np.asarray(x)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_waveform_samples(samples, sample_rate: int) -> np.ndarray:
    arr = as_float_array(samples, "waveform samples", ndim=1)
    if arr.size < 1:
        raise InvalidInputError("waveform must contain at least one sample")
    if sample_rate <= 0:
        raise InvalidInputError(f"sample_rate must be positive, got {sample_rate}")
    return arr


def check_mel_frames(frames) -> np.ndarray:
    arr = as_float_array(frames, "mel frames", ndim=2)
    if arr.shape[0] < 1:
        raise InvalidInputError("mel-spectrogram must contain at least one frame")
    if arr.shape[1] != MEL_CHANNELS:
        raise InvalidInputError(
            f"mel-spectrogram must have {MEL_CHANNELS} channels, got {arr.shape[1]}"
        )
    return arr


def check_mcep_coeffs(coeffs) -> np.ndarray:
    arr = as_float_array(coeffs, "MCEP coefficients", ndim=2)
    if arr.shape[0] < 1:
        raise InvalidInputError("MCEP sequence must contain at least one frame")
    return arr


def check_durations(durations, name: str = "durations") -> np.ndarray:
    arr = np.asarray(durations)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-d sequence")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.allclose(arr, np.round(arr)):
            raise InvalidInputError(f"{name} must be integer frame counts")
        arr = np.round(arr).astype(np.int64)
    if np.any(arr < 1):
        raise InvalidInputError(f"{name} must all be >= 1 frame")
    return arr.astype(np.int64)


def check_frame_range(frame_range, total_frames: int) -> tuple[int, int]:
    start, end = int(frame_range[0]), int(frame_range[1])
    if not (0 <= start <= end <= total_frames):
        raise InvalidInputError(
            f"frame range [{start}, {end}) out of bounds for {total_frames} frames"
        )
    return start, end
