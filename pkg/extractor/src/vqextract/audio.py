"""Minimal WAV decoding with linear resampling to the model's sample rate."""
from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


class AudioError(ValueError):
    """Unreadable or unsupported audio file."""


def load_wav(path: str | Path, target_rate: int) -> np.ndarray:
    """Decode a PCM WAV file to mono float32 in [-1, 1] at target_rate."""
    try:
        with wave.open(str(path), "rb") as f:
            channels = f.getnchannels()
            width = f.getsampwidth()
            rate = f.getframerate()
            frames = f.readframes(f.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioError(f"{path}: {exc}") from exc

    if width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 1:
        samples = (np.frombuffer(frames, dtype=np.uint8).astype(np.float32) - 128.0) / 128.0
    elif width == 4:
        samples = np.frombuffer(frames, dtype="<i4").astype(np.float32) / 2147483648.0
    else:
        raise AudioError(f"{path}: unsupported sample width {width} bytes")

    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    if samples.size == 0:
        raise AudioError(f"{path}: empty audio")

    if rate != target_rate:
        n_out = max(1, int(round(samples.size * target_rate / rate)))
        src = np.arange(samples.size) / rate
        dst = np.arange(n_out) / target_rate
        samples = np.interp(dst, src, samples).astype(np.float32)
    return samples
