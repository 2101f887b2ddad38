"""Toy WAV synthesis helpers shared by the extractor tests."""
import math
import wave

import numpy as np

SAMPLE_RATE = 16000


def write_wav(path, samples, rate=SAMPLE_RATE):
    pcm = np.clip(samples * 32767.0, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(pcm.tobytes())


def make_tone(duration_s, freq, rate=SAMPLE_RATE, noise=0.05, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(int(duration_s * rate)) / rate
    return (0.5 * np.sin(2 * math.pi * freq * t)
            + noise * rng.normal(size=t.size)).astype(np.float32)
