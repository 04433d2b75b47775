"""Bundled 3-class sinusoid dataset for smoke runs and trainability checks."""
from __future__ import annotations

import numpy as np

from mmtl.data.datasets import SYNTHETIC
from mmtl.data.types import Recording

FREQUENCIES_HZ = (1.0, 3.0, 5.0)
AMPLITUDES = (2.0, 4.0, 6.0)


def generate_synthetic(subjects: int = 4, seconds: float = 6.4, noise: float = 0.1,
                       seed: int = 0) -> list[Recording]:
    """One recording per (subject, class); class k oscillates at FREQUENCIES_HZ[k]."""
    rng = np.random.default_rng(seed)
    fs = SYNTHETIC.sample_rate_hz
    n = int(round(seconds * fs))
    t = np.arange(n) / fs
    recordings = []
    for subject in range(1, subjects + 1):
        for cls, (freq, amp) in enumerate(zip(FREQUENCIES_HZ, AMPLITUDES)):
            phase = rng.uniform(0, 2 * np.pi, size=(3, 1))
            signal = amp * np.sin(2 * np.pi * freq * t[None, :] + phase)
            signal += noise * rng.standard_normal(signal.shape)
            recordings.append(Recording(
                subject_id=subject, activity_id=cls, channels=signal.astype(np.float32),
                sample_rate_hz=fs, channel_names=SYNTHETIC.channel_names,
                source=SYNTHETIC.name, native_label=SYNTHETIC.class_names[cls],
            ))
    return recordings
