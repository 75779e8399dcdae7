"""Energy VAD with morphological smoothing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ActivityMask, AudioSignal, SpeakerSegment, TimeInterval

__all__ = [
    'VadConfig',
    'frame_energy',
    'threshold_activity',
    'morph_close',
    'morph_close_and_extend',
    'mask_to_segments',
    'detect_segments',
    'EPS',
]

EPS = 1e-12


@dataclass(frozen=True)
class VadConfig:
    frame_length: float = 0.025
    frame_hop: float = 0.010
    threshold_db_below_max: float = 40.0
    closing_gap: float = 0.5
    boundary_extension: float = 0.4

    def __post_init__(self):
        for name in ('frame_length', 'frame_hop', 'threshold_db_below_max',
                     'closing_gap', 'boundary_extension'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} must be positive')
        if self.frame_hop > self.frame_length:
            raise ValueError('frame_hop must not exceed frame_length')


def _frames(seconds, hop):
    return int(round(seconds / hop))


def frame_energy(signal: AudioSignal, cfg: VadConfig = VadConfig()) -> np.ndarray:
    """Frame energies in dB, ``10 log10(sum x^2 + EPS)``.

    Computed in the time domain, which by Parseval equals the energy summed
    over the STFT bins of an unwindowed frame.
    """
    n = len(signal)
    if n == 0:
        raise ValueError('empty signal')
    flen = int(round(cfg.frame_length * signal.sample_rate))
    hop = int(round(cfg.frame_hop * signal.sample_rate))
    num = max(0, math.ceil((n - flen) / hop)) + 1
    padded = np.zeros((num - 1) * hop + flen)
    padded[:n] = signal.samples
    csum = np.concatenate([[0.0], np.cumsum(padded ** 2)])
    starts = np.arange(num) * hop
    energy = csum[starts + flen] - csum[starts]
    return 10.0 * np.log10(np.maximum(energy, 0.0) + EPS)


def threshold_activity(energy, cfg: VadConfig = VadConfig()) -> ActivityMask:
    energy = np.asarray(energy, dtype=float)
    if energy.size == 0:
        raise ValueError('empty energy sequence')
    return ActivityMask(cfg.frame_hop, energy > energy.max() - cfg.threshold_db_below_max)


def morph_close(mask: ActivityMask, gap: float) -> ActivityMask:
    """Fill inactive gaps of at most ``gap`` seconds lying between active runs.

    This is binary closing with a flat structuring element, without the
    border artefacts at the ends of the recording.
    """
    frames = mask.frames.copy()
    max_gap = _frames(gap, mask.frame_hop)
    runs = mask.runs()
    for (_, stop), (start, _) in zip(runs[:-1], runs[1:]):
        if start - stop <= max_gap:
            frames[stop:start] = True
    return ActivityMask(mask.frame_hop, frames)


def _dilate(mask: ActivityMask, extension: float) -> ActivityMask:
    k = _frames(extension, mask.frame_hop)
    frames = np.zeros(len(mask), dtype=bool)
    for a, b in mask.runs():
        frames[max(0, a - k):min(len(mask), b + k)] = True
    return ActivityMask(mask.frame_hop, frames)


def morph_close_and_extend(mask: ActivityMask, cfg: VadConfig = VadConfig()) -> ActivityMask:
    """Closing followed by a symmetric boundary extension.

    The result always contains the input activity.
    """
    return _dilate(morph_close(mask, cfg.closing_gap), cfg.boundary_extension)


def mask_to_segments(mask: ActivityMask, channel: Optional[int] = 0,
                     duration: Optional[float] = None) -> list:
    """Active runs as unlabeled :class:`SpeakerSegment` objects.

    Frame ``i`` stands for ``[i * hop, (i + 1) * hop)``; ``duration`` clips
    the last segment to the recording length.
    """
    hop = mask.frame_hop
    out = []
    for a, b in mask.runs():
        end = b * hop if duration is None else min(b * hop, duration)
        out.append(SpeakerSegment(channel, TimeInterval(a * hop, max(end, a * hop))))
    return out


def detect_segments(signal: AudioSignal, channel: int = 0,
                    cfg: VadConfig = VadConfig()) -> list:
    """Full VAD chain on one stream. An all-zero stream yields no segments."""
    energy = frame_energy(signal, cfg)
    if energy.max() <= 10.0 * np.log10(EPS) + 1e-9:
        return []
    mask = morph_close_and_extend(threshold_activity(energy, cfg), cfg)
    return mask_to_segments(mask, channel, signal.duration)
