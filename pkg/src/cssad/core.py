"""Domain types and interval helpers shared across the pipeline.

All times are in seconds (float). Sample and frame indices are derived on
demand from a sample rate or hop size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    'AudioSignal',
    'TimeInterval',
    'WordToken',
    'Utterance',
    'ActivityMask',
    'SpeakerSegment',
    'interval_overlap',
    'seconds_to_frames',
    'speaker_label',
]


def _check_time(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f'{name} must be finite, got {value}')
    return value


@dataclass(frozen=True, eq=False)
class AudioSignal:
    """Mono sample buffer with its sample rate."""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f'expected mono samples, got shape {samples.shape}')
        if not np.all(np.isfinite(samples)):
            raise ValueError('samples contain NaN or Inf')
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f'sample_rate must be a positive integer, got {self.sample_rate}')
        samples.flags.writeable = False
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, AudioSignal):
            return NotImplemented
        return (self.sample_rate == other.sample_rate
                and np.array_equal(self.samples, other.samples))

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @classmethod
    def silence(cls, num_samples: int, sample_rate: int) -> 'AudioSignal':
        return cls(np.zeros(num_samples), sample_rate)

    def to_index(self, t: float) -> int:
        """Sample index for time ``t`` (rounded, clipped to the buffer)."""
        return int(min(max(round(t * self.sample_rate), 0), len(self.samples)))

    def slice(self, interval: 'TimeInterval') -> np.ndarray:
        return self.samples[self.to_index(interval.start):self.to_index(interval.end)]


@dataclass(frozen=True, order=True)
class TimeInterval:
    start: float
    end: float

    def __post_init__(self):
        start = _check_time(self.start, 'start')
        end = _check_time(self.end, 'end')
        if start < 0:
            raise ValueError(f'negative start time {start}')
        if end < start:
            raise ValueError(f'interval end {end} before start {start}')
        object.__setattr__(self, 'start', start)
        object.__setattr__(self, 'end', end)

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start + self.end)

    def contains(self, t: float) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class WordToken:
    text: str
    interval: TimeInterval
    sentence_final: bool = False

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError('word text must be non-empty')

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end


@dataclass(frozen=True)
class Utterance:
    speaker: str
    words: tuple
    interval: TimeInterval

    def __post_init__(self):
        words = tuple(self.words)
        object.__setattr__(self, 'words', words)
        starts = [w.start for w in words]
        if starts != sorted(starts):
            raise ValueError('utterance words must be sorted by start time')
        for w in words:
            if w.start < self.interval.start - 1e-9 or w.end > self.interval.end + 1e-9:
                raise ValueError(f'word {w.text!r} outside utterance interval')

    @property
    def text(self) -> str:
        return ' '.join(w.text for w in self.words)


@dataclass(frozen=True, eq=False)
class ActivityMask:
    """Boolean per-frame activity with a fixed frame hop."""
    frame_hop: float
    frames: np.ndarray

    def __post_init__(self):
        if not self.frame_hop > 0:
            raise ValueError(f'frame_hop must be positive, got {self.frame_hop}')
        frames = np.asarray(self.frames, dtype=bool)
        if frames.ndim != 1:
            raise ValueError('frames must be one-dimensional')
        frames.flags.writeable = False
        object.__setattr__(self, 'frames', frames)

    def __len__(self):
        return len(self.frames)

    def __eq__(self, other):
        if not isinstance(other, ActivityMask):
            return NotImplemented
        return (self.frame_hop == other.frame_hop
                and np.array_equal(self.frames, other.frames))

    def runs(self) -> list:
        """Maximal active runs as half-open frame ranges ``(first, stop)``."""
        padded = np.concatenate([[False], self.frames, [False]]).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


@dataclass(frozen=True)
class SpeakerSegment:
    channel: Optional[int]
    interval: TimeInterval
    speaker: Optional[str] = None

    def __post_init__(self):
        if self.channel is not None and self.channel not in (0, 1):
            raise ValueError(f'channel must be 0 or 1, got {self.channel}')

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end


def interval_overlap(a: TimeInterval, b: TimeInterval) -> float:
    return max(0.0, min(a.end, b.end) - max(a.start, b.start))


def seconds_to_frames(t: float, hop: float) -> int:
    """Index of the frame containing time ``t``.

    >>> seconds_to_frames(0.015, 0.01)
    1
    """
    if not hop > 0:
        raise ValueError(f'hop must be positive, got {hop}')
    if t < 0:
        raise ValueError(f'negative time {t}')
    # Guard against 1.0 / 0.01 = 99.99999999999999.
    return int(math.floor(t / hop + 1e-9))


def speaker_label(index: int) -> str:
    return f'spk{index}'
