"""Continuous speech separation: segment, separate, stitch.

A two-output separator is applied to overlapping windows of the recording.
The per-window output permutation is resolved by comparing adjacent windows
on their shared region, after which the windows are overlap-added into two
continuous streams.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .core import AudioSignal, TimeInterval

__all__ = [
    'CssConfig',
    'SeparatedSegment',
    'StreamPair',
    'Separator',
    'OracleSeparator',
    'PassthroughSeparator',
    'segment_uniform',
    'align_permutation',
    'stitch',
    'run_css',
    'IDENTITY',
    'SWAP',
]

IDENTITY = (0, 1)
SWAP = (1, 0)


@dataclass(frozen=True)
class CssConfig:
    segment_length: float = 4.0
    segment_shift: float = 2.0
    # 'crossfade' or 'midpoint' (hard cut in the middle of each overlap).
    overlap_mode: str = 'crossfade'

    def __post_init__(self):
        if not 0 < self.segment_shift < self.segment_length:
            raise ValueError(
                f'need 0 < segment_shift < segment_length, got '
                f'{self.segment_shift} / {self.segment_length}')
        if self.overlap_mode not in ('crossfade', 'midpoint'):
            raise ValueError(f'unknown overlap_mode {self.overlap_mode!r}')


@dataclass(frozen=True, eq=False)
class SeparatedSegment:
    segment_index: int
    interval: TimeInterval
    channels: tuple

    def __post_init__(self):
        if len(self.channels) != 2:
            raise ValueError('a separated segment has exactly two channels')
        a, b = self.channels
        if len(a) != len(b) or a.sample_rate != b.sample_rate:
            raise ValueError('channels must have equal length and sample rate')

    @property
    def sample_rate(self) -> int:
        return self.channels[0].sample_rate

    def permuted(self, perm) -> 'SeparatedSegment':
        return SeparatedSegment(self.segment_index, self.interval,
                                (self.channels[perm[0]], self.channels[perm[1]]))


@dataclass(frozen=True, eq=False)
class StreamPair:
    streams: tuple

    def __post_init__(self):
        if len(self.streams) != 2:
            raise ValueError('a stream pair has exactly two streams')
        if len(self.streams[0]) != len(self.streams[1]):
            raise ValueError('streams must have equal length')

    def __getitem__(self, i) -> AudioSignal:
        return self.streams[i]

    def __len__(self):
        return 2

    def __iter__(self):
        return iter(self.streams)


class Separator(Protocol):
    def separate(self, segment: AudioSignal, interval: TimeInterval,
                 truth=None) -> tuple: ...


class PassthroughSeparator:
    """No separation: channel 0 is the input, channel 1 is silence."""

    def separate(self, segment, interval=None, truth=None):
        return segment, AudioSignal.silence(len(segment), segment.sample_rate)


class OracleSeparator:
    """Emits ground-truth utterance slices packed into two channels.

    Utterances are coloured once for the whole meeting, greedily by start
    time, preferring the channel the speaker used last. Within each window
    the channel order is then normalised so that the first utterance seen in
    the window lands on channel 0. The windows therefore disagree on channel
    order the way a real separator does, while staying consistent on the
    regions they share.
    """

    def __init__(self, truth=None):
        self.truth = truth
        self._cache = None

    def _packing(self, truth):
        if self._cache is not None and self._cache[0] is truth:
            return self._cache[1]
        order = sorted(range(len(truth.utterances)),
                       key=lambda i: (truth.utterances[i].interval.start, i))
        channel_end = [0.0, 0.0]
        last_channel = {}
        assignment = {}
        for i in order:
            u = truth.utterances[i]
            free = [c for c in (0, 1) if channel_end[c] <= u.interval.start + 1e-9]
            if not free:
                raise ValueError(
                    f'more than two speakers active at {u.interval.start:.3f}s; '
                    'oracle separation needs at most two')
            preferred = last_channel.get(u.speaker)
            c = preferred if preferred in free else min(free, key=lambda c: (channel_end[c] > 0, c))
            assignment[i] = c
            channel_end[c] = u.interval.end
            last_channel[u.speaker] = c
        self._cache = (truth, assignment)
        return assignment

    def separate(self, segment, interval, truth=None):
        truth = truth if truth is not None else self.truth
        if truth is None:
            raise ValueError('OracleSeparator needs the meeting ground truth')
        sr = segment.sample_rate
        assignment = self._packing(truth)
        out = [np.zeros(len(segment)), np.zeros(len(segment))]
        offset = int(round(interval.start * sr))
        first = None
        for i, u in enumerate(truth.utterances):
            lo = max(u.interval.start, interval.start)
            hi = min(u.interval.end, interval.end)
            if hi <= lo:
                continue
            a = int(round(u.interval.start * sr))
            b = int(round(u.interval.end * sr))
            a_seg = max(a, offset)
            b_seg = min(b, offset + len(segment), int(round(interval.end * sr)))
            if b_seg <= a_seg:
                continue
            src = truth.sources[u.speaker].samples
            out[assignment[i]][a_seg - offset:b_seg - offset] += src[a_seg:b_seg]
            if first is None or (u.interval.start, i) < first[0]:
                first = ((u.interval.start, i), assignment[i])
        if first is not None and first[1] == 1:
            out.reverse()
        return AudioSignal(out[0], sr), AudioSignal(out[1], sr)


def segment_uniform(signal: AudioSignal, cfg: CssConfig = CssConfig()) -> list:
    """Cut ``signal`` into windows starting every ``segment_shift`` seconds.

    Returns ``(interval, AudioSignal)`` pairs. The interval is the true
    extent inside the recording; the audio of a window running past the end
    is zero-padded to the full window length.
    """
    if len(signal) == 0:
        raise ValueError('cannot segment an empty signal')
    sr = signal.sample_rate
    n = len(signal)
    win = int(round(cfg.segment_length * sr))
    hop = int(round(cfg.segment_shift * sr))
    out = []
    start = 0
    while True:
        stop = min(start + win, n)
        chunk = np.zeros(win)
        chunk[:stop - start] = signal.samples[start:stop]
        out.append((TimeInterval(start / sr, stop / sr), AudioSignal(chunk, sr)))
        if stop >= n:
            break
        start += hop
    return out


def _overlap_samples(prev: SeparatedSegment, cur: SeparatedSegment) -> int:
    sr = cur.sample_rate
    return int(round(prev.interval.end * sr)) - int(round(cur.interval.start * sr))


def align_permutation(prev: SeparatedSegment, cur: SeparatedSegment,
                      overlap: Optional[float] = None) -> tuple:
    """Channel order for ``cur`` that best matches ``prev`` on their shared region.

    The cost of a permutation is the per-sample MSE between the trailing
    region of ``prev`` and the leading region of ``cur``, summed over the two
    channels. Ties resolve to the identity.
    """
    sr = cur.sample_rate
    n = _overlap_samples(prev, cur) if overlap is None else int(round(overlap * sr))
    if n <= 0:
        raise ValueError('segments do not overlap; cannot resolve the permutation')
    p_off = int(round(cur.interval.start * sr)) - int(round(prev.interval.start * sr))
    p = [ch.samples[p_off:p_off + n] for ch in prev.channels]
    c = [ch.samples[:n] for ch in cur.channels]
    identity = np.mean((p[0] - c[0]) ** 2) + np.mean((p[1] - c[1]) ** 2)
    swap = np.mean((p[0] - c[1]) ** 2) + np.mean((p[1] - c[0]) ** 2)
    return SWAP if swap < identity else IDENTITY


def _window(seg_len, ramp_in, ramp_out, mode):
    w = np.ones(seg_len)
    if mode == 'crossfade':
        if ramp_in:
            w[:ramp_in] = (np.arange(ramp_in) + 0.5) / ramp_in
        if ramp_out:
            w[seg_len - ramp_out:] = 1.0 - (np.arange(ramp_out) + 0.5) / ramp_out
    else:
        if ramp_in:
            w[:ramp_in // 2] = 0.0
        if ramp_out:
            w[seg_len - (ramp_out - ramp_out // 2):] = 0.0
    return w


def stitch(segments: list, cfg: CssConfig = CssConfig(), num_samples: Optional[int] = None,
           return_permutations: bool = False):
    """Align windows left to right and overlap-add them into a :class:`StreamPair`.

    Each window is aligned against its already aligned predecessor. Shared
    regions are cross-faded with complementary linear ramps, so identical
    content passes through unchanged.
    """
    if not segments:
        raise ValueError('nothing to stitch')
    sr = segments[0].sample_rate
    for prev, cur in zip(segments[:-1], segments[1:]):
        if cur.interval.start > prev.interval.end or cur.interval.start < prev.interval.start:
            raise ValueError(
                f'segments {prev.segment_index} and {cur.segment_index} are not contiguous')
    if num_samples is None:
        num_samples = int(round(segments[-1].interval.end * sr))

    aligned = [segments[0]]
    perms = [IDENTITY]
    for cur in segments[1:]:
        perm = align_permutation(aligned[-1], cur)
        perms.append(perm)
        aligned.append(cur.permuted(perm))

    acc = np.zeros((2, num_samples))
    weight = np.zeros(num_samples)
    starts = [int(round(s.interval.start * sr)) for s in aligned]
    stops = [min(int(round(s.interval.end * sr)), num_samples) for s in aligned]
    for k, seg in enumerate(aligned):
        a, b = starts[k], stops[k]
        if b <= a:
            continue
        ramp_in = max(0, stops[k - 1] - a) if k > 0 else 0
        ramp_out = max(0, b - starts[k + 1]) if k + 1 < len(aligned) else 0
        w = _window(b - a, min(ramp_in, b - a), min(ramp_out, b - a), cfg.overlap_mode)
        for c in range(2):
            acc[c, a:b] += w * seg.channels[c].samples[:b - a]
        weight[a:b] += w
    covered = weight > 0
    acc[:, covered] /= weight[covered]
    pair = StreamPair((AudioSignal(acc[0], sr), AudioSignal(acc[1], sr)))
    if return_permutations:
        return pair, perms
    return pair


def run_css(signal: AudioSignal, sep, cfg: CssConfig = CssConfig(), truth=None) -> StreamPair:
    """Segment, separate every window independently, then stitch."""
    windows = segment_uniform(signal, cfg)
    separated = []
    for k, (interval, chunk) in enumerate(windows):
        ch0, ch1 = sep.separate(chunk, interval, truth)
        separated.append(SeparatedSegment(k, interval, (ch0, ch1)))
    return stitch(separated, cfg, num_samples=len(signal))
