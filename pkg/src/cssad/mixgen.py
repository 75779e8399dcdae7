"""Synthetic meeting generator with ground-truth annotation.

Every speaker owns a narrowband tone signature with a syllable-rate
envelope, so sources are near-orthogonal over windows of a few hundred
milliseconds. That makes oracle separation, oracle recognition and mock
embeddings well defined without any real speech corpus.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AudioSignal, TimeInterval, Utterance, WordToken, speaker_label

__all__ = [
    'MixSpec',
    'MeetingTruth',
    'InfeasibleSpecError',
    'generate_meeting',
    'measure_overlap_ratio',
    'max_active_speakers',
    'speaker_gains',
]

MAX_OVERLAP_RATIO = 0.4
OVERLAP_TOLERANCE = 0.1

_CONSONANTS = 'bdfgklmnprstvz'
_VOWELS = 'aeiou'


class InfeasibleSpecError(ValueError):
    pass


@dataclass(frozen=True)
class MixSpec:
    num_speakers: int = 8
    num_utterances: int = 40
    overlap_ratio_target: float = 0.3
    utterance_duration_range: tuple = (2.0, 6.0)
    seed: int = 0
    sample_rate: int = 16000
    # Pause inserted before an utterance that does not overlap its predecessor.
    silence_range: tuple = (0.0, 0.0)
    word_duration: float = 0.3
    css_constraint: bool = True

    def __post_init__(self):
        if self.num_speakers < 1 or self.num_utterances < 1:
            raise ValueError('num_speakers and num_utterances must be positive')
        if not 0.0 <= self.overlap_ratio_target <= MAX_OVERLAP_RATIO:
            raise ValueError(
                f'overlap_ratio_target must lie in [0, {MAX_OVERLAP_RATIO}], '
                f'got {self.overlap_ratio_target}')
        lo, hi = self.utterance_duration_range
        if not 0 < lo <= hi:
            raise ValueError(f'bad utterance_duration_range {self.utterance_duration_range}')
        lo, hi = self.silence_range
        if not 0 <= lo <= hi:
            raise ValueError(f'bad silence_range {self.silence_range}')
        if self.sample_rate <= 0 or self.word_duration <= 0:
            raise ValueError('sample_rate and word_duration must be positive')
        object.__setattr__(self, 'utterance_duration_range',
                           tuple(float(x) for x in self.utterance_duration_range))
        object.__setattr__(self, 'silence_range', tuple(float(x) for x in self.silence_range))


@dataclass(frozen=True, eq=False)
class MeetingTruth:
    utterances: tuple
    sources: dict
    mixture: AudioSignal
    num_speakers: int
    session_id: str = 'meeting'

    @property
    def speakers(self) -> list:
        return sorted(self.sources, key=lambda s: (len(s), s))

    @property
    def sample_rate(self) -> int:
        return self.mixture.sample_rate

    def utterances_of(self, speaker: str) -> list:
        return [u for u in self.utterances if u.speaker == speaker]


def _vocabulary(rng: np.random.Generator, size: int = 400) -> list:
    words = set()
    while len(words) < size:
        n_syl = int(rng.integers(1, 4))
        words.add(''.join(rng.choice(list(_CONSONANTS)) + rng.choice(list(_VOWELS))
                          for _ in range(n_syl)))
    return sorted(words)


def signature_frequencies(speaker_index: int) -> tuple:
    """Tone frequencies (Hz) identifying a speaker; spacing keeps speakers apart."""
    return (180.0 + 97.0 * speaker_index,
            1130.0 + 131.0 * speaker_index,
            2410.0 + 173.0 * speaker_index)


def _utterance_waveform(rng, speaker_index, num_samples, sample_rate):
    t = np.arange(num_samples) / sample_rate
    x = np.zeros(num_samples)
    for amp, f in zip((0.5, 0.3, 0.2), signature_frequencies(speaker_index)):
        x += amp * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    rate = rng.uniform(3.0, 5.0)
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    x *= envelope
    x += 0.02 * rng.standard_normal(num_samples)
    ramp = min(num_samples // 2, int(0.005 * sample_rate))
    if ramp > 0:
        taper = np.linspace(0.0, 1.0, ramp + 2)[1:-1]
        x[:ramp] *= taper
        x[num_samples - ramp:] *= taper[::-1]
    return x


def _words_for(rng, vocab, interval: TimeInterval, word_duration: float) -> tuple:
    n = max(1, int(round(interval.duration / word_duration)))
    edges = np.linspace(interval.start, interval.end, n + 1)
    edges[0], edges[-1] = interval.start, interval.end
    texts = [vocab[i] for i in rng.integers(0, len(vocab), size=n)]
    texts[-1] += '.'
    return tuple(
        WordToken(text, TimeInterval(float(a), float(b)), sentence_final=(i == n - 1))
        for i, (text, a, b) in enumerate(zip(texts, edges[:-1], edges[1:])))


def _speaker_sequence(rng, num_speakers, num_utterances):
    order = list(rng.permutation(num_speakers))[:num_utterances]
    while len(order) < num_utterances:
        if num_speakers == 1:
            order.append(0)
            continue
        choice = int(rng.integers(0, num_speakers - 1))
        order.append(choice if choice < order[-1] else choice + 1)
    return [int(s) for s in order]


def generate_meeting(spec: MixSpec, session_id: Optional[str] = None) -> MeetingTruth:
    """Draw a meeting whose overlap ratio tracks ``spec.overlap_ratio_target``.

    Utterances are placed one after another. Each new utterance either
    overlaps the tail of its predecessor by the amount that steers the running
    overlap ratio towards the target, or follows it after a pause drawn from
    ``silence_range``. Overlap never reaches into the utterance before the
    predecessor, so at most two speakers are active at any instant.
    """
    target = spec.overlap_ratio_target
    if target > 0 and (spec.num_utterances < 2 or spec.num_speakers < 2):
        raise InfeasibleSpecError(
            f'overlap target {target} needs at least 2 utterances from 2 speakers '
            f'(got {spec.num_utterances} utterances, {spec.num_speakers} speakers)')

    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate
    vocab = _vocabulary(rng)
    speakers = _speaker_sequence(rng, spec.num_speakers, spec.num_utterances)
    lo, hi = spec.utterance_duration_range

    placements = []  # (speaker, start_sample, num_samples)
    speech = overlap = 0.0
    for i, spk in enumerate(speakers):
        n = int(round(rng.uniform(lo, hi) * sr))
        d = n / sr
        if not placements:
            start = 0
        else:
            _, p_start, p_n = placements[-1]
            p_end = p_start + p_n
            floor = p_start
            if spec.css_constraint and len(placements) > 1:
                floor = max(floor, placements[-2][1] + placements[-2][2])
            max_o = max(0.0, min(0.9 * d, (p_end - floor) / sr)) if target > 0 else 0.0
            want = (target * (speech + d) - overlap) / (1.0 + target)
            o = min(max(want, 0.0), max_o)
            if o > 0:
                start = p_end - int(round(o * sr))
            else:
                start = p_end + int(round(rng.uniform(*spec.silence_range) * sr))
        placed_o = 0.0
        if placements:
            placed_o = max(0, placements[-1][1] + placements[-1][2] - start) / sr
        speech += d - placed_o
        overlap += placed_o
        placements.append((spk, start, n))

    total = max(s + n for _, s, n in placements)
    source_buffers = {speaker_label(k): np.zeros(total) for k in range(spec.num_speakers)}
    utterances = []
    for spk, start, n in placements:
        label = speaker_label(spk)
        source_buffers[label][start:start + n] += _utterance_waveform(rng, spk, n, sr)
        interval = TimeInterval(start / sr, (start + n) / sr)
        utterances.append(Utterance(label, _words_for(rng, vocab, interval, spec.word_duration),
                                    interval))

    sources = {k: AudioSignal(v, sr) for k, v in source_buffers.items()}
    mixture = AudioSignal(np.sum([v for v in source_buffers.values()], axis=0), sr)
    truth = MeetingTruth(tuple(utterances), sources, mixture, spec.num_speakers,
                         session_id or f'meeting_{spec.seed}')
    if target > 0:
        realized = measure_overlap_ratio(truth)
        if abs(realized - target) > OVERLAP_TOLERANCE:
            raise InfeasibleSpecError(
                f'realized overlap ratio {realized:.3f} is more than {OVERLAP_TOLERANCE} '
                f'away from target {target}')
    return truth


def _activity_counts(intervals):
    """Sweep over interval boundaries: list of (t0, t1, n_active)."""
    events = sorted({t for iv in intervals for t in (iv.start, iv.end)})
    out = []
    for t0, t1 in zip(events[:-1], events[1:]):
        mid = 0.5 * (t0 + t1)
        n = sum(1 for iv in intervals if iv.start <= mid < iv.end)
        out.append((t0, t1, n))
    return out


def measure_overlap_ratio(truth) -> float:
    """Overlapped-speech time divided by total speech time.

    Accepts a :class:`MeetingTruth` or a plain sequence of utterances.
    """
    utterances = truth.utterances if isinstance(truth, MeetingTruth) else list(truth)
    intervals = [u.interval for u in utterances if u.interval.duration > 0]
    if not intervals:
        raise ValueError('meeting has no speech')
    speech = multi = 0.0
    for t0, t1, n in _activity_counts(intervals):
        if n >= 1:
            speech += t1 - t0
        if n >= 2:
            multi += t1 - t0
    return multi / speech


def max_active_speakers(truth, resolution: float = 0.01) -> int:
    """Largest number of distinct speakers active on a ``resolution`` grid."""
    utterances = truth.utterances if isinstance(truth, MeetingTruth) else list(truth)
    end = max(u.interval.end for u in utterances)
    grid = np.arange(0.0, end, resolution)
    counts = np.zeros(len(grid), dtype=int)
    by_speaker = {}
    for u in utterances:
        by_speaker.setdefault(u.speaker, []).append(u.interval)
    for ivs in by_speaker.values():
        active = np.zeros(len(grid), dtype=bool)
        for iv in ivs:
            active |= (grid >= iv.start) & (grid < iv.end)
        counts += active
    return int(counts.max()) if len(counts) else 0


def speaker_gains(truth: MeetingTruth, stream: AudioSignal, interval: TimeInterval,
                  speakers=None) -> dict:
    """Least-squares gain of each speaker's source inside ``stream`` over ``interval``.

    A gain near 1 means the speaker is fully present, near 0 absent. Speakers
    silent over the interval are omitted.
    """
    a, b = stream.to_index(interval.start), stream.to_index(interval.end)
    x = stream.samples[a:b]
    gains = {}
    for spk in (truth.sources if speakers is None else speakers):
        src = truth.sources[spk]
        s = src.samples[a:b]
        energy = float(s @ s)
        if energy <= 1e-9 * max(1, len(s)):
            continue
        gains[spk] = float(x @ s) / energy
    return gains
