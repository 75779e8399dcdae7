"""Recognizer interface, oracle and file-backed recognizers."""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from .core import SpeakerSegment, TimeInterval, WordToken

__all__ = [
    'SegmentTranscript',
    'Recognizer',
    'OracleRecognizer',
    'FileRecognizer',
    'sentence_flags_from_punct',
    'transcribe_segments',
    'SENTENCE_END',
]

logger = logging.getLogger(__name__)

SENTENCE_END = ('.', '?', '!')
CONTAINMENT_SLACK = 0.1


@dataclass(frozen=True)
class SegmentTranscript:
    channel: Optional[int]
    segment_interval: TimeInterval
    words: tuple = ()
    error: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        words = tuple(self.words)
        object.__setattr__(self, 'words', words)
        starts = [w.start for w in words]
        if starts != sorted(starts):
            raise ValueError('transcript words must be sorted by start time')
        lo = self.segment_interval.start - CONTAINMENT_SLACK
        hi = self.segment_interval.end + CONTAINMENT_SLACK
        for w in words:
            if w.start < lo or w.end > hi:
                raise ValueError(f'word {w.text!r} at {w.interval} outside segment '
                                 f'{self.segment_interval}')


class Recognizer(Protocol):
    def transcribe(self, stream, segment: SpeakerSegment) -> SegmentTranscript: ...


def sentence_flags_from_punct(words) -> list:
    """Mark words ending in ``.``, ``?`` or ``!`` as sentence-final.

    The last word is always marked so that no sentence is left open.
    """
    words = list(words)
    out = []
    for i, w in enumerate(words):
        final = w.text.rstrip().endswith(SENTENCE_END) or i == len(words) - 1
        out.append(WordToken(w.text, w.interval, final))
    return out


def _clip_to(word: WordToken, iv: TimeInterval) -> WordToken:
    # Words are picked by midpoint, so their edges may stick out of the segment.
    start = min(max(word.start, iv.start), iv.end)
    end = min(max(word.end, start), iv.end)
    return WordToken(word.text, TimeInterval(start, end), word.sentence_final)


def _segment_seed(seed: int, channel, interval: TimeInterval) -> int:
    key = f'{seed}:{channel}:{round(interval.start * 1000)}:{round(interval.end * 1000)}'
    return zlib.crc32(key.encode())


class OracleRecognizer:
    """Perfect ASR reading words from the meeting annotation.

    A reference word is returned for a segment when its midpoint lies inside
    the segment and its speaker is present on the stream over the word (least
    squares gain above ``presence``). Optional corruptions: drop words with
    probability ``word_drop``, jitter timestamps with Gaussian noise of
    standard deviation ``jitter``, and strip sentence-final punctuation with
    probability ``sentence_drop`` to imitate missed sentence boundaries.
    """

    def __init__(self, truth, word_drop: float = 0.0, jitter: float = 0.0,
                 sentence_drop: float = 0.0, seed: int = 0, presence: float = 0.5):
        self.truth = truth
        self.word_drop = word_drop
        self.jitter = jitter
        self.sentence_drop = sentence_drop
        self.seed = seed
        self.presence = presence

    def _present(self, stream, speaker, interval):
        from .mixgen import speaker_gains
        gains = speaker_gains(self.truth, stream, interval, speakers=(speaker,))
        return gains.get(speaker, 0.0) > self.presence

    def transcribe(self, stream, segment: SpeakerSegment) -> SegmentTranscript:
        iv = segment.interval
        rng = np.random.default_rng(_segment_seed(self.seed, segment.channel, iv))
        picked = []
        for u in self.truth.utterances:
            if u.interval.end <= iv.start or u.interval.start >= iv.end:
                continue
            for w in u.words:
                if iv.start <= w.interval.midpoint < iv.end and self._present(stream, u.speaker, w.interval):
                    picked.append(w)
        picked.sort(key=lambda w: (w.start, w.end))

        words = []
        for w in picked:
            if self.word_drop and rng.random() < self.word_drop:
                continue
            text = w.text
            if self.sentence_drop and text.endswith(SENTENCE_END) and rng.random() < self.sentence_drop:
                text = text.rstrip(''.join(SENTENCE_END))
            start, end = w.start, w.end
            if self.jitter:
                start += rng.normal(0.0, self.jitter)
                end += rng.normal(0.0, self.jitter)
                end = max(end, start)
            words.append(_clip_to(WordToken(text, TimeInterval(max(start, 0.0), max(end, 0.0))), iv))
        words.sort(key=lambda w: (w.start, w.end))
        return SegmentTranscript(segment.channel, iv, tuple(sentence_flags_from_punct(words)))


class FileRecognizer:
    """Serves transcripts produced out of band, stored as segment-JSON.

    Words are matched to a requested segment by channel and word midpoint.
    """

    def __init__(self, source):
        from .io import read_segment_json
        records = read_segment_json(source) if not isinstance(source, list) else source
        self.records = records

    def transcribe(self, stream, segment: SpeakerSegment) -> SegmentTranscript:
        iv = segment.interval
        words = []
        for rec in self.records:
            if rec.channel is not None and segment.channel is not None and rec.channel != segment.channel:
                continue
            for w in rec.words:
                if iv.start <= w.interval.midpoint < iv.end:
                    words.append(_clip_to(w, iv))
        words.sort(key=lambda w: (w.start, w.end))
        return SegmentTranscript(segment.channel, iv, tuple(sentence_flags_from_punct(words)))


def transcribe_segments(streams, segments, rec) -> list:
    """One transcript per VAD segment; a failing segment yields an empty transcript."""
    out = []
    for seg in segments:
        try:
            out.append(rec.transcribe(streams[seg.channel], seg))
        except Exception as exc:  # recorded per segment, never fatal
            logger.warning('recognizer failed on channel %s %s: %s', seg.channel, seg.interval, exc)
            out.append(SegmentTranscript(seg.channel, seg.interval, (), error=str(exc)))
    return out
