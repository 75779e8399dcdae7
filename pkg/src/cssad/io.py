"""File formats: WAV, segment-JSON and RTTM.

Segment-JSON holds one object per line::

    {"session_id": str, "speaker": str | null, "channel": int | null,
     "start_time": float, "end_time": float, "words": str,
     "word_timings": [[start, end, sentence_final], ...]}

The same format carries ground truth (one line per utterance), transcripts
(one line per VAD segment) and diarized hypotheses (one line per labeled
sub-segment).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.io import wavfile

from .core import AudioSignal, SpeakerSegment, TimeInterval, Utterance, WordToken

__all__ = [
    'SegmentRecord',
    'read_wav',
    'write_wav',
    'read_segment_json',
    'write_segment_json',
    'records_from_utterances',
    'utterances_from_records',
    'read_rttm',
    'write_rttm',
    'format_rttm',
]


@dataclass(frozen=True)
class SegmentRecord:
    session_id: str
    speaker: Optional[str]
    channel: Optional[int]
    interval: TimeInterval
    words: tuple = ()

    @property
    def text(self) -> str:
        return ' '.join(w.text for w in self.words)

    def to_json(self) -> dict:
        return {
            'session_id': self.session_id,
            'speaker': self.speaker,
            'channel': self.channel,
            'start_time': self.interval.start,
            'end_time': self.interval.end,
            'words': self.text,
            'word_timings': [[w.start, w.end, bool(w.sentence_final)] for w in self.words],
        }

    @classmethod
    def from_json(cls, d: dict) -> 'SegmentRecord':
        texts = d.get('words', '').split()
        timings = d.get('word_timings', [])
        if len(texts) != len(timings):
            raise ValueError(f'{len(texts)} words but {len(timings)} word timings')
        words = tuple(WordToken(t, TimeInterval(s, e), bool(f)) for t, (s, e, f) in zip(texts, timings))
        return cls(d['session_id'], d.get('speaker'), d.get('channel'),
                   TimeInterval(d['start_time'], d['end_time']), words)


def read_wav(path) -> AudioSignal:
    sr, data = wavfile.read(str(path))
    data = np.asarray(data)
    if data.ndim != 1:
        raise ValueError(f'{path}: expected mono audio, got shape {data.shape}')
    if data.dtype.kind == 'i':
        data = data / float(np.iinfo(data.dtype).max)
    return AudioSignal(data.astype(np.float64), int(sr))


def write_wav(path, signal: AudioSignal) -> None:
    """Mono 32-bit float WAV."""
    wavfile.write(str(path), signal.sample_rate, signal.samples.astype(np.float32))


def read_segment_json(path) -> list:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(SegmentRecord.from_json(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f'{path}:{lineno}: {exc}') from exc
    return records


def write_segment_json(path, records) -> None:
    with open(path, 'w') as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + '\n')


def records_from_utterances(session_id: str, utterances) -> list:
    return [SegmentRecord(session_id, u.speaker, None, u.interval, u.words) for u in utterances]


def utterances_from_records(records) -> list:
    return [Utterance(r.speaker, r.words, r.interval) for r in records]


def _num(x: float) -> str:
    return f'{x:.9f}'.rstrip('0').rstrip('.') or '0'


def format_rttm(session_id: str, segments) -> str:
    lines = []
    for s in segments:
        speaker = s.speaker if s.speaker is not None else 'unk'
        lines.append(f'SPEAKER {session_id} 1 {_num(s.start)} {_num(s.interval.duration)} '
                     f'<NA> <NA> {speaker} <NA> <NA>')
    return ''.join(line + '\n' for line in lines)


def write_rttm(path, session_id: str, segments) -> None:
    Path(path).write_text(format_rttm(session_id, segments))


def read_rttm(path) -> dict:
    """Segments per session id; the channel field of RTTM is not a stream index."""
    out = {}
    for line in Path(path).read_text().splitlines():
        fields = line.split()
        if not fields or fields[0] != 'SPEAKER':
            continue
        session, tbeg, tdur, speaker = fields[1], float(fields[3]), float(fields[4]), fields[7]
        out.setdefault(session, []).append(
            SpeakerSegment(None, TimeInterval(tbeg, tbeg + tdur), speaker))
    return out
