import json

import numpy as np
import pytest

from cssad.core import AudioSignal, SpeakerSegment, TimeInterval, WordToken
from cssad.css import OracleSeparator, run_css
from cssad.io import SegmentRecord, write_segment_json
from cssad.mixgen import MixSpec, generate_meeting
from cssad.transcript import (FileRecognizer, OracleRecognizer, SegmentTranscript,
                              sentence_flags_from_punct, transcribe_segments)


def w(text, a, b, final=False):
    return WordToken(text, TimeInterval(a, b), final)


@pytest.fixture(scope='module')
def separated():
    m = generate_meeting(MixSpec(seed=11, num_utterances=12))
    return m, run_css(m.mixture, OracleSeparator(m), truth=m)


def test_sentence_flags():
    words = [w("let's", 0, 1), w('today?', 1, 2), w('Hello,', 2, 3), w('wow!', 3, 4), w('ok', 4, 5)]
    flags = [x.sentence_final for x in sentence_flags_from_punct(words)]
    assert flags == [False, True, False, True, True]
    assert sentence_flags_from_punct([]) == []


def _truth_words_in(m, streams, iv):
    out = []
    for u in m.utterances:
        for x in u.words:
            if iv.start <= x.interval.midpoint < iv.end:
                out.append((u.speaker, x))
    return out


def test_oracle_returns_truth_words(separated):
    m, streams = separated
    rec = OracleRecognizer(m)
    whole = TimeInterval(0, m.mixture.duration)
    got = []
    for c in (0, 1):
        tr = rec.transcribe(streams[c], SpeakerSegment(c, whole))
        got.extend(x.text for x in tr.words)
    truth = [x.text for u in m.utterances for x in u.words]
    assert sorted(got) == sorted(truth)


def test_oracle_restricts_to_segment(separated):
    m, streams = separated
    iv = TimeInterval(3.0, 9.0)
    both = [x for c in (0, 1)
            for x in OracleRecognizer(m).transcribe(streams[c], SpeakerSegment(c, iv)).words]
    expected = [x for _, x in _truth_words_in(m, streams, iv)]
    assert sorted(x.text for x in both) == sorted(x.text for x in expected)
    assert all(iv.start <= x.interval.midpoint < iv.end for x in both)


def test_silent_segment_is_empty(separated):
    m, streams = separated
    silent = AudioSignal.silence(len(streams[0]), m.sample_rate)
    tr = OracleRecognizer(m).transcribe(silent, SpeakerSegment(0, TimeInterval(0, 5)))
    assert tr.words == ()


def test_jitter_is_deterministic(separated):
    m, streams = separated
    seg = SpeakerSegment(0, TimeInterval(0, 10))
    a = OracleRecognizer(m, jitter=0.05, seed=3).transcribe(streams[0], seg)
    b = OracleRecognizer(m, jitter=0.05, seed=3).transcribe(streams[0], seg)
    c = OracleRecognizer(m, jitter=0.05, seed=4).transcribe(streams[0], seg)
    clean = OracleRecognizer(m).transcribe(streams[0], seg)
    assert a == b
    assert [x.interval for x in a.words] != [x.interval for x in c.words]
    assert [x.interval for x in a.words] != [x.interval for x in clean.words]


def test_sentence_drop_strips_punctuation(separated):
    m, streams = separated
    seg = SpeakerSegment(0, TimeInterval(0, m.mixture.duration))
    tr = OracleRecognizer(m, sentence_drop=1.0).transcribe(streams[0], seg)
    assert not any(x.text.endswith('.') for x in tr.words)
    assert [x.sentence_final for x in tr.words].count(True) == 1


def test_transcript_rejects_words_outside_segment():
    with pytest.raises(ValueError):
        SegmentTranscript(0, TimeInterval(0, 1), (w('x', 2, 3),))


def test_file_recognizer(tmp_path):
    rec = SegmentRecord('m', None, 1, TimeInterval(0, 3),
                        (w('a', 0, 1), w('b.', 1, 2, True), w('c', 2, 3, True)))
    path = tmp_path / 'asr.json'
    write_segment_json(path, [rec])
    fr = FileRecognizer(path)
    tr = fr.transcribe(None, SpeakerSegment(1, TimeInterval(0, 2)))
    assert [x.text for x in tr.words] == ['a', 'b.']
    assert [x.sentence_final for x in tr.words] == [False, True]
    assert fr.transcribe(None, SpeakerSegment(0, TimeInterval(0, 2))).words == ()


def test_failing_recognizer_is_recorded():
    class Broken:
        def transcribe(self, stream, segment):
            raise RuntimeError('decoder crashed')

    seg = SpeakerSegment(0, TimeInterval(0, 1))
    (tr,) = transcribe_segments([None, None], [seg], Broken())
    assert tr.words == () and 'crashed' in tr.error
