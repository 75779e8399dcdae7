import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cssad.core import SpeakerSegment, TimeInterval, WordToken
from cssad.diarize import (SCHEMES, ChangeDetectConfig, cluster_kmeanspp, detect_speaker_changes,
                           kmeans_objective, subsegment_sentence, subsegment_sentence_word,
                           subsegment_uniform, subsegment_word, word_change_scores)

# The worked example: four turns over fifteen words, one sentence boundary.
EXAMPLE_TEXT = "Hello, let's start uh sorry I'm late uh the meeting. What do we discuss today?".split()
EXAMPLE_SPEAKERS = 'AAAABBBAAACCCCC'
# Similarity drawn under each word gap in the illustration.
DRAWN_SCORES = [0.5, 0.6, 0.55, 0.15, 0.45, 0.75, 0.1, 0.3, 0.6, 0.12, 0.6, 0.7, 0.65, 0.65]


def make_words(texts, step=0.3, flags=None):
    out = []
    for i, t in enumerate(texts):
        final = flags[i] if flags is not None else t.endswith(('.', '?', '!'))
        out.append(WordToken(t, TimeInterval(i * step, (i + 1) * step), final))
    return out


class TableExtractor:
    """Looks embeddings up by the start time of the requested interval."""

    def __init__(self, vectors, step=0.3):
        self.vectors = [np.asarray(v, dtype=float) for v in vectors]
        self.step = step

    def embed(self, stream, interval, channel=None):
        return self.vectors[int(round(interval.start / self.step))]


def parent(words, channel=0):
    return SpeakerSegment(channel, TimeInterval(words[0].start, words[-1].end))


def texts(subsegments):
    return [[w.text for w in s.words] for s in subsegments]


# ------------------------------------------------------------ uniform and sentence

def test_uniform_pieces():
    seg = SpeakerSegment(0, TimeInterval(0, 10))
    pieces = subsegment_uniform(seg, [], 4.0)
    assert [(p.interval.start, p.interval.end) for p in pieces] == [(0, 4), (4, 8), (8, 10)]
    (single,) = subsegment_uniform(SpeakerSegment(0, TimeInterval(0, 3)), [], 4.0)
    assert single.interval == TimeInterval(0, 3)


def test_uniform_assigns_by_largest_overlap():
    seg = SpeakerSegment(0, TimeInterval(0, 8))
    word = WordToken('x', TimeInterval(3.8, 4.4))
    pieces = subsegment_uniform(seg, [word], 4.0)
    assert pieces[0].words == () and pieces[1].words == (word,)


def test_sentence_split_of_example():
    words = make_words(EXAMPLE_TEXT)
    out = subsegment_sentence(parent(words), words)
    assert texts(out) == [EXAMPLE_TEXT[:10], EXAMPLE_TEXT[10:]]


def test_sentence_split_edge_cases():
    words = make_words(['a', 'b', 'c'], flags=[False, False, True])
    assert len(subsegment_sentence(parent(words), words)) == 1
    words = make_words(['a', 'b', 'c'], flags=[True, True, True])
    assert texts(subsegment_sentence(parent(words), words)) == [['a'], ['b'], ['c']]


# ------------------------------------------------------------ change scores

def test_scores_constant_and_antipodal():
    v = np.array([1.0, 2.0, 0.5])
    scores = word_change_scores([v] * 8)
    assert np.allclose(scores[1:-1], 1.0) and np.isnan(scores[[0, -1]]).all()
    scores = word_change_scores([v] * 4 + [-v] * 4)
    assert scores[3] == pytest.approx(-1.0)


def test_scores_orthogonal_change():
    e = np.eye(4)
    scores = word_change_scores([e[0]] * 7 + [e[1]] * 7)
    assert scores[6] == pytest.approx(0.0)
    assert np.all(scores[np.arange(13) != 6][~np.isnan(scores[np.arange(13) != 6])] > 0)


def test_scores_edges_need_context():
    v = np.ones(3)
    scores = word_change_scores([v] * 5)
    assert np.isnan(scores[0]) and np.isnan(scores[3])
    assert not np.isnan(scores[1:3]).any()
    assert word_change_scores([v] * 3).size == 0


@pytest.mark.parametrize('scores, expected', [
    ([0.9] * 10, []),
    ([0.8] * 4 + [0.05] + [0.8] * 4, [4]),
    ([0.8, 0.8, 0.1, 0.8, 0.8, 0.15, 0.8, 0.8], [2]),
    ([0.8, 0.1, 0.1, 0.8], [1]),
    ([np.nan, 0.1, 0.8, np.nan], [1]),
])
def test_detect_changes(scores, expected):
    assert detect_speaker_changes(scores) == expected


def test_drawn_scores_under_default_rule():
    # Dips three gaps apart share a six-gap context, so only the deepest survives.
    assert detect_speaker_changes(DRAWN_SCORES) == [6]


def test_drawn_scores_under_drawn_threshold():
    cfg = ChangeDetectConfig(context_words=2, similarity_threshold=0.4, min_context=2)
    changes = detect_speaker_changes(DRAWN_SCORES, cfg)
    assert changes == [3, 6, 9]
    words = make_words(EXAMPLE_TEXT)
    pieces = [len(p) for p in np.split(np.arange(15), [c + 1 for c in changes])]
    assert pieces == [4, 3, 3, 5]


# ------------------------------------------------------------ word-level splitting

def test_word_split_at_orthogonal_turn():
    e = np.eye(8)
    words = make_words([f'w{i}' for i in range(16)], flags=[False] * 16)
    ext = TableExtractor([e[0]] * 9 + [e[1]] * 7)
    out = subsegment_word(parent(words), words, None, ext)
    assert [len(p.words) for p in out] == [9, 7]


def test_word_split_uniform_speaker():
    words = make_words([f'w{i}' for i in range(12)])
    ext = TableExtractor([np.ones(4)] * 12)
    assert len(subsegment_word(parent(words), words, None, ext)) == 1


def test_example_with_clean_speaker_embeddings():
    e = {s: v for s, v in zip('ABC', np.eye(3))}
    words = make_words(EXAMPLE_TEXT)
    ext = TableExtractor([e[s] for s in EXAMPLE_SPEAKERS])
    cfg = ChangeDetectConfig(context_words=2, similarity_threshold=0.2, min_context=1)
    out = subsegment_sentence_word(parent(words), words, None, ext, cfg)
    assert [len(p.words) for p in out] == [4, 3, 3, 5]
    # The default six-word context averages the short turn away; only the sentence mark splits.
    default = subsegment_sentence_word(parent(words), words, None, ext)
    assert [len(p.words) for p in default] == [10, 5]


def test_sentence_word_without_dips_equals_sentence():
    words = make_words(EXAMPLE_TEXT)
    ext = TableExtractor([np.ones(3)] * 15)
    assert texts(subsegment_sentence_word(parent(words), words, None, ext)) == \
        texts(subsegment_sentence(parent(words), words))
    flat = make_words([t.rstrip('.?,') for t in EXAMPLE_TEXT], flags=[False] * 14 + [True])
    assert len(subsegment_sentence_word(parent(flat), flat, None, ext)) == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=30),
       st.lists(st.booleans(), min_size=30, max_size=30),
       st.sampled_from(SCHEMES[1:]))
def test_subsegments_partition_words(speakers, flags, scheme):
    n = len(speakers)
    words = make_words([f'w{i}' for i in range(n)], flags=flags[:n])
    e = np.eye(3) + 0.1
    ext = TableExtractor([e[s] for s in speakers])
    seg = parent(words)
    if scheme == 'uniform-2s':
        out = subsegment_uniform(seg, words, 2.0)
    elif scheme == 'uniform-4s':
        out = subsegment_uniform(seg, words, 4.0)
    elif scheme == 'sentence':
        out = subsegment_sentence(seg, words)
    elif scheme == 'word':
        out = subsegment_word(seg, words, None, ext)
    else:
        out = subsegment_sentence_word(seg, words, None, ext)
    flat = [w for p in out for w in p.words]
    assert flat == words
    ivs = [p.interval for p in out]
    assert all(a.end <= b.start + 1e-9 for a, b in zip(ivs[:-1], ivs[1:]))


@settings(max_examples=60)
@given(st.lists(st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3), min_size=4, max_size=20), st.floats(0.01, 100))
def test_scores_scale_invariant(vectors, scale):
    X = np.array(vectors)
    a, b = word_change_scores(X), word_change_scores(scale * X)
    assert np.allclose(a, b, equal_nan=True, atol=1e-9)


# ------------------------------------------------------------ k-means

def best_match(labels, truth):
    labels, truth = np.asarray(labels), np.asarray(truth)
    ks = sorted(set(labels))
    return max(np.mean([dict(zip(ks, p))[l] == t for l, t in zip(labels, truth)])
               for p in itertools.permutations(sorted(set(truth)), len(ks)))


def test_kmeans_k1():
    X = np.random.default_rng(0).normal(size=(10, 3))
    assert cluster_kmeanspp(X, 1).tolist() == [0] * 10


def test_kmeans_antipodal():
    rng = np.random.default_rng(1)
    v = np.array([1.0, 0, 0])
    X = np.vstack([v + 0.01 * rng.normal(size=(10, 3)), -v + 0.01 * rng.normal(size=(10, 3))])
    labels = cluster_kmeanspp(X, 2)
    assert best_match(labels, [0] * 10 + [1] * 10) == 1.0


def test_kmeans_orthogonal_mock():
    rng = np.random.default_rng(2)
    truth = np.repeat(np.arange(3), 15)
    X = np.eye(16)[truth] + 0.05 * rng.normal(size=(45, 16))
    assert best_match(cluster_kmeanspp(X, 3, seed=5), truth) == 1.0


def test_kmeans_objective_non_increasing_and_deterministic():
    X = np.random.default_rng(3).normal(size=(60, 5))
    labels, history = cluster_kmeanspp(X, 4, seed=9, return_history=True)
    assert all(b <= a + 1e-9 for a, b in zip(history[:-1], history[1:]))
    again = cluster_kmeanspp(X, 4, seed=9)
    assert np.array_equal(labels, again)


def test_kmeans_errors():
    with pytest.raises(ValueError):
        cluster_kmeanspp(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        cluster_kmeanspp(np.zeros((0, 2)), 1)


def test_kmeans_identical_points():
    labels = cluster_kmeanspp(np.ones((5, 3)), 2)
    assert len(labels) == 5


def test_objective_formula():
    X = np.array([[0.0, 0], [2, 0]])
    assert kmeans_objective(X, np.array([0, 0]), np.array([[1.0, 0]])) == 2.0
