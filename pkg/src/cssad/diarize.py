"""Sub-segmentation, speaker embeddings and k-means++ clustering."""
from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .core import SpeakerSegment, TimeInterval, WordToken, interval_overlap, speaker_label

__all__ = [
    'SubSegment',
    'ChangeDetectConfig',
    'EmbeddingExtractor',
    'MockExtractor',
    'FileExtractor',
    'normalize',
    'subsegment_uniform',
    'subsegment_sentence',
    'word_change_scores',
    'detect_speaker_changes',
    'subsegment_word',
    'subsegment_sentence_word',
    'cluster_kmeanspp',
    'kmeans_objective',
    'diarize_pipeline',
    'DiarizationResult',
    'SCHEMES',
]

logger = logging.getLogger(__name__)

SCHEMES = ('none', 'uniform-2s', 'uniform-4s', 'sentence', 'word', 'sentence+word')


@dataclass(frozen=True)
class SubSegment:
    channel: Optional[int]
    interval: TimeInterval
    words: tuple = ()
    speaker: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'words', tuple(self.words))


@dataclass(frozen=True)
class ChangeDetectConfig:
    context_words: int = 6
    similarity_threshold: float = 0.2
    min_context: int = 2

    def __post_init__(self):
        if self.context_words < 1:
            raise ValueError('context_words must be at least 1')
        if not -1.0 <= self.similarity_threshold <= 1.0:
            raise ValueError('similarity_threshold must lie in [-1, 1]')
        if not 1 <= self.min_context <= self.context_words:
            raise ValueError('min_context must lie in [1, context_words]')


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError('cannot normalize a zero vector')
    return v / norm


class EmbeddingExtractor(Protocol):
    def embed(self, stream, interval: TimeInterval, channel: Optional[int] = None) -> np.ndarray: ...


class MockExtractor:
    """Speaker centroid plus duration-scaled Gaussian noise.

    Each ground-truth speaker gets a random unit centroid. For a requested
    interval the dominant speaker on the stream (largest source energy
    contribution) is identified; its centroid is perturbed by isotropic noise
    whose expected norm is ``sigma / sqrt(duration)`` and the result is
    normalised. An interval without any speaker yields a random direction.
    Passing ``orthogonal=True`` uses standard basis vectors as centroids.
    """

    def __init__(self, truth, sigma: float = 0.0, dim: int = 64, seed: int = 0,
                 min_duration: float = 0.05, orthogonal: bool = False):
        self.truth = truth
        self.sigma = float(sigma)
        self.dim = dim
        self.seed = seed
        self.min_duration = min_duration
        if orthogonal:
            if len(truth.speakers) > dim:
                raise ValueError(f'{len(truth.speakers)} orthogonal centroids need dim >= that')
            self.centroids = {spk: np.eye(dim)[i] for i, spk in enumerate(truth.speakers)}
        else:
            rng = np.random.default_rng(seed)
            self.centroids = {spk: normalize(rng.standard_normal(dim)) for spk in truth.speakers}

    def dominant_speaker(self, stream, interval: TimeInterval) -> Optional[str]:
        a, b = stream.to_index(interval.start), stream.to_index(interval.end)
        x = stream.samples[a:b]
        best, best_score = None, 0.0
        for spk in self.truth.speakers:
            s = self.truth.sources[spk].samples[a:b]
            score = float(x @ s)
            if score > best_score + 1e-12:
                best, best_score = spk, score
        return best

    def embed(self, stream, interval: TimeInterval, channel: Optional[int] = None) -> np.ndarray:
        spk = self.dominant_speaker(stream, interval)
        key = f'{self.seed}:{channel}:{round(interval.start * 1e4)}:{round(interval.end * 1e4)}'
        rng = np.random.default_rng(zlib.crc32(key.encode()))
        noise = rng.standard_normal(self.dim) / np.sqrt(self.dim)
        if spk is None:
            return normalize(noise)
        scale = self.sigma / np.sqrt(max(interval.duration, self.min_duration))
        return normalize(self.centroids[spk] + scale * noise)


class FileExtractor:
    """Pre-computed embeddings keyed by channel and interval.

    The file holds one JSON object per line with ``channel``, ``start_time``,
    ``end_time`` and ``vector``. Lookups match times to the millisecond.
    """

    def __init__(self, path):
        self.table = {}
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            self.table[self._key(rec.get('channel'), rec['start_time'], rec['end_time'])] = \
                np.asarray(rec['vector'], dtype=float)

    @staticmethod
    def _key(channel, start, end):
        return channel, round(float(start) * 1000), round(float(end) * 1000)

    def embed(self, stream, interval: TimeInterval, channel: Optional[int] = None) -> np.ndarray:
        key = self._key(channel, interval.start, interval.end)
        if key not in self.table:
            raise KeyError(f'no embedding stored for channel {channel} interval {interval}')
        return normalize(self.table[key])


def subsegment_uniform(seg: SpeakerSegment, words, length: float) -> list:
    """Equal pieces of ``length`` seconds; each word joins the piece it overlaps most."""
    if not length > 0:
        raise ValueError('sub-segment length must be positive')
    start, end = seg.interval.start, seg.interval.end
    bounds = []
    k = 0
    while True:
        a = start + k * length
        b = min(start + (k + 1) * length, end)
        bounds.append(TimeInterval(a, b))
        if b >= end - 1e-9:
            break
        k += 1
    assigned = [[] for _ in bounds]
    for w in words:
        overlaps = [interval_overlap(w.interval, b) for b in bounds]
        best = int(np.argmax(overlaps))  # first maximum: ties go to the earlier piece
        if overlaps[best] <= 0:
            dist = [max(b.start - w.interval.midpoint, w.interval.midpoint - b.end, 0.0) for b in bounds]
            best = int(np.argmin(dist))
        assigned[best].append(w)
    return [SubSegment(seg.channel, b, tuple(ws)) for b, ws in zip(bounds, assigned)]


def _span(channel, words) -> SubSegment:
    return SubSegment(channel, TimeInterval(words[0].start, max(w.end for w in words)), tuple(words))


def _split_words(channel, words, cut_after) -> list:
    """Group ``words`` into sub-segments, closing a group after each index in ``cut_after``."""
    groups, current = [], []
    for i, w in enumerate(words):
        current.append(w)
        if i in cut_after:
            groups.append(current)
            current = []
    if current:
        groups.append(current)
    return [_span(channel, g) for g in groups]


def subsegment_sentence(seg: SpeakerSegment, words) -> list:
    """Cut after every sentence-final word; gaps between sentences belong to no piece."""
    words = list(words)
    cuts = {i for i, w in enumerate(words) if w.sentence_final}
    return _split_words(seg.channel, words, cuts)


def word_change_scores(word_embs, cfg: ChangeDetectConfig = ChangeDetectConfig()) -> np.ndarray:
    """Cosine similarity between mean embeddings left and right of every word gap.

    Entry ``g`` scores the gap between words ``g`` and ``g + 1``. Up to
    ``context_words`` embeddings are averaged per side; a gap with fewer than
    ``min_context`` words on either side gets NaN. Returns an empty array when
    no gap can have enough context.
    """
    X = np.asarray(word_embs, dtype=float)
    n = len(X)
    if n < 2 * cfg.min_context:
        return np.empty(0)
    c = cfg.context_words
    csum = np.concatenate([np.zeros((1, X.shape[1])), np.cumsum(X, axis=0)])
    scores = np.full(n - 1, np.nan)
    for g in range(n - 1):
        lo, mid, hi = max(0, g + 1 - c), g + 1, min(n, g + 1 + c)
        if mid - lo < cfg.min_context or hi - mid < cfg.min_context:
            continue
        left = (csum[mid] - csum[lo]) / (mid - lo)
        right = (csum[hi] - csum[mid]) / (hi - mid)
        denom = np.linalg.norm(left) * np.linalg.norm(right)
        scores[g] = 0.0 if denom == 0 else float(np.clip(left @ right / denom, -1.0, 1.0))
    return scores


def detect_speaker_changes(scores, cfg: ChangeDetectConfig = ChangeDetectConfig()) -> list:
    """Gaps whose score is below the threshold and minimal within ``context_words`` gaps.

    The minimum must be strict; among tied gaps only the earliest is kept.
    """
    scores = np.asarray(scores, dtype=float)
    c = cfg.context_words
    out = []
    for g, s in enumerate(scores):
        if np.isnan(s) or not s < cfg.similarity_threshold:
            continue
        left = scores[max(0, g - c):g]
        right = scores[g + 1:g + 1 + c]
        left = left[~np.isnan(left)]
        right = right[~np.isnan(right)]
        if np.all(left > s) and np.all(right >= s):
            out.append(g)
    return out


def subsegment_word(seg: SpeakerSegment, words, stream, extractor,
                    cfg: ChangeDetectConfig = ChangeDetectConfig()) -> list:
    """Split at speaker changes found from word-level embeddings."""
    words = list(words)
    if not words:
        return []
    if len(words) < 2:
        return [_span(seg.channel, words)]
    embs = [extractor.embed(stream, w.interval, seg.channel) for w in words]
    changes = detect_speaker_changes(word_change_scores(embs, cfg), cfg)
    return _split_words(seg.channel, words, set(changes))


def subsegment_sentence_word(seg: SpeakerSegment, words, stream, extractor,
                             cfg: ChangeDetectConfig = ChangeDetectConfig()) -> list:
    """Sentence split first, then word-level change detection inside every sentence."""
    out = []
    for sentence in subsegment_sentence(seg, words):
        parent = SpeakerSegment(seg.channel, sentence.interval)
        out.extend(subsegment_word(parent, sentence.words, stream, extractor, cfg))
    return out


def kmeans_objective(X, labels, centroids) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.sum((X - centroids[labels]) ** 2))


def _kmeanspp_init(X, k, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), centers)
            idx = int(rng.choice(remaining))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[centers].copy()


def _lloyd(X, k, rng, max_iter, tol):
    centroids = _kmeanspp_init(X, k, rng)
    history = []
    for _ in range(max_iter):
        d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        history.append(kmeans_objective(X, labels, centroids))
        new = centroids.copy()
        for j in range(k):
            members = X[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = np.max(np.linalg.norm(new - centroids, axis=1))
        centroids = new
        if shift < tol:
            break
    d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    history.append(kmeans_objective(X, labels, centroids))
    return labels, history


def cluster_kmeanspp(embeddings, k: int, seed: int = 0, max_iter: int = 300,
                     tol: float = 1e-8, n_init: int = 10, return_history: bool = False):
    """k-means with k-means++ seeding and Lloyd iterations.

    Lloyd iterations stop when no centroid moves by more than ``tol`` or after
    ``max_iter`` rounds; an emptied cluster keeps its previous centroid. The
    clustering is restarted ``n_init`` times from fresh seedings and the run
    with the lowest objective wins. With ``return_history`` the objective
    after every assignment step of the winning run is returned as well.
    """
    X = np.asarray(embeddings, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError('need a non-empty 2-D array of embeddings')
    if not 1 <= k <= len(X):
        raise ValueError(f'k={k} must lie in [1, {len(X)}]')
    if n_init < 1:
        raise ValueError('n_init must be at least 1')
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, history = _lloyd(X, k, rng, max_iter, tol)
        if best is None or history[-1] < best[1][-1] - 1e-12:
            best = (labels, history)
    labels, history = best
    if return_history:
        return labels, history
    return labels


@dataclass
class DiarizationResult:
    segments: list = field(default_factory=list)      # labeled SpeakerSegment
    subsegments: list = field(default_factory=list)   # labeled SubSegment
    words: list = field(default_factory=list)         # (channel, WordToken, label)


def _subsegments_for(scheme, seg, words, stream, extractor, cfg):
    if scheme == 'none':
        return [SubSegment(seg.channel, seg.interval, tuple(words))]
    if scheme == 'uniform-2s':
        return subsegment_uniform(seg, words, 2.0)
    if scheme == 'uniform-4s':
        return subsegment_uniform(seg, words, 4.0)
    if scheme == 'sentence':
        return subsegment_sentence(seg, words)
    if scheme == 'word':
        return subsegment_word(seg, words, stream, extractor, cfg)
    if scheme == 'sentence+word':
        return subsegment_sentence_word(seg, words, stream, extractor, cfg)
    raise ValueError(f'unknown sub-segmentation scheme {scheme!r}; choose from {SCHEMES}')


def diarize_pipeline(streams, vad_segments, transcripts, scheme: str, extractor, k: int,
                     seed: int = 0, cfg: ChangeDetectConfig = ChangeDetectConfig()) -> DiarizationResult:
    """Sub-segment every VAD segment, embed each piece, cluster, and label words.

    ``transcripts`` is parallel to ``vad_segments``. Pieces without words are
    dropped before clustering. If fewer pieces than ``k`` remain, ``k`` is
    reduced to the number of pieces.
    """
    if scheme not in SCHEMES:
        raise ValueError(f'unknown sub-segmentation scheme {scheme!r}; choose from {SCHEMES}')
    if len(transcripts) != len(vad_segments):
        raise ValueError('need exactly one transcript per VAD segment')
    pieces = []
    for seg, tr in zip(vad_segments, transcripts):
        stream = streams[seg.channel]
        for sub in _subsegments_for(scheme, seg, tr.words, stream, extractor, cfg):
            if sub.words:
                pieces.append(sub)
    result = DiarizationResult()
    if not pieces:
        return result
    embs = np.stack([extractor.embed(streams[p.channel], p.interval, p.channel) for p in pieces])
    k_eff = min(k, len(pieces))
    if k_eff < k:
        logger.info('only %d sub-segments for k=%d; clustering with k=%d', len(pieces), k, k_eff)
    labels = cluster_kmeanspp(embs, k_eff, seed)
    for p, lab in zip(pieces, labels):
        name = speaker_label(int(lab))
        labeled = SubSegment(p.channel, p.interval, p.words, name)
        result.subsegments.append(labeled)
        result.segments.append(SpeakerSegment(p.channel, p.interval, name))
        result.words.extend((p.channel, w, name) for w in p.words)
    result.words.sort(key=lambda t: (t[1].start, t[0] if t[0] is not None else -1))
    return result
