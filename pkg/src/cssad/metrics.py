"""Transcription and diarization metrics: WER, ORC WER, cpWER and DER."""
from __future__ import annotations

import itertools
import re
import string
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import SpeakerSegment, TimeInterval

__all__ = [
    'WerStats',
    'DerStats',
    'normalize_text',
    'normalize_words',
    'levenshtein',
    'edit_distance',
    'hungarian',
    'orc_wer',
    'cp_wer',
    'der',
]

_PUNCT = re.compile(f'[{re.escape(string.punctuation)}]')


@dataclass(frozen=True)
class WerStats:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    reference_length: int = 0
    assignment: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        if min(self.substitutions, self.insertions, self.deletions, self.reference_length) < 0:
            raise ValueError('counts must be non-negative')

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        # With an empty reference only insertions can occur: I / max(1, N).
        return self.errors / max(1, self.reference_length)

    def __add__(self, other: 'WerStats') -> 'WerStats':
        return WerStats(self.substitutions + other.substitutions,
                        self.insertions + other.insertions,
                        self.deletions + other.deletions,
                        self.reference_length + other.reference_length)

    def __radd__(self, other):
        if other == 0:
            return self
        return NotImplemented

    def to_dict(self) -> dict:
        return {'wer': self.wer, 'errors': self.errors, 'substitutions': self.substitutions,
                'insertions': self.insertions, 'deletions': self.deletions,
                'reference_length': self.reference_length}


@dataclass(frozen=True)
class DerStats:
    missed_speech: float = 0.0
    false_alarm: float = 0.0
    speaker_confusion: float = 0.0
    scored_speech: float = 0.0
    mapping: Optional[dict] = field(default=None, compare=False)

    @property
    def der(self) -> float:
        errors = self.missed_speech + self.false_alarm + self.speaker_confusion
        if self.scored_speech == 0:
            return 0.0 if errors == 0 else float('inf')
        return errors / self.scored_speech

    def __add__(self, other: 'DerStats') -> 'DerStats':
        return DerStats(self.missed_speech + other.missed_speech,
                        self.false_alarm + other.false_alarm,
                        self.speaker_confusion + other.speaker_confusion,
                        self.scored_speech + other.scored_speech)

    def __radd__(self, other):
        if other == 0:
            return self
        return NotImplemented

    def to_dict(self) -> dict:
        return {'der': self.der, 'missed_speech': self.missed_speech,
                'false_alarm': self.false_alarm, 'speaker_confusion': self.speaker_confusion,
                'scored_speech': self.scored_speech}


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return ' '.join(_PUNCT.sub('', text.lower()).split())


def normalize_words(words) -> list:
    out = []
    for w in words:
        w = getattr(w, 'text', w)
        out.extend(normalize_text(w).split())
    return out


def _as_tokens(seq):
    if isinstance(seq, str):
        return seq.split()
    return list(seq)


def _dp_table(ref, hyp) -> np.ndarray:
    """Full edit-distance table, filled row by row with vectorised insertions."""
    vocab = {}
    r = np.array([vocab.setdefault(t, len(vocab)) for t in ref], dtype=np.int64)
    h = np.array([vocab.setdefault(t, len(vocab)) for t in hyp], dtype=np.int64)
    m = len(h)
    D = np.empty((len(r) + 1, m + 1), dtype=np.int64)
    D[0] = np.arange(m + 1)
    j = np.arange(m + 1)
    for i in range(1, len(r) + 1):
        row = np.empty(m + 1, dtype=np.int64)
        row[0] = i
        row[1:] = np.minimum(D[i - 1, 1:] + 1, D[i - 1, :-1] + (h != r[i - 1]))
        # Insertions chain along the row: row[j] = min_{j' <= j} row[j'] + (j - j').
        D[i] = np.minimum.accumulate(row - j) + j
    return D


def edit_distance(ref, hyp) -> int:
    ref, hyp = _as_tokens(ref), _as_tokens(hyp)
    if not ref or not hyp:
        return len(ref) + len(hyp)
    return int(_dp_table(ref, hyp)[-1, -1])


def levenshtein(ref, hyp) -> WerStats:
    """Unit-cost word alignment.

    The backtrace prefers substitution (or match), then deletion, then
    insertion, which makes the S/I/D split deterministic.
    """
    ref, hyp = _as_tokens(ref), _as_tokens(hyp)
    if not ref or not hyp:
        return WerStats(0, len(hyp), len(ref), len(ref))
    D = _dp_table(ref, hyp)
    i, j = len(ref), len(hyp)
    s = ins = dels = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and D[i, j] == D[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and D[i, j] == D[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerStats(int(s), ins, dels, len(ref))


def hungarian(costs) -> list:
    """Minimum-cost one-to-one assignment as ``(row, col)`` pairs.

    Rectangular matrices leave the surplus rows or columns unassigned.
    """
    C = np.asarray(costs, dtype=float)
    if C.size == 0:
        return []
    if not np.all(np.isfinite(C)):
        raise ValueError('costs must be finite')
    rows, cols = linear_sum_assignment(C)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


# ---------------------------------------------------------------- ORC WER

def _utterance_order(utterances):
    keyed = []
    for idx, u in enumerate(utterances):
        start = getattr(getattr(u, 'interval', None), 'start', None)
        if start is None:
            start = u[0] if isinstance(u, tuple) else 0.0
        keyed.append((start, idx))
    return [idx for _, idx in sorted(keyed)]


def _utterance_tokens(u) -> list:
    if hasattr(u, 'words'):
        return normalize_words(u.words)
    if isinstance(u, tuple):
        return normalize_words(_as_tokens(u[1]))
    return normalize_words(_as_tokens(u))


def _stats_for_assignment(utts, hyps, order, assignment) -> WerStats:
    total = WerStats()
    for s, hyp in enumerate(hyps):
        ref = [t for i in order if assignment[i] == s for t in utts[i]]
        total = total + levenshtein(ref, hyp)
    return total


def _orc_branch_and_bound(utts, hyps, order):
    """Depth-first search over assignments with an admissible lower bound.

    For every stream the running edit-distance row of its partial reference
    against the full hypothesis is kept; the row minimum bounds the final cost
    of that stream from below.
    """
    S = len(hyps)
    hyp_ids = []
    vocab = {}
    for h in hyps:
        hyp_ids.append(np.array([vocab.setdefault(t, len(vocab)) for t in h], dtype=np.int64))
    utt_ids = [np.array([vocab.setdefault(t, len(vocab)) for t in u], dtype=np.int64) for u in utts]
    cols = [np.arange(len(h) + 1) for h in hyp_ids]

    def extend(row, h, jj, words):
        for w in words:
            new = np.empty_like(row)
            new[0] = row[0] + 1
            new[1:] = np.minimum(row[1:] + 1, row[:-1] + (h != w))
            row = np.minimum.accumulate(new - jj) + jj
        return row

    best_cost = [np.inf]
    best_assign = [None]
    current = [0] * len(utts)

    def bound(rows):
        return sum(int(r.min()) for r in rows)

    def visit(pos, rows):
        if pos == len(order):
            cost = sum(int(r[-1]) for r in rows)
            if cost < best_cost[0]:
                best_cost[0] = cost
                best_assign[0] = list(current)
            return
        i = order[pos]
        children = []
        for s in range(S):
            new_row = extend(rows[s], hyp_ids[s], cols[s], utt_ids[i])
            child = rows[:s] + [new_row] + rows[s + 1:]
            children.append((bound(child), s, child))
        children.sort(key=lambda c: (c[0], c[1]))
        for lb, s, child in children:
            if lb >= best_cost[0]:
                break
            current[i] = s
            visit(pos + 1, child)

    visit(0, [c.copy() for c in cols])
    return best_assign[0]


def _orc_dp(utts, hyps, order):
    """Exact multi-stream alignment over states (utterances done, position per stream).

    ``F[j_1, ..., j_S]`` is the least cost of aligning the utterances handled
    so far with the stream prefixes ``hyp_s[:j_s]``. Each utterance is
    aligned, on one chosen stream, to a contiguous piece of that stream that
    starts where the previous piece ended. Hypothesis words left at the end of
    a stream count as insertions.
    """
    S = len(hyps)
    vocab = {}
    hyp_ids = [np.array([vocab.setdefault(t, len(vocab)) for t in h], dtype=np.int64) for h in hyps]
    shape = tuple(len(h) + 1 for h in hyps)
    F = np.full(shape, np.iinfo(np.int64).max // 4, dtype=np.int64)
    F[(0,) * S] = 0
    history = [F]
    for i in order:
        words = [vocab.setdefault(t, len(vocab)) for t in utts[i]]
        best = None
        for s in range(S):
            G = _align_along_axis(F, hyp_ids[s], words, axis=s)
            best = G if best is None else np.minimum(best, G)
        F = best
        history.append(F)

    remaining = sum(np.meshgrid(*[len(h) - np.arange(len(h) + 1) for h in hyps], indexing='ij'))
    final = F + remaining
    state = np.unravel_index(int(np.argmin(final)), shape)

    # Backtrace: recover stream and start position of every utterance.
    assignment = [0] * len(utts)
    for step in range(len(order) - 1, -1, -1):
        i = order[step]
        prev = history[step]
        target = int(history[step + 1][state])
        found = False
        for s in range(S):
            for a in range(state[s], -1, -1):
                start = list(state)
                start[s] = a
                start = tuple(start)
                cost = int(prev[start]) + edit_distance(utts[i], hyps[s][a:state[s]])
                if cost == target:
                    assignment[i] = s
                    state = start
                    found = True
                    break
            if found:
                break
        if not found:  # pragma: no cover - guarded by construction
            raise RuntimeError('ORC backtrace failed')
    return assignment


def _align_along_axis(F, hyp, words, axis):
    """Levenshtein recursion for one utterance along one stream axis, vectorised over the rest."""
    G = np.moveaxis(F, axis, -1)
    m = G.shape[-1]
    jj = np.arange(m)
    # Leading insertions: cost may enter at any earlier position along the axis.
    G = np.minimum.accumulate(G - jj, axis=-1) + jj
    for w in words:
        new = np.empty_like(G)
        new[..., 0] = G[..., 0] + 1
        new[..., 1:] = np.minimum(G[..., 1:] + 1, G[..., :-1] + (hyp != w))
        G = np.minimum.accumulate(new - jj, axis=-1) + jj
    return np.moveaxis(G, -1, axis)


def orc_wer(ref_utterances, hyp_streams, exhaustive_limit: int = 20,
            method: Optional[str] = None) -> WerStats:
    """WER under the best assignment of reference utterances to output streams.

    ``ref_utterances`` are :class:`~cssad.core.Utterance` objects (or
    ``(start, words)`` tuples); ``hyp_streams`` is a list of word sequences.
    Utterances assigned to the same stream are concatenated in start-time
    order. Up to ``exhaustive_limit`` utterances the search enumerates
    assignments with branch-and-bound pruning; larger inputs use the exact
    multi-stream dynamic programme. The returned stats carry the assignment
    (stream index per input utterance).
    """
    if len(hyp_streams) == 0:
        raise ValueError('need at least one hypothesis stream')
    utts = [_utterance_tokens(u) for u in ref_utterances]
    hyps = [normalize_words(_as_tokens(h)) for h in hyp_streams]
    order = _utterance_order(ref_utterances)
    if not utts:
        assignment = []
    elif len(hyps) == 1:
        assignment = [0] * len(utts)
    else:
        if method is None:
            method = 'exhaustive' if len(utts) <= exhaustive_limit else 'dp'
        if method == 'exhaustive':
            assignment = _orc_branch_and_bound(utts, hyps, order)
        elif method == 'dp':
            assignment = _orc_dp(utts, hyps, order)
        else:
            raise ValueError(f'unknown ORC method {method!r}')
    stats = _stats_for_assignment(utts, hyps, order, assignment)
    return WerStats(stats.substitutions, stats.insertions, stats.deletions,
                    stats.reference_length, assignment=tuple(assignment))


# ---------------------------------------------------------------- cpWER

def cp_wer(ref_by_speaker: dict, hyp_by_speaker: dict) -> WerStats:
    """Concatenated minimum-permutation WER.

    Every reference speaker is paired with at most one hypothesis label so
    that the summed edit distance is minimal. Unpaired reference speakers
    count all their words as deletions, unpaired labels all theirs as
    insertions. The assignment maps reference speaker to label (``None`` if
    unpaired).
    """
    refs = {k: normalize_words(_as_tokens(v)) for k, v in ref_by_speaker.items()}
    hyps = {k: normalize_words(_as_tokens(v)) for k, v in hyp_by_speaker.items()}
    r_keys, h_keys = list(refs), list(hyps)
    R, H = len(r_keys), len(h_keys)
    n = R + H
    if n == 0:
        return WerStats(assignment={})
    pair_stats = {}
    C = np.zeros((n, n))
    for a, rk in enumerate(r_keys):
        for b, hk in enumerate(h_keys):
            st = levenshtein(refs[rk], hyps[hk])
            pair_stats[a, b] = st
            C[a, b] = st.errors
        C[a, H:] = len(refs[rk])
    for b, hk in enumerate(h_keys):
        C[R:, b] = len(hyps[hk])
    total = WerStats()
    mapping = {}
    for a, b in hungarian(C):
        if a < R and b < H:
            total = total + pair_stats[a, b]
            mapping[r_keys[a]] = h_keys[b]
        elif a < R:
            total = total + WerStats(0, 0, len(refs[r_keys[a]]), len(refs[r_keys[a]]))
            mapping[r_keys[a]] = None
        elif b < H:
            total = total + WerStats(0, len(hyps[h_keys[b]]), 0, 0)
    return WerStats(total.substitutions, total.insertions, total.deletions,
                    total.reference_length, assignment=mapping)


# ---------------------------------------------------------------- DER

def _merge(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out if b > a]


def _by_speaker(segments):
    spk = {}
    for s in segments:
        label = s.speaker if s.speaker is not None else 'unk'
        spk.setdefault(label, []).append((s.interval.start, s.interval.end))
    return {k: _merge(v) for k, v in spk.items()}


def _overlap_total(a, b):
    total = 0.0
    i = j = 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


def der(ref, hyp, collar: float = 0.0) -> DerStats:
    """Diarization error rate without collar, overlap regions scored.

    Reference and hypothesis labels are matched one-to-one so that the total
    co-active time is maximal. The timeline is then cut at every segment
    boundary and each region contributes miss, false alarm and confusion
    according to the counts of active reference and hypothesis speakers.
    """
    if collar:
        raise NotImplementedError('only collar-free scoring is supported')
    R = _by_speaker(ref)
    H = _by_speaker(hyp)
    r_keys, h_keys = sorted(R), sorted(H)
    mapping = {}
    if r_keys and h_keys:
        M = np.array([[_overlap_total(R[r], H[h]) for h in h_keys] for r in r_keys])
        for a, b in hungarian(-M):
            if M[a, b] > 0:
                mapping[r_keys[a]] = h_keys[b]

    points = sorted({t for ivs in list(R.values()) + list(H.values()) for iv in ivs for t in iv})
    miss = fa = conf = scored = 0.0
    for t0, t1 in zip(points[:-1], points[1:]):
        dur = t1 - t0
        if dur <= 0:
            continue
        mid = 0.5 * (t0 + t1)
        ref_on = {k for k, ivs in R.items() if any(a <= mid < b for a, b in ivs)}
        hyp_on = {k for k, ivs in H.items() if any(a <= mid < b for a, b in ivs)}
        n_ref, n_hyp = len(ref_on), len(hyp_on)
        correct = sum(1 for r in ref_on if mapping.get(r) in hyp_on)
        scored += n_ref * dur
        miss += max(0, n_ref - n_hyp) * dur
        fa += max(0, n_hyp - n_ref) * dur
        conf += (min(n_ref, n_hyp) - correct) * dur
    return DerStats(miss, fa, conf, scored, mapping=mapping)
