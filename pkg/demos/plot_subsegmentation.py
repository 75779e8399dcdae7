"""
Splitting segments into single-speaker pieces
=============================================

A VAD segment may hold several speakers. It can be cut uniformly, at
sentence ends reported by the recognizer, or where the speaker embedding of
the words changes.
"""

import numpy as np

from cssad.core import SpeakerSegment, TimeInterval, WordToken
from cssad.diarize import (ChangeDetectConfig, detect_speaker_changes, subsegment_sentence,
                           subsegment_sentence_word, subsegment_uniform, word_change_scores)

###############################################################################
# Fifteen words from three speakers: A talks, B interrupts, A finishes the
# sentence and C asks a question.

text = "Hello, let's start uh sorry I'm late uh the meeting. What do we discuss today?".split()
speakers = 'AAAABBBAAACCCCC'
words = [WordToken(t, TimeInterval(0.3 * i, 0.3 * (i + 1)), t.endswith(('.', '?')))
         for i, t in enumerate(text)]
segment = SpeakerSegment(0, TimeInterval(0.0, 4.5))


def show(pieces):
    return ' | '.join(' '.join(w.text for w in p.words) for p in pieces)


print('uniform 2 s :', show(subsegment_uniform(segment, words, 2.0)))
print('sentence    :', show(subsegment_sentence(segment, words)))

###############################################################################
# Word-level embeddings: one clean direction per speaker plus a little noise.

rng = np.random.default_rng(1)
centroid = dict(zip('ABC', np.eye(3)))
embs = [centroid[s] + 0.05 * rng.normal(size=3) for s in speakers]


class Lookup:
    def embed(self, stream, interval, channel=None):
        return embs[int(round(interval.start / 0.3))]


###############################################################################
# Averaging six words per side blurs B's three-word interjection: the
# similarity never drops below 0.2 inside the first sentence. A two-word
# context resolves it.

for cfg in (ChangeDetectConfig(), ChangeDetectConfig(context_words=2, min_context=1)):
    scores = word_change_scores(embs[:10], cfg)
    print(f'context {cfg.context_words}:', np.round(scores, 2), '->',
          detect_speaker_changes(scores, cfg))
    print('   sentence+word:', show(subsegment_sentence_word(segment, words, None, Lookup(), cfg)))
