"""
Scoring transcripts and speaker labels
======================================

ORC WER ignores speaker labels and only asks whether each utterance can be
found on some output stream. cpWER additionally needs consistent labels. DER
scores the timing of the labels.
"""

from cssad.core import SpeakerSegment, TimeInterval
from cssad.metrics import cp_wer, der, levenshtein, orc_wer

print(levenshtein('the cat sat on the mat', 'the cat sat at mat').to_dict())

###############################################################################
# Two speakers, three utterances. The hypothesis streams hold the right words
# but speaker B's second utterance ended up on A's label.

utterances = [(0.0, 'good morning all'), (1.0, 'hi there'), (2.5, 'shall we begin')]
ref = {'A': 'good morning all', 'B': 'hi there shall we begin'}
hyp = {'x': 'good morning all shall we begin', 'y': 'hi there'}

orc = orc_wer(utterances, list(hyp.values()))
cp = cp_wer(ref, hyp)
print(f'ORC WER {orc.wer:.2f} with assignment {orc.assignment}')
print(f'cpWER   {cp.wer:.2f} with mapping {cp.assignment}')

###############################################################################
# DER: two overlapping reference speakers answered by one hypothesis label.

seg = lambda a, b, s: SpeakerSegment(None, TimeInterval(a, b), s)
d = der([seg(0, 10, 'A'), seg(5, 15, 'B')], [seg(0, 15, 'x')])
print(d.to_dict())
