"""Meeting transcription by separation, recognition and diarization.

Sub-modules:

- ``core``: domain types and interval helpers.
- ``mixgen``: synthetic meetings with ground truth.
- ``css``: windowed two-stream separation and stitching.
- ``vad``: energy VAD with morphological smoothing.
- ``transcript``: recognizer interface and oracle / file recognizers.
- ``diarize``: sub-segmentation, embeddings, k-means++.
- ``metrics``: WER, ORC WER, cpWER, DER.
- ``io``: WAV, segment-JSON and RTTM.
- ``pipeline`` and ``cli``: orchestration and the ``cssad`` command.
"""
from .core import (ActivityMask, AudioSignal, SpeakerSegment, TimeInterval, Utterance,
                   WordToken, interval_overlap, seconds_to_frames)

__version__ = '0.1.0'
