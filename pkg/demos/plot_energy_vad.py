"""
Energy VAD on a separated stream
================================

Frames 40 dB below the loudest frame count as silence. Gaps up to 0.5 s are
closed and every region is widened by 0.4 s on both sides.
"""

import numpy as np

from cssad.core import AudioSignal
from cssad.vad import (VadConfig, detect_segments, frame_energy, morph_close,
                       morph_close_and_extend, threshold_activity)

###############################################################################
# Two bursts 0.3 s apart and one far away.

sr = 16000
x = np.zeros(8 * sr)
rng = np.random.default_rng(0)
for a, b in [(1.0, 2.0), (2.3, 3.0), (5.5, 6.0)]:
    x[int(a * sr):int(b * sr)] = rng.normal(size=int((b - a) * sr))
signal = AudioSignal(x, sr)

energy = frame_energy(signal)
print(f'{len(energy)} frames, loudest {energy.max():.1f} dB, floor {energy.min():.1f} dB')

###############################################################################
# The raw mask, then closing, then closing plus extension.

cfg = VadConfig()
raw = threshold_activity(energy, cfg)
closed = morph_close(raw, cfg.closing_gap)
final = morph_close_and_extend(raw, cfg)
for name, mask in [('raw', raw), ('closed', closed), ('extended', final)]:
    runs = [(round(a * cfg.frame_hop, 2), round(b * cfg.frame_hop, 2)) for a, b in mask.runs()]
    print(f'{name:>8}: {runs}')

###############################################################################
# ``detect_segments`` runs the whole chain and clips to the recording.

for seg in detect_segments(signal, channel=0):
    print(seg.interval)
