"""PPG hypertension-level classification toolkit.

Signal conditioning, time-frequency front-ends, small trainable neural
feature extractors, classical classifier heads, and stacked ensembling
for 2.1 s fingertip PPG segments sampled at 1 kHz.
"""

__version__ = "0.1.0"
