"""
Retraining on rolling windows
=============================

Fit one model per window of days; each model is meant for the days that
follow its window.
"""

import numpy as np

from pandemic_hmm import datasets, windowed_retrain

models = windowed_retrain(datasets.india_deltas(), window_length=5, stride=5)
for m in models:
    md = m.metadata
    print(f"{md.window_start} .. {md.window_end}: "
          f"P(stay Symptomatic) = {m.A.values[2, 2]:.3f}, pi = {np.round(m.pi, 3)}")
