"""
Labelling region-days and fitting a count-based model
=====================================================

Each day's (active, recovered, dead) change is mapped to a hidden state by
a fixed rule, and the labels are then counted into transition and emission
matrices.
"""

import datetime as dt

import numpy as np

from pandemic_hmm import datasets, fit_heuristic, label_dataset

np.set_printoptions(precision=3, suppress=True)

# 31 Indian states and union territories, Apr 29 to May 8, 2020
deltas = datasets.india_deltas()
print(len(deltas), "regions;", deltas["Maharashtra"].deltas[0])

# label every region-day with the default rule
labels = label_dataset(deltas)
print("Uttar Pradesh:", " ".join(str(s) for s in labels["Uttar Pradesh"]))

# how often does the rule agree with the labels printed alongside the data?
printed = datasets.published_labels()
pairs = [(p.base, r.base) for reg in printed for p, r in zip(printed[reg], labels[reg])]
print(f"agreement {np.mean([a == b for a, b in pairs]):.3f}")

# fit A, B and pi over the ten days
window = (dt.date(2020, 4, 29), dt.date(2020, 5, 8))
fit = fit_heuristic(deltas, window)
print("A =\n", fit.model.A.values)
print("B =\n", fit.model.B.values)
print("pi =", fit.model.pi)

# the same fit from the printed labels, set against the published matrices
ext = fit_heuristic(deltas, window, labels=printed)
print("max |A - published| from printed labels:",
      np.abs(ext.model.A.values - datasets.PUBLISHED_A).max().round(4))
