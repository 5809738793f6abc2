"""
Scoring and decoding a region's observations
============================================

A day's observation is a bag of symbols (A-, A, R, D) whose sizes are the
day's case counts, so likelihoods are computed in log space.
"""

from pandemic_hmm import bag_dataset, datasets, forward_log_likelihood, viterbi_decode

model = datasets.published_model()
bags = bag_dataset(datasets.india_deltas())

for region in ("Tamilnadu", "Punjab", "Kerala"):
    seq = bags[region]
    ll = forward_log_likelihood(model, seq)
    path = viterbi_decode(model, seq, region)
    states = " ".join(s.symbol for s in path.states)
    print(f"{region:10s} log L = {ll:10.1f}  best path {path.log_probability:10.1f}  {states}")
