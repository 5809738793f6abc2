"""
Status tables and transition diagrams
=====================================

Group regions by their state on a date, then draw one region's empirical
transition frequencies as a Graphviz diagram. Solid edges move toward
recovery along H -> I -> S -> D -> H, dashed edges move away from it.
"""

from pandemic_hmm import datasets, region_transition_profile, render_dot, status_table, status_text

print(status_text(status_table(datasets.published_status("2020-07-12"))))

seq = datasets.published_sequences()["Maharashtra"]
profile = region_transition_profile(seq)
print(f"Maharashtra stays Symptomatic {profile.frequency(2, 2):.0%} of the time")
print(render_dot(profile))
# pipe this text through `neato -Tpng` to get a picture
