"""
Bundled India state/UT transcriptions for spring and summer 2020.

``india_apr29_may08_deltas.csv``
    Daily net additions (active, recovered, dead) for 31 regions.
``india_apr29_may08_published_labels.csv``
    Hidden-state labels published alongside those deltas.
``india_may14_may20_published_labels.csv``
    Published week of labels ending on May 20.
``india_apr29_jun10_sequences.csv``
    Published label sequences from Apr 29 to Jun 10, raw tokens per region.
``india_jul11_published_labels.csv``, ``india_jul12_published_labels.csv``
    Published single-day statuses.
``published_model_may08.json``, ``refined_model_may20.json``
    Published models as printed (three decimals), so rows only sum to one to
    within a few thousandths.

Region names follow the spelling of the delta file throughout.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from importlib import resources

import numpy as np

from .core_model import HmmModel, HiddenState, CatastropheTag
from .ingest import Mode, parse_snapshot_csv, series_from_deltas
from .quantizer import LabeledState, read_labels_csv

__all__ = [
    "data_path", "read_text", "india_deltas", "published_labels", "published_week_labels",
    "published_status", "published_sequences", "published_model", "refined_model",
    "SEQUENCE_DATES", "PUBLISHED_TRANSITION_TOTALS", "PUBLISHED_EMISSION_TOTALS",
    "PUBLISHED_A", "PUBLISHED_B",
]

DELTAS = "india_apr29_may08_deltas.csv"


def data_path(name: str):
    return resources.files(__package__).joinpath("data", name)


def read_text(name: str) -> str:
    return data_path(name).read_text(encoding="utf-8")


def india_deltas():
    """Region -> :class:`~pandemic_hmm.ingest.RegionSeries` for Apr 29 - May 8, 2020."""
    return series_from_deltas(parse_snapshot_csv(read_text(DELTAS), Mode.DELTA))


def published_labels():
    return read_labels_csv(io.StringIO(read_text("india_apr29_may08_published_labels.csv")))


def published_week_labels():
    return read_labels_csv(io.StringIO(read_text("india_may14_may20_published_labels.csv")))


def published_status(day: str = "2020-07-12"):
    name = {"2020-07-11": "india_jul11_published_labels.csv",
            "2020-07-12": "india_jul12_published_labels.csv"}[day]
    return read_labels_csv(io.StringIO(read_text(name)))


# the published sequence table has no May 12, May 21 or May 26 - Jun 9 column
SEQUENCE_DATES = tuple(
    [dt.date(2020, 4, 29), dt.date(2020, 4, 30)]
    + [dt.date(2020, 5, d) for d in range(1, 12)]
    + [dt.date(2020, 5, d) for d in range(13, 21)]
    + [dt.date(2020, 5, d) for d in range(22, 26)]
    + [dt.date(2020, 6, 10)]
)


def _token(date, region, tok: str) -> LabeledState:
    tok = tok.strip()
    if tok.startswith("C"):
        tag, base = tok[:2], tok[3]
        return LabeledState(date, region, HiddenState.from_symbol(base), CatastropheTag(tag))
    return LabeledState(date, region, HiddenState.from_symbol(tok))


def published_sequences(aligned_only: bool = True) -> dict[str, list[LabeledState]]:
    """
    Published Apr 29 - Jun 10 label sequences.

    Six rows carry one token more than there are date columns and cannot be
    aligned to dates; they are skipped unless ``aligned_only`` is false, in
    which case their tokens are dated consecutively from Apr 29 and keep only
    their order.
    """
    out = {}
    for row in csv.DictReader(io.StringIO(read_text("india_apr29_jun10_sequences.csv"))):
        toks = row["sequence"].split()
        region = row["region"]
        if len(toks) == len(SEQUENCE_DATES):
            dates = SEQUENCE_DATES
        elif aligned_only:
            continue
        else:
            dates = [SEQUENCE_DATES[0] + dt.timedelta(days=k) for k in range(len(toks))]
        out[region] = [_token(d, region, t) for d, t in zip(dates, toks)]
    return dict(sorted(out.items()))


def published_model() -> HmmModel:
    """Published May 8 model; values as printed, loaded at 2e-3 row tolerance."""
    return HmmModel.from_json(read_text("published_model_may08.json"), atol=2e-3)


def refined_model() -> HmmModel:
    """Published refined May 20 model, kept for side-by-side comparison."""
    return HmmModel.from_json(read_text("refined_model_may20.json"), atol=5e-3)


#: Published pooled transition totals for Apr 30 - May 8 (rows H, I, S, D).
PUBLISHED_TRANSITION_TOTALS = np.array([
    [88, 0, 29, 7],
    [0, 0, 1, 1],
    [22, 3, 91, 12],
    [10, 0, 7, 14],
])

#: Published per-state symbol totals for Apr 29 - May 8, columns A-, A, R, D.
PUBLISHED_EMISSION_TOTALS = np.array([
    [1653, 0, 3604, 204],
    [0, 237, 0, 15],
    [0, 15069, 4506, 719],
    [0, 716, 2360, 79],
])

#: Published transition matrix, three decimals.
PUBLISHED_A = np.array([
    [0.710, 0.0, 0.234, 0.056],
    [0.0, 0.0, 0.5, 0.5],
    [0.172, 0.023, 0.711, 0.094],
    [0.323, 0.0, 0.226, 0.452],
])

#: Published emission matrix; the Healthy A- entry at the 30.269 % precision
#: printed beside the three-decimal 0.303.
PUBLISHED_B = np.array([
    [0.30269, 0.0, 0.65995, 0.03736],
    [0.0, 0.94048, 0.0, 0.05952],
    [0.0, 0.74253, 0.22204, 0.03543],
    [0.0, 0.22694, 0.74802, 0.02504],
])
