"""Hidden Markov model surveillance of regional epidemic case reports."""

from . import datasets
from .core_model import (
    CatastropheTag, HiddenState, HmmModel, ModelMetadata, ObservationSymbol,
    StochasticMatrix, ZeroRowPolicy, make_stochastic_matrix, normalize_counts,
    validate_model,
)
from .ingest import (
    Mode, RegionDayDelta, RegionDayRecord, RegionSeries, build_delta_series,
    parse_snapshot_csv, series_from_deltas, validate_series,
)
from .quantizer import LabeledState, RuleConfig, label_dataset, label_series, quantize_day
from .learner import (
    bag_dataset, bag_observations, count_emissions, count_transitions, daily_state_distribution,
    estimate_emission_matrix, estimate_transition_matrix, fit_baum_welch,
    fit_heuristic, refine, sample_dataset, windowed_retrain,
)
from .inference import (
    day_log_emission, forward_log_likelihood, region_transition_profile, viterbi_decode,
)
from .reporting import distribution_timeseries, render_dot, status_table, status_text

__version__ = "0.1.0"
