"""
Acceptance criteria, one test per criterion, at the stated tolerances.

Each test reports its measured value through the ``report`` fixture, and
``conftest.py`` prints one PASS/FAIL line per criterion at the end of the run.
"""

import datetime as dt
import os
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from pandemic_hmm import datasets
from pandemic_hmm.core_model import HiddenState, HmmModel, validate_model
from pandemic_hmm.inference import (
    forward_log_likelihood, region_transition_profile, viterbi_decode,
)
from pandemic_hmm.ingest import build_delta_series, cumulative_from_series
from pandemic_hmm.learner import (
    bag_dataset, count_emissions, count_transitions, daily_state_distribution,
    estimate_emission_matrix, estimate_transition_matrix, fit_baum_welch,
    fit_heuristic, refine, sample_dataset, windowed_retrain,
)
from pandemic_hmm.quantizer import label_dataset
from pandemic_hmm.reporting import render_dot, status_table

import oracles

APR29, APR30, MAY8 = dt.date(2020, 4, 29), dt.date(2020, 4, 30), dt.date(2020, 5, 8)


def _worst(got, want, mask=None):
    diff = np.abs(np.asarray(got) - np.asarray(want))
    if mask is not None:
        diff = np.where(mask, diff, 0.0)
    i, j = np.unravel_index(np.argmax(diff), diff.shape)
    return float(diff[i, j]), (int(i), int(j))


def test_criterion_1_published_transition_matrix(report):
    labels = datasets.published_labels()
    t0 = time.perf_counter()
    A = estimate_transition_matrix(count_transitions(labels, (APR30, MAY8))).values
    elapsed = time.perf_counter() - t0
    worst, at = _worst(A, datasets.PUBLISHED_A)
    report(f"max |dA| = {worst:.4f} at {at} (tol 5e-4), {elapsed * 1e3:.1f} ms")
    assert elapsed < 1.0
    assert worst <= 5e-4


# the two A- entries printed without a value are not compared
_B_COMPARED = np.ones((4, 4), dtype=bool)
_B_COMPARED[2, 0] = _B_COMPARED[3, 0] = False


def test_criterion_2_published_emission_matrix(report):
    labels = datasets.published_labels()
    bags = bag_dataset(datasets.india_deltas(), (APR29, MAY8))
    t0 = time.perf_counter()
    B = estimate_emission_matrix(count_emissions(labels, bags, (APR29, MAY8))).values
    elapsed = time.perf_counter() - t0
    worst, at = _worst(B, datasets.PUBLISHED_B, _B_COMPARED)
    report(f"max |dB| = {worst:.4f} at {at} (tol 1e-4), {elapsed * 1e3:.1f} ms")
    assert elapsed < 1.0
    assert worst <= 1e-4


# (region, date, expected label) read from the printed tables
CURATED = [
    ("Uttar Pradesh", "2020-04-29", "H"),
    ("Maharashtra", "2020-04-29", "S"),
    ("Tamilnadu", "2020-04-29", "D"),
    ("Punjab", "2020-04-29", "I"),
    ("Telengana", "2020-04-30", "H"),
    ("Telengana", "2020-05-02", "S"),
    ("Andhra Pradesh", "2020-05-03", "D"),
    ("Jammu and Kashmir", "2020-04-29", "D"),
    ("West Bengal", "2020-05-04", "I"),
    ("West Bengal", "2020-05-08", "I"),
    ("Chandigarh", "2020-04-29", "S"),
    ("Chandigarh", "2020-04-30", "S"),
    ("Haryana", "2020-04-29", "H"),
    ("Himachal", "2020-05-06", "C1(H)"),
    ("Himachal", "2020-05-07", "S"),
]


def test_criterion_3_quantizer_fixtures(report):
    rule = label_dataset(datasets.india_deltas())
    lookup = {(s.region, s.date.isoformat()): s for seq in rule.values() for s in seq}
    mismatched = [(r, d, want, str(lookup[(r, d)])) for r, d, want in CURATED
                  if str(lookup[(r, d)]) != want]
    assert lookup[("Telengana", "2020-04-30")].carried_forward
    printed = datasets.published_labels()
    pairs = [(p.base, lookup[(p.region, p.date.isoformat())].base)
             for seq in printed.values() for p in seq]
    agree = sum(a == b for a, b in pairs)
    report(f"{len(CURATED) - len(mismatched)}/{len(CURATED)} curated rows exact; "
           f"base-state agreement {agree}/{len(pairs)} = {agree / len(pairs):.4f} (gate 0.75)")
    assert not mismatched
    assert agree / len(pairs) >= 0.75


def test_criterion_4_rule_driven_fit(report):
    model = fit_heuristic(datasets.india_deltas(), (APR29, MAY8)).model
    dA, atA = _worst(model.A.values, datasets.PUBLISHED_A)
    dB, atB = _worst(model.B.values, datasets.PUBLISHED_B, _B_COMPARED)
    report(f"max |dA| = {dA:.4f} at {atA}, max |dB| = {dB:.4f} at {atB} (tol 0.08)")
    assert dA <= 0.08
    assert dB <= 0.08


def test_criterion_5_oracle_equivalence(report):
    rng = np.random.default_rng(20200429)
    worst_fwd = worst_vit = 0.0
    impossible = 0
    t0 = time.perf_counter()
    for _ in range(200):
        model = oracles.random_model(rng)
        T = int(rng.integers(1, 6))
        C = oracles.random_bags(rng, T)
        A, B, pi = model.A.values, model.B.values, model.pi
        brute = oracles.brute_force_log_likelihood(A, B, pi, C)
        best = max(lp for _, lp in oracles.enumerate_paths(A, B, pi, C))
        if brute == -np.inf:
            impossible += 1
            continue
        fwd = forward_log_likelihood(model, C)
        path = viterbi_decode(model, C)
        own = oracles.path_log_prob(A, B, pi, C, [int(s) for s in path.states])
        worst_fwd = max(worst_fwd, abs(fwd - brute) / abs(brute))
        worst_vit = max(worst_vit, abs(path.log_probability - best) / abs(best),
                        abs(own - best) / abs(best))
    elapsed = time.perf_counter() - t0
    report(f"200 cases ({impossible} impossible), forward rel err {worst_fwd:.2e}, "
           f"viterbi rel err {worst_vit:.2e}, {elapsed:.2f} s")
    assert worst_fwd <= 1e-10
    assert worst_vit <= 1e-10
    assert elapsed < 10.0


TRUE_A = [[.80, .10, .05, .05], [.05, .70, .20, .05], [.05, .05, .75, .15], [.20, .02, .08, .70]]
TRUE_B = [[.30, .02, .60, .08], [.02, .85, .03, .10], [.02, .70, .23, .05], [.02, .25, .70, .03]]
TRUE_PI = [.4, .2, .2, .2]


def test_criterion_6_em_properties(report):
    truth = HmmModel.from_arrays(TRUE_A, TRUE_B, TRUE_PI)
    data, _ = sample_dataset(truth, 10, 2000, np.random.default_rng(0))
    init = HmmModel.from_arrays(0.5 * np.array(TRUE_A) + 0.125, 0.5 * np.array(TRUE_B) + 0.125,
                                0.5 * np.array(TRUE_PI) + 0.125)
    fit = fit_baum_welch(data, init, max_iters=50, tol=1e-8)
    traces = [fit.trace]
    rng = np.random.default_rng(1)
    for _ in range(5):
        small, _ = sample_dataset(truth, 3, 60, rng)
        start = HmmModel.from_arrays(rng.dirichlet(np.ones(4), 4), rng.dirichlet(np.ones(4), 4),
                                     rng.dirichlet(np.ones(4)))
        traces.append(fit_baum_welch(small, start, max_iters=30, tol=1e-9).trace)
    min_step = min(float(np.min(np.diff(t))) for t in traces if len(t) > 1)
    l1 = np.abs(fit.model.A.values - np.array(TRUE_A)).sum(axis=1)
    report(f"{len(traces)} runs, min trace step {min_step:.3e}; "
           f"A row L1 {np.round(l1, 4).tolist()} (tol 0.15)")
    assert min_step >= -1e-12
    assert np.all(l1 < 0.15)


def _all_learned_models():
    deltas = datasets.india_deltas()
    heuristic = fit_heuristic(deltas, (APR29, MAY8))
    external = fit_heuristic(deltas, (APR29, MAY8), labels=datasets.published_labels())
    refined = refine(datasets.published_model(), deltas, (APR29, MAY8))
    truth = HmmModel.from_arrays(TRUE_A, TRUE_B, TRUE_PI)
    small, _ = sample_dataset(truth, 3, 50, np.random.default_rng(2))
    bw = fit_baum_welch(small, truth, max_iters=5).model
    models = [heuristic.model, external.model, refined, bw]
    models += windowed_retrain(deltas, 5, 5)
    models += [HmmModel.from_json(m.to_json()) for m in list(models)]
    return models, [heuristic.pi_series, external.pi_series]


def test_criterion_7_invariant_suite(report):
    models, pis = _all_learned_models()
    problems = [p for m in models for p in validate_model(m, atol=1e-9)]
    pis.append(daily_state_distribution(datasets.published_week_labels()))
    pi_err = max(abs(v.sum() - 1) for s in pis for v, e in zip(s.vectors, s.empty) if not e)

    deltas = datasets.india_deltas()
    records = [rec for region in deltas for rec in cumulative_from_series(deltas[region])]
    back = build_delta_series(records)
    round_trip = all(back[r].deltas == deltas[r].deltas for r in deltas) and set(back) == set(deltas)

    keys = list(deltas)
    random.Random(7).shuffle(keys)
    shuffled = {k: deltas[k] for k in keys}
    same_labels = label_dataset(shuffled) == label_dataset(deltas)
    same_fit = (fit_heuristic(shuffled, (APR29, MAY8)).model.to_json()
                == fit_heuristic(deltas, (APR29, MAY8)).model.to_json())
    report(f"{len(models)} models, {len(problems)} row problems; max |pi sum - 1| {pi_err:.1e}; "
           f"round trip {'exact' if round_trip else 'BROKEN'}; "
           f"permutation labels {same_labels}, fit {same_fit}")
    assert problems == []
    assert pi_err <= 1e-9
    assert round_trip
    assert same_labels and same_fit


_DOT_SCRIPT = """
import sys
from pandemic_hmm import datasets
from pandemic_hmm.inference import region_transition_profile
from pandemic_hmm.reporting import render_dot
sys.stdout.write(render_dot(region_transition_profile(datasets.published_sequences()["Maharashtra"])))
"""


def test_criterion_8_reporting_fidelity(report):
    sizes = status_table(datasets.published_status("2020-07-12")).sizes()
    got = [sizes[s] for s in HiddenState]
    profile = region_transition_profile(datasets.published_sequences()["Maharashtra"])
    ss = profile.frequency(HiddenState.SYMPTOMATIC, HiddenState.SYMPTOMATIC)
    first = render_dot(profile)
    again = render_dot(region_transition_profile(datasets.published_sequences()["Maharashtra"]))
    env = dict(os.environ, PYTHONHASHSEED="12345")
    other = subprocess.run([sys.executable, "-c", _DOT_SCRIPT], env=env, check=True,
                           capture_output=True, text=True).stdout
    stable = first == again == other
    report(f"bucket sizes {got}; Maharashtra S->S {ss:.4f} (target 0.91 +/- 0.03); "
           f"DOT byte-stable {stable}")
    assert got == [4, 5, 8, 14]
    assert abs(ss - 0.91) <= 0.03
    assert stable
