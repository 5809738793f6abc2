import numpy as np
import pytest
from hypothesis import given, strategies as st

from pandemic_hmm import datasets
from pandemic_hmm.core_model import (
    STATES, SYMBOLS, HiddenState, HmmModel, ModelMetadata, NegativeEntry,
    ObservationSymbol, RowSumViolation, ZeroRowPolicy, make_stochastic_matrix,
    normalize_counts, validate_model,
)

TABLE_HEALTHY_ROW = [0.710, 0, 0.234, 0.056]


def test_alphabet_order_is_fixed():
    assert [s.symbol for s in STATES] == ["H", "I", "S", "D"]
    assert [s.symbol for s in SYMBOLS] == ["A-", "A", "R", "D"]
    assert HiddenState.from_symbol("s") is HiddenState.SYMPTOMATIC
    assert ObservationSymbol.from_symbol("A-") is ObservationSymbol.ACTIVE_MINUS
    with pytest.raises(ValueError):
        HiddenState.from_symbol("C1")


def test_make_matrix_accepts_published_row_and_identity():
    m = make_stochastic_matrix([TABLE_HEALTHY_ROW, [0, 0, .5, .5], [1, 0, 0, 0], [0, 0, 0, 1]],
                               STATES, STATES)
    assert m.row(HiddenState.HEALTHY)[0] == 0.710
    eye = make_stochastic_matrix(np.eye(4), STATES, STATES)
    assert eye.unvisited == (False,) * 4


def test_make_matrix_rejects_bad_rows():
    with pytest.raises(RowSumViolation) as e:
        make_stochastic_matrix([[0.5, 0.6, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]],
                               STATES, STATES)
    assert e.value.row_label is HiddenState.HEALTHY
    with pytest.raises(NegativeEntry):
        make_stochastic_matrix([[1.2, -0.2, 0, 0]] * 4, STATES, STATES)


def test_make_matrix_allows_zero_row_as_unvisited():
    m = make_stochastic_matrix([[1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]],
                               STATES, STATES)
    assert m.unvisited == (False, True, False, False)
    np.testing.assert_array_equal(m.with_uniform_rows().values[1], [0.25] * 4)


@pytest.mark.parametrize("row, expected, tol", [
    ((88, 0, 29, 7), (0.710, 0, 0.234, 0.056), 5e-4),
    ((0, 0, 1, 1), (0, 0, 0.5, 0.5), 0),
])
def test_normalize_published_count_rows(row, expected, tol):
    m = normalize_counts([row, [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]])
    np.testing.assert_allclose(m.values[0], expected, atol=tol)


def test_normalize_zero_row_policies():
    counts = [[0, 0, 0, 0], [1, 1, 1, 1], [0, 0, 0, 0], [2, 0, 0, 0]]
    zero = normalize_counts(counts, ZeroRowPolicy.ZERO_ROW)
    assert zero.unvisited == (True, False, True, False)
    uni = normalize_counts(counts, ZeroRowPolicy.UNIFORM)
    np.testing.assert_array_equal(uni.values[0], [0.25] * 4)
    assert uni.unvisited == (False,) * 4


count_rows = st.lists(st.integers(0, 10_000), min_size=4, max_size=4)


@given(st.lists(count_rows, min_size=4, max_size=4), st.integers(1, 1000))
def test_normalize_row_sums_and_scale_invariance(rows, k):
    m = normalize_counts(rows)
    for row, empty in zip(m.values, m.unvisited):
        if empty:
            assert not row.any()
        else:
            assert abs(row.sum() - 1) <= 1e-9
    scaled = normalize_counts((np.array(rows) * k).tolist())
    np.testing.assert_allclose(scaled.values, m.values, rtol=0, atol=1e-15)


def test_validate_published_model_at_printed_precision():
    m = datasets.published_model()
    assert validate_model(m, atol=2e-3) == []
    # the Detected row sums to 1.001 as printed
    assert any(p.startswith("A[D]") for p in validate_model(m, atol=1e-9))


def test_validate_reports_pi_sum():
    m = datasets.published_model()
    bad = HmmModel(m.A, m.B, np.array([0.5, 0.5, 0.5, 0]))
    problems = validate_model(bad, atol=2e-3)
    assert len(problems) == 1 and problems[0].startswith("pi")


def test_validate_accepts_unvisited_row():
    A = np.eye(4)
    A[1] = 0
    m = HmmModel.from_arrays(A, np.full((4, 4), 0.25), [0.25] * 4)
    assert m.A.unvisited[1]
    assert validate_model(m) == []


probs = st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4).map(
    lambda v: (np.array(v) / np.sum(v)).tolist())


@given(st.lists(probs, min_size=4, max_size=4), st.lists(probs, min_size=4, max_size=4), probs)
def test_json_round_trip_is_exact(A, B, pi):
    m = HmmModel.from_arrays(A, B, pi, ModelMetadata("2020-04-29", "2020-05-08", "paper-v1"))
    back = HmmModel.from_json(m.to_json())
    assert back == m
    assert np.max(np.abs(back.A.values - m.A.values)) <= 1e-12
    assert back.A.row_labels == STATES and back.B.col_labels == SYMBOLS


def test_json_schema_fields(tmp_path):
    m = datasets.published_model()
    path = tmp_path / "m.json"
    m.save(path)
    import json
    d = json.loads(path.read_text())
    assert d["states"] == ["H", "I", "S", "D"]
    assert d["symbols"] == ["A-", "A", "R", "D"]
    assert set(d["metadata"]) >= {"window_start", "window_end", "rule_id"}
    assert np.array(d["A"]).shape == (4, 4) and len(d["pi"]) == 4
    assert HmmModel.load(path, atol=2e-3) == m


def test_json_rejects_reordered_states():
    d = datasets.published_model().to_dict()
    d["states"] = ["I", "H", "S", "D"]
    with pytest.raises(ValueError):
        HmmModel.from_dict(d, atol=2e-3)
