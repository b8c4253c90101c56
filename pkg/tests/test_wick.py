"""Matching enumeration, weights, and coefficient-table invariants."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wishartvar.wick import (
    DEFAULT_ORDER_CAP,
    MomentTable,
    OrderCapError,
    PersymmetryError,
    complete_persymmetric,
    double_factorial_odd,
    enumerate_matchings,
    matching_weight,
    moment_table,
    reference_table,
)

# Printed coefficient matrices for the lowest orders, transcribed
# independently of the shipped data files.
K3 = [[1, 0, 0], [3, 3, 0], [4, 3, 1]]
K4 = [[1, 0, 0, 0], [6, 6, 0, 0], [21, 17, 6, 0], [20, 21, 6, 1]]
K5 = [
    [1, 0, 0, 0, 0],
    [10, 10, 0, 0, 0],
    [65, 55, 20, 0, 0],
    [160, 175, 55, 10, 0],
    [148, 160, 65, 10, 1],
]


# --- enumeration -------------------------------------------------------------


def test_single_pair_for_k1():
    assert list(enumerate_matchings(1)) == [((0, 1),)]


def test_three_matchings_for_k2_in_canonical_order():
    assert list(enumerate_matchings(2)) == [
        ((0, 1), (2, 3)),
        ((0, 2), (1, 3)),
        ((0, 3), (1, 2)),
    ]


@pytest.mark.parametrize("k", range(1, 7))
def test_matching_count_is_odd_double_factorial(k):
    assert sum(1 for _ in enumerate_matchings(k)) == double_factorial_odd(k)


def test_matchings_partition_all_positions():
    for m in enumerate_matchings(4):
        flat = sorted(p for pair in m for p in pair)
        assert flat == list(range(8))


def test_enumeration_rejects_k0_and_cap():
    with pytest.raises(OrderCapError):
        list(enumerate_matchings(0))
    with pytest.raises(OrderCapError):
        list(enumerate_matchings(DEFAULT_ORDER_CAP + 1))
    with pytest.raises(OrderCapError):
        moment_table(0)
    with pytest.raises(OrderCapError):
        moment_table(13)


# --- matching weights --------------------------------------------------------


def test_weight_of_the_single_k1_matching():
    assert matching_weight(((0, 1),), 1) == (1, 1)


def test_k2_weights_give_the_known_monomial_multiset():
    weights = sorted(matching_weight(m, 2) for m in enumerate_matchings(2))
    # corresponds to {n^2 m, n m, n m^2}: E[tr(S^2)] = s^4 n m (m + 1 + n)
    assert weights == [(1, 1), (1, 2), (2, 1)]


@pytest.mark.parametrize("k", range(1, 9))
def test_nested_matching_weight_is_k_1(k):
    nested = tuple((2 * t, 2 * t + 1) for t in range(k))
    assert matching_weight(nested, k) == (k, 1)


def test_weight_rejects_wrong_pair_count():
    with pytest.raises(ValueError):
        matching_weight(((0, 1),), 2)


# --- moment tables -----------------------------------------------------------


def test_table_k2_matches_print():
    assert moment_table(2).coeffs.tolist() == [[1, 0], [1, 1]]


@pytest.mark.parametrize("k,expected", [(3, K3), (4, K4), (5, K5)])
def test_tables_match_printed_low_orders(k, expected):
    assert moment_table(k).coeffs.tolist() == expected


@pytest.mark.parametrize("k", range(6, 9))
def test_tables_match_shipped_reference(k):
    assert (moment_table(k).coeffs == reference_table(k).coeffs).all()


@pytest.mark.parametrize("k", range(1, 6))
def test_table_equals_direct_aggregation_of_matching_weights(k):
    expected = np.zeros((k, k), dtype=np.int64)
    for m in enumerate_matchings(k):
        a, b = matching_weight(m, k)
        expected[k - a, b - 1] += 1
    assert (moment_table(k).coeffs == expected).all()


@pytest.mark.parametrize("k", range(1, 7))
def test_serial_and_parallel_tables_are_identical(k):
    serial = moment_table(k, parallel=False)
    par = moment_table(k, parallel=True)
    assert (serial.coeffs == par.coeffs).all()


@pytest.mark.parametrize("k", range(1, 9))
def test_table_invariants(k):
    table = moment_table(k)
    assert table.total() == double_factorial_odd(k)
    assert table.is_persymmetric()
    assert table.coefficient(k, 1) == 1
    assert table.coefficient(1, k) == 1
    for a, b, coeff in table.monomials():
        assert coeff > 0
        assert 2 <= a + b <= k + 1


@pytest.mark.slow
@pytest.mark.parametrize("k", [9, 10])
def test_high_order_tables_match_completed_partials(k):
    # also pins the matching count: every matching lands in exactly one cell
    table = moment_table(k, parallel=True)
    assert table.total() == double_factorial_odd(k)
    assert (table.coeffs == reference_table(k).coeffs).all()


# --- anti-diagonal is the Narayana row ---------------------------------------


def _narayana_by_dyck_paths(k):
    """Brute force: count Dyck paths of length 2k by number of peaks."""
    counts = [0] * (k + 1)

    def walk(ups_left, downs_pending, peaks, prev_up):
        if ups_left == 0 and downs_pending == 0:
            counts[peaks] += 1
            return
        if ups_left > 0:
            walk(ups_left - 1, downs_pending + 1, peaks, True)
        if downs_pending > 0:
            walk(ups_left, downs_pending - 1, peaks + (1 if prev_up else 0), False)

    walk(k, 0, 0, False)
    return counts[1:]


@pytest.mark.parametrize("k", range(1, 7))
def test_narayana_oracle_agrees_with_closed_form(k):
    brute = _narayana_by_dyck_paths(k)
    closed = [math.comb(k, j) * math.comb(k, j - 1) // k for j in range(1, k + 1)]
    assert brute == closed


@pytest.mark.parametrize("k", range(1, 7))
def test_top_antidiagonal_is_narayana_with_catalan_sum(k):
    table = moment_table(k)
    # exponent pairs with a + b = k + 1 sit on the matrix main diagonal
    diag = [table.coefficient(k + 1 - b, b) for b in range(1, k + 1)]
    narayana = _narayana_by_dyck_paths(k)
    assert diag == narayana
    catalan = math.comb(2 * k, k) // (k + 1)
    assert sum(diag) == catalan


# --- persymmetric completion --------------------------------------------------


def test_full_persymmetric_table_passes_through_unchanged():
    assert complete_persymmetric(K3, 3).coeffs.tolist() == K3


def test_completion_of_shipped_k9_partial():
    table = reference_table(9)
    assert table.coeffs[0, 0] == 1
    assert table.coeffs[8, 8] == 1  # reflected top-left corner
    assert table.is_persymmetric()
    assert table.total() == double_factorial_odd(9)


def test_completion_reflects_k10_entry():
    table = reference_table(10)
    assert table.coeffs[1, 0] == 45
    assert table.coeffs[9, 8] == 45
    assert table.total() == double_factorial_odd(10)


def test_completion_rejects_conflicting_reflection():
    # entry (0, 1) reflects to (1, 2), which the full k=3 table fixes at 0
    bad = [[1, 5, 0], [3, 3, 0], [4, 3, 1]]
    with pytest.raises(PersymmetryError):
        complete_persymmetric(bad, 3)


def test_completion_rejects_bad_row_lengths():
    with pytest.raises(ValueError):
        complete_persymmetric([[1, 0], [1]], 3)


# --- MomentTable type ---------------------------------------------------------


def test_table_validation():
    with pytest.raises(ValueError):
        MomentTable(k=2, coeffs=np.array([[1, 0]]))
    with pytest.raises(ValueError):
        MomentTable(k=2, coeffs=np.array([[1, -1], [0, 1]]))
    with pytest.raises(ValueError):
        MomentTable(k=0, coeffs=np.zeros((0, 0)))


def test_table_is_read_only():
    table = moment_table(2)
    with pytest.raises(ValueError):
        table.coeffs[0, 0] = 99


def test_json_round_trip_schema():
    table = moment_table(3)
    doc = table.to_json_dict()
    assert set(doc) == {"k", "coeffs", "row_basis", "col_basis"}
    assert doc["row_basis"] == "n^3..n^1"
    assert doc["col_basis"] == "m^1..m^3"
    again = MomentTable.from_json_dict(json.loads(json.dumps(doc)))
    assert (again.coeffs == table.coeffs).all()


def test_csv_rows():
    assert moment_table(3).to_csv_rows() == ["1,0,0", "3,3,0", "4,3,1"]


@given(st.integers(min_value=1, max_value=6))
@settings(max_examples=20, deadline=None)
def test_reference_matches_enumeration_property(k):
    assert (reference_table(k).coeffs == moment_table(k).coeffs).all()
