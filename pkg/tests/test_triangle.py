import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mack_reserve.exceptions import NonNumericCell, NonPositiveCell, NonSquare, RaggedShapeMismatch
from mack_reserve.triangle import (
    DevTriangle,
    check_triangle,
    diagonal,
    factor_grid,
    parse_triangle,
    read_triangle,
    serialize_triangle,
)

from conftest import T1_CSV, T1_ROWS


def test_parse_t1():
    tri = parse_triangle(T1_CSV)
    assert tri.n_periods == 3
    assert [list(r) for r in tri.rows] == T1_ROWS


def test_parse_without_trailing_separators():
    assert parse_triangle("100,150,180\n110,176\n120") == parse_triangle(T1_CSV)


def test_parse_header_is_skipped():
    assert parse_triangle("dev0,dev1,dev2\n" + T1_CSV, header=True) == parse_triangle(T1_CSV)


def test_ragged_shape():
    with pytest.raises(RaggedShapeMismatch) as info:
        parse_triangle("100,150\n110,176")
    assert info.value.row == 1 and "row 2" in str(info.value)


def test_non_positive():
    with pytest.raises(NonPositiveCell) as info:
        parse_triangle("100,-5\n110,")
    assert (info.value.row, info.value.column) == (0, 1)
    assert "row 1, column 2" in str(info.value)


def test_non_numeric():
    with pytest.raises(NonNumericCell):
        parse_triangle("100,abc\n110,")


def test_non_square():
    with pytest.raises((NonSquare, RaggedShapeMismatch)):
        parse_triangle("100,150,180,200\n110,176,\n120,,")


def test_read_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_triangle(tmp_path / "nope.csv")


def test_diagonal(t1):
    np.testing.assert_array_equal(diagonal(t1), [180, 176, 120])
    np.testing.assert_array_equal(diagonal(DevTriangle.from_rows([[42]])), [42])
    ones = DevTriangle.from_rows([[1, 1, 1], [1, 1], [1]])
    np.testing.assert_array_equal(diagonal(ones), [1, 1, 1])


def test_factor_grid(t1):
    F = factor_grid(t1)
    np.testing.assert_allclose(F[0], [1.5, 1.6])
    np.testing.assert_allclose(F[1], [1.2])


def test_factor_grid_geometric():
    tri = DevTriangle.from_full(np.tile(2.0 ** np.arange(4), (4, 1)))
    for col in factor_grid(tri):
        np.testing.assert_array_equal(col, 2.0)


def test_lower_part_is_nan_and_readonly(t1):
    assert np.isnan(t1.values[2, 1]) and np.isnan(t1.values[1, 2])
    with pytest.raises(ValueError):
        t1.values[0, 0] = 5


def test_check_triangle_accepts_arrays_and_rows(t1):
    assert check_triangle(T1_ROWS) == t1
    full = np.array([[100, 150, 180], [110, 176, 999], [120, 999, 999]], dtype=float)
    assert check_triangle(full) == t1


cells = st.floats(min_value=1e-3, max_value=1e12, allow_nan=False, allow_infinity=False)


@st.composite
def triangles(draw):
    A = draw(st.integers(1, 8))
    return DevTriangle.from_rows([draw(st.lists(cells, min_size=A - a, max_size=A - a)) for a in range(A)])


@settings(max_examples=60, deadline=None)
@given(triangles())
def test_round_trip(tri):
    back = parse_triangle(serialize_triangle(tri))
    assert back == tri


@settings(max_examples=60, deadline=None)
@given(triangles())
def test_factors_reconstruct_cells(tri):
    F = factor_grid(tri)
    A = tri.n_periods
    for a in range(A - 1):
        acc = tri.values[a, 0]
        for d in range(1, A - a):
            acc = acc * F[d - 1][a]
            assert acc == pytest.approx(tri.values[a, d], rel=1e-12)
    d = diagonal(tri)
    assert d.size == A
    assert all(d[a] == tri.rows[a][-1] for a in range(A))
