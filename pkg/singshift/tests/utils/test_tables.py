# ==============================================================================
# test_tables.py  –  Tests for the TSV helpers
# ==============================================================================

import pytest

from singshift.utils.tables import format_cell, format_tsv, read_tsv, write_tsv


@pytest.mark.parametrize(
    "value, expected",
    [(0.1234567891, "0.123457"), (float("nan"), "nan"), (3, "3"), ("mean", "mean"), (1e-9, "1e-09")],
)
def test_format_cell(value, expected):
    assert format_cell(value) == expected


def test_format_tsv():
    text = format_tsv(["id", "mcd"], [["a", 1.5], ["b", float("nan")]])
    assert text == "id\tmcd\na\t1.5\nb\tnan\n"


def test_row_length_mismatch():
    with pytest.raises(ValueError):
        format_tsv(["id", "mcd"], [["a"]])


def test_write_then_read(tmp_path):
    path = write_tsv(tmp_path / "nested" / "t.tsv", ["id", "mcd"], [["a", 2.0]])
    assert read_tsv(path) == [{"id": "a", "mcd": "2"}]


def test_read_empty(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("")
    assert read_tsv(path) == []
