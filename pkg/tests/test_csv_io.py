import numpy as np
import pytest

from vinegen.csv_io import file_fingerprint, fnv1a_64, read_csv, write_csv
from vinegen.errors import FormatError, HeaderValidationError


def test_write_then_read_is_bit_exact(tmp_path, rng):
    values = rng.normal(size=(50, 3)) * 1e3
    labels = rng.integers(0, 4, size=50)
    path = write_csv(tmp_path / "data.csv", values, labels, columns=["a", "b", "c"])
    table = read_csv(path)
    assert table.columns == ["a", "b", "c"]
    assert np.array_equal(table.values, values)
    assert np.array_equal(table.labels, labels)


def test_empty_table_keeps_header(tmp_path):
    path = write_csv(tmp_path / "empty.csv", np.empty((0, 2)))
    assert path.read_text() == "x0,x1\n"
    table = read_csv(path)
    assert table.values.shape == (0, 2)


def test_byte_order_mark_and_blank_rows(tmp_path):
    path = tmp_path / "bom.csv"
    path.write_bytes("\ufeffx,y\n1,2\n\n3,4\n".encode("utf-8"))
    table = read_csv(path)
    assert table.columns == ["x", "y"]
    assert table.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert table.labels is None


@pytest.mark.parametrize("header", ["x,x\n", "x,,y\n", "label\n", "label,x\n"])
def test_bad_headers_are_rejected(tmp_path, header):
    path = tmp_path / "bad.csv"
    path.write_text(header + "1,2\n")
    with pytest.raises(HeaderValidationError, match="Invalid CSV header"):
        read_csv(path)


def test_ragged_and_non_numeric_rows(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("x,y\n1,2\n3\n")
    with pytest.raises(FormatError, match="row 3 has 1 fields"):
        read_csv(ragged)
    text = tmp_path / "text.csv"
    text.write_text("x,y\n1,abc\n")
    with pytest.raises(FormatError):
        read_csv(text)
    nan = tmp_path / "nan.csv"
    nan.write_text("x,y\n1,nan\n")
    with pytest.raises(FormatError, match="non-finite"):
        read_csv(nan)


def test_fnv1a_reference_values(tmp_path):
    assert fnv1a_64(b"") == "cbf29ce484222325"
    assert fnv1a_64(b"a") == "af63dc4c8601ec8c"
    assert fnv1a_64(b"foobar") == "85944171f73967e8"
    path = tmp_path / "f.bin"
    path.write_bytes(b"foobar")
    assert file_fingerprint(path) == "85944171f73967e8"


@pytest.mark.parametrize("chunk_size", [1, 7, 4096])
def test_fingerprint_streams_in_chunks(tmp_path, chunk_size):
    payload = bytes(range(256)) * 40
    path = tmp_path / "images.idx"
    path.write_bytes(payload)
    assert file_fingerprint(path, chunk_size=chunk_size) == fnv1a_64(payload)
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    assert file_fingerprint(empty, chunk_size=chunk_size) == "cbf29ce484222325"
