import struct

import numpy as np
import pytest

from torusbie.assembly import QuadratureConfig, truncate_dense
from torusbie.errors import ValidationError
from torusbie.matrix_io import read_matrix, write_matrix


def test_dense_round_trip(tmp_path, bagel_dense5):
    path = tmp_path / "d.bin"
    write_matrix(path, bagel_dense5)
    back = read_matrix(path)
    assert back.n == 5
    assert np.array_equal(back.entries, bagel_dense5.entries)
    assert back.quad == QuadratureConfig(bagel_dense5.quad.m_theta, bagel_dense5.quad.m_vartheta)


def test_banded_round_trip(tmp_path, bagel_dense5):
    m = truncate_dense(bagel_dense5, 1.5)
    path = tmp_path / "b.bin"
    write_matrix(path, m)
    back = read_matrix(path)
    assert (back.n, back.q, back.band) == (m.n, m.q, m.band)
    np.testing.assert_array_equal(back.rows, m.rows)
    np.testing.assert_array_equal(back.cols, m.cols)
    assert np.array_equal(back.values, m.values)


def test_header_layout(tmp_path, bagel_dense5):
    m = truncate_dense(bagel_dense5, 1.0)
    path = tmp_path / "b.bin"
    write_matrix(path, m)
    raw = path.read_bytes()
    magic, version, n, mode, q, band, mt, mv = struct.unpack_from("<4sIIBdIII", raw)
    assert (magic, version, n, mode, q, band, mt, mv) == (b"TBIE", 1, 5, 1, 1.0, m.band, 64, 128)
    # first banded row: count then (l, re, im) triples sorted by l
    offset = struct.calcsize("<4sIIBdIII")
    (count,) = struct.unpack_from("<I", raw, offset)
    first = [struct.unpack_from("<Idd", raw, offset + 4 + 20 * i)[0] for i in range(count)]
    assert first == sorted(first) and first[0] == 0
    expected_size = offset + 4 * m.size + 20 * m.nnz
    assert len(raw) == expected_size


def test_dense_payload_size(tmp_path, bagel_dense5):
    path = tmp_path / "d.bin"
    write_matrix(path, bagel_dense5)
    assert path.stat().st_size == struct.calcsize("<4sIIBdIII") + 16 * 121**2


def test_rejects_corrupt_files(tmp_path, bagel_dense5):
    path = tmp_path / "x.bin"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValidationError, match="not a TBIE"):
        read_matrix(path)
    path.write_bytes(b"TB")
    with pytest.raises(ValidationError, match="truncated"):
        read_matrix(path)
    write_matrix(path, bagel_dense5)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValidationError):
        read_matrix(path)
    path.write_bytes(raw[:4] + struct.pack("<I", 7) + raw[8:])
    with pytest.raises(ValidationError, match="version"):
        read_matrix(path)
    write_matrix(path, truncate_dense(bagel_dense5, 1.0))
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(ValidationError, match="trailing"):
        read_matrix(path)
