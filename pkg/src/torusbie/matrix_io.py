"""``TBIE`` binary matrix files.

Layout (little endian)::

    b"TBIE" | version u32 = 1 | n u32 | mode u8 (0 dense, 1 banded) | q f64
    | B u32 | m_theta u32 | m_vartheta u32 | entries

Dense entries are ``N*N`` ``(re, im)`` f64 pairs in row-major index-set
order. Banded entries are, per row ``k`` in index order, a u32 count
followed by ``count`` ``(l u32, re f64, im f64)`` triples sorted by ``l``.
"""

from __future__ import annotations

import struct
from typing import Union

import numpy as np

from .assembly import BandedGalerkinMatrix, DenseGalerkinMatrix, QuadratureConfig
from .errors import ValidationError

MAGIC = b"TBIE"
VERSION = 1
_HEADER = struct.Struct("<4sIIBdIII")
_TRIPLE = np.dtype([("l", "<u4"), ("re", "<f8"), ("im", "<f8")])

Matrix = Union[DenseGalerkinMatrix, BandedGalerkinMatrix]


def _grid_sizes(m: Matrix):
    if m.quad is None:
        return 0, 0
    return m.quad.m_theta, m.quad.m_vartheta


def write_matrix(path, m: Matrix) -> None:
    mt, mv = _grid_sizes(m)
    with open(path, "wb") as fh:
        if isinstance(m, DenseGalerkinMatrix):
            fh.write(_HEADER.pack(MAGIC, VERSION, m.n, 0, 0.0, 4 * m.n, mt, mv))
            pairs = np.empty((m.size, m.size, 2), dtype="<f8")
            pairs[..., 0] = m.entries.real
            pairs[..., 1] = m.entries.imag
            fh.write(pairs.tobytes())
            return
        fh.write(_HEADER.pack(MAGIC, VERSION, m.n, 1, m.q, m.band, mt, mv))
        counts = np.bincount(m.rows, minlength=m.size).astype("<u4")
        start = 0
        for k in range(m.size):
            c = int(counts[k])
            rec = np.empty(c, dtype=_TRIPLE)
            rec["l"] = m.cols[start:start + c]
            rec["re"] = m.values[start:start + c].real
            rec["im"] = m.values[start:start + c].imag
            fh.write(counts[k].tobytes())
            fh.write(rec.tobytes())
            start += c


def read_matrix(path, subtract_singularity: bool = True) -> Matrix:
    """Load a matrix; the quadrature record only carries the two grid sizes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated header")
    magic, version, n, mode, q, band, mt, mv = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValidationError(f"{path}: not a TBIE file")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    quad = QuadratureConfig(m_theta=mt, m_vartheta=mv, subtract_singularity=subtract_singularity) if mt else None
    size = (2 * n + 1) ** 2
    body = memoryview(raw)[_HEADER.size:]
    if mode == 0:
        if len(body) != size * size * 16:
            raise ValidationError(f"{path}: dense payload has {len(body)} bytes, expected {size * size * 16}")
        pairs = np.frombuffer(body, dtype="<f8").reshape(size, size, 2)
        return DenseGalerkinMatrix(n, pairs[..., 0] + 1j * pairs[..., 1], quad)
    if mode != 1:
        raise ValidationError(f"{path}: unknown mode {mode}")
    rows, recs = [], []
    pos = 0
    for k in range(size):
        if pos + 4 > len(body):
            raise ValidationError(f"{path}: truncated at row {k}")
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        nbytes = count * _TRIPLE.itemsize
        if pos + nbytes > len(body):
            raise ValidationError(f"{path}: truncated at row {k}")
        recs.append(np.frombuffer(body, dtype=_TRIPLE, count=count, offset=pos))
        rows.append(np.full(count, k, dtype=np.int64))
        pos += nbytes
    if pos != len(body):
        raise ValidationError(f"{path}: {len(body) - pos} trailing bytes")
    rec = np.concatenate(recs)
    values = rec["re"] + 1j * rec["im"]
    return BandedGalerkinMatrix(n, q, band, np.concatenate(rows), rec["l"].astype(np.int64), values, quad)
