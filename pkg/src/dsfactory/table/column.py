#!/usr/bin/env python3
"""
Column Vectors and the Column File Codec

A column file is a fixed little-endian header followed by an optional validity
bitmap and a type-specific payload:

    magic "DFC1" | version u16 | type tag u8 | flags u8 | dim u32 | row_count u64
    validity bitmap (nullable columns only, LSB-first, ceil(rows/8) bytes)
    payload

Payloads: int64/float64 are 8-byte little-endian slots, bool one byte per row,
utf8/bytes are (rows+1) u64 offsets followed by the concatenated blob, fvec is
rows*dim little-endian binary32. Null rows have zeroed fixed slots and zero-length
blob entries.
"""

import struct

import numpy as np

from dsfactory.errors import BadMagic, BadVersion, InvariantViolation, Truncated
from dsfactory.table.schema import CODE_TAGS, ColumnType

# Constants
MAGIC = b"DFC1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBBIQ")
FLAG_NULLABLE = 0x01

FIXED_DTYPES = {"int64": np.dtype("<i8"), "float64": np.dtype("<f8"), "bool": np.dtype("u1")}


class ColumnVector:
    """
    A typed, nullable column of values.

    Instances are treated as immutable once built; the numpy payload arrays are
    marked read-only.
    """

    __slots__ = ("type", "nullable", "validity", "values")

    def __init__(self, col_type, validity, values, nullable=True):
        self.type = col_type
        self.nullable = nullable
        self.validity = np.asarray(validity, dtype=bool)
        self.values = values
        if isinstance(self.values, np.ndarray):
            self.values.setflags(write=False)
        self.validity.setflags(write=False)
        if not nullable and not self.validity.all():
            raise InvariantViolation(f"non-nullable {col_type} column contains nulls")

    @property
    def row_count(self):
        return int(self.validity.shape[0])

    def __len__(self):
        return self.row_count

    @property
    def null_count(self):
        return int((~self.validity).sum())

    @classmethod
    def from_pylist(cls, col_type, items, nullable=True):
        """
        Build a column from Python values, with None for null.

        Args:
            col_type (ColumnType): Column type
            items (list): Values
            nullable (bool): Whether nulls are allowed

        Returns:
            ColumnVector: New column
        """
        n = len(items)
        validity = np.array([v is not None for v in items], dtype=bool)
        tag = col_type.tag
        if tag in ("int64", "float64", "bool"):
            dtype = {"int64": np.int64, "float64": np.float64, "bool": np.bool_}[tag]
            zero = dtype(0)
            try:
                values = np.array([zero if v is None else v for v in items], dtype=dtype)
            except (TypeError, ValueError, OverflowError) as e:
                raise InvariantViolation(f"cannot build {tag} column: {e}")
            if n == 0:
                values = np.zeros(0, dtype=dtype)
        elif tag == "utf8":
            values = []
            for v in items:
                if v is not None and not isinstance(v, str):
                    raise InvariantViolation(f"utf8 column received {type(v).__name__}")
                values.append("" if v is None else v)
        elif tag == "bytes":
            values = []
            for v in items:
                if v is not None and not isinstance(v, (bytes, bytearray)):
                    raise InvariantViolation(f"bytes column received {type(v).__name__}")
                values.append(b"" if v is None else bytes(v))
        elif tag == "fvec":
            values = np.zeros((n, col_type.dim), dtype=np.float32)
            for i, v in enumerate(items):
                if v is None:
                    continue
                row = np.asarray(v, dtype=np.float32).reshape(-1)
                if row.shape[0] != col_type.dim:
                    raise InvariantViolation(
                        f"row {i} has dimension {row.shape[0]}, column is {col_type}"
                    )
                values[i] = row
        else:
            raise InvariantViolation(f"unknown column type {col_type}")
        return cls(col_type, validity, values, nullable=nullable)

    def is_valid(self, i):
        return bool(self.validity[i])

    def value(self, i):
        """
        Get one value as a Python object (None for null).

        fvec rows come back as read-only float32 numpy arrays.
        """
        if not self.validity[i]:
            return None
        tag = self.type.tag
        if tag == "int64":
            return int(self.values[i])
        if tag == "float64":
            return float(self.values[i])
        if tag == "bool":
            return bool(self.values[i])
        return self.values[i]

    def to_pylist(self):
        return [self.value(i) for i in range(self.row_count)]

    def to_jsonable(self, i):
        v = self.value(i)
        if v is None:
            return None
        if self.type.tag == "fvec":
            return [float(x) for x in v]
        if self.type.tag == "bytes":
            return v.hex()
        return v

    def take(self, indices):
        """
        Select rows by position.

        Args:
            indices (sequence[int]): Row positions, in output order

        Returns:
            ColumnVector: New column
        """
        idx = np.asarray(indices, dtype=np.int64)
        validity = self.validity[idx] if len(idx) else np.zeros(0, dtype=bool)
        if isinstance(self.values, np.ndarray):
            values = self.values[idx].copy()
        else:
            values = [self.values[i] for i in idx]
        return ColumnVector(self.type, validity, values, nullable=self.nullable)

    @classmethod
    def concat(cls, columns, col_type=None, nullable=None):
        """
        Concatenate columns of the same type.

        Args:
            columns (list[ColumnVector]): Columns to join
            col_type (ColumnType): Type, required when columns is empty
            nullable (bool): Override nullability

        Returns:
            ColumnVector: New column
        """
        if not columns:
            return cls.from_pylist(col_type, [], nullable=True if nullable is None else nullable)
        first = columns[0]
        for c in columns[1:]:
            if c.type != first.type:
                raise InvariantViolation(f"cannot concatenate {first.type} with {c.type}")
        validity = np.concatenate([c.validity for c in columns])
        if isinstance(first.values, np.ndarray):
            values = np.concatenate([c.values for c in columns])
        else:
            values = [v for c in columns for v in c.values]
        if nullable is None:
            nullable = any(c.nullable for c in columns)
        return cls(first.type, validity, values, nullable=nullable)

    def __eq__(self, other):
        if not isinstance(other, ColumnVector):
            return NotImplemented
        return encode_column(self) == encode_column(other)

    def __repr__(self):
        return f"ColumnVector({self.type}, rows={self.row_count}, nulls={self.null_count})"


def encode_column(col):
    """
    Encode a column into its bit-exact file representation.

    Args:
        col (ColumnVector): Column to encode

    Returns:
        bytes: Encoded column file
    """
    n = col.row_count
    tag = col.type.tag
    if not col.nullable and not col.validity.all():
        raise InvariantViolation("non-nullable column contains nulls")

    flags = FLAG_NULLABLE if col.nullable else 0
    parts = [HEADER.pack(MAGIC, FORMAT_VERSION, col.type.code, flags, col.type.dim, n)]
    if col.nullable:
        parts.append(np.packbits(col.validity, bitorder="little").tobytes())

    if tag in FIXED_DTYPES:
        values = np.asarray(col.values).astype(FIXED_DTYPES[tag], copy=True)
        if values.shape != (n,):
            raise InvariantViolation(f"{tag} payload has shape {values.shape}, expected ({n},)")
        values[~col.validity] = 0
        parts.append(values.tobytes())
    elif tag in ("utf8", "bytes"):
        if len(col.values) != n:
            raise InvariantViolation(f"{tag} payload has {len(col.values)} values, expected {n}")
        chunks = []
        for valid, v in zip(col.validity, col.values):
            if not valid:
                chunks.append(b"")
            elif tag == "utf8":
                chunks.append(v.encode("utf-8"))
            else:
                chunks.append(bytes(v))
        offsets = np.zeros(n + 1, dtype="<u8")
        if n:
            offsets[1:] = np.cumsum([len(c) for c in chunks], dtype=np.uint64)
        parts.append(offsets.tobytes())
        parts.append(b"".join(chunks))
    elif tag == "fvec":
        values = np.asarray(col.values).astype("<f4", copy=True)
        if values.shape != (n, col.type.dim):
            raise InvariantViolation(
                f"fvec payload has shape {values.shape}, expected ({n}, {col.type.dim})"
            )
        values[~col.validity] = 0
        parts.append(values.tobytes())
    else:
        raise InvariantViolation(f"unknown column type {col.type}")
    return b"".join(parts)


def _need(data, pos, size):
    if pos + size > len(data):
        raise Truncated(f"column file ends at {len(data)} bytes, needed {pos + size}")


def decode_column(data):
    """
    Decode a column file; the exact inverse of encode_column.

    Args:
        data (bytes): Encoded column file

    Returns:
        ColumnVector: Decoded column
    """
    data = bytes(data)
    if data[:4] != MAGIC:
        if len(data) < 4 and MAGIC.startswith(data):
            raise Truncated("column file shorter than its magic")
        raise BadMagic("not a column file (missing DFC1 magic)")
    _need(data, 0, HEADER.size)
    _, version, code, flags, dim, n = HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise BadVersion(f"unsupported column format version {version}")
    if code not in CODE_TAGS:
        raise InvariantViolation(f"unknown type tag {code}")
    if flags & ~FLAG_NULLABLE:
        raise InvariantViolation(f"unknown flags 0x{flags:02x}")
    tag = CODE_TAGS[code]
    try:
        col_type = ColumnType(tag=tag, dim=dim)
    except ValueError as e:
        raise InvariantViolation(str(e))
    nullable = bool(flags & FLAG_NULLABLE)
    pos = HEADER.size

    if nullable:
        nbytes = (n + 7) // 8
        _need(data, pos, nbytes)
        bits = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=pos)
        validity = np.unpackbits(bits, bitorder="little", count=n).astype(bool)
        pos += nbytes
    else:
        validity = np.ones(n, dtype=bool)

    if tag in FIXED_DTYPES:
        dtype = FIXED_DTYPES[tag]
        _need(data, pos, n * dtype.itemsize)
        raw = np.frombuffer(data, dtype=dtype, count=n, offset=pos)
        pos += n * dtype.itemsize
        if tag == "bool":
            if raw.size and raw.max() > 1:
                raise InvariantViolation("bool payload holds values other than 0 and 1")
            values = raw.astype(np.bool_)
        else:
            values = raw.astype(dtype.newbyteorder("="))
    elif tag in ("utf8", "bytes"):
        _need(data, pos, (n + 1) * 8)
        offsets = np.frombuffer(data, dtype="<u8", count=n + 1, offset=pos).astype(np.int64)
        pos += (n + 1) * 8
        if offsets[0] != 0 or np.any(np.diff(offsets) < 0):
            raise InvariantViolation("string offsets are not monotonic from zero")
        blob_len = int(offsets[-1])
        _need(data, pos, blob_len)
        blob = data[pos:pos + blob_len]
        pos += blob_len
        values = []
        for i in range(n):
            chunk = blob[offsets[i]:offsets[i + 1]]
            if not validity[i] and chunk:
                raise InvariantViolation(f"null row {i} occupies blob bytes")
            if tag == "utf8":
                try:
                    values.append(chunk.decode("utf-8"))
                except UnicodeDecodeError:
                    raise InvariantViolation(f"row {i} is not valid UTF-8")
            else:
                values.append(chunk)
    else:
        count = n * dim
        _need(data, pos, count * 4)
        values = np.frombuffer(data, dtype="<f4", count=count, offset=pos).astype(np.float32)
        values = values.reshape(n, dim)
        pos += count * 4

    if pos != len(data):
        raise InvariantViolation(f"{len(data) - pos} trailing bytes after column payload")
    return ColumnVector(col_type, validity, values, nullable=nullable)
