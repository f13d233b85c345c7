#!/usr/bin/env python3
"""
Hybrid ETL

Builds the first version of a dataset: archives are indexed in place and every
regular-file member becomes a row pointing at its bytes, while sidecar metadata
(JSONL, CSV or `<key>.json` members inside the archive) is parsed into typed
attribute columns.
"""

import io
import re
import json
import math
import logging
import posixpath
from collections import OrderedDict

import pandas as pd

from dsfactory.archive import index_tar
from dsfactory.engine.context import ExecutionStats, StagedDataset
from dsfactory.engine.descriptor import OperationDescriptor, SourceSpec
from dsfactory.errors import DuplicateKey, JoinKeyMissing, RaggedVector, SchemaConflict
from dsfactory.storage import Storage, parse_uri
from dsfactory.table.column import ColumnVector
from dsfactory.table.frame import SampleRef, Table
from dsfactory.table.schema import (
    BOOL,
    FLOAT64,
    INT64,
    NAME_PATTERN,
    RESERVED_COLUMNS,
    UTF8,
    Field,
    fvec,
)
from dsfactory.utils import sha256_hex

logger = logging.getLogger(__name__)

KEY_FIELD = "key"
SIDECAR_FORMATS = ("jsonl", "csv", "in-archive")
INT64_MIN, INT64_MAX = -(1 << 63), (1 << 63) - 1
INT_RE = re.compile(r"^[+-]?\d+$")
FLOAT_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_vector(value):
    return isinstance(value, list) and all(_is_number(v) for v in value)


def infer_type(values, field="field", coerce_text=False):
    """
    Infer a column type from one sidecar field's values.

    Rules: all-int -> int64; ints mixed with non-integral numbers -> float64;
    all-bool -> bool; all-text -> utf8; equal-length numeric lists -> fvec(dim).
    Nulls are ignored and an all-null field is utf8. Any other mixture is a
    SchemaConflict unless coerce_text is set, which makes the field utf8.

    Args:
        values (list): Field values across all rows
        field (str): Field name for error messages
        coerce_text (bool): Stringify irreconcilable fields instead of failing

    Returns:
        ColumnType: Inferred type
    """
    present = [v for v in values if v is not None]
    if not present:
        return UTF8
    if all(isinstance(v, bool) for v in present):
        return BOOL
    if all(isinstance(v, int) and not isinstance(v, bool) for v in present):
        if all(INT64_MIN <= v <= INT64_MAX for v in present):
            return INT64
        if coerce_text:
            return UTF8
        raise SchemaConflict(f"field '{field}' holds integers outside the int64 range")
    if all(_is_number(v) for v in present):
        if all(math.isfinite(float(v)) for v in present):
            return FLOAT64
        if coerce_text:
            return UTF8
        raise SchemaConflict(f"field '{field}' holds non-finite numbers")
    if all(isinstance(v, str) for v in present):
        return UTF8
    if all(_is_vector(v) for v in present):
        dims = {len(v) for v in present}
        if len(dims) > 1:
            raise RaggedVector(f"field '{field}' holds vectors of lengths {sorted(dims)}")
        dim = dims.pop()
        if dim == 0:
            raise SchemaConflict(f"field '{field}' holds empty vectors")
        return fvec(dim)
    if coerce_text:
        return UTF8
    kinds = sorted({type(v).__name__ for v in present})
    raise SchemaConflict(f"field '{field}' mixes irreconcilable types: {', '.join(kinds)}")


def coerce_values(values, col_type):
    """Convert field values to the Python values a column of col_type stores."""
    if col_type == FLOAT64:
        return [None if v is None else float(v) for v in values]
    if col_type == UTF8:
        out = []
        for v in values:
            if v is None or isinstance(v, str):
                out.append(v)
            else:
                out.append(json.dumps(v, ensure_ascii=False, separators=(",", ":")))
        return out
    return list(values)


def parse_csv_cell(text):
    """Type one CSV cell: empty is null, then bool, int, float, JSON list, text."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if INT_RE.match(text):
        return int(text)
    if FLOAT_RE.match(text):
        return float(text)
    if text.startswith("[") and text.endswith("]"):
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            return text
        if _is_vector(value):
            return value
    return text


def read_jsonl(data, origin):
    rows = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaConflict(f"{origin} line {lineno} is not valid JSON: {e}")
        if not isinstance(row, dict):
            raise SchemaConflict(f"{origin} line {lineno} is not a JSON object")
        rows.append(row)
    return rows


def read_csv(data, origin):
    if not data.strip():
        return []
    try:
        frame = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False, na_filter=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise SchemaConflict(f"{origin} is not a readable CSV file: {e}")
    return [{k: parse_csv_cell(v) for k, v in record.items()} for record in frame.to_dict(orient="records")]


def member_key(member_path):
    """Join key of a member: its basename without the final extension."""
    base = posixpath.basename(member_path)
    stem, dot, _ = base.rpartition(".")
    return stem if dot and stem else base


def _split_in_archive(members):
    stems = {}
    for m in members:
        if not m.member_path.endswith(".json"):
            stems.setdefault(posixpath.splitext(m.member_path)[0], True)
    metadata, samples = [], []
    for m in members:
        if m.member_path.endswith(".json") and posixpath.splitext(m.member_path)[0] in stems:
            metadata.append(m)
        else:
            samples.append(m)
    return samples, metadata


def _keyed_rows(rows, origin):
    keyed = OrderedDict()
    for n, row in enumerate(rows, start=1):
        if KEY_FIELD not in row or row[KEY_FIELD] is None:
            raise JoinKeyMissing(f"{origin} row {n} has no '{KEY_FIELD}' field")
        key = str(row[KEY_FIELD])
        if key in keyed:
            raise DuplicateKey(f"{origin} has more than one row with key '{key}'")
        keyed[key] = row
    return keyed


def _read_sidecar(sidecar_uri, storage):
    size = storage.stat(sidecar_uri)
    return storage.read_range(sidecar_uri, (0, size)) if size else b""


def _load_source(source, fmt, storage):
    """Index one archive and read its metadata. Returns (spec, refs, keys, keyed rows)."""
    archive_uri = str(parse_uri(source[0]))
    sidecar_uri = str(parse_uri(source[1])) if source[1] else None
    archive = storage.head(archive_uri)
    members = index_tar(archive_uri, storage)

    if fmt == "in-archive":
        samples, meta_members = _split_in_archive(members)
        payloads = storage.read_many([(archive_uri, m.data_offset, m.data_length) for m in meta_members])
        rows = []
        for m, payload in zip(meta_members, payloads):
            try:
                row = json.loads(payload.decode("utf-8")) if payload else {}
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise SchemaConflict(f"{archive_uri}:{m.member_path} is not valid JSON: {e}")
            if not isinstance(row, dict):
                raise SchemaConflict(f"{archive_uri}:{m.member_path} is not a JSON object")
            row = dict(row)
            row.setdefault(KEY_FIELD, member_key(m.member_path))
            rows.append(row)
        spec = SourceSpec(archive=archive_uri, archive_size=archive.size, archive_version=archive.version,
                          format=fmt)
    else:
        samples = members
        rows = []
        sidecar_size = sidecar_sha256 = None
        if sidecar_uri:
            data = _read_sidecar(sidecar_uri, storage)
            sidecar_size, sidecar_sha256 = len(data), sha256_hex(data)
            rows = read_jsonl(data, sidecar_uri) if fmt == "jsonl" else read_csv(data, sidecar_uri)
        spec = SourceSpec(archive=archive_uri, archive_size=archive.size, archive_version=archive.version,
                          sidecar=sidecar_uri, sidecar_size=sidecar_size, sidecar_sha256=sidecar_sha256,
                          format=fmt)

    keyed = _keyed_rows(rows, sidecar_uri or archive_uri)
    refs = [SampleRef(archive_uri, m.member_path, m.data_offset, m.data_length) for m in samples]
    keys = [member_key(m.member_path) for m in samples]
    missing = [k for k in keyed if k not in set(keys)]
    if missing:
        raise JoinKeyMissing(f"metadata key '{missing[0]}' in {sidecar_uri or archive_uri} matches no member"
                             + (f" ({len(missing) - 1} more)" if len(missing) > 1 else ""))
    logger.info(f"Loaded {len(refs)} samples and {len(keyed)} metadata rows from {archive_uri}")
    return spec, refs, keys, keyed


def etl_build(sources, fmt="jsonl", storage=None, coerce_text=False):
    """
    Build a dataset from archives and their metadata.

    Args:
        sources (list[tuple[str, str | None]]): (archive uri, sidecar uri) pairs;
            the sidecar is ignored for the in-archive format
        fmt (str): jsonl, csv or in-archive
        storage (Storage): Storage session
        coerce_text (bool): Stringify fields with irreconcilable types

    Returns:
        StagedDataset: The unsaved dataset
    """
    if fmt not in SIDECAR_FORMATS:
        raise SchemaConflict(f"unknown sidecar format '{fmt}'")
    storage = storage or Storage()
    before = storage.stats.snapshot()

    specs, refs, keys, keyed_per_source = [], [], [], []
    for source in sources:
        spec, src_refs, src_keys, keyed = _load_source(source, fmt, storage)
        specs.append(spec)
        refs.extend(src_refs)
        keys.extend(src_keys)
        keyed_per_source.append((len(src_refs), keyed))

    field_names = []
    for _, keyed in keyed_per_source:
        for row in keyed.values():
            for name in row:
                if name != KEY_FIELD and name not in field_names:
                    field_names.append(name)
    for name in field_names:
        if name in RESERVED_COLUMNS or not NAME_PATTERN.match(name):
            raise SchemaConflict(f"metadata field '{name}' is not a valid column name")

    row_meta = []
    position = 0
    for count, keyed in keyed_per_source:
        for key in keys[position:position + count]:
            row_meta.append(keyed.get(key))
        position += count

    fields, columns = [], {}
    for name in field_names:
        values = [None if meta is None else meta.get(name) for meta in row_meta]
        col_type = infer_type(values, name, coerce_text)
        fields.append(Field(name=name, type=col_type, nullable=True))
        columns[name] = ColumnVector.from_pylist(col_type, coerce_values(values, col_type), nullable=True)

    table = Table.from_refs(refs, fields, columns)
    after = storage.stats.snapshot()
    descriptor = OperationDescriptor(
        kind="etl",
        sources=specs,
        params={"coerce_text": "true"} if coerce_text else {},
    )
    stats = ExecutionStats(
        rows_out=table.row_count,
        rows_processed=table.row_count,
        get_count=after["get_count"] - before["get_count"],
        bytes_fetched=after["bytes_fetched"] - before["bytes_fetched"],
    )
    logger.info(f"ETL built {table.row_count} rows with {len(fields)} attribute columns")
    return StagedDataset(
        schema=table.schema,
        row_count=table.row_count,
        parents=[],
        operation=descriptor,
        columns=dict(table.columns),
        stats=stats,
    )


def describe_sources(sources, fmt, storage, coerce_text=False):
    """
    Build the ETL descriptor for sources without indexing the archives.

    Archives are only HEAD-ed; each sidecar is read once to hash its bytes.
    Used to decide whether a recorded ETL version is still current.
    """
    specs = []
    for archive, sidecar in sources:
        archive_uri = str(parse_uri(archive))
        info = storage.head(archive_uri)
        if fmt == "in-archive":
            specs.append(SourceSpec(archive=archive_uri, archive_size=info.size, archive_version=info.version,
                                    format=fmt))
            continue
        sidecar_uri = str(parse_uri(sidecar)) if sidecar else None
        data = _read_sidecar(sidecar_uri, storage) if sidecar_uri else None
        specs.append(SourceSpec(
            archive=archive_uri,
            archive_size=info.size,
            archive_version=info.version,
            sidecar=sidecar_uri,
            sidecar_size=None if data is None else len(data),
            sidecar_sha256=None if data is None else sha256_hex(data),
            format=fmt,
        ))
    return OperationDescriptor(kind="etl", sources=specs, params={"coerce_text": "true"} if coerce_text else {})
