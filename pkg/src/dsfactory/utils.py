#!/usr/bin/env python3
"""
Dataset Factory Utilities

This module provides common helpers shared by every subpackage: logging setup,
canonical JSON, hashing, timestamps and atomic file publication.
"""

import os
import json
import math
import uuid
import hashlib
import logging
from datetime import datetime, timezone

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def setup_logging(level="WARNING", log_filename=None):
    """
    Set up logging configuration.

    Log records go to standard error (and optionally to a file) so that
    machine-readable command output on standard output is never interleaved.

    Args:
        level (str): Logging level name
        log_filename (str): Optional log file path

    Returns:
        logging.Logger: The package root logger
    """
    handlers = [logging.StreamHandler()]
    if log_filename:
        handlers.append(logging.FileHandler(log_filename))

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return logging.getLogger("dsfactory")


def ensure_directory(path):
    """
    Ensure a directory exists.

    Args:
        path (str): Directory path
    """
    if not os.path.exists(path):
        os.makedirs(path, exist_ok=True)
        logger.debug(f"Created directory: {path}")


def _reject_floats(obj):
    if isinstance(obj, float):
        raise ValueError(f"float value {obj!r} is not allowed in canonical documents")
    if isinstance(obj, dict):
        for value in obj.values():
            _reject_floats(value)
    elif isinstance(obj, (list, tuple)):
        for value in obj:
            _reject_floats(value)


def canonical_json(obj, allow_floats=True):
    """
    Serialize an object as canonical JSON bytes.

    Keys are sorted, output is UTF-8 with no insignificant whitespace and
    integers are written in decimal.

    Args:
        obj: JSON-compatible object
        allow_floats (bool): When False, any float in the document is an error

    Returns:
        bytes: Canonical encoding
    """
    if not allow_floats:
        _reject_floats(obj)
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def canonical_value_text(value):
    """
    Render a parameter value as canonical text for operation descriptors.

    Floats use the shortest round-trip representation so that equal values
    always render identically.

    Args:
        value: int, float, bool, str, None, bytes or a (nested) sequence of numbers

    Returns:
        str: Canonical text
    """
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"non-finite parameter value {value!r}")
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (bytes, bytearray)):
        return "0x" + bytes(value).hex()
    if hasattr(value, "tolist"):
        return canonical_value_text(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_value_text(v) for v in value) + "]"
    raise TypeError(f"unsupported parameter value type {type(value).__name__}")


def sha256_hex(data):
    """
    Compute a lowercase hex SHA-256 digest.

    Args:
        data (bytes | str): Input; text is encoded as UTF-8

    Returns:
        str: 64-character hex digest
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def generate_timestamp():
    """
    Generate an RFC3339 UTC timestamp.

    Honours SOURCE_DATE_EPOCH so catalogs built twice from the same inputs are
    byte-identical.

    Returns:
        str: Timestamp such as 2024-01-01T00:00:00Z
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def atomic_write_bytes(path, data):
    """
    Write a file by writing a sibling temp file and renaming it into place.

    Args:
        path (str): Destination path
        data (bytes): File contents
    """
    directory = os.path.dirname(path) or "."
    ensure_directory(directory)
    tmp_path = os.path.join(directory, f".tmp-{uuid.uuid4().hex}")
    try:
        with open(tmp_path, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)


def directory_digest(path):
    """
    Hash the relative paths and contents of every file below a directory.

    Args:
        path (str): Directory path

    Returns:
        str: Hex digest, stable across runs for identical trees
    """
    digest = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(path):
        dirnames.sort()
        for filename in sorted(filenames):
            full = os.path.join(dirpath, filename)
            rel = os.path.relpath(full, path).replace(os.sep, "/")
            digest.update(rel.encode("utf-8") + b"\x00")
            with open(full, "rb") as f:
                digest.update(hashlib.sha256(f.read()).digest())
    return digest.hexdigest()
