#!/usr/bin/env python3
"""
Test Fixture Writer

This module writes plain ustar archives and metadata sidecars for tests and for
the `df fixture` command. It is not a production tar writer: no long names, no
pax headers, no compression, and no blocking-factor padding after the two
end-of-archive blocks.
"""

import os
import json
import logging

import numpy as np
import pandas as pd

from dsfactory.archive.tar_index import BLOCK_SIZE
from dsfactory.utils import ensure_directory

logger = logging.getLogger(__name__)

# Constants
FIXTURE_SHARDS = 10
FIXTURE_MEMBERS = 1000
FIXTURE_MIN_SIZE = 64
FIXTURE_MAX_SIZE = 4096
CAPTION_WORDS = [
    "red", "blue", "dress", "shirt", "coat", "street", "studio", "model",
    "summer", "winter", "denim", "silk", "portrait", "catalog", "vintage", "linen",
]


def _octal(value, width):
    return f"{value:0{width - 1}o}".encode("ascii") + b"\x00"


def make_header(name, size, typeflag=b"0"):
    """
    Build one ustar header block.

    Args:
        name (str): Member path, at most 100 UTF-8 bytes
        size (int): Data length in bytes
        typeflag (bytes): One-byte type flag

    Returns:
        bytes: 512-byte header with a valid checksum
    """
    raw_name = name.encode("utf-8")
    if len(raw_name) > 100:
        raise ValueError(f"fixture member name too long: {name}")
    header = bytearray(BLOCK_SIZE)
    header[0:len(raw_name)] = raw_name
    header[100:108] = _octal(0o644, 8)
    header[108:116] = _octal(0, 8)
    header[116:124] = _octal(0, 8)
    header[124:136] = _octal(size, 12)
    header[136:148] = _octal(0, 12)
    header[148:156] = b" " * 8
    header[156:157] = typeflag
    header[257:263] = b"ustar\x00"
    header[263:265] = b"00"
    checksum = sum(header)
    header[148:156] = f"{checksum:06o}".encode("ascii") + b"\x00 "
    return bytes(header)


def tar_bytes(members):
    """
    Serialize (name, payload) pairs as a ustar stream.

    Args:
        members (list[tuple[str, bytes]]): Members in archive order

    Returns:
        bytes: Archive bytes ending in two zero blocks
    """
    chunks = []
    for name, payload in members:
        chunks.append(make_header(name, len(payload)))
        chunks.append(payload)
        remainder = len(payload) % BLOCK_SIZE
        if remainder:
            chunks.append(bytes(BLOCK_SIZE - remainder))
    chunks.append(bytes(2 * BLOCK_SIZE))
    return b"".join(chunks)


def write_tar(path, members):
    """
    Write a ustar archive to disk.

    Args:
        path (str): Destination path
        members (list[tuple[str, bytes]]): Members in archive order

    Returns:
        str: The path written
    """
    ensure_directory(os.path.dirname(os.path.abspath(path)))
    with open(path, "wb") as f:
        f.write(tar_bytes(members))
    return path


def write_sidecar_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def write_sidecar_csv(path, rows):
    fieldnames = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    frame = pd.DataFrame(rows, columns=fieldnames, dtype=object)
    frame.to_csv(path, index=False, na_rep="", encoding="utf-8")
    return path


def shard_members(shard, members_per_shard, seed=0, min_size=FIXTURE_MIN_SIZE, max_size=FIXTURE_MAX_SIZE):
    """
    Deterministically generate the members and metadata rows of one shard.

    Args:
        shard (int): Shard number; each shard has its own random stream
        members_per_shard (int): Number of members
        seed (int): Fixture seed
        min_size (int): Smallest payload in bytes
        max_size (int): Largest payload in bytes

    Returns:
        tuple[list, list]: (tar members, sidecar rows)
    """
    rng = np.random.default_rng([seed, shard])
    members = []
    rows = []
    for i in range(members_per_shard):
        key = f"{shard:04d}_{i:05d}"
        size = int(rng.integers(min_size, max_size + 1))
        payload = rng.integers(0, 256, size=size, dtype=np.uint8).tobytes()
        members.append((f"{key}.jpg", payload))
        words = rng.choice(CAPTION_WORDS, size=3)
        rows.append({
            "key": key,
            "size": size,
            "width": int(rng.integers(64, 2049)),
            "height": int(rng.integers(64, 2049)),
            "caption": " ".join(str(w) for w in words),
            "nsfw_score": round(float(rng.random()), 4),
        })
    return members, rows


def generate_fixture(out_dir, shards=FIXTURE_SHARDS, members_per_shard=FIXTURE_MEMBERS, seed=0,
                     first_shard=0, min_size=FIXTURE_MIN_SIZE, max_size=FIXTURE_MAX_SIZE):
    """
    Write tar shards plus one JSONL sidecar per shard.

    Args:
        out_dir (str): Output directory
        shards (int): Number of shards to write
        members_per_shard (int): Members in each shard
        seed (int): Fixture seed
        first_shard (int): Number of the first shard (lets tests append shards later)
        min_size (int): Smallest payload in bytes
        max_size (int): Largest payload in bytes

    Returns:
        list[tuple[str, str]]: (archive path, sidecar path) per shard
    """
    ensure_directory(out_dir)
    written = []
    for shard in range(first_shard, first_shard + shards):
        members, rows = shard_members(shard, members_per_shard, seed, min_size, max_size)
        tar_path = write_tar(os.path.join(out_dir, f"shard-{shard:05d}.tar"), members)
        sidecar_path = write_sidecar_jsonl(os.path.join(out_dir, f"shard-{shard:05d}.jsonl"), rows)
        written.append((tar_path, sidecar_path))
    logger.info(f"Wrote {len(written)} fixture shards of {members_per_shard} members to {out_dir}")
    return written
