#!/usr/bin/env python3
"""
Export Manifests

An export manifest is the hand-off from the catalog to training code: a JSONL
file whose first line describes the export and whose remaining lines point at
one sample each. Row order is a seeded hash order, and a shard keeps every
row whose position modulo world_size equals its rank, so the shards of one
(seed, world_size) pair partition the dataset.
"""

import json
import hashlib
import logging
from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dsfactory.errors import BadShard, Corrupt, Missing, UnknownColumn
from dsfactory.table.frame import SampleRef
from dsfactory.table.schema import REF_COLUMNS, UID_COLUMN
from dsfactory.utils import atomic_write_bytes, canonical_json

logger = logging.getLogger(__name__)


class ExportHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset: str
    fingerprint: str
    seed: int
    rank: int = Field(ge=0)
    world_size: int = Field(ge=1)
    columns: List[str]
    row_count: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_shard(self):
        if self.rank >= self.world_size:
            raise ValueError(f"rank {self.rank} is not below world_size {self.world_size}")
        return self


class ExportRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    uid: str
    source_uri: str
    member_path: str
    offset: int = Field(ge=0)
    length: int = Field(ge=0)
    attrs: Dict[str, object] = Field(default_factory=dict)

    @property
    def ref(self):
        return SampleRef(self.source_uri, self.member_path, self.offset, self.length)


def order_key(seed, uid):
    return hashlib.sha256(f"{int(seed)}\x00{uid}".encode("utf-8")).digest()


def export_order(uids, seed):
    """
    Row positions sorted by SHA-256(decimal(seed) NUL uid).

    Args:
        uids (list[str]): Row uids
        seed (int): Shuffle seed

    Returns:
        list[int]: Positions in export order
    """
    keys = [order_key(seed, u) for u in uids]
    return sorted(range(len(uids)), key=keys.__getitem__)


def shard(order, rank, world_size):
    """Keep the entries whose position in `order` is congruent to rank mod world_size."""
    check_shard(rank, world_size)
    return order[rank::world_size]


def check_shard(rank, world_size):
    if world_size < 1:
        raise BadShard(f"world size must be at least 1, got {world_size}")
    if rank < 0 or rank >= world_size:
        raise BadShard(f"rank {rank} is outside 0..{world_size - 1}")


def build_export(dataset, columns=(), seed=0, rank=0, world_size=1):
    """
    Select and order one shard of a dataset.

    Args:
        dataset (Dataset): Dataset version to export
        columns (list[str]): Attribute columns to carry along
        seed (int): Shuffle seed
        rank (int): This shard's index
        world_size (int): Number of shards

    Returns:
        tuple[ExportHeader, list[ExportRow]]: Header and rows in export order
    """
    check_shard(rank, world_size)
    columns = list(columns)
    for name in columns:
        if not dataset.schema.has(name):
            raise UnknownColumn(f"{dataset.ref} has no column '{name}'")

    uids = dataset.column(UID_COLUMN).to_pylist()
    positions = shard(export_order(uids, seed), rank, world_size)
    refs = [dataset.column(n) for n in REF_COLUMNS]
    attrs = {n: dataset.column(n) for n in columns}
    rows = [
        ExportRow(
            uid=uids[i],
            source_uri=refs[0].value(i),
            member_path=refs[1].value(i),
            offset=refs[2].value(i),
            length=refs[3].value(i),
            attrs={n: c.to_jsonable(i) for n, c in attrs.items()},
        )
        for i in positions
    ]
    header = ExportHeader(
        dataset=dataset.ref,
        fingerprint=dataset.fingerprint,
        seed=seed,
        rank=rank,
        world_size=world_size,
        columns=columns,
        row_count=len(rows),
    )
    logger.info(f"Export of {dataset.ref} shard {rank}/{world_size}: {len(rows)} of {dataset.row_count} rows")
    return header, rows


def export_bytes(header, rows):
    lines = [canonical_json(header.model_dump())]
    lines.extend(canonical_json(row.model_dump()) for row in rows)
    return b"".join(line + b"\n" for line in lines)


def write_export(path, header, rows):
    atomic_write_bytes(path, export_bytes(header, rows))


def read_export(path):
    """
    Read an export manifest.

    Args:
        path (str): JSONL file written by write_export

    Returns:
        tuple[ExportHeader, list[ExportRow]]: Header and rows
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [line for line in f if line.strip()]
    except FileNotFoundError:
        raise Missing(f"no export manifest at {path}")
    if not lines:
        raise Corrupt(f"export manifest {path} is empty")
    try:
        header = ExportHeader.model_validate(json.loads(lines[0]))
        rows = [ExportRow.model_validate(json.loads(line)) for line in lines[1:]]
    except (json.JSONDecodeError, ValidationError) as e:
        raise Corrupt(f"unreadable export manifest {path}: {e}")
    if len(rows) != header.row_count:
        raise Corrupt(f"export manifest {path} declares {header.row_count} rows but holds {len(rows)}")
    return header, rows
