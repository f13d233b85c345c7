"""
Iterating data loader over export manifests.

The loader hides where samples live: it yields (uid, payload, attrs) triples
and fetches payloads through the sample cache in prefetch-sized groups, so a
second epoch over a warm cache issues no storage GETs.
"""

import os
import logging

from dsfactory.loader.export import read_export
from dsfactory.utils import atomic_write_bytes, canonical_json, ensure_directory

logger = logging.getLogger(__name__)

DEFAULT_PREFETCH = 64
INDEX_FILENAME = "index.jsonl"


class SampleLoader:
    """
    Iterable over the samples of an export.

    Args:
        rows (list[ExportRow]): Samples in export order
        cache (SampleCache): Cache to fetch payloads through
        prefetch (int): Samples fetched per cache request
        coalesce (bool): Merge nearby misses into one ranged GET
    """

    def __init__(self, rows, cache, prefetch=DEFAULT_PREFETCH, coalesce=True):
        self.rows = list(rows)
        self.cache = cache
        self.prefetch = max(1, prefetch)
        self.coalesce = coalesce

    @classmethod
    def from_export(cls, path, cache, **kwargs):
        _, rows = read_export(path)
        return cls(rows, cache, **kwargs)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        for start in range(0, len(self.rows), self.prefetch):
            group = self.rows[start:start + self.prefetch]
            payloads = self.cache.get_many([row.ref for row in group], coalesce=self.coalesce)
            for row, payload in zip(group, payloads):
                yield row.uid, payload, dict(row.attrs)


def fetch_to_dir(loader, out_dir):
    """
    Materialize every sample of a loader as `<out_dir>/<uid>` plus an index.

    The index, `index.jsonl`, holds one {uid, member_path, length, attrs} line
    per sample in loader order.

    Args:
        loader (SampleLoader): Samples to write
        out_dir (str): Output directory

    Returns:
        int: Samples written
    """
    ensure_directory(out_dir)
    by_uid = {row.uid: row for row in loader.rows}
    index_lines = []
    count = 0
    for uid, payload, attrs in loader:
        atomic_write_bytes(os.path.join(out_dir, uid), payload)
        row = by_uid[uid]
        index_lines.append(canonical_json({
            "attrs": attrs,
            "length": len(payload),
            "member_path": row.member_path,
            "uid": uid,
        }))
        count += 1
    atomic_write_bytes(os.path.join(out_dir, INDEX_FILENAME), b"".join(line + b"\n" for line in index_lines))
    logger.info(f"Wrote {count} samples to {out_dir}")
    return count
