"""
Execution context and per-stage counters.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, List

from dsfactory.catalog.fingerprint import fingerprint
from dsfactory.config import DEFAULT_BATCH_SIZE, DEFAULT_READ_AHEAD_BATCHES, DEFAULT_UDF_TIMEOUT
from dsfactory.engine.descriptor import OperationDescriptor
from dsfactory.storage import Storage
from dsfactory.table.schema import Schema

logger = logging.getLogger(__name__)


@dataclass
class ExecutionStats:
    """Counters for one stage execution."""

    rows_in: int = 0
    rows_out: int = 0
    rows_processed: int = 0
    udf_rows: int = 0
    udf_batches: int = 0
    get_count: int = 0
    bytes_fetched: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add_udf_batch(self, rows):
        with self._lock:
            self.udf_batches += 1
            self.udf_rows += rows

    def as_dict(self):
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "rows_processed": self.rows_processed,
            "udf_rows": self.udf_rows,
            "udf_batches": self.udf_batches,
            "get_count": self.get_count,
            "bytes_fetched": self.bytes_fetched,
        }


class ExecutionContext:
    """
    Everything a stage needs besides its inputs: storage, the optional sample
    cache and the batching/parallelism knobs.
    """

    def __init__(self, storage=None, cache=None, batch_size=DEFAULT_BATCH_SIZE, workers=1,
                 read_ahead=DEFAULT_READ_AHEAD_BATCHES, udf_timeout=DEFAULT_UDF_TIMEOUT, coalesce=True):
        self.storage = storage or (cache.storage if cache is not None else Storage())
        self.cache = cache
        self.batch_size = batch_size
        self.workers = workers
        self.read_ahead = read_ahead
        self.udf_timeout = udf_timeout
        self.coalesce = coalesce

    @classmethod
    def from_settings(cls, settings, storage=None, cache=None):
        return cls(
            storage=storage,
            cache=cache,
            batch_size=settings.batch_size,
            workers=settings.workers,
            udf_timeout=settings.udf_timeout,
        )

    def fetch(self, refs):
        """
        Fetch sample payloads, through the cache when one is configured.

        Args:
            refs (list[SampleRef]): Samples to fetch

        Returns:
            list[bytes]: Payloads in input order
        """
        if self.cache is not None:
            return self.cache.get_many(refs, coalesce=self.coalesce)
        return self.storage.read_many(
            [(r.source_uri, r.offset, r.length) for r in refs], coalesce=self.coalesce
        )


@dataclass
class StagedDataset:
    """
    A stage output that has not been saved yet.

    `columns` holds newly materialized columns; `inherited` maps the remaining
    column names to existing column files (relative to the catalog root) that
    the new version references instead of copying.
    """

    schema: Schema
    row_count: int
    parents: List[str]
    operation: OperationDescriptor
    columns: Dict[str, object] = field(default_factory=dict)
    inherited: Dict[str, str] = field(default_factory=dict)
    stats: ExecutionStats = field(default_factory=ExecutionStats)

    @property
    def fingerprint(self):
        return fingerprint(self.parents, self.operation, self.schema)

    def column_names(self):
        return list(self.columns) + list(self.inherited)
