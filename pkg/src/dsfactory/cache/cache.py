#!/usr/bin/env python3
"""
Sample Cache

Two-tier content cache for sample payloads: a size-bounded local directory and
an optional shared directory (for example on a team filesystem) that is never
evicted automatically. Entries are keyed by the sample's uid and stored at

    <tier>/objects/<first 2 hex>/<next 2 hex>/<uid>

Local-tier recency is kept in an append-only access journal,
`<local>/journal.log`, rewritten without repeats on eviction and whenever it
grows past a record limit.
"""

import os
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from dsfactory.config import DEFAULT_CACHE_DIR, DEFAULT_CACHE_JOURNAL_RECORDS, DEFAULT_CACHE_MAX_BYTES
from dsfactory.errors import CorruptEntry
from dsfactory.storage import Storage
from dsfactory.table.frame import uid
from dsfactory.utils import atomic_write_bytes, ensure_directory

logger = logging.getLogger(__name__)

OBJECTS_DIR = "objects"
JOURNAL_FILENAME = "journal.log"


class CacheConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    local_dir: str = DEFAULT_CACHE_DIR
    shared_dir: Optional[str] = None
    max_local_bytes: int = Field(default=DEFAULT_CACHE_MAX_BYTES, gt=0)
    journal_max_records: int = Field(default=DEFAULT_CACHE_JOURNAL_RECORDS, gt=0)
    auto_evict: bool = True

    @classmethod
    def from_settings(cls, settings):
        return cls(
            local_dir=settings.cache_dir,
            shared_dir=settings.shared_cache_dir,
            max_local_bytes=settings.cache_max_bytes,
        )


@dataclass
class CacheStats:
    """Per-tier hit and miss counters for one process."""

    local_hits: int = 0
    local_misses: int = 0
    shared_hits: int = 0
    shared_misses: int = 0
    corrupt_entries: int = 0
    evicted_entries: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, **counts):
        with self._lock:
            for name, n in counts.items():
                setattr(self, name, getattr(self, name) + n)

    def snapshot(self):
        with self._lock:
            return {
                "local_hits": self.local_hits,
                "local_misses": self.local_misses,
                "shared_hits": self.shared_hits,
                "shared_misses": self.shared_misses,
                "corrupt_entries": self.corrupt_entries,
                "evicted_entries": self.evicted_entries,
            }


def entry_path(tier_dir, key):
    return os.path.join(tier_dir, OBJECTS_DIR, key[:2], key[2:4], key)


@dataclass
class _KeyLock:
    lock: threading.Lock = field(default_factory=threading.Lock)
    users: int = 0


class SampleCache:
    """
    Read-through cache in front of a Storage session.

    Lookups go local, then shared, then storage. A storage fetch fills the shared
    tier (when configured) and then the local tier; a shared hit fills the local
    tier. Concurrent lookups of one key in this process share a single fetch.

    The local tier size is tracked as a running total, seeded by one directory
    walk; writers in other processes are only seen when eviction re-walks it.
    """

    def __init__(self, config, storage=None):
        self.config = config
        self.storage = storage or Storage()
        self.stats = CacheStats()
        self._key_locks = {}
        self._key_locks_guard = threading.Lock()
        self._journal_lock = threading.Lock()
        self._evict_lock = threading.Lock()
        ensure_directory(os.path.join(config.local_dir, OBJECTS_DIR))
        if config.shared_dir:
            ensure_directory(os.path.join(config.shared_dir, OBJECTS_DIR))
        self._size_lock = threading.Lock()
        self.local_bytes = self.local_size()
        self._journal_records = None
        self._compact_at = config.journal_max_records

    @property
    def journal_path(self):
        return os.path.join(self.config.local_dir, JOURNAL_FILENAME)

    @contextmanager
    def _holding(self, keys):
        """Hold the per-key locks of `keys` in order; a lock is dropped once no thread uses it."""
        with self._key_locks_guard:
            entries = [self._key_locks.setdefault(key, _KeyLock()) for key in keys]
            for entry in entries:
                entry.users += 1
        acquired = []
        try:
            for entry in entries:
                entry.lock.acquire()
                acquired.append(entry)
            yield
        finally:
            for entry in reversed(acquired):
                entry.lock.release()
            with self._key_locks_guard:
                for key, entry in zip(keys, entries):
                    entry.users -= 1
                    if entry.users == 0:
                        del self._key_locks[key]

    def _add_local_bytes(self, delta):
        with self._size_lock:
            self.local_bytes += delta

    def _touch(self, key):
        with self._journal_lock:
            if self._journal_records is None:
                self._journal_records = len(self._recency_lines())
            with open(self.journal_path, "a", encoding="ascii") as f:
                f.write(key + "\n")
            self._journal_records += 1
            if self._journal_records > self._compact_at:
                self._compact_journal()

    def _compact_journal(self, keep=None):
        """Rewrite the journal with one line per key, oldest access first. Caller holds the journal lock."""
        recency = self._recency()
        survivors = sorted((k for k in recency if keep is None or k in keep), key=lambda k: recency[k])
        atomic_write_bytes(self.journal_path, "".join(k + "\n" for k in survivors).encode("ascii"))
        self._journal_records = len(survivors)
        self._compact_at = max(self.config.journal_max_records, 2 * len(survivors))
        logger.debug(f"Compacted cache journal to {len(survivors)} records")

    def _read_tier(self, tier_dir, key, expected_length):
        path = entry_path(tier_dir, key)
        try:
            with open(path, "rb") as f:
                data = f.read()
        except FileNotFoundError:
            return None
        if len(data) != expected_length:
            logger.warning(f"Cache entry {path} holds {len(data)} bytes, expected {expected_length}; evicting")
            self.stats.add(corrupt_entries=1)
            try:
                os.remove(path)
                if tier_dir == self.config.local_dir:
                    self._add_local_bytes(-len(data))
            except FileNotFoundError:
                pass
            return None
        return data

    def _lookup(self, key, length):
        """Serve a key from the local or shared tier, or return None."""
        data = self._read_tier(self.config.local_dir, key, length)
        if data is not None:
            self.stats.add(local_hits=1)
            self._touch(key)
            return data
        self.stats.add(local_misses=1)
        if self.config.shared_dir:
            data = self._read_tier(self.config.shared_dir, key, length)
            if data is not None:
                self.stats.add(shared_hits=1)
                self._store_local(key, data)
                return data
            self.stats.add(shared_misses=1)
        return None

    def _store_local(self, key, data):
        path = entry_path(self.config.local_dir, key)
        try:
            replaced = os.path.getsize(path)
        except OSError:
            replaced = 0
        atomic_write_bytes(path, data)
        self._add_local_bytes(len(data) - replaced)
        self._touch(key)

    def _store(self, key, data):
        if self.config.shared_dir:
            atomic_write_bytes(entry_path(self.config.shared_dir, key), data)
        self._store_local(key, data)

    def _checked(self, ref, data):
        if len(data) != ref.length:
            raise CorruptEntry(
                f"{ref.source_uri}:{ref.member_path} returned {len(data)} bytes, expected {ref.length}"
            )
        return data

    def get_or_fetch(self, key, ref):
        """
        Get one sample's payload.

        Args:
            key (str): Cache key, equal to uid(ref)
            ref (SampleRef): Where to fetch the sample on a miss

        Returns:
            bytes: Payload
        """
        if ref.length == 0:
            return b""
        with self._holding([key]):
            data = self._lookup(key, ref.length)
            if data is None:
                data = self._checked(ref, self.storage.read_range(ref.source_uri, (ref.offset, ref.length)))
                self._store(key, data)
        if self.config.auto_evict:
            self.evict_to_limit()
        return data

    def get(self, ref):
        return self.get_or_fetch(uid(ref), ref)

    def get_many(self, refs, coalesce=True, gap=None):
        """
        Get many payloads, filling all misses with coalesced ranged reads.

        Coalesced reads are split per member before they are cached, so later
        single-sample lookups hit.

        Args:
            refs (list[SampleRef]): Samples in caller order
            coalesce (bool): Merge nearby misses in one archive into one GET
            gap (int): Coalescing gap; None uses the storage default

        Returns:
            list[bytes]: Payloads in input order
        """
        keys = [uid(r) for r in refs]
        results = [None] * len(refs)
        pending = {}
        for i, (key, ref) in enumerate(zip(keys, refs)):
            if ref.length == 0:
                results[i] = b""
                continue
            pending.setdefault(key, []).append(i)

        with self._holding(sorted(pending)):
            misses = []
            for key in sorted(pending):
                ref = refs[pending[key][0]]
                data = self._lookup(key, ref.length)
                if data is None:
                    misses.append(key)
                else:
                    for i in pending[key]:
                        results[i] = data
            if misses:
                fetched = self.storage.read_many(
                    [(refs[pending[k][0]].source_uri, refs[pending[k][0]].offset, refs[pending[k][0]].length)
                     for k in misses],
                    gap=gap,
                    coalesce=coalesce,
                )
                for key, data in zip(misses, fetched):
                    data = self._checked(refs[pending[key][0]], data)
                    self._store(key, data)
                    for i in pending[key]:
                        results[i] = data
                logger.debug(f"Filled {len(misses)} cache misses of {len(pending)} requested samples")
        if self.config.auto_evict and pending:
            self.evict_to_limit()
        return results

    def _local_entries(self):
        entries = {}
        objects = os.path.join(self.config.local_dir, OBJECTS_DIR)
        for dirpath, _, filenames in os.walk(objects):
            for filename in filenames:
                if filename.startswith(".tmp-"):
                    continue
                try:
                    entries[filename] = os.path.getsize(os.path.join(dirpath, filename))
                except OSError:
                    pass
        return entries

    def local_size(self):
        """Bytes in the local tier, measured by walking it."""
        return sum(self._local_entries().values())

    def _recency_lines(self):
        try:
            with open(self.journal_path, "r", encoding="ascii") as f:
                return [line.strip() for line in f if line.strip()]
        except FileNotFoundError:
            return []

    def _recency(self):
        """Key -> position of its most recent access in the journal."""
        return {key: position for position, key in enumerate(self._recency_lines())}

    def evict_to_limit(self):
        """
        Remove least-recently-used local entries until the local tier fits.

        Entries missing from the journal count as oldest. The shared tier is
        never touched. The tier is only walked when the running total exceeds
        the limit; the walk then replaces the total.

        Returns:
            int: Bytes freed
        """
        with self._evict_lock:
            if self.local_bytes <= self.config.max_local_bytes:
                return 0
            entries = self._local_entries()
            total = sum(entries.values())
            if total <= self.config.max_local_bytes:
                with self._size_lock:
                    self.local_bytes = total
                return 0
            with self._journal_lock:
                recency = self._recency()
                by_age = sorted(entries, key=lambda k: (recency.get(k, -1), k))
                freed = 0
                evicted = 0
                for key in by_age:
                    if total <= self.config.max_local_bytes:
                        break
                    try:
                        os.remove(entry_path(self.config.local_dir, key))
                    except FileNotFoundError:
                        pass
                    size = entries.pop(key)
                    total -= size
                    freed += size
                    evicted += 1
                self._compact_journal(keep=entries)
            with self._size_lock:
                self.local_bytes = total
            self.stats.add(evicted_entries=evicted)
            logger.info(f"Evicted {evicted} cache entries ({freed} bytes)")
            return freed
