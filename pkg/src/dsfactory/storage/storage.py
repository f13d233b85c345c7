#!/usr/bin/env python3
"""
Storage Access Layer

This module routes byte-range reads to the scheme adapters, counts every GET,
and merges nearby ranges into single requests to keep GET rates down.
"""

import logging
from collections import OrderedDict

from dsfactory.config import DEFAULT_COALESCE_GAP
from dsfactory.errors import SchemeUnsupported
from dsfactory.storage.adapters import FileAdapter, HttpAdapter
from dsfactory.storage.uri import ByteRange, RequestStats, parse_uri

logger = logging.getLogger(__name__)


def plan_coalesced(ranges, gap):
    """
    Group ranges so that each group can be served by one GET.

    Ranges are sorted by offset and two neighbours are merged whenever
    next.offset - (end of current group) <= gap. Overlapping ranges always merge.

    Args:
        ranges (list[ByteRange]): Ranges in caller order
        gap (int): Largest tolerated hole between merged ranges, in bytes

    Returns:
        list[tuple[int, int, list[int]]]: (group offset, group end, indices into ranges)
    """
    order = sorted(range(len(ranges)), key=lambda i: (ranges[i].offset, ranges[i].length))
    groups = []
    for i in order:
        rng = ranges[i]
        if groups and rng.offset - groups[-1][1] <= gap:
            start, end, members = groups[-1]
            groups[-1] = (start, max(end, rng.end), members + [i])
        else:
            groups.append((rng.offset, rng.end, [i]))
    return groups


class Storage:
    """
    Byte-range reader over file and HTTP sources.

    One Storage instance is one accounting session: `stats` counts every GET it
    issues, including local file reads.
    """

    def __init__(self, coalesce_gap=DEFAULT_COALESCE_GAP, http_adapter=None):
        self.coalesce_gap = coalesce_gap
        self.stats = RequestStats()
        http = http_adapter or HttpAdapter()
        self._adapters = {"file": FileAdapter(), "http": http, "https": http}

    def _adapter(self, uri):
        adapter = self._adapters.get(uri.scheme)
        if adapter is None:
            raise SchemeUnsupported(f"no adapter for scheme '{uri.scheme}'")
        return adapter

    def stat(self, uri):
        """
        Get the total size of an object. Not counted as a GET.

        Args:
            uri (str | SourceUri): Object location

        Returns:
            int: Size in bytes
        """
        uri = parse_uri(uri)
        return self._adapter(uri).stat(uri)

    def head(self, uri):
        """
        Size plus change token (file mtime, HTTP ETag or Last-Modified) of an
        object. Not counted as a GET.

        Returns:
            ObjectInfo: (size, version); version is None when the source has none
        """
        uri = parse_uri(uri)
        return self._adapter(uri).head(uri)

    def read_range(self, uri, rng):
        """
        Read exactly `rng.length` bytes at `rng.offset` with one GET.

        Args:
            uri (str | SourceUri): Object location
            rng (ByteRange | tuple): Range to read

        Returns:
            bytes: Payload
        """
        uri = parse_uri(uri)
        rng = ByteRange.checked(*rng)
        data = self._adapter(uri).read(uri, rng.offset, rng.length)
        self.stats.record(len(data))
        logger.debug(f"read {rng.length} bytes at {rng.offset} from {uri}")
        return data

    def read_ranges_coalesced(self, uri, ranges, gap=None):
        """
        Read many ranges of one object, merging nearby ranges into one GET.

        Args:
            uri (str | SourceUri): Object location
            ranges (list[ByteRange | tuple]): Ranges to read
            gap (int): Merge threshold in bytes; None uses the session default

        Returns:
            list[bytes]: Payloads in input order
        """
        uri = parse_uri(uri)
        gap = self.coalesce_gap if gap is None else gap
        ranges = [ByteRange.checked(*r) for r in ranges]
        results = [None] * len(ranges)

        groups = plan_coalesced(ranges, gap)
        for start, end, members in groups:
            blob = self.read_range(uri, (start, end - start))
            for i in members:
                rel = ranges[i].offset - start
                results[i] = blob[rel:rel + ranges[i].length]

        if len(groups) < len(ranges):
            logger.debug(f"coalesced {len(ranges)} ranges into {len(groups)} GETs on {uri}")
        return results

    def read_many(self, requests, gap=None, coalesce=True):
        """
        Read (uri, offset, length) triples, grouped per object.

        Zero-length requests return empty payloads without a GET.

        Args:
            requests (list[tuple]): (uri, offset, length) in caller order
            gap (int): Merge threshold; None uses the session default
            coalesce (bool): When False every request is its own GET

        Returns:
            list[bytes]: Payloads in input order
        """
        results = [b""] * len(requests)
        by_uri = OrderedDict()
        for i, (uri, offset, length) in enumerate(requests):
            if length == 0:
                continue
            by_uri.setdefault(str(parse_uri(uri)), []).append((i, offset, length))

        for uri, items in by_uri.items():
            if coalesce:
                payloads = self.read_ranges_coalesced(uri, [(o, n) for _, o, n in items], gap=gap)
            else:
                payloads = [self.read_range(uri, (o, n)) for _, o, n in items]
            for (i, _, _), payload in zip(items, payloads):
                results[i] = payload
        return results
