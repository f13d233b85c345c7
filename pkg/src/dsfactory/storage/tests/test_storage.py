#!/usr/bin/env python3
"""
Unit tests for the storage access layer.
"""

import os
import shutil
import tempfile
import unittest

from hypothesis import given, settings, strategies as st

from dsfactory.errors import NotFound, RangeOutOfBounds, SchemeUnsupported, InvalidUri
from dsfactory.storage import Storage, parse_uri, plan_coalesced
from dsfactory.storage.uri import ByteRange


def naive_group_count(ranges, gap):
    """Reference count of merged groups."""
    spans = sorted((o, o + n) for o, n in ranges)
    count, end = 0, None
    for start, stop in spans:
        if end is None or start - end > gap:
            count += 1
            end = stop
        else:
            end = max(end, stop)
    return count


class TestStorage(unittest.TestCase):
    """Test cases for Storage."""

    def setUp(self):
        """Set up a temporary object."""
        self.test_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.test_dir, "obj.bin")
        with open(self.path, "wb") as f:
            f.write(b"abcdef")
        self.blob_path = os.path.join(self.test_dir, "blob.bin")
        self.blob = bytes((i * 7) % 251 for i in range(200000))
        with open(self.blob_path, "wb") as f:
            f.write(self.blob)
        self.storage = Storage()

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_parse_plain_path(self):
        """Test that plain paths become absolute file URIs."""
        uri = parse_uri(self.path)
        self.assertEqual(uri.scheme, "file")
        self.assertTrue(str(uri).startswith("file:///"))
        self.assertEqual(parse_uri(str(uri)), uri)

    def test_parse_rejects_unknown_scheme(self):
        """Test that unknown schemes raise SchemeUnsupported."""
        with self.assertRaises(SchemeUnsupported):
            parse_uri("s3://bucket/key")

    def test_parse_rejects_file_query(self):
        """Test that file URIs with a query are rejected."""
        with self.assertRaises(InvalidUri):
            parse_uri("file:///tmp/a.tar?x=1")

    def test_stat(self):
        """Test that stat reports the size without a GET."""
        self.assertEqual(self.storage.stat(self.path), 6)
        empty = os.path.join(self.test_dir, "empty")
        open(empty, "wb").close()
        self.assertEqual(self.storage.stat(empty), 0)
        with self.assertRaises(NotFound):
            self.storage.stat(os.path.join(self.test_dir, "missing"))
        self.assertEqual(self.storage.stats.get_count, 0)

    def test_read_range(self):
        """Test that read_range returns the bytes and counts one GET."""
        self.assertEqual(self.storage.read_range(self.path, (2, 3)), b"cde")
        self.assertEqual(self.storage.read_range(self.path, (0, 6)), b"abcdef")
        self.assertEqual(self.storage.stats.snapshot(), {"get_count": 2, "bytes_fetched": 9})

    def test_read_range_out_of_bounds(self):
        """Test that reading past the end raises RangeOutOfBounds."""
        with self.assertRaises(RangeOutOfBounds):
            self.storage.read_range(self.path, (6, 1))

    def test_byte_range_invariants(self):
        """Test that negative offsets and lengths are rejected."""
        with self.assertRaises(ValueError):
            ByteRange.checked(0, 0)
        with self.assertRaises(ValueError):
            ByteRange.checked((1 << 64) - 1, 2)

    def test_coalesce_merges_within_gap(self):
        """Test that ranges within the gap merge into one GET."""
        payloads = self.storage.read_ranges_coalesced(self.blob_path, [(0, 10), (12, 10)], gap=4)
        self.assertEqual(payloads, [self.blob[0:10], self.blob[12:22]])
        self.assertEqual(self.storage.stats.get_count, 1)
        self.assertEqual(self.storage.stats.bytes_fetched, 22)

    def test_coalesce_respects_gap(self):
        """Test that ranges farther apart than the gap stay separate."""
        self.storage.read_ranges_coalesced(self.blob_path, [(0, 10), (1000, 10)], gap=4)
        self.assertEqual(self.storage.stats.get_count, 2)

    def test_coalesce_stride(self):
        """Test that evenly strided ranges merge when the stride fits the gap."""
        ranges = [(i * 1024, 512) for i in range(100)]
        payloads = self.storage.read_ranges_coalesced(self.blob_path, ranges, gap=1024 * 1024)
        self.assertEqual(self.storage.stats.get_count, 1)
        self.assertEqual(payloads[57], self.blob[57 * 1024:57 * 1024 + 512])

    def test_coalesce_preserves_input_order(self):
        """Test that coalesced payloads come back in input order."""
        ranges = [(500, 5), (0, 5), (250, 5)]
        payloads = self.storage.read_ranges_coalesced(self.blob_path, ranges, gap=1000)
        self.assertEqual(payloads, [self.blob[o:o + n] for o, n in ranges])

    def test_read_many_skips_empty(self):
        """Test that zero-length requests cost no GET."""
        payloads = self.storage.read_many([(self.path, 0, 0), (self.path, 1, 2)])
        self.assertEqual(payloads, [b"", b"bc"])
        self.assertEqual(self.storage.stats.get_count, 1)

    def test_read_many_without_coalescing(self):
        """Test that uncoalesced reads issue one GET per request."""
        requests = [(self.blob_path, i * 100, 50) for i in range(20)]
        coalesced = self.storage.read_many(requests)
        self.assertEqual(self.storage.stats.get_count, 1)
        naive = Storage()
        self.assertEqual(naive.read_many(requests, coalesce=False), coalesced)
        self.assertEqual(naive.stats.get_count, 20)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.tuples(st.integers(0, 199000), st.integers(1, 999)), min_size=1, max_size=40),
        st.integers(0, 5000),
    )
    def test_coalesced_matches_naive(self, ranges, gap):
        """Test that coalesced reads return the same bytes as single reads."""
        coalesced_storage = Storage()
        naive_storage = Storage()
        coalesced = coalesced_storage.read_ranges_coalesced(self.blob_path, ranges, gap=gap)
        naive = [naive_storage.read_range(self.blob_path, r) for r in ranges]
        self.assertEqual(coalesced, naive)
        self.assertLessEqual(coalesced_storage.stats.get_count, naive_storage.stats.get_count)
        self.assertEqual(coalesced_storage.stats.get_count, naive_group_count(ranges, gap))
        self.assertGreaterEqual(coalesced_storage.stats.bytes_fetched, 0)
        unique_bytes = len(set(b for o, n in ranges for b in range(o, o + n)))
        self.assertGreaterEqual(coalesced_storage.stats.bytes_fetched, unique_bytes)

    def test_plan_groups(self):
        """Test that plan_coalesced groups ranges by offset."""
        ranges = [ByteRange(0, 10), ByteRange(12, 10), ByteRange(1000, 10)]
        groups = plan_coalesced(ranges, 4)
        self.assertEqual(groups, [(0, 22, [0, 1]), (1000, 1010, [2])])


if __name__ == "__main__":
    unittest.main()
