#!/usr/bin/env python3
"""
Unit tests for the HTTP Range adapter.
"""

import unittest
from unittest import mock

import requests

from dsfactory.errors import HttpRangeUnsupported, IoFailure, NotFound, RangeOutOfBounds
from dsfactory.storage import Storage, parse_uri
from dsfactory.storage.adapters import HttpAdapter


def make_response(status_code, content=b"", headers=None):
    response = mock.Mock()
    response.status_code = status_code
    response.content = content
    response.headers = headers or {}
    return response


class TestHttpAdapter(unittest.TestCase):
    """Test cases for HttpAdapter."""

    def setUp(self):
        """Set up an adapter with a mocked session."""
        self.adapter = HttpAdapter()
        self.session = mock.Mock()
        self.adapter._local.session = self.session
        self.uri = parse_uri("https://example.com/shards/a.tar")

    def test_range_header_format(self):
        """Test that reads send an inclusive Range header."""
        self.session.get.return_value = make_response(206, b"cde")
        data = self.adapter.read(self.uri, 2, 3)
        self.assertEqual(data, b"cde")
        _, kwargs = self.session.get.call_args
        self.assertEqual(kwargs["headers"], {"Range": "bytes=2-4"})

    def test_full_response_is_rejected(self):
        """Test that a 200 response to a ranged read is rejected."""
        self.session.get.return_value = make_response(200, b"abcdef")
        with self.assertRaises(HttpRangeUnsupported):
            self.adapter.read(self.uri, 2, 3)

    def test_not_found(self):
        """Test that a 404 raises NotFound."""
        self.session.get.return_value = make_response(404)
        with self.assertRaises(NotFound):
            self.adapter.read(self.uri, 0, 1)

    def test_unsatisfiable_range(self):
        """Test that a 416 raises RangeOutOfBounds."""
        self.session.get.return_value = make_response(416)
        with self.assertRaises(RangeOutOfBounds):
            self.adapter.read(self.uri, 100, 1)

    def test_server_error_after_retries(self):
        """Test that a server error left after retries raises IoFailure."""
        self.session.get.return_value = make_response(503)
        with self.assertRaises(IoFailure):
            self.adapter.read(self.uri, 0, 1)

    def test_connection_error(self):
        """Test that connection errors raise IoFailure."""
        self.session.get.side_effect = requests.ConnectionError("boom")
        with self.assertRaises(IoFailure):
            self.adapter.read(self.uri, 0, 1)

    def test_short_body(self):
        """Test that a short body raises IoFailure."""
        self.session.get.return_value = make_response(206, b"ab")
        with self.assertRaises(IoFailure):
            self.adapter.read(self.uri, 0, 3)

    def test_stat_uses_head(self):
        """Test that stat reads Content-Length from a HEAD request."""
        self.session.head.return_value = make_response(200, headers={"Content-Length": "2048"})
        self.assertEqual(self.adapter.stat(self.uri), 2048)

    def test_retry_policy(self):
        """Test that the session retries server errors but not 404."""
        session = HttpAdapter(attempts=3, backoff=0.1)._session()
        retry = session.get_adapter("https://example.com").max_retries
        self.assertEqual(retry.total, 2)
        self.assertIn(503, retry.status_forcelist)
        self.assertNotIn(404, retry.status_forcelist)

    def test_storage_accounts_http_reads(self):
        """Test that coalesced HTTP reads are counted as one GET."""
        self.session.get.return_value = make_response(206, b"x" * 22)
        storage = Storage(http_adapter=self.adapter)
        payloads = storage.read_ranges_coalesced(self.uri, [(0, 10), (12, 10)], gap=4)
        self.assertEqual(payloads, [b"x" * 10, b"x" * 10])
        self.assertEqual(storage.stats.get_count, 1)
        self.assertEqual(storage.stats.bytes_fetched, 22)


if __name__ == "__main__":
    unittest.main()
