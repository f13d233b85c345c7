"""
Scheme adapters: local files and generic HTTP objects with Range support.

Adapters only move bytes; accounting and coalescing live in `storage.Storage`.
"""

import os
import logging
import threading
from typing import NamedTuple, Optional

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from dsfactory.errors import (
    HttpRangeUnsupported,
    IoFailure,
    NotFound,
    RangeOutOfBounds,
)

logger = logging.getLogger(__name__)

# Constants
RETRY_ATTEMPTS = 3
RETRY_BACKOFF = 0.1  # seconds, doubled after each failed attempt
RETRY_STATUSES = (500, 502, 503, 504)
REQUEST_TIMEOUT = 60.0


class ObjectInfo(NamedTuple):
    """Size of an object plus an opaque token that changes when the object does."""

    size: int
    version: Optional[str] = None


class FileAdapter:
    """Read-only access to `file://` objects."""

    def stat(self, uri):
        return self.head(uri).size

    def head(self, uri):
        try:
            st = os.stat(uri.local_path)
        except FileNotFoundError:
            raise NotFound(f"object not found: {uri}")
        except OSError as e:
            raise IoFailure(f"cannot stat {uri}: {e}")
        if not os.path.isfile(uri.local_path):
            raise NotFound(f"not a regular file: {uri}")
        return ObjectInfo(st.st_size, f"mtime:{st.st_mtime_ns}")

    def read(self, uri, offset, length):
        try:
            with open(uri.local_path, "rb") as f:
                size = os.fstat(f.fileno()).st_size
                if offset + length > size:
                    raise RangeOutOfBounds(
                        f"range [{offset}, {offset + length}) exceeds size {size} of {uri}"
                    )
                f.seek(offset)
                data = f.read(length)
        except FileNotFoundError:
            raise NotFound(f"object not found: {uri}")
        except OSError as e:
            raise IoFailure(f"cannot read {uri}: {e}")
        if len(data) != length:
            raise IoFailure(f"short read from {uri}: wanted {length} bytes, got {len(data)}")
        return data


class HttpAdapter:
    """
    Ranged GETs against HTTP(S) objects.

    Transient failures (5xx, connection errors, timeouts) are retried with
    exponential backoff; 4xx responses fail immediately. A server that answers a
    Range request with 200 is rejected rather than silently downloading the
    whole object.
    """

    def __init__(self, attempts=RETRY_ATTEMPTS, backoff=RETRY_BACKOFF, timeout=REQUEST_TIMEOUT):
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self._local = threading.local()

    def _session(self):
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            retry = Retry(
                total=self.attempts - 1,
                connect=self.attempts - 1,
                read=self.attempts - 1,
                status=self.attempts - 1,
                backoff_factor=self.backoff,
                status_forcelist=RETRY_STATUSES,
                allowed_methods=frozenset(["GET", "HEAD"]),
                raise_on_status=False,
            )
            adapter = HTTPAdapter(max_retries=retry)
            session.mount("http://", adapter)
            session.mount("https://", adapter)
            self._local.session = session
        return session

    def _check_status(self, uri, response):
        if response.status_code == 404:
            raise NotFound(f"object not found: {uri}")
        if response.status_code == 416:
            raise RangeOutOfBounds(f"requested range not satisfiable for {uri}")
        if response.status_code >= 400:
            raise IoFailure(f"HTTP {response.status_code} from {uri}")

    def stat(self, uri):
        return self.head(uri).size

    def head(self, uri):
        try:
            response = self._session().head(uri.uri, timeout=self.timeout, allow_redirects=True)
        except requests.RequestException as e:
            raise IoFailure(f"HEAD {uri} failed: {e}")
        self._check_status(uri, response)
        length = response.headers.get("Content-Length")
        if length is None:
            raise IoFailure(f"HEAD {uri} returned no Content-Length")
        etag = response.headers.get("ETag")
        modified = response.headers.get("Last-Modified")
        version = f"etag:{etag}" if etag else (f"modified:{modified}" if modified else None)
        return ObjectInfo(int(length), version)

    def read(self, uri, offset, length):
        headers = {"Range": f"bytes={offset}-{offset + length - 1}"}
        logger.debug(f"GET {uri} {headers['Range']}")
        try:
            response = self._session().get(uri.uri, headers=headers, timeout=self.timeout)
        except requests.RequestException as e:
            raise IoFailure(f"GET {uri} failed: {e}")
        self._check_status(uri, response)
        if response.status_code == 200:
            raise HttpRangeUnsupported(f"{uri} ignored the Range header (HTTP 200)")
        if response.status_code != 206:
            raise IoFailure(f"unexpected HTTP {response.status_code} from {uri}")
        data = response.content
        if len(data) != length:
            raise IoFailure(f"short ranged read from {uri}: wanted {length} bytes, got {len(data)}")
        return data
