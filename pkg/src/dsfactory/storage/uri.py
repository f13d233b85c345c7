"""
Source URIs, byte ranges and request accounting.
"""

import os
import threading
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from dsfactory.errors import InvalidUri, SchemeUnsupported

SUPPORTED_SCHEMES = ("file", "http", "https")
MAX_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class SourceUri:
    """An absolute, normalized location of a sample source."""

    scheme: str
    location: str

    def __str__(self):
        if self.scheme == "file":
            return Path(self.location).as_uri()
        return self.location

    @property
    def uri(self):
        return str(self)

    @property
    def local_path(self):
        if self.scheme != "file":
            raise SchemeUnsupported(f"{self.uri} is not a local file")
        return self.location


def parse_uri(value):
    """
    Parse and normalize a source URI.

    Plain filesystem paths are accepted and turned into absolute file URIs.

    Args:
        value (str | SourceUri | os.PathLike): URI or path

    Returns:
        SourceUri: Normalized URI
    """
    if isinstance(value, SourceUri):
        return value
    text = os.fspath(value)
    if "://" not in text:
        return SourceUri("file", str(Path(text).resolve()))

    parsed = urllib.parse.urlsplit(text)
    scheme = parsed.scheme.lower()
    if scheme not in SUPPORTED_SCHEMES:
        raise SchemeUnsupported(f"unsupported URI scheme '{scheme}' in {text}")

    if scheme == "file":
        if parsed.query or parsed.fragment:
            raise InvalidUri(f"file URIs may not carry a query or fragment: {text}")
        if parsed.netloc not in ("", "localhost"):
            raise InvalidUri(f"file URIs must not name a remote host: {text}")
        path = urllib.request.url2pathname(parsed.path)
        if not os.path.isabs(path):
            raise InvalidUri(f"file URI is not absolute: {text}")
        return SourceUri("file", os.path.normpath(path))

    if not parsed.netloc:
        raise InvalidUri(f"HTTP URI has no host: {text}")
    return SourceUri(scheme, urllib.parse.urlunsplit((scheme, parsed.netloc, parsed.path or "/", parsed.query, "")))


class ByteRange(NamedTuple):
    """A half-open byte interval [offset, offset + length)."""

    offset: int
    length: int

    @property
    def end(self):
        return self.offset + self.length

    @classmethod
    def checked(cls, offset, length):
        """
        Build a range, validating its invariants.

        Args:
            offset (int): Start offset in bytes
            length (int): Number of bytes, at least 1

        Returns:
            ByteRange: Validated range
        """
        offset = int(offset)
        length = int(length)
        if offset < 0 or length <= 0:
            raise ValueError(f"invalid byte range offset={offset} length={length}")
        if offset + length > MAX_U64:
            raise ValueError(f"byte range overflows u64: offset={offset} length={length}")
        return cls(offset, length)


@dataclass
class RequestStats:
    """GET accounting for one storage session. Updates are atomic."""

    get_count: int = 0
    bytes_fetched: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, nbytes):
        with self._lock:
            self.get_count += 1
            self.bytes_fetched += nbytes

    def snapshot(self):
        with self._lock:
            return {"get_count": self.get_count, "bytes_fetched": self.bytes_fetched}

    def reset(self):
        with self._lock:
            self.get_count = 0
            self.bytes_fetched = 0
