"""
Storage Module

Uniform byte-range access to sample sources (local files and HTTP objects) with
per-request accounting and range coalescing.
"""

from dsfactory.storage.uri import SourceUri, ByteRange, RequestStats, parse_uri
from dsfactory.storage.adapters import ObjectInfo
from dsfactory.storage.storage import Storage, plan_coalesced

__all__ = ["SourceUri", "ByteRange", "RequestStats", "ObjectInfo", "parse_uri", "Storage", "plan_coalesced"]
