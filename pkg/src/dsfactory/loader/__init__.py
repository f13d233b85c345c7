"""
Loader Module

Deterministic, shardable export manifests and the data loader that iterates
them through the sample cache.
"""

from dsfactory.loader.export import (
    ExportHeader,
    ExportRow,
    build_export,
    export_bytes,
    export_order,
    read_export,
    shard,
    write_export,
)
from dsfactory.loader.loader import SampleLoader, fetch_to_dir

__all__ = [
    "ExportHeader", "ExportRow", "build_export", "export_bytes", "export_order",
    "read_export", "shard", "write_export", "SampleLoader", "fetch_to_dir",
]
