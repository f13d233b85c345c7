"""
Table Module

The dataset-as-table data model: typed nullable columns, the binary column file
codec, and the dataset manifest document.
"""

from dsfactory.table.schema import ColumnType, Field, Schema
from dsfactory.table.column import ColumnVector, encode_column, decode_column
from dsfactory.table.frame import SampleRef, Table, uid
from dsfactory.table.manifest import DatasetManifest, read_manifest, write_manifest

__all__ = [
    "ColumnType", "Field", "Schema",
    "ColumnVector", "encode_column", "decode_column",
    "SampleRef", "Table", "uid",
    "DatasetManifest", "read_manifest", "write_manifest",
]
