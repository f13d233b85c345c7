"""
Sample pointers and in-memory tables.
"""

from typing import NamedTuple

from dsfactory.errors import InvariantViolation
from dsfactory.table.column import ColumnVector
from dsfactory.table.schema import (
    REF_LENGTH,
    REF_MEMBER_PATH,
    REF_OFFSET,
    REF_SOURCE_URI,
    UID_COLUMN,
    INT64,
    UTF8,
    Schema,
)
from dsfactory.utils import sha256_hex


class SampleRef(NamedTuple):
    """Pointer to one sample's bytes inside a storage object."""

    source_uri: str
    member_path: str
    offset: int
    length: int


def uid(ref):
    """
    Stable identity of a sample pointer.

    SHA-256 over source_uri NUL member_path NUL decimal(offset) NUL decimal(length).

    Args:
        ref (SampleRef): Sample pointer

    Returns:
        str: Lowercase hex digest
    """
    return sha256_hex(
        f"{ref.source_uri}\x00{ref.member_path}\x00{int(ref.offset)}\x00{int(ref.length)}"
    )


class Table:
    """An in-memory dataset: a schema plus one equally long column per field."""

    def __init__(self, schema, columns):
        self.schema = schema
        self.columns = dict(columns)
        missing = [n for n in schema.names if n not in self.columns]
        if missing:
            raise InvariantViolation(f"table is missing columns {missing}")
        counts = {len(self.columns[n]) for n in schema.names}
        if len(counts) > 1:
            raise InvariantViolation(f"columns have unequal row counts {sorted(counts)}")
        self.row_count = counts.pop() if counts else 0

    def rows(self, names=None):
        names = names if names is not None else self.schema.names
        cols = [(n, self.columns[n]) for n in names]
        for i in range(self.row_count):
            yield {n: c.value(i) for n, c in cols}

    @classmethod
    def from_refs(cls, refs, attributes=(), attribute_columns=None):
        """
        Build a table from sample pointers plus attribute columns.

        Args:
            refs (list[SampleRef]): Sample pointers in row order
            attributes (list[Field]): Attribute fields
            attribute_columns (dict): Attribute name -> ColumnVector

        Returns:
            Table: New table with `_uid` and `_ref.*` columns filled in
        """
        schema = Schema.for_samples(attributes)
        columns = {
            UID_COLUMN: ColumnVector.from_pylist(UTF8, [uid(r) for r in refs], nullable=False),
            REF_SOURCE_URI: ColumnVector.from_pylist(UTF8, [r.source_uri for r in refs], nullable=False),
            REF_MEMBER_PATH: ColumnVector.from_pylist(UTF8, [r.member_path for r in refs], nullable=False),
            REF_OFFSET: ColumnVector.from_pylist(INT64, [r.offset for r in refs], nullable=False),
            REF_LENGTH: ColumnVector.from_pylist(INT64, [r.length for r in refs], nullable=False),
        }
        columns.update(attribute_columns or {})
        return cls(schema, columns)
