"""
Read-only handle on one saved dataset version.
"""

import os
import logging
import threading

from dsfactory.errors import Missing, UnknownColumn
from dsfactory.table.column import decode_column
from dsfactory.table.frame import SampleRef
from dsfactory.table.schema import REF_COLUMNS, UID_COLUMN

logger = logging.getLogger(__name__)


class Dataset:
    """
    A saved dataset version whose column files are decoded on first use.

    Column paths are relative to the catalog root, so a version may reference
    files that live in an ancestor's directory.
    """

    def __init__(self, root, manifest):
        self.root = root
        self.manifest = manifest
        self._columns = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"Dataset({self.ref}, rows={self.row_count})"

    @property
    def name(self):
        return self.manifest.name

    @property
    def version(self):
        return self.manifest.version

    @property
    def ref(self):
        return self.manifest.ref

    @property
    def fingerprint(self):
        return self.manifest.fingerprint

    @property
    def schema(self):
        return self.manifest.dataset_schema

    @property
    def row_count(self):
        return self.manifest.row_count

    @property
    def parents(self):
        return list(self.manifest.parents)

    @property
    def operation(self):
        return self.manifest.operation

    def column_path(self, name):
        if name not in self.manifest.column_files:
            raise UnknownColumn(f"{self.ref} has no column '{name}'")
        return self.manifest.column_files[name]

    def column_file(self, name):
        """Absolute path of a column's file."""
        return os.path.join(self.root, *self.column_path(name).split("/"))

    def column(self, name):
        """
        Get one column, decoding its file on first access.

        Args:
            name (str): Column name

        Returns:
            ColumnVector: Decoded column
        """
        with self._lock:
            if name in self._columns:
                return self._columns[name]
            path = self.column_file(name)
            try:
                with open(path, "rb") as f:
                    data = f.read()
            except FileNotFoundError:
                raise Missing(f"column file {path} of {self.ref} is missing")
            column = decode_column(data)
            if len(column) != self.row_count:
                raise Missing(f"column file {path} holds {len(column)} rows, {self.ref} has {self.row_count}")
            self._columns[name] = column
            logger.debug(f"Decoded column {name} of {self.ref} ({len(data)} bytes)")
            return column

    def uids(self):
        return self.column(UID_COLUMN).to_pylist()

    def refs(self):
        lists = [self.column(n).to_pylist() for n in REF_COLUMNS]
        return [SampleRef(*values) for values in zip(*lists)]

    def rows(self, names=None):
        """Iterate rows as dicts of Python values."""
        names = names if names is not None else self.schema.names
        columns = [(n, self.column(n)) for n in names]
        for i in range(self.row_count):
            yield {n: c.value(i) for n, c in columns}
