"""
Shared setup for tests that need a catalog with small datasets in it.
"""

import os
import sys
import shutil
import tempfile
import unittest

from dsfactory.archive.fixtures import write_sidecar_jsonl, write_tar
from dsfactory.catalog import Catalog
from dsfactory.engine.context import ExecutionContext
from dsfactory.engine.etl import etl_build
from dsfactory.engine.udf import OutputColumn, UdfSpec
from dsfactory.storage import Storage

ECHO_UDF = os.path.join(os.path.dirname(os.path.abspath(__file__)), "echo_udf.py")


def echo_spec(*flags, outputs=("n_bytes:int64",), batch_size=8, udf_id="echo"):
    return UdfSpec(
        udf_id=udf_id,
        mode="subprocess",
        command=[sys.executable, ECHO_UDF, *flags],
        outputs=[OutputColumn.parse(text) for text in outputs],
        batch_size=batch_size,
    )


def jsonable_rows(dataset):
    columns = [(n, dataset.column(n)) for n in dataset.schema.names]
    return [{n: c.to_jsonable(i) for n, c in columns} for i in range(dataset.row_count)]


class CatalogTestCase(unittest.TestCase):
    """A fresh catalog, storage session and execution context per test."""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.data_dir = os.path.join(self.test_dir, "data")
        os.makedirs(self.data_dir)
        self.catalog = Catalog.init(os.path.join(self.test_dir, "catalog"))
        self.storage = Storage()
        self.ctx = ExecutionContext(storage=self.storage)

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def write_source(self, stem, members, rows):
        tar = write_tar(os.path.join(self.data_dir, f"{stem}.tar"), members)
        sidecar = write_sidecar_jsonl(os.path.join(self.data_dir, f"{stem}.jsonl"), rows)
        return tar, sidecar

    def build(self, name, members, rows, stem=None):
        """Save an ETL dataset of one archive and return its handle."""
        source = self.write_source(stem or name, members, rows)
        return self.save(etl_build([source], "jsonl", self.storage), name)

    def build_sizes(self, name, sizes, fill=b"\x07"):
        members = [(f"m{i:03d}.jpg", fill * 8) for i in range(len(sizes))]
        rows = [{"key": f"m{i:03d}", "size": s} for i, s in enumerate(sizes) if s is not None]
        return self.build(name, members, rows)

    def save(self, staged, name):
        return self.catalog.open(self.catalog.save(staged, name))
