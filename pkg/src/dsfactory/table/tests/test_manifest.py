#!/usr/bin/env python3
"""
Unit tests for dataset manifests and schemas.
"""

import os
import json
import shutil
import tempfile
import unittest

from dsfactory.engine.descriptor import OperationDescriptor, SourceSpec
from dsfactory.errors import Corrupt, Missing
from dsfactory.table import ColumnType, DatasetManifest, Field, Schema, read_manifest, write_manifest
from dsfactory.table.schema import INT64, fvec


def sample_manifest(**overrides):
    values = dict(
        name="laion5b",
        version=1,
        fingerprint="ab" * 32,
        schema=Schema.for_samples([Field(name="size", type=INT64), Field(name="embed", type=fvec(4))]),
        row_count=2,
        column_files={"_uid": "datasets/laion5b/v1/columns/_uid.col"},
        parents=[],
        operation=OperationDescriptor(
            kind="etl",
            sources=[SourceSpec(archive="file:///d/a.tar", archive_size=2048, sidecar="file:///d/a.jsonl",
                                sidecar_size=40)],
        ),
        created_at="2024-01-01T00:00:00Z",
    )
    values.update(overrides)
    return DatasetManifest(**values)


class TestManifest(unittest.TestCase):
    """Test cases for manifest serialization."""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_round_trip(self):
        """Test that a manifest reads back equal to what was written."""
        manifest = sample_manifest()
        write_manifest(manifest, self.test_dir)
        self.assertEqual(read_manifest(self.test_dir), manifest)

    def test_canonical_bytes(self):
        """Test that manifests are written as canonical JSON."""
        data = sample_manifest().to_bytes()
        doc = json.loads(data)
        self.assertEqual(data, json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode())
        self.assertIn(b'"schema":', data)
        self.assertNotIn(b" ", data.replace(b"file:///", b""))

    def test_equal_manifests_equal_bytes(self):
        """Test that equal manifests serialize to equal bytes."""
        self.assertEqual(sample_manifest().to_bytes(), sample_manifest().to_bytes())

    def test_hand_edited_manifest_accepted(self):
        """Test that a reformatted manifest still loads."""
        doc = json.loads(sample_manifest().to_bytes())
        with open(os.path.join(self.test_dir, "manifest.json"), "w", encoding="utf-8") as f:
            f.write(json.dumps(dict(reversed(list(doc.items()))), indent=4))
        manifest = read_manifest(self.test_dir)
        self.assertEqual(manifest, sample_manifest())
        write_manifest(manifest, self.test_dir)
        with open(os.path.join(self.test_dir, "manifest.json"), "rb") as f:
            self.assertEqual(f.read(), sample_manifest().to_bytes())

    def test_missing(self):
        """Test that a missing manifest raises NotFound."""
        with self.assertRaises(Missing):
            read_manifest(self.test_dir)

    def test_corrupt(self):
        """Test that an unreadable manifest raises Corrupt."""
        with open(os.path.join(self.test_dir, "manifest.json"), "wb") as f:
            f.write(b"{not json")
        with self.assertRaises(Corrupt):
            read_manifest(self.test_dir)

    def test_version_must_be_positive(self):
        """Test that version 0 is rejected."""
        with self.assertRaises(ValueError):
            sample_manifest(version=0)

    def test_ref(self):
        """Test that a manifest's ref joins name and version."""
        self.assertEqual(sample_manifest(version=3).ref, "laion5b.v3")


class TestSchema(unittest.TestCase):
    """Test cases for column types and schemas."""

    def test_parse_types(self):
        """Test that type names parse, including vector dimensions."""
        self.assertEqual(ColumnType.parse("fvec:64"), fvec(64))
        self.assertEqual(ColumnType.parse("fvec(8)"), fvec(8))
        self.assertEqual(ColumnType.parse("int64"), INT64)
        self.assertEqual(str(fvec(3)), "fvec(3)")

    def test_dim_only_for_fvec(self):
        """Test that only vector types carry a dimension."""
        with self.assertRaises(ValueError):
            ColumnType(tag="int64", dim=3)
        with self.assertRaises(ValueError):
            ColumnType(tag="fvec", dim=0)

    def test_reserved_columns_required(self):
        """Test that schemas must contain the reserved columns."""
        with self.assertRaises(ValueError):
            Schema([Field(name="size", type=INT64)])

    def test_duplicate_names(self):
        """Test that duplicate field names are rejected."""
        with self.assertRaises(ValueError):
            Schema.for_samples([Field(name="a", type=INT64), Field(name="a", type=INT64)])

    def test_invalid_name(self):
        """Test that invalid field names are rejected."""
        with self.assertRaises(ValueError):
            Schema.for_samples([Field(name="1bad", type=INT64)])

    def test_attribute_fields(self):
        """Test that attribute fields exclude the reserved columns."""
        schema = Schema.for_samples([Field(name="size", type=INT64)])
        self.assertEqual([f.name for f in schema.attribute_fields], ["size"])
        self.assertEqual(schema.type_of("size"), INT64)
        self.assertIsNone(schema.type_of("nope"))


if __name__ == "__main__":
    unittest.main()
