#!/usr/bin/env python3
"""
Unit tests for the catalog: versions, lineage, staleness and garbage collection.
"""

import os
import json
import shutil
import tempfile
import unittest

from dsfactory.catalog import Catalog, VersionRef, catalog_lock
from dsfactory.engine.operations import filter_rows, mutate, union
from dsfactory.engine.tests.base import CatalogTestCase
from dsfactory.errors import CatalogLocked, InvalidName, NonEmptyDir, NotFound
from dsfactory.utils import directory_digest


class TestVersionRef(unittest.TestCase):
    """Test cases for parsing version references."""

    def test_parse(self):
        """Test that bare, latest and numbered references parse."""
        self.assertEqual(VersionRef.parse("laion5b"), VersionRef("laion5b"))
        self.assertEqual(VersionRef.parse("laion5b.latest"), VersionRef("laion5b"))
        self.assertEqual(VersionRef.parse("most-similar.v12"), VersionRef("most-similar", 12))
        self.assertEqual(str(VersionRef("a", 3)), "a.v3")

    def test_invalid(self):
        """Test that malformed references raise InvalidName."""
        for text in ("", "9lives", "a.v0", "a.vx", "a b"):
            with self.assertRaises(InvalidName):
                VersionRef.parse(text)


class TestCatalogInit(unittest.TestCase):
    """Test cases for creating and opening catalogs."""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_fresh_directory(self):
        """Test that a new catalog starts empty."""
        catalog = Catalog.init(os.path.join(self.test_dir, "new"))
        self.assertEqual(catalog.names(), [])
        self.assertEqual(catalog.list_datasets(), [])

    def test_existing_catalog(self):
        """Test that initializing over an existing catalog raises NonEmptyDir."""
        root = os.path.join(self.test_dir, "new")
        Catalog.init(root)
        with self.assertRaises(NonEmptyDir):
            Catalog.init(root)

    def test_missing_catalog(self):
        """Test that opening a missing catalog raises NotFound."""
        with self.assertRaises(NotFound):
            Catalog(os.path.join(self.test_dir, "absent"))


class TestVersions(CatalogTestCase):
    """Test cases for saving and resolving dataset versions."""

    def test_save_resolve_and_idempotence(self):
        """Test that saving the same result twice keeps one version."""
        v1 = self.build_sizes("base", [1, 2])
        self.assertEqual(v1.ref, "base.v1")
        again = self.catalog.save(filter_rows(v1, "size > 1", ctx=self.ctx), "large")
        self.assertEqual(self.catalog.save(filter_rows(v1, "size > 1", ctx=self.ctx), "large"), again)
        self.assertEqual(self.catalog.versions("large"), [{"fingerprint": self.catalog.open(again).fingerprint,
                                                           "version": 1}])

    def test_new_version_and_latest(self):
        """Test that a changed result becomes the next version and the latest."""
        base = self.build_sizes("base", [1, 2, 3])
        self.catalog.save(filter_rows(base, "size > 1", ctx=self.ctx), "picked")
        v2 = self.catalog.save(filter_rows(base, "size > 2", ctx=self.ctx), "picked")
        self.assertEqual(v2, VersionRef("picked", 2))
        self.assertEqual(self.catalog.open("picked").version, 2)
        self.assertEqual(self.catalog.open("picked.latest").row_count, 1)
        self.assertEqual(self.catalog.open("picked.v1").row_count, 2)

    def test_not_found(self):
        """Test that unknown names and versions raise NotFound."""
        self.build_sizes("base", [1])
        with self.assertRaises(NotFound):
            self.catalog.open("nothing")
        with self.assertRaises(NotFound):
            self.catalog.open("base.v2")

    def test_copy_on_write_and_immutability(self):
        """Test that derived versions share unchanged columns and never alter their parents."""
        base = self.build_sizes("base", [10, 20])
        v1_dir = self.catalog.version_dir("base", 1)
        digest = directory_digest(v1_dir)
        derived = self.save(mutate(base, "big", "size * 1000", ctx=self.ctx), "derived")
        self.assertEqual(derived.column_path("size"), base.column_path("size"))
        self.assertFalse(os.path.exists(os.path.join(self.catalog.version_dir("derived", 1), "columns", "size.col")))
        self.build_sizes("base", [10, 20, 30])
        self.save(filter_rows(derived, "big > 10000", ctx=self.ctx), "bigger")
        self.assertEqual(directory_digest(v1_dir), digest)


class TestLineage(CatalogTestCase):
    """Test cases for dataset lineage logs."""

    def test_log_chain(self):
        """Test that the log names each version's operation and parent refs."""
        base = self.build_sizes("base", [500, 1500])
        large = self.save(filter_rows(base, "size > 1000", ctx=self.ctx), "large")
        self.save(mutate(large, "kb", "size / 1000", ctx=self.ctx), "scored")
        entries = self.catalog.log("scored")
        self.assertEqual(len(entries), 1)
        self.assertEqual(entries[0]["kind"], "mutate")
        self.assertEqual(entries[0]["parents"], [{"fingerprint": large.fingerprint, "ref": "large.v1"}])
        self.assertEqual(self.catalog.log("large")[0]["parents"][0]["ref"], "base.v1")
        self.assertEqual(self.catalog.log("base")[0]["parents"], [])

    def test_log_newest_first(self):
        """Test that versions are logged newest first."""
        base = self.build_sizes("base", [1, 2, 3])
        self.save(filter_rows(base, "size > 1", ctx=self.ctx), "picked")
        self.save(filter_rows(base, "size > 2", ctx=self.ctx), "picked")
        self.assertEqual([e["ref"] for e in self.catalog.log("picked")], ["picked.v2", "picked.v1"])

    def test_log_diamond(self):
        """Test that a union logs both of its parents."""
        base = self.build_sizes("base", [100, 900])
        small = self.save(filter_rows(base, "size < 500", ctx=self.ctx), "small")
        large = self.save(filter_rows(base, "size >= 500", ctx=self.ctx), "large")
        self.save(union(small, large, self.ctx), "joined")
        parents = {p["ref"] for p in self.catalog.log("joined")[0]["parents"]}
        self.assertEqual(parents, {"small.v1", "large.v1"})


class TestFindStale(CatalogTestCase):
    """Six-node diamond: base -> a, b; a -> c; b -> d; c + d -> e."""

    def setUp(self):
        super().setUp()
        self.base = self.build_sizes("base", [100, 200, 600, 900])
        a = self.save(filter_rows(self.base, "size < 500", ctx=self.ctx), "a")
        b = self.save(filter_rows(self.base, "size >= 500", ctx=self.ctx), "b")
        c = self.save(filter_rows(a, "size > 0", ctx=self.ctx), "c")
        d = self.save(filter_rows(b, "size > 0", ctx=self.ctx), "d")
        self.save(union(c, d, self.ctx), "e")
        self.children = {"base": ["a", "b"], "a": ["c"], "b": ["d"], "c": ["e"], "d": ["e"], "e": []}

    def descendants(self, name):
        found = set()
        stack = list(self.children[name])
        while stack:
            child = stack.pop()
            if child not in found:
                found.add(child)
                stack.extend(self.children[child])
        return found

    def stale_names(self, root=None):
        return [ref.name for ref in self.catalog.find_stale(root)]

    def test_nothing_stale(self):
        """Test that a freshly built graph has nothing stale."""
        self.assertEqual(self.stale_names(), [])

    def test_changed_branch(self):
        """Test that a new version of one branch marks only its descendants stale."""
        self.save(filter_rows(self.base, "size < 150", ctx=self.ctx), "a")
        stale = self.stale_names()
        self.assertEqual(set(stale), self.descendants("a"))
        self.assertEqual(stale, ["c", "e"])
        self.assertEqual(self.stale_names("b"), [])
        self.assertEqual(self.stale_names("c"), ["c", "e"])

    def test_direct_only(self):
        """Test that without propagation only datasets behind their own inputs are listed."""
        self.save(filter_rows(self.base, "size < 150", ctx=self.ctx), "a")
        self.assertEqual([r.name for r in self.catalog.find_stale(propagate=False)], ["c"])
        self.assertEqual([r.name for r in self.catalog.find_stale("b", propagate=False)], [])

    def test_changed_root(self):
        """Test that a new root version marks every descendant stale, parents first."""
        self.build_sizes("base", [100, 200, 600, 900, 1000])
        self.assertEqual(set(self.stale_names()), self.descendants("base"))
        self.assertEqual(self.stale_names()[:2], ["a", "b"])

    def test_unknown_root(self):
        """Test that an unknown root name is reported as not found."""
        with self.assertRaises(NotFound):
            self.catalog.find_stale("zzz")

    def test_name_derived_from_its_own_version(self):
        """Test that refining a name from its previous version is not a cycle."""
        refined = self.save(filter_rows(self.catalog.open("base"), "size > 150", ctx=self.ctx), "base")
        self.assertEqual(refined.parents, [self.base.fingerprint])
        stale = self.stale_names()
        self.assertEqual(stale, ["a", "b", "c", "d", "e"])
        self.assertEqual(self.stale_names("base"), stale)
        self.assertEqual(self.catalog.dependency_graph()[1]["base"], [])

    def test_name_cycle_through_superseded_version(self):
        """Test that a name-level cycle through an old version still orders parents first."""
        self.save(mutate(self.catalog.open("c"), "twice", "size * 2", ctx=self.ctx), "a")
        self.assertEqual(self.stale_names(), ["c", "a", "e"])


class TestGc(CatalogTestCase):
    """Test cases for garbage collection of versions."""

    def test_removes_unreferenced_versions(self):
        """Test that gc frees versions no latest version depends on."""
        base = self.build_sizes("base", [1, 2])
        old_dir = self.catalog.version_dir("base", 1)
        newer = self.build_sizes("base", [1, 2, 3])
        derived = self.save(mutate(newer, "twice", "size * 2", ctx=self.ctx), "derived")

        freed = self.catalog.gc()
        self.assertGreater(freed, 0)
        self.assertFalse(os.path.exists(old_dir))
        with self.assertRaises(NotFound):
            self.catalog.open(base.ref)
        self.assertEqual(self.catalog.open("derived").column("size").to_pylist(), [1, 2, 3])
        self.assertEqual(derived.fingerprint, self.catalog.open("derived").fingerprint)
        self.assertEqual(self.catalog.gc(), 0)

    def test_keep_retains_ancestors(self):
        """Test that gc with a keep list retains the kept datasets and their ancestors."""
        base = self.build_sizes("base", [1, 2, 3])
        picked = self.save(filter_rows(base, "size > 1", ctx=self.ctx), "picked")
        self.save(mutate(picked, "twice", "size * 2", ctx=self.ctx), "doubled")
        self.save(mutate(base, "neg", "0 - size", ctx=self.ctx), "negated")
        self.catalog.gc(keep=["doubled"])
        self.assertEqual(self.catalog.names(), ["base", "doubled", "picked"])
        self.assertEqual(self.catalog.open("doubled").column("twice").to_pylist(), [4, 6])


class TestLock(CatalogTestCase):
    """Test cases for the single-writer catalog lock."""

    def test_held_lock_times_out(self):
        """Test that a second writer times out with CatalogLocked."""
        base = self.build_sizes("base", [1, 2])
        staged = filter_rows(base, "size > 1", ctx=self.ctx)
        waiting = Catalog(self.catalog.root, lock_timeout=0.2)
        with catalog_lock(self.catalog.root):
            with self.assertRaises(CatalogLocked):
                waiting.save(staged, "large")
        self.assertEqual(waiting.save(staged, "large"), VersionRef("large", 1))

    def test_stale_lock_removed(self):
        """Test that a lock left by a dead process is removed."""
        with open(os.path.join(self.catalog.root, ".lock"), "w", encoding="utf-8") as f:
            json.dump({"pid": 2 ** 22 + 12345, "acquired_at": "2020-01-01T00:00:00Z"}, f)
        self.build_sizes("base", [1])
        self.assertFalse(os.path.exists(os.path.join(self.catalog.root, ".lock")))


if __name__ == "__main__":
    unittest.main()
