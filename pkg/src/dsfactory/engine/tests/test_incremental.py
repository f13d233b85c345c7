#!/usr/bin/env python3
"""
Unit tests for incremental re-application of row-local stages.
"""

import os
import itertools
import unittest

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dsfactory.archive.fixtures import write_sidecar_jsonl, write_tar
from dsfactory.engine.etl import etl_build
from dsfactory.engine.operations import (
    AddSignalsStage,
    FilterStage,
    MutateStage,
    add_signals,
    apply_stage,
    incremental_apply,
    order_limit,
)
from dsfactory.engine.tests.base import CatalogTestCase, echo_spec, jsonable_rows
from dsfactory.engine.udf import builtin_spec
from dsfactory.errors import DescriptorMismatch, NotRowLocal

POOL = 10


class TestIncrementalApply(CatalogTestCase):
    """Test cases for recomputing row-local stages on a new parent."""

    def setUp(self):
        super().setUp()
        self.names = itertools.count()
        self.sources = {}

    def source(self, i, size):
        """One single-member archive per sample, so uids do not depend on the subset."""
        if (i, size) not in self.sources:
            tar = os.path.join(self.data_dir, f"s{i:02d}.tar")
            if not os.path.exists(tar):
                write_tar(tar, [(f"s{i:02d}.jpg", bytes([i]) * (16 + i))])
            sidecar = write_sidecar_jsonl(os.path.join(self.data_dir, f"s{i:02d}-{size}.jsonl"),
                                          [{"key": f"s{i:02d}", "size": size}])
            self.sources[(i, size)] = (tar, sidecar)
        return self.sources[(i, size)]

    def parent(self, members):
        """members: {index: size}"""
        staged = etl_build([self.source(i, s) for i, s in sorted(members.items())], "jsonl", self.storage)
        return self.save(staged, f"parent{next(self.names)}")

    def stage(self, kind, schema, udf=None):
        if kind == "filter":
            return FilterStage("size > 300", schema)
        if kind == "mutate":
            return MutateStage("doubled", "size * 2", schema)
        return AddSignalsStage(udf or builtin_spec("byte_len"), schema)

    def test_unchanged_parent_needs_no_udf_rows(self):
        """Test that an unchanged parent needs no UDF rows."""
        parent = self.parent({i: 100 * i for i in range(4)})
        stage = self.stage("add_signals", parent.schema)
        old_output = self.save(apply_stage(stage, parent, self.ctx), "signals")
        staged = incremental_apply(stage, parent, parent, old_output, self.ctx)
        self.assertEqual(staged.stats.udf_rows, 0)
        self.assertEqual(staged.stats.rows_processed, 0)
        self.assertEqual(staged.fingerprint, old_output.fingerprint)
        self.assertEqual(staged.columns["byte_len"].to_pylist(), old_output.column("byte_len").to_pylist())

    def test_one_added_sample_runs_one_udf_row(self):
        """Test that one added sample costs one UDF row."""
        count_file = os.path.join(self.test_dir, "udf-rows.txt")
        udf = echo_spec("--count-file", count_file)
        old_parent = self.parent({i: 10 for i in range(5)})
        stage = self.stage("add_signals", old_parent.schema, udf)
        old_output = self.save(apply_stage(stage, old_parent, self.ctx), "signals")
        os.remove(count_file)

        new_parent = self.parent({i: 10 for i in range(6)})
        staged = incremental_apply(stage, old_parent, new_parent, old_output, self.ctx)
        self.assertEqual(staged.stats.udf_rows, 1)
        with open(count_file, "r", encoding="ascii") as f:
            self.assertEqual(sum(int(line) for line in f), 1)
        full = apply_stage(stage, new_parent, self.ctx)
        self.assertEqual(staged.columns["n_bytes"].to_pylist(), full.columns["n_bytes"].to_pylist())

    def test_changed_input_column_is_recomputed(self):
        """Test that a row whose input column changed is recomputed."""
        old_parent = self.parent({0: 100, 1: 500})
        stage = self.stage("mutate", old_parent.schema)
        old_output = self.save(apply_stage(stage, old_parent, self.ctx), "doubled")
        new_parent = self.parent({0: 100, 1: 700})
        staged = incremental_apply(stage, old_parent, new_parent, old_output, self.ctx)
        self.assertEqual(staged.stats.rows_processed, 1)
        self.assertEqual(staged.columns["doubled"].to_pylist(), [200, 1400])

    def test_descriptor_input(self):
        """Test that a stored descriptor can drive the incremental run."""
        old_parent = self.parent({0: 100, 1: 500})
        old_output = self.save(apply_stage(self.stage("filter", old_parent.schema), old_parent, self.ctx), "large")
        new_parent = self.parent({0: 100, 1: 500, 2: 900})
        staged = incremental_apply(old_output.operation, old_parent, new_parent, old_output, self.ctx)
        self.assertEqual(staged.row_count, 2)
        self.assertEqual(staged.stats.rows_processed, 1)

    def test_global_stage_rejected(self):
        """Test that order_limit cannot run incrementally."""
        parent = self.parent({0: 1, 1: 2})
        sorted_output = self.save(order_limit(parent, "size", ctx=self.ctx), "sorted")
        with self.assertRaises(NotRowLocal):
            incremental_apply(sorted_output.operation, parent, parent, sorted_output, self.ctx)

    def test_descriptor_mismatch(self):
        """Test that an output from a different stage is rejected."""
        parent = self.parent({0: 1, 1: 2})
        other = self.parent({0: 1, 1: 2, 2: 3})
        stage = self.stage("mutate", parent.schema)
        old_output = self.save(add_signals(parent, builtin_spec("byte_len"), self.ctx), "signals")
        with self.assertRaises(DescriptorMismatch):
            incremental_apply(stage, parent, other, old_output, self.ctx)
        doubled = self.save(apply_stage(stage, parent, self.ctx), "doubled")
        with self.assertRaises(DescriptorMismatch):
            incremental_apply(stage, other, parent, doubled, self.ctx)

    @given(
        kind=st.sampled_from(["filter", "mutate", "add_signals"]),
        old=st.dictionaries(st.integers(0, POOL - 1), st.sampled_from([100, 400]), min_size=1),
        new=st.dictionaries(st.integers(0, POOL - 1), st.sampled_from([100, 400]), min_size=1),
    )
    @settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_equals_full_recompute(self, kind, old, new):
        """Test that the incremental result equals a full recomputation."""
        old_parent = self.parent(old)
        new_parent = self.parent(new)
        stage = self.stage(kind, old_parent.schema)
        old_output = self.save(apply_stage(stage, old_parent, self.ctx), f"out{next(self.names)}")

        incremental = incremental_apply(stage, old_parent, new_parent, old_output, self.ctx)
        full = apply_stage(stage, new_parent, self.ctx)
        self.assertEqual(incremental.fingerprint, full.fingerprint)
        self.assertEqual(incremental.row_count, full.row_count)
        self.assertEqual(
            jsonable_rows(self.save(incremental, f"inc{next(self.names)}")),
            jsonable_rows(self.save(full, f"full{next(self.names)}")),
        )
        if kind == "add_signals":
            unchanged = [i for i in new if i in old]
        else:
            unchanged = [i for i in new if i in old and old[i] == new[i]]
        self.assertEqual(incremental.stats.rows_processed, len(new) - len(unchanged))


if __name__ == "__main__":
    unittest.main()
