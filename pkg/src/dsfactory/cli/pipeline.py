#!/usr/bin/env python3
"""
Pipeline Files

A pipeline is a JSON document of ordered stages, each saved under a name:

    {
      "pipeline_version": 1,
      "stages": [
        {"save_as": "laion5b", "op": "etl", "format": "jsonl",
         "sources": [{"archive": "shard-00000.tar", "sidecar": "shard-00000.jsonl"}]},
        {"save_as": "large", "op": "filter", "inputs": ["laion5b"], "expr": "size > 1000"},
        {"save_as": "embedded", "op": "add_signals", "inputs": ["large"], "udf": {"id": "hist_embed"}},
        {"save_as": "scored", "op": "mutate", "inputs": ["embedded"], "column": "dist",
         "expr": "cos_dist(embed, @target)", "params": {"target": "@target.json"}},
        {"save_as": "most-similar", "op": "order_limit", "inputs": ["scored"], "key": "dist", "limit": 500}
      ]
    }

Running a pipeline executes only the stages whose output is missing or out of
date. Row-local stages with an earlier output are applied incrementally.
"""

import os
import json
import logging
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dsfactory.catalog import VersionRef, validate_name
from dsfactory.engine.descriptor import OperationDescriptor
from dsfactory.engine.etl import describe_sources, etl_build
from dsfactory.engine.operations import (
    AddSignalsStage,
    FilterStage,
    MutateStage,
    apply_stage,
    incremental_apply,
    order_limit,
    union,
)
from dsfactory.engine.udf import OutputColumn, UdfSpec, builtin_spec
from dsfactory.errors import BadPipeline, DatasetFactoryError, NotFound
from dsfactory.expr.params import coerce_param, load_param_file

logger = logging.getLogger(__name__)

STAGE_INPUTS = {"etl": 0, "filter": 1, "mutate": 1, "add_signals": 1, "order_limit": 1, "union": 2}


class SourceEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    archive: str
    sidecar: Optional[str] = None


class UdfEntry(BaseModel):
    """A builtin UDF by id, or a subprocess UDF when `command` is given."""

    model_config = ConfigDict(extra="forbid")

    id: str
    version: str = "1"
    command: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    output: Optional[str] = None
    needs_sample_bytes: bool = True
    input_columns: List[str] = Field(default_factory=list)
    batch_size: Optional[int] = Field(default=None, ge=1)

    def to_spec(self, default_batch_size):
        batch_size = self.batch_size or default_batch_size
        if not self.command:
            spec = builtin_spec(self.id, output_name=self.output, batch_size=batch_size)
            return UdfSpec(**{**spec.model_dump(), "udf_version": self.version})
        return UdfSpec(
            udf_id=self.id,
            udf_version=self.version,
            mode="subprocess",
            command=self.command,
            outputs=[OutputColumn.parse(text) for text in self.outputs],
            needs_sample_bytes=self.needs_sample_bytes,
            input_columns=self.input_columns,
            batch_size=batch_size,
        )


class PipelineStage(BaseModel):
    model_config = ConfigDict(extra="forbid")

    save_as: str
    op: Literal["etl", "filter", "mutate", "add_signals", "order_limit", "union"]
    inputs: List[str] = Field(default_factory=list)
    expr: Optional[str] = None
    column: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    udf: Optional[UdfEntry] = None
    key: Optional[str] = None
    descending: bool = False
    limit: Optional[int] = Field(default=None, ge=0)
    sources: List[SourceEntry] = Field(default_factory=list)
    format: Literal["jsonl", "csv", "in-archive"] = "jsonl"
    coerce_text: bool = False

    @model_validator(mode="after")
    def _check_fields(self):
        if len(self.inputs) != STAGE_INPUTS[self.op]:
            raise ValueError(f"{self.op} stage '{self.save_as}' needs {STAGE_INPUTS[self.op]} inputs")
        required = {
            "etl": ["sources"],
            "filter": ["expr"],
            "mutate": ["expr", "column"],
            "add_signals": ["udf"],
            "order_limit": ["key"],
            "union": [],
        }[self.op]
        missing = [name for name in required if not getattr(self, name)]
        if missing:
            raise ValueError(f"{self.op} stage '{self.save_as}' is missing {', '.join(missing)}")
        return self


class Pipeline(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pipeline_version: Literal[1]
    stages: List[PipelineStage]

    @model_validator(mode="after")
    def _check_names(self):
        names = [s.save_as for s in self.stages]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"stage names must be unique, repeated: {', '.join(duplicates)}")
        return self


class StageReport(BaseModel):
    stage: str
    op: str
    status: Literal["executed", "incremental", "skipped", "failed", "blocked"]
    ref: Optional[str] = None
    rows_out: Optional[int] = None
    rows_processed: int = 0
    udf_rows: int = 0
    get_count: int = 0
    error: Optional[str] = None


def load_pipeline(path):
    """
    Read and validate a pipeline file.

    Args:
        path (str): JSON pipeline file

    Returns:
        Pipeline: Validated pipeline
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except FileNotFoundError:
        raise NotFound(f"pipeline file {path} does not exist")
    except json.JSONDecodeError as e:
        raise BadPipeline(f"pipeline file {path} is not valid JSON: {e}")
    try:
        pipeline = Pipeline.model_validate(document)
    except ValidationError as e:
        raise BadPipeline(f"invalid pipeline {path}: {e}")
    for stage in pipeline.stages:
        validate_name(stage.save_as)
    return pipeline


def resolve_params(params, base_dir):
    """Bind pipeline parameter values; text starting with `@` names a JSON file."""
    bound = {}
    for name, value in params.items():
        if isinstance(value, str) and value.startswith("@"):
            bound[name] = load_param_file(value[1:], base_dir)
        else:
            bound[name] = coerce_param(name, value)
    return bound


class PipelineRunner:
    """
    Executes a pipeline against a catalog.

    Args:
        catalog (Catalog): Target catalog
        ctx (ExecutionContext): Execution settings
        base_dir (str): Directory relative paths in the pipeline resolve against
        force (bool): Recompute every stage in full
    """

    def __init__(self, catalog, ctx, base_dir=".", force=False):
        self.catalog = catalog
        self.ctx = ctx
        self.base_dir = base_dir
        self.force = force

    def _path(self, value):
        if value is None or "://" in value or os.path.isabs(value):
            return value
        return os.path.join(self.base_dir, value)

    def _latest(self, name):
        try:
            return self.catalog.open(VersionRef(name))
        except NotFound:
            return None

    def _plan(self, stage, inputs):
        """Build the stage's descriptor and a runner for it."""
        ctx = self.ctx
        if stage.op == "etl":
            sources = [(self._path(s.archive), self._path(s.sidecar)) for s in stage.sources]
            descriptor = describe_sources(sources, stage.format, ctx.storage, stage.coerce_text)
            return descriptor, lambda prior: etl_build(sources, stage.format, ctx.storage, stage.coerce_text)

        if stage.op in ("filter", "mutate", "add_signals"):
            parent = inputs[0]
            if stage.op == "filter":
                op = FilterStage(stage.expr, parent.schema, resolve_params(stage.params, self.base_dir))
            elif stage.op == "mutate":
                op = MutateStage(stage.column, stage.expr, parent.schema, resolve_params(stage.params, self.base_dir))
            else:
                op = AddSignalsStage(stage.udf.to_spec(ctx.batch_size), parent.schema)

            def run(prior):
                if prior is not None and not self.force and prior.operation == op.descriptor:
                    try:
                        old_parent = self.catalog.open_fingerprint(prior.parents[0])
                    except NotFound:
                        old_parent = None
                    if old_parent is not None:
                        return incremental_apply(op, old_parent, parent, prior, ctx), True
                return apply_stage(op, parent, ctx), False

            return op.descriptor, run

        if stage.op == "order_limit":
            parent = inputs[0]
            descriptor = OperationDescriptor(
                kind="order_limit", order_key=stage.key, descending=stage.descending, limit=stage.limit
            )
            return descriptor, lambda prior: order_limit(
                parent, stage.key, stage.descending, stage.limit, ctx
            )

        a, b = inputs
        descriptor = OperationDescriptor(kind="union", params={"left": a.name, "right": b.name})
        return descriptor, lambda prior: union(a, b, ctx)

    def _up_to_date(self, stage, inputs, descriptor, prior):
        """
        Whether the latest saved version of the stage can be reused.

        ETL stages compare source descriptions. Other stages must have been
        built by the same definition from the same input names, and then the
        catalog decides: the saved version is reused unless `find_stale` finds
        it behind its inputs, the same test `df stale` reports. Inputs pinned
        to a version are compared by fingerprint instead.
        """
        if prior is None or self.force or prior.operation != descriptor:
            return False
        if stage.op == "etl":
            return not prior.parents
        if any(VersionRef.parse(ref).version is not None for ref in stage.inputs):
            return sorted(prior.parents) == sorted(d.fingerprint for d in inputs)
        built_from = [self.catalog.locate(p) for p in prior.parents]
        if None in built_from or sorted(r.name for r in built_from) != sorted(d.name for d in inputs):
            return False
        stale = self.catalog.find_stale(prior.name, propagate=False)
        return prior.name not in {ref.name for ref in stale}

    def run_stage(self, stage, outputs):
        inputs = []
        for ref in stage.inputs:
            if ref in outputs:
                inputs.append(outputs[ref])
            else:
                inputs.append(self.catalog.open(ref))
        prior = self._latest(stage.save_as)
        descriptor, run = self._plan(stage, inputs)

        if self._up_to_date(stage, inputs, descriptor, prior):
            logger.info(f"Stage {stage.save_as} is up to date ({prior.ref})")
            outputs[stage.save_as] = prior
            return StageReport(stage=stage.save_as, op=stage.op, status="skipped", ref=prior.ref,
                               rows_out=prior.row_count)

        result = run(prior)
        staged, incremental = result if isinstance(result, tuple) else (result, False)
        ref = self.catalog.save(staged, stage.save_as)
        dataset = self.catalog.open(ref)
        outputs[stage.save_as] = dataset
        stats = staged.stats
        logger.info(f"Stage {stage.save_as} saved {dataset.ref} ({stats.rows_processed} rows processed)")
        return StageReport(
            stage=stage.save_as,
            op=stage.op,
            status="incremental" if incremental else "executed",
            ref=dataset.ref,
            rows_out=dataset.row_count,
            rows_processed=stats.rows_processed,
            udf_rows=stats.udf_rows,
            get_count=stats.get_count,
        )

    def run(self, pipeline):
        """
        Run every stage in order.

        A failed stage blocks the stages that depend on it; independent stages
        still run.

        Returns:
            tuple[list[StageReport], DatasetFactoryError | None]: Reports and the
            first error raised
        """
        outputs = {}
        failed = set()
        reports = []
        first_error = None
        for stage in pipeline.stages:
            blocked_by = [ref for ref in stage.inputs if ref in failed]
            if blocked_by:
                failed.add(stage.save_as)
                reports.append(StageReport(stage=stage.save_as, op=stage.op, status="blocked",
                                           error=f"input {blocked_by[0]} failed"))
                continue
            try:
                reports.append(self.run_stage(stage, outputs))
            except DatasetFactoryError as e:
                logger.error(f"Stage {stage.save_as} failed: {e}")
                failed.add(stage.save_as)
                first_error = first_error or e
                reports.append(StageReport(stage=stage.save_as, op=stage.op, status="failed",
                                           error=f"{e.kind}: {e}"))
        return reports, first_error


def run_pipeline(path, catalog, ctx, force=False):
    """Load a pipeline file and run it; relative paths resolve against its directory."""
    pipeline = load_pipeline(path)
    runner = PipelineRunner(catalog, ctx, base_dir=os.path.dirname(os.path.abspath(path)), force=force)
    return runner.run(pipeline)
