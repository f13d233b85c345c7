#!/usr/bin/env python3
"""
Dataset Stages

The table operations that turn one dataset version into the next. Row-local
stages (filter, mutate, add_signals) are represented by stage objects that can
compute any subset of rows, which is what lets `incremental_apply` process only
the rows that changed. order_limit and union always recompute.

Every operation takes catalog dataset handles and returns a StagedDataset; the
caller saves it. Columns a stage does not touch are inherited by reference.
"""

import json
import base64
import binascii
import logging

import numpy as np

from dsfactory.engine.batching import RunnerPool, chunk, make_runner, map_batches
from dsfactory.engine.context import ExecutionContext, ExecutionStats, StagedDataset
from dsfactory.engine.descriptor import OperationDescriptor
from dsfactory.engine.udf import OutputColumn, UdfRow, UdfSpec, builtin_spec, BUILTIN_UDFS
from dsfactory.errors import (
    BadParam,
    ColumnExists,
    DescriptorMismatch,
    DuplicateUid,
    InvalidName,
    InvariantViolation,
    NonOrderableType,
    NotRowLocal,
    SchemaMismatch,
    TypeMismatch,
    UdfBadOutput,
    UnknownColumn,
)
from dsfactory.expr import params_text, parse, referenced_columns, referenced_params, to_source, typecheck
from dsfactory.expr.evaluator import evaluate
from dsfactory.table.column import ColumnVector
from dsfactory.table.schema import BOOL, NAME_PATTERN, UID_COLUMN, Field
from dsfactory.utils import sha256_hex

logger = logging.getLogger(__name__)

ORDERABLE_TAGS = ("int64", "float64", "utf8")
INT64_MIN, INT64_MAX = -(1 << 63), (1 << 63) - 1


def _context(ctx):
    return ctx if ctx is not None else ExecutionContext()


def _column_values(dataset, names, indices):
    """Python row dicts for the given row positions, restricted to names."""
    columns = {n: dataset.column(n) for n in names}
    return [{n: c.value(i) for n, c in columns.items()} for i in indices]


def _inherit_all(dataset):
    return {name: dataset.column_path(name) for name in dataset.schema.names}


def _take_all(dataset, indices):
    indices = np.asarray(indices, dtype=np.int64)
    return {name: dataset.column(name).take(indices) for name in dataset.schema.names}


def check_new_column(name):
    if not NAME_PATTERN.match(name or ""):
        raise InvalidName(f"'{name}' is not a valid column name")


def decode_params(params):
    """Recover bound parameter values from descriptor text."""
    decoded = {}
    for name, text in params.items():
        try:
            decoded[name] = json.loads(text)
        except json.JSONDecodeError:
            raise DescriptorMismatch(f"parameter {name} has unreadable value text {text!r}")
    return decoded


class FilterStage:
    """Keep the rows where a bool predicate is true (null counts as false)."""

    kind = "filter"

    def __init__(self, predicate, schema, params=None):
        params = params or {}
        tree = typecheck(parse(predicate), schema, params)
        if tree.type != BOOL:
            raise TypeMismatch(f"filter predicate must be bool, got {tree.type}")
        self.tree = tree
        self.input_columns = referenced_columns(tree)
        self.output_fields = []
        self.descriptor = OperationDescriptor(
            kind="filter",
            expression_src=to_source(tree),
            params=params_text(params, referenced_params(tree)),
        )

    def compute(self, dataset, indices, ctx, stats):
        rows = _column_values(dataset, self.input_columns, indices)
        return [evaluate(self.tree, row) is True for row in rows]


class MutateStage:
    """Add one column computed by an expression."""

    kind = "mutate"

    def __init__(self, new_column, expression, schema, params=None):
        params = params or {}
        check_new_column(new_column)
        if schema.has(new_column):
            raise ColumnExists(f"column '{new_column}' already exists")
        tree = typecheck(parse(expression), schema, params)
        self.tree = tree
        self.new_column = new_column
        self.input_columns = referenced_columns(tree)
        self.output_fields = [Field(name=new_column, type=tree.type, nullable=True)]
        self.descriptor = OperationDescriptor(
            kind="mutate",
            expression_src=to_source(tree),
            new_column=new_column,
            params=params_text(params, referenced_params(tree)),
        )

    def compute(self, dataset, indices, ctx, stats):
        rows = _column_values(dataset, self.input_columns, indices)
        return {self.new_column: [evaluate(self.tree, row) for row in rows]}


class AddSignalsStage:
    """Add the output columns of a UDF run over every row's sample bytes."""

    kind = "add_signals"

    def __init__(self, udf, schema):
        for output in udf.outputs:
            check_new_column(output.name)
            if schema.has(output.name):
                raise ColumnExists(f"UDF output column '{output.name}' already exists")
        for name in udf.input_columns:
            if not schema.has(name):
                raise UnknownColumn(f"UDF input column '{name}' is not in the schema")
        self.udf = udf
        self.input_columns = list(udf.input_columns)
        self.output_fields = [Field(name=o.name, type=o.type, nullable=True) for o in udf.outputs]
        self.descriptor = OperationDescriptor(
            kind="add_signals",
            new_column=",".join(o.name for o in udf.outputs),
            udf_id=udf.udf_id,
            udf_version=udf.udf_version,
            params=udf.identity_params(),
        )

    def compute(self, dataset, indices, ctx, stats):
        if not indices:
            return {o.name: [] for o in self.udf.outputs}
        uids = dataset.column(UID_COLUMN)
        refs = dataset.refs()
        dataset_inputs = {n: dataset.column(n) for n in self.input_columns}
        batch_size = self.udf.batch_size or ctx.batch_size
        batches = chunk(list(indices), batch_size)
        pool = RunnerPool(self.udf, ctx.udf_timeout)

        def fetch(batch):
            if not self.udf.needs_sample_bytes:
                return [None] * len(batch)
            return ctx.fetch([refs[i] for i in batch])

        def process(batch, payloads):
            rows = [
                UdfRow(uids.value(i), payload, {n: c.to_jsonable(i) for n, c in dataset_inputs.items()})
                for i, payload in zip(batch, payloads)
            ]
            values = pool.get().run_batch(rows)
            stats.add_udf_batch(len(rows))
            return values

        try:
            results = map_batches(batches, fetch, process, workers=ctx.workers, read_ahead=ctx.read_ahead)
        except BaseException:
            pool.close(failed=True)
            raise
        pool.close()

        columns = {}
        for k, output in enumerate(self.udf.outputs):
            values = [v for batch_values in results for v in batch_values[k]]
            columns[output.name] = [check_output_value(output, v, self.udf.udf_id) for v in values]
        logger.info(f"UDF {self.udf.udf_id} processed {len(indices)} rows in {len(batches)} batches")
        return columns


def check_output_value(output, value, udf_id="udf"):
    """
    Validate one UDF output value against its declared column type.

    bytes values may arrive base64-encoded, which is how a subprocess sends them.

    Returns:
        The value in the form the column builder accepts
    """
    if value is None:
        return None
    tag = output.type.tag

    def bad(reason):
        return UdfBadOutput(f"UDF {udf_id} column '{output.name}' ({output.type}): {reason}")

    if tag == "int64":
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
            raise bad(f"expected an integer, got {value!r}")
        if not INT64_MIN <= int(value) <= INT64_MAX:
            raise bad(f"{value} is outside the int64 range")
        return int(value)
    if tag == "float64":
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise bad(f"expected a number, got {value!r}")
        return float(value)
    if tag == "bool":
        if not isinstance(value, (bool, np.bool_)):
            raise bad(f"expected a bool, got {value!r}")
        return bool(value)
    if tag == "utf8":
        if not isinstance(value, str):
            raise bad(f"expected text, got {type(value).__name__}")
        return value
    if tag == "bytes":
        if isinstance(value, (bytes, bytearray)):
            return bytes(value)
        if isinstance(value, str):
            try:
                return base64.b64decode(value, validate=True)
            except binascii.Error:
                raise bad("text is not valid base64")
        raise bad(f"expected bytes, got {type(value).__name__}")
    try:
        vector = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise bad("expected a number array")
    if vector.ndim != 1 or vector.shape[0] != output.type.dim:
        raise bad(f"expected {output.type.dim} components, got shape {vector.shape}")
    return vector


def _build_column(field, values, udf_id=None):
    try:
        return ColumnVector.from_pylist(field.type, values, nullable=True)
    except InvariantViolation as e:
        if udf_id is not None:
            raise UdfBadOutput(f"UDF {udf_id} output '{field.name}' does not fit {field.type}: {e}")
        raise


def _staged(stage, dataset, row_count, columns, inherited, stats):
    stats.rows_out = row_count
    return StagedDataset(
        schema=dataset.schema.with_fields(stage.output_fields),
        row_count=row_count,
        parents=[dataset.fingerprint],
        operation=stage.descriptor,
        columns=columns,
        inherited=inherited,
        stats=stats,
    )


class _Fetches:
    """Measures the GETs a stage issues on its storage session."""

    def __init__(self, ctx, stats):
        self.ctx = ctx
        self.stats = stats

    def __enter__(self):
        self.before = self.ctx.storage.stats.snapshot()
        return self

    def __exit__(self, exc_type, exc, tb):
        after = self.ctx.storage.stats.snapshot()
        self.stats.get_count += after["get_count"] - self.before["get_count"]
        self.stats.bytes_fetched += after["bytes_fetched"] - self.before["bytes_fetched"]
        return False


def apply_stage(stage, dataset, ctx=None, reuse=None):
    """
    Run a row-local stage over a dataset.

    Args:
        stage: FilterStage, MutateStage or AddSignalsStage
        dataset (Dataset): Parent version
        ctx (ExecutionContext): Execution settings
        reuse (dict): Row position -> prior result for rows that need no
            recomputation (bool for filter, {column: value} otherwise)

    Returns:
        StagedDataset: Unsaved output
    """
    ctx = _context(ctx)
    reuse = reuse or {}
    stats = ExecutionStats(rows_in=dataset.row_count)
    delta = [i for i in range(dataset.row_count) if i not in reuse]
    stats.rows_processed = len(delta)

    with _Fetches(ctx, stats):
        computed = stage.compute(dataset, delta, ctx, stats)

    if stage.kind == "filter":
        keep = dict(reuse)
        keep.update(zip(delta, computed))
        kept = [i for i in range(dataset.row_count) if keep[i]]
        if len(kept) == dataset.row_count:
            staged = _staged(stage, dataset, len(kept), {}, _inherit_all(dataset), stats)
        else:
            staged = _staged(stage, dataset, len(kept), _take_all(dataset, kept), {}, stats)
        logger.info(f"filter kept {len(kept)} of {dataset.row_count} rows ({len(delta)} evaluated)")
        return staged

    udf_id = stage.udf.udf_id if stage.kind == "add_signals" else None
    fresh = {n: dict(zip(delta, values)) for n, values in computed.items()}
    columns = {}
    for field in stage.output_fields:
        values = [
            reuse[i][field.name] if i in reuse else fresh[field.name][i]
            for i in range(dataset.row_count)
        ]
        columns[field.name] = _build_column(field, values, udf_id)
    logger.info(f"{stage.kind} computed {len(delta)} of {dataset.row_count} rows")
    return _staged(stage, dataset, dataset.row_count, columns, _inherit_all(dataset), stats)


def filter_rows(dataset, predicate, params=None, ctx=None):
    """
    Keep exactly the rows where `predicate` is true, in parent order.

    Args:
        dataset (Dataset): Parent version
        predicate (str): Bool expression source
        params (dict): Parameter bindings

    Returns:
        StagedDataset: Unsaved output
    """
    return apply_stage(FilterStage(predicate, dataset.schema, params), dataset, ctx)


def mutate(dataset, new_column, expression, params=None, ctx=None):
    """Add `new_column` with the value of `expression` on every row."""
    return apply_stage(MutateStage(new_column, expression, dataset.schema, params), dataset, ctx)


def add_signals(dataset, udf, ctx=None):
    """
    Add a UDF's output columns.

    Sample bytes are fetched through the cache when the context has one, in
    coalesced reads per archive, and fed to the UDF in batches.
    """
    return apply_stage(AddSignalsStage(udf, dataset.schema), dataset, ctx)


def _order_position(value):
    return value is None or (isinstance(value, float) and np.isnan(value))


def order_limit(dataset, key, descending=False, limit=None, ctx=None):
    """
    Sort rows by a key column and keep the first `limit`.

    Nulls (and NaN) sort last in either direction; ties are broken by `_uid`
    ascending.

    Args:
        dataset (Dataset): Parent version
        key (str): Key column
        descending (bool): Sort direction
        limit (int): Rows to keep; None keeps all

    Returns:
        StagedDataset: Unsaved output
    """
    col_type = dataset.schema.type_of(key)
    if col_type is None:
        raise UnknownColumn(f"unknown column '{key}'")
    if col_type.tag not in ORDERABLE_TAGS:
        raise NonOrderableType(f"cannot order by {key} of type {col_type}")
    if limit is not None and limit < 0:
        raise BadParam(f"limit must be non-negative, got {limit}")

    stats = ExecutionStats(rows_in=dataset.row_count, rows_processed=dataset.row_count)
    values = dataset.column(key).to_pylist()
    uids = dataset.column(UID_COLUMN).to_pylist()

    by_uid = sorted(range(dataset.row_count), key=lambda i: uids[i])
    present = [i for i in by_uid if not _order_position(values[i])]
    missing = [i for i in by_uid if _order_position(values[i])]
    present.sort(key=lambda i: values[i], reverse=bool(descending))
    order = present + missing
    if limit is not None:
        order = order[:limit]

    descriptor = OperationDescriptor(kind="order_limit", order_key=key, descending=bool(descending), limit=limit)
    stats.rows_out = len(order)
    if order == list(range(dataset.row_count)):
        columns, inherited = {}, _inherit_all(dataset)
    else:
        columns, inherited = _take_all(dataset, order), {}
    logger.info(f"order_limit by {key} kept {len(order)} of {dataset.row_count} rows")
    return StagedDataset(
        schema=dataset.schema,
        row_count=len(order),
        parents=[dataset.fingerprint],
        operation=descriptor,
        columns=columns,
        inherited=inherited,
        stats=stats,
    )


def union(a, b, ctx=None):
    """
    Rows of `a` followed by rows of `b`.

    Both inputs must have identical schemas and disjoint `_uid` sets.
    """
    if a.schema != b.schema:
        raise SchemaMismatch(f"cannot union {a.name} and {b.name}: schemas differ")
    left = set(a.column(UID_COLUMN).to_pylist())
    overlap = [u for u in b.column(UID_COLUMN).to_pylist() if u in left]
    if overlap:
        raise DuplicateUid(f"{len(overlap)} samples appear in both {a.name} and {b.name}, first {overlap[0]}")

    columns = {
        f.name: ColumnVector.concat([a.column(f.name), b.column(f.name)], col_type=f.type, nullable=f.nullable)
        for f in a.schema.fields
    }
    row_count = a.row_count + b.row_count
    stats = ExecutionStats(rows_in=row_count, rows_processed=row_count, rows_out=row_count)
    descriptor = OperationDescriptor(kind="union", params={"left": a.name, "right": b.name})
    logger.info(f"union of {a.name} ({a.row_count}) and {b.name} ({b.row_count})")
    return StagedDataset(
        schema=a.schema,
        row_count=row_count,
        parents=[a.fingerprint, b.fingerprint],
        operation=descriptor,
        columns=columns,
        stats=stats,
    )


def udf_from_descriptor(descriptor):
    """Rebuild a builtin UDF spec recorded in an add_signals descriptor."""
    params = descriptor.params
    if params.get("mode") != "builtin" or descriptor.udf_id not in BUILTIN_UDFS:
        raise DescriptorMismatch(
            f"add_signals with UDF {descriptor.udf_id} needs its UDF spec to be supplied"
        )
    outputs = [OutputColumn.parse(text) for text in params.get("outputs", "").split(",") if text]
    if len(outputs) != 1:
        raise DescriptorMismatch(f"builtin UDF {descriptor.udf_id} has one output column")
    spec = builtin_spec(descriptor.udf_id, output_name=outputs[0].name)
    return UdfSpec(**{**spec.model_dump(), "udf_version": descriptor.udf_version or spec.udf_version})


def stage_from_descriptor(descriptor, schema, udf=None):
    """
    Build the stage object a row-local descriptor describes.

    Args:
        descriptor (OperationDescriptor): Recorded operation
        schema (Schema): Parent schema
        udf (UdfSpec): Required for subprocess add_signals stages

    Returns:
        FilterStage | MutateStage | AddSignalsStage
    """
    if not descriptor.is_row_local:
        raise NotRowLocal(f"{descriptor.kind} stages must be recomputed in full")
    if descriptor.kind == "filter":
        return FilterStage(descriptor.expression_src, schema, decode_params(descriptor.params))
    if descriptor.kind == "mutate":
        return MutateStage(descriptor.new_column, descriptor.expression_src, schema, decode_params(descriptor.params))
    return AddSignalsStage(udf or udf_from_descriptor(descriptor), schema)


def _row_key(dataset, names, i):
    return tuple(json.dumps(dataset.column(n).to_jsonable(i)) for n in names)


def incremental_apply(stage, old_parent, new_parent, old_output, ctx=None, udf=None):
    """
    Re-run a row-local stage on a new parent version, computing only the delta.

    Rows whose `_uid` already existed in `old_parent` with unchanged input
    columns reuse their result from `old_output`; all other rows are computed.
    The output is assembled in `new_parent` order, so it equals a full
    recomputation on `new_parent`.

    Args:
        stage: Stage object or OperationDescriptor
        old_parent (Dataset): Parent the old output was computed from
        new_parent (Dataset): New parent
        old_output (Dataset): Output of the same stage on old_parent
        ctx (ExecutionContext): Execution settings
        udf (UdfSpec): UDF spec when stage is a subprocess add_signals descriptor

    Returns:
        StagedDataset: Unsaved output
    """
    if isinstance(stage, OperationDescriptor):
        stage = stage_from_descriptor(stage, new_parent.schema, udf)
    if not stage.descriptor.is_row_local:
        raise NotRowLocal(f"{stage.descriptor.kind} stages must be recomputed in full")
    if stage.descriptor != old_output.operation:
        raise DescriptorMismatch(f"{old_output.name} was not produced by this {stage.kind} stage")
    if list(old_output.parents) != [old_parent.fingerprint]:
        raise DescriptorMismatch(f"{old_output.name} was not computed from {old_parent.name}")

    old_positions = {u: i for i, u in enumerate(old_parent.column(UID_COLUMN).to_pylist())}
    out_positions = {u: i for i, u in enumerate(old_output.column(UID_COLUMN).to_pylist())}
    new_uids = new_parent.column(UID_COLUMN).to_pylist()
    inputs = [n for n in stage.input_columns if old_parent.schema.has(n)]

    out_columns = {f.name: old_output.column(f.name) for f in stage.output_fields}
    reuse = {}
    for i, u in enumerate(new_uids):
        j = old_positions.get(u)
        if j is None:
            continue
        if _row_key(old_parent, inputs, j) != _row_key(new_parent, inputs, i):
            continue
        if stage.kind == "filter":
            reuse[i] = u in out_positions
        elif u in out_positions:
            k = out_positions[u]
            reuse[i] = {n: c.value(k) for n, c in out_columns.items()}

    removed = len(set(old_positions) - set(new_uids))
    logger.info(
        f"incremental {stage.kind}: {new_parent.row_count - len(reuse)} rows to compute, "
        f"{len(reuse)} reused, {removed} removed"
    )
    return apply_stage(stage, new_parent, ctx, reuse=reuse)


def embed_file(path, udf, ctx=None):
    """
    Run a UDF over one standalone file.

    Args:
        path (str): File to read
        udf (UdfSpec): UDF to run; its first output column is returned
        ctx (ExecutionContext): Execution settings

    Returns:
        The first output value (a list of floats for vector outputs)
    """
    ctx = _context(ctx)
    with open(path, "rb") as f:
        payload = f.read()
    runner = make_runner(udf, ctx.udf_timeout).start()
    try:
        values = runner.run_batch([UdfRow(sha256_hex(payload), payload, {})])
    except BaseException:
        if hasattr(runner, "kill"):
            runner.kill()
        raise
    runner.close()
    value = check_output_value(udf.outputs[0], values[0][0], udf.udf_id)
    if isinstance(value, np.ndarray):
        value = [float(v) for v in value.astype(np.float32)]
    logger.info(f"Embedded {path} with {udf.udf_id}")
    return value
