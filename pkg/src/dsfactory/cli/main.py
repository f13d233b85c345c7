#!/usr/bin/env python3
"""
Dataset Factory Command Line

`df` drives the whole workflow: build a dataset from archives, derive new
versions with filter/mutate/enrich/sort/union, inspect the catalog, replay
pipelines, and hand datasets to training code through export manifests.

Every command accepts the global `--json` flag and then prints a single JSON
document on standard output. Errors exit with 2 (user error), 3 (data error)
or 4 (I/O error).
"""

import os
import re
import sys
import shlex
import argparse
import logging
from functools import cached_property

from pydantic import ValidationError
from tabulate import tabulate

from dsfactory.archive.fixtures import generate_fixture
from dsfactory.cache import CacheConfig, SampleCache
from dsfactory.catalog import Catalog, VersionRef
from dsfactory.cli.pipeline import run_pipeline
from dsfactory.config import Settings
from dsfactory.engine.context import ExecutionContext
from dsfactory.engine.etl import SIDECAR_FORMATS, etl_build
from dsfactory.engine.operations import add_signals, embed_file, filter_rows, mutate, order_limit, union
from dsfactory.engine.udf import OutputColumn, UdfSpec, builtin_spec
from dsfactory.errors import EXIT_IO, EXIT_OK, EXIT_USER, BadParam, DatasetFactoryError
from dsfactory.expr import bind_params
from dsfactory.loader import SampleLoader, build_export, fetch_to_dir, write_export
from dsfactory.storage import Storage
from dsfactory.table.schema import REF_COLUMNS
from dsfactory.utils import atomic_write_bytes, canonical_json, setup_logging

logger = logging.getLogger("dsfactory.cli")

SET_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=(?!=)(.*)$", re.DOTALL)
SHOW_VECTOR_COMPONENTS = 4
DEFAULT_HEAD = 10


class Environment:
    """Settings plus the lazily created catalog, storage session, cache and context."""

    def __init__(self, args, environ=None):
        self.args = args
        settings = Settings.from_env(environ)
        overrides = {
            "root": args.root,
            "workers": args.workers,
            "batch_size": args.batch_size,
            "cache_dir": args.cache_dir,
            "shared_cache_dir": args.shared_cache_dir,
        }
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if overrides:
            settings = Settings(**{**settings.model_dump(), **overrides})
        self.settings = settings

    @cached_property
    def catalog(self):
        return Catalog(self.settings.root, lock_timeout=self.settings.lock_timeout)

    @cached_property
    def storage(self):
        return Storage(coalesce_gap=self.settings.coalesce_gap)

    @cached_property
    def cache(self):
        if self.args.no_cache:
            return None
        return SampleCache(CacheConfig.from_settings(self.settings), self.storage)

    @cached_property
    def ctx(self):
        return ExecutionContext(
            storage=self.storage,
            cache=self.cache,
            batch_size=self.settings.batch_size,
            workers=self.settings.workers,
            udf_timeout=self.settings.udf_timeout,
            coalesce=not getattr(self.args, "no_coalesce", False),
        )


def _table(rows, headers):
    if not rows:
        return tabulate([], headers=headers) + "\n(no rows)"
    return tabulate(rows, headers=headers)


def _saved(env, staged, name):
    ref = env.catalog.save(staged, name)
    dataset = env.catalog.open(ref)
    document = {
        "ref": dataset.ref,
        "fingerprint": dataset.fingerprint,
        "row_count": dataset.row_count,
        "stats": staged.stats.as_dict(),
    }
    stats = staged.stats
    text = (
        f"saved {dataset.ref} ({dataset.row_count} rows, fingerprint {dataset.fingerprint[:12]})\n"
        f"rows processed: {stats.rows_processed}, UDF rows: {stats.udf_rows}, GETs: {stats.get_count}"
    )
    return document, text


def _udf_from_args(args, batch_size, outputs):
    if args.cmd:
        if not outputs:
            raise BadParam("a subprocess UDF needs at least one output column (name:type[:dim])")
        try:
            return UdfSpec(
                udf_id=args.udf,
                udf_version=args.udf_version,
                mode="subprocess",
                command=shlex.split(args.cmd),
                outputs=[OutputColumn.parse(text) for text in outputs],
                needs_sample_bytes=not args.no_sample_bytes,
                input_columns=[c for c in (args.input_columns or "").split(",") if c],
                batch_size=batch_size,
            )
        except ValueError as e:
            raise BadParam(f"invalid UDF specification: {e}")
    output_name = outputs[0].partition(":")[0] if outputs else None
    spec = builtin_spec(args.udf, output_name=output_name, batch_size=batch_size)
    return UdfSpec(**{**spec.model_dump(), "udf_version": args.udf_version})


def cmd_init(args, env):
    root = args.path or env.settings.root
    catalog = Catalog.init(root, lock_timeout=env.settings.lock_timeout)
    return {"root": catalog.root}, f"initialized empty catalog at {catalog.root}"


def cmd_etl(args, env):
    archives = args.archive
    sidecars = args.sidecar or []
    if args.format == "in-archive":
        sidecars = [None] * len(archives)
    elif not sidecars:
        sidecars = [None] * len(archives)
    elif len(sidecars) != len(archives):
        raise BadParam(f"got {len(archives)} archives but {len(sidecars)} sidecars; pass one sidecar per archive")
    staged = etl_build(list(zip(archives, sidecars)), args.format, env.storage, args.coerce_text)
    return _saved(env, staged, args.save)


def cmd_query(args, env):
    dataset = env.catalog.open(args.ref)
    staged = filter_rows(dataset, args.filter, bind_params(args.param), env.ctx)
    return _saved(env, staged, args.save)


def cmd_mutate(args, env):
    match = SET_RE.match(args.set)
    if not match:
        raise BadParam(f"--set must look like 'column = expression', got {args.set!r}")
    dataset = env.catalog.open(args.ref)
    staged = mutate(dataset, match.group(1), match.group(2).strip(), bind_params(args.param), env.ctx)
    return _saved(env, staged, args.save)


def cmd_enrich(args, env):
    dataset = env.catalog.open(args.ref)
    udf = _udf_from_args(args, env.settings.batch_size, args.out or [])
    staged = add_signals(dataset, udf, env.ctx)
    return _saved(env, staged, args.save)


def cmd_sort(args, env):
    dataset = env.catalog.open(args.ref)
    staged = order_limit(dataset, args.by, args.desc, args.limit, env.ctx)
    return _saved(env, staged, args.save)


def cmd_union(args, env):
    staged = union(env.catalog.open(args.left), env.catalog.open(args.right), env.ctx)
    return _saved(env, staged, args.save)


def cmd_ls(args, env):
    manifests = env.catalog.list_datasets()
    document = {"datasets": [
        {
            "name": m.name,
            "version": m.version,
            "row_count": m.row_count,
            "kind": m.operation.kind,
            "fingerprint": m.fingerprint,
            "created_at": m.created_at,
        }
        for m in manifests
    ]}
    rows = [[d["name"], f"v{d['version']}", d["row_count"], d["kind"], d["fingerprint"][:12], d["created_at"]]
            for d in document["datasets"]]
    return document, _table(rows, ["name", "latest", "rows", "op", "fingerprint", "created"])


def cmd_log(args, env):
    entries = env.catalog.log(args.name)
    rows = []
    for e in entries:
        parents = ", ".join(p["ref"] or p["fingerprint"][:12] for p in e["parents"]) or "-"
        rows.append([e["ref"], e["kind"], e["row_count"], e["fingerprint"][:12], parents, e["created_at"]])
    return {"name": args.name, "versions": entries}, _table(
        rows, ["version", "op", "rows", "fingerprint", "parents", "created"]
    )


def _display(column, i):
    value = column.to_jsonable(i)
    if value is not None and column.type.tag == "fvec":
        return {"head": value[:SHOW_VECTOR_COMPONENTS], "dim": column.type.dim}
    return value


def _display_text(value):
    if value is None:
        return "null"
    if isinstance(value, dict):
        head = ", ".join(f"{v:.4g}" for v in value["head"])
        more = ", ..." if value["dim"] > len(value["head"]) else ""
        return f"[{head}{more}] (dim {value['dim']})"
    return value


def cmd_show(args, env):
    dataset = env.catalog.open(args.ref)
    head = min(args.head, dataset.row_count)
    names = [n for n in dataset.schema.names if n not in REF_COLUMNS]
    refs = dataset.refs()[:head]
    columns = {n: dataset.column(n) for n in names}
    rows = []
    for i in range(head):
        row = {n: _display(columns[n], i) for n in names}
        ref = refs[i]
        row["_ref"] = f"{os.path.basename(ref.source_uri)}:{ref.member_path}@{ref.offset}+{ref.length}"
        rows.append(row)
    schema = [{"name": f.name, "type": str(f.type), "nullable": f.nullable} for f in dataset.schema.fields]
    document = {
        "ref": dataset.ref,
        "fingerprint": dataset.fingerprint,
        "row_count": dataset.row_count,
        "schema": schema,
        "rows": rows,
    }
    headers = names + ["_ref"]
    text = "\n".join([
        f"{dataset.ref}  rows={dataset.row_count}  fingerprint={dataset.fingerprint}",
        "",
        tabulate([[f["name"], f["type"], "yes" if f["nullable"] else "no"] for f in schema],
                 headers=["column", "type", "nullable"]),
        "",
        _table([[_display_text(r[h]) for h in headers] for r in rows], headers),
    ])
    return document, text


def cmd_run(args, env):
    reports, error = run_pipeline(args.pipeline, env.catalog, env.ctx, force=args.force)
    document = {"stages": [r.model_dump() for r in reports]}
    rows = [[r.stage, r.op, r.status, r.ref or "-", r.rows_processed, r.udf_rows, r.get_count, r.error or ""]
            for r in reports]
    text = _table(rows, ["stage", "op", "status", "ref", "processed", "udf rows", "GETs", "error"])
    if error is not None:
        document["error"] = {"kind": error.kind, "message": str(error), "exit_code": error.exit_code}
    return document, text, error


def cmd_export(args, env):
    dataset = env.catalog.open(args.ref)
    columns = [c for c in (args.columns or "").split(",") if c]
    header, rows = build_export(dataset, columns, args.seed, args.rank, args.world)
    write_export(args.out, header, rows)
    return {"out": os.path.abspath(args.out), **header.model_dump()}, (
        f"wrote {header.row_count} rows of {dataset.ref} (seed {args.seed}, shard {args.rank}/{args.world}) to {args.out}"
    )


def _loader(args, env):
    if env.cache is None:
        raise BadParam("this command reads samples through the cache; drop --no-cache")
    coalesce = not args.no_coalesce
    if os.path.isfile(args.source):
        return SampleLoader.from_export(args.source, env.cache, coalesce=coalesce)
    _, rows = build_export(env.catalog.open(args.source))
    return SampleLoader(rows, env.cache, coalesce=coalesce)


def cmd_fetch(args, env):
    loader = _loader(args, env)
    before = env.storage.stats.snapshot()
    count = fetch_to_dir(loader, args.out)
    after = env.storage.stats.snapshot()
    document = {
        "out": os.path.abspath(args.out),
        "samples": count,
        "get_count": after["get_count"] - before["get_count"],
        "bytes_fetched": after["bytes_fetched"] - before["bytes_fetched"],
        "cache": env.cache.stats.snapshot(),
    }
    return document, f"wrote {count} samples to {args.out} with {document['get_count']} GETs"


def cmd_iterate(args, env):
    loader = _loader(args, env)
    epochs = []
    for epoch in range(1, args.epochs + 1):
        before = env.storage.stats.snapshot()
        samples = sum(1 for _ in loader)
        after = env.storage.stats.snapshot()
        epochs.append({
            "epoch": epoch,
            "samples": samples,
            "get_count": after["get_count"] - before["get_count"],
            "bytes_fetched": after["bytes_fetched"] - before["bytes_fetched"],
        })
    rows = [[e["epoch"], e["samples"], e["get_count"], e["bytes_fetched"]] for e in epochs]
    return {"epochs": epochs}, _table(rows, ["epoch", "samples", "GETs", "bytes"])


def cmd_embed_file(args, env):
    udf = _udf_from_args(args, 1, args.column or [])
    value = embed_file(args.path, udf, env.ctx)
    document = {"source": os.path.abspath(args.path), "udf_id": udf.udf_id, "udf_version": udf.udf_version,
                "value": value}
    atomic_write_bytes(args.out, canonical_json(document))
    size = f"{len(value)}-component vector" if isinstance(value, list) else "value"
    return {"out": os.path.abspath(args.out), "udf_id": udf.udf_id}, f"wrote {size} to {args.out}"


def cmd_stale(args, env):
    stale = env.catalog.find_stale(args.name)
    document = {"stale": [str(ref) for ref in stale]}
    text = "\n".join(document["stale"]) if stale else "nothing is stale"
    return document, text


def cmd_gc(args, env):
    freed = env.catalog.gc(args.keep or None)
    return {"freed_bytes": freed}, f"freed {freed} bytes"


def cmd_fixture(args, env):
    written = generate_fixture(args.dir, shards=args.shards, members_per_shard=args.members, seed=args.seed)
    document = {"shards": [{"archive": a, "sidecar": s} for a, s in written]}
    return document, _table([[a, s] for a, s in written], ["archive", "sidecar"])


def _add_udf_arguments(parser, outputs_flag):
    parser.add_argument("--udf", required=True, help="UDF id (builtin: byte_len, sha256_hex, hist_embed)")
    parser.add_argument("--cmd", help="Command line of a subprocess UDF")
    parser.add_argument("--version", dest="udf_version", default="1", help="UDF version recorded in provenance")
    parser.add_argument(outputs_flag, action="append",
                        help="Output column as name:type[:dim]; repeat for several (subprocess UDFs)")
    parser.add_argument("--input-columns", help="Comma-separated columns passed to the UDF as attrs")
    parser.add_argument("--no-sample-bytes", action="store_true", help="Do not send sample bytes to the UDF")


def build_parser():
    parser = argparse.ArgumentParser(prog="df", description="Dataset Factory: versioned dataset tables over archives")
    parser.add_argument("--root", help="Catalog root (default: $DF_ROOT or ./dfcatalog)")
    parser.add_argument("--json", dest="as_json", action="store_true", help="Print one JSON document")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO logs, -vv for DEBUG")
    parser.add_argument("--workers", type=int, help="UDF worker threads")
    parser.add_argument("--batch-size", type=int, help="Rows per UDF batch")
    parser.add_argument("--cache-dir", help="Local sample cache directory")
    parser.add_argument("--shared-cache-dir", help="Shared sample cache directory")
    parser.add_argument("--no-cache", action="store_true", help="Fetch samples straight from storage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="Create an empty catalog")
    p.add_argument("path", nargs="?", help="Catalog root (default: --root)")
    p.set_defaults(handler=cmd_init)

    p = sub.add_parser("etl", help="Build a dataset from archives and metadata")
    p.add_argument("--archive", nargs="+", required=True, help="Tar archive URIs or paths")
    p.add_argument("--sidecar", nargs="+", help="Metadata files, one per archive")
    p.add_argument("--format", choices=SIDECAR_FORMATS, default="jsonl")
    p.add_argument("--coerce-text", action="store_true", help="Store fields with mixed types as text")
    p.add_argument("--save", required=True)
    p.set_defaults(handler=cmd_etl)

    p = sub.add_parser("query", help="Filter rows by a predicate")
    p.add_argument("ref")
    p.add_argument("--filter", required=True)
    p.add_argument("--param", action="append", help="name=value or name=@file.json")
    p.add_argument("--save", required=True)
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("mutate", help="Add a computed column")
    p.add_argument("ref")
    p.add_argument("--set", required=True, help="'column = expression'")
    p.add_argument("--param", action="append", help="name=value or name=@file.json")
    p.add_argument("--save", required=True)
    p.set_defaults(handler=cmd_mutate)

    p = sub.add_parser("enrich", help="Add UDF signal columns")
    p.add_argument("ref")
    _add_udf_arguments(p, "--out")
    p.add_argument("--save", required=True)
    p.set_defaults(handler=cmd_enrich)

    p = sub.add_parser("sort", help="Order by a column and keep the first rows")
    p.add_argument("ref")
    p.add_argument("--by", required=True)
    p.add_argument("--desc", action="store_true")
    p.add_argument("--limit", type=int)
    p.add_argument("--save", required=True)
    p.set_defaults(handler=cmd_sort)

    p = sub.add_parser("union", help="Concatenate two datasets with the same schema")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--save", required=True)
    p.set_defaults(handler=cmd_union)

    p = sub.add_parser("ls", help="List datasets")
    p.set_defaults(handler=cmd_ls)

    p = sub.add_parser("log", help="Show the versions and lineage of a dataset")
    p.add_argument("name")
    p.set_defaults(handler=cmd_log)

    p = sub.add_parser("show", help="Show the schema and first rows of a dataset")
    p.add_argument("ref")
    p.add_argument("--head", type=int, default=DEFAULT_HEAD)
    p.set_defaults(handler=cmd_show)

    p = sub.add_parser("run", help="Run a pipeline file, skipping up-to-date stages")
    p.add_argument("pipeline")
    p.add_argument("--force", action="store_true", help="Recompute every stage")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("export", help="Write a shuffled, sharded export manifest")
    p.add_argument("ref")
    p.add_argument("--columns", help="Comma-separated attribute columns to include")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank", type=int, default=0)
    p.add_argument("--world", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export)

    for name, help_text in (("fetch", "Download samples into a directory"),
                            ("iterate", "Iterate samples through the cache")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("source", help="Export manifest file or dataset reference")
        p.add_argument("--no-coalesce", action="store_true", help="One GET per sample")
        if name == "fetch":
            p.add_argument("--out", required=True)
            p.set_defaults(handler=cmd_fetch)
        else:
            p.add_argument("--epochs", type=int, default=2)
            p.set_defaults(handler=cmd_iterate)

    p = sub.add_parser("embed-file", help="Run a UDF on one file and save the result as a parameter")
    p.add_argument("path")
    _add_udf_arguments(p, "--column")
    p.add_argument("--out", required=True, help="JSON file for --param name=@file")
    p.set_defaults(handler=cmd_embed_file)

    p = sub.add_parser("stale", help="List datasets whose inputs changed")
    p.add_argument("name", nargs="?")
    p.set_defaults(handler=cmd_stale)

    p = sub.add_parser("gc", help="Delete versions not needed by the kept ones")
    p.add_argument("--keep", nargs="+", help="Versions to keep (default: the latest of every name)")
    p.set_defaults(handler=cmd_gc)

    p = sub.add_parser("fixture", help="Write the deterministic test fixture")
    p.add_argument("dir")
    p.add_argument("--shards", type=int, default=10)
    p.add_argument("--members", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_fixture)
    return parser


def _emit(args, document, text):
    if args.as_json:
        sys.stdout.write(canonical_json(document).decode("utf-8") + "\n")
    elif text:
        sys.stdout.write(str(text) + "\n")
    sys.stdout.flush()


def _fail(args, kind, message, exit_code):
    logger.error(f"{kind}: {message}")
    if args.as_json:
        _emit(args, {"error": {"kind": kind, "message": message, "exit_code": exit_code}}, None)
    else:
        sys.stderr.write(f"df: {kind}: {message}\n")
    return exit_code


def main(argv=None):
    """
    Parse arguments, run one command and return its exit code.

    Args:
        argv (list[str]): Arguments without the program name (default: sys.argv[1:])

    Returns:
        int: Exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        env = Environment(args)
    except ValidationError as e:
        return _fail(args, "BadParam", str(e), EXIT_USER)
    level = {0: env.settings.log_level, 1: "INFO"}.get(args.verbose, "DEBUG")
    setup_logging(level, env.settings.log_file)

    try:
        result = args.handler(args, env)
    except DatasetFactoryError as e:
        return _fail(args, e.kind, str(e), e.exit_code)
    except ValidationError as e:
        return _fail(args, "BadParam", str(e).splitlines()[0], EXIT_USER)
    except OSError as e:
        return _fail(args, "IoFailure", str(e), EXIT_IO)

    document, text = result[0], result[1]
    _emit(args, document, text)
    error = result[2] if len(result) > 2 else None
    if error is not None:
        if not args.as_json:
            sys.stderr.write(f"df: {error.kind}: {error}\n")
        return error.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
