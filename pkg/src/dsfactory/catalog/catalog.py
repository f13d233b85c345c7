#!/usr/bin/env python3
"""
Dataset Catalog

A directory of immutable, named, versioned datasets:

    <root>/catalog.json                       name -> versions index
    <root>/.lock                              single-writer lock file
    <root>/datasets/<name>/v<k>/manifest.json
    <root>/datasets/<name>/v<k>/columns/<column>.col

A version directory is written under a temporary name and renamed into place,
so readers never see a partial version and never wait for the writer.
"""

import os
import re
import json
import time
import uuid
import shutil
import logging
from collections import deque
from contextlib import contextmanager
from typing import NamedTuple, Optional

from dsfactory.catalog.dataset import Dataset
from dsfactory.catalog.fingerprint import fingerprint
from dsfactory.config import DEFAULT_LOCK_TIMEOUT
from dsfactory.errors import (
    CatalogLocked,
    Corrupt,
    InvalidName,
    InvariantViolation,
    IoFailure,
    Missing,
    NonEmptyDir,
    NotFound,
)
from dsfactory.table.column import encode_column
from dsfactory.table.manifest import DatasetManifest, read_manifest, write_manifest
from dsfactory.utils import atomic_write_bytes, canonical_json, ensure_directory, generate_timestamp

logger = logging.getLogger(__name__)

CATALOG_FILENAME = "catalog.json"
LOCK_FILENAME = ".lock"
DATASETS_DIR = "datasets"
CATALOG_FORMAT = 1
LOCK_POLL_INTERVAL = 0.05

DATASET_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")
VERSION_RE = re.compile(r"^v([1-9][0-9]*)$")


def validate_name(name):
    if not isinstance(name, str) or not DATASET_NAME_RE.match(name):
        raise InvalidName(f"'{name}' is not a valid dataset name")
    return name


class VersionRef(NamedTuple):
    """A dataset name plus a version number; None means the latest version."""

    name: str
    version: Optional[int] = None

    @classmethod
    def parse(cls, text):
        """
        Parse `name`, `name.latest` or `name.vN`.

        Args:
            text (str): Reference text

        Returns:
            VersionRef: Parsed reference
        """
        if isinstance(text, VersionRef):
            return text
        name, dot, suffix = str(text).rpartition(".")
        if not dot:
            return cls(validate_name(suffix))
        if suffix == "latest":
            return cls(validate_name(name))
        match = VERSION_RE.match(suffix)
        if not match:
            raise InvalidName(f"'{text}' is not a dataset reference (name, name.vN or name.latest)")
        return cls(validate_name(name), int(match.group(1)))

    def __str__(self):
        return f"{self.name}.v{self.version}" if self.version is not None else f"{self.name}.latest"


def _process_alive(pid):
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    except OSError:
        return False
    return True


@contextmanager
def catalog_lock(root, timeout=DEFAULT_LOCK_TIMEOUT):
    """
    Hold the catalog's single-writer lock.

    The lock is a file created with O_EXCL that records the holder's pid. A lock
    left behind by a process that no longer exists on this host is removed.

    Args:
        root (str): Catalog root
        timeout (float): Seconds to wait before raising CatalogLocked
    """
    path = os.path.join(root, LOCK_FILENAME)
    deadline = time.monotonic() + timeout
    while True:
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            if _lock_is_stale(path):
                try:
                    os.remove(path)
                    logger.warning(f"Removed stale catalog lock {path}")
                    continue
                except FileNotFoundError:
                    continue
            if time.monotonic() >= deadline:
                raise CatalogLocked(f"catalog {root} is locked by another writer ({path})")
            time.sleep(LOCK_POLL_INTERVAL)
            continue
        except OSError as e:
            raise IoFailure(f"cannot create lock file {path}: {e}")
        try:
            os.write(fd, json.dumps({"pid": os.getpid(), "acquired_at": generate_timestamp()}).encode("utf-8"))
        finally:
            os.close(fd)
        break
    try:
        yield
    finally:
        try:
            os.remove(path)
        except FileNotFoundError:
            pass


def _lock_is_stale(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            holder = json.load(f)
    except (OSError, ValueError):
        return False
    pid = holder.get("pid") if isinstance(holder, dict) else None
    return isinstance(pid, int) and pid != os.getpid() and not _process_alive(pid)


class Catalog:
    """
    Named, versioned dataset registry rooted at a directory.

    Args:
        root (str): Catalog root created by `Catalog.init`
        lock_timeout (float): Seconds a writer waits for the lock
    """

    def __init__(self, root, lock_timeout=DEFAULT_LOCK_TIMEOUT):
        self.root = os.path.abspath(root)
        self.lock_timeout = lock_timeout
        if not os.path.isfile(self.index_path):
            raise NotFound(f"no catalog at {self.root} (run `df init {root}` first)")

    @classmethod
    def init(cls, root, lock_timeout=DEFAULT_LOCK_TIMEOUT):
        """
        Create an empty catalog.

        Args:
            root (str): Absent or empty directory

        Returns:
            Catalog: The new catalog
        """
        if os.path.exists(root) and (not os.path.isdir(root) or os.listdir(root)):
            raise NonEmptyDir(f"{root} exists and is not an empty directory")
        try:
            ensure_directory(os.path.join(root, DATASETS_DIR))
            atomic_write_bytes(
                os.path.join(root, CATALOG_FILENAME),
                canonical_json({"datasets": {}, "format": CATALOG_FORMAT}),
            )
        except OSError as e:
            raise IoFailure(f"cannot create catalog at {root}: {e}")
        logger.info(f"Initialized catalog at {root}")
        return cls(root, lock_timeout)

    @property
    def index_path(self):
        return os.path.join(self.root, CATALOG_FILENAME)

    def _read_index(self):
        try:
            with open(self.index_path, "rb") as f:
                index = json.loads(f.read().decode("utf-8"))
        except FileNotFoundError:
            raise NotFound(f"no catalog at {self.root}")
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise Corrupt(f"unreadable catalog index {self.index_path}: {e}")
        if not isinstance(index, dict) or not isinstance(index.get("datasets"), dict):
            raise Corrupt(f"catalog index {self.index_path} has no datasets map")
        return index

    def _write_index(self, index):
        atomic_write_bytes(self.index_path, canonical_json(index))

    def lock(self):
        return catalog_lock(self.root, self.lock_timeout)

    def version_dir(self, name, version):
        return os.path.join(self.root, DATASETS_DIR, name, f"v{version}")

    def versions(self, name):
        """Version entries [{version, fingerprint}] of a name, oldest first."""
        entry = self._read_index()["datasets"].get(name)
        return sorted(entry["versions"], key=lambda v: v["version"]) if entry else []

    def names(self):
        return sorted(self._read_index()["datasets"])

    def _fingerprint_index(self, index=None):
        index = index or self._read_index()
        located = {}
        for name, entry in index["datasets"].items():
            for v in entry["versions"]:
                located[v["fingerprint"]] = VersionRef(name, v["version"])
        return located

    def locate(self, fp):
        """The named version carrying a fingerprint, or None."""
        return self._fingerprint_index().get(fp)

    def resolve(self, ref):
        """
        Resolve a reference to its manifest.

        Args:
            ref (str | VersionRef): `name`, `name.vN` or `name.latest`

        Returns:
            DatasetManifest: The version's manifest
        """
        ref = VersionRef.parse(ref)
        versions = [v["version"] for v in self.versions(ref.name)]
        if not versions:
            raise NotFound(f"no dataset named '{ref.name}'")
        version = max(versions) if ref.version is None else ref.version
        if version not in versions:
            raise NotFound(f"dataset '{ref.name}' has no version {version}")
        try:
            return read_manifest(self.version_dir(ref.name, version))
        except Missing:
            raise NotFound(f"{ref.name}.v{version} is listed but its directory is missing")

    def open(self, ref):
        """Open a version for reading."""
        return Dataset(self.root, self.resolve(ref))

    def open_fingerprint(self, fp):
        ref = self.locate(fp)
        if ref is None:
            raise NotFound(f"no dataset version with fingerprint {fp}")
        return self.open(ref)

    def save(self, staged, name):
        """
        Save a staged dataset as the next version of `name`.

        Saving a dataset whose fingerprint equals an existing version of the
        name returns that version without writing anything.

        Args:
            staged (StagedDataset): Stage output
            name (str): Dataset name

        Returns:
            VersionRef: The saved (or already existing) version
        """
        validate_name(name)
        fp = staged.fingerprint
        with self.lock():
            index = self._read_index()
            entry = index["datasets"].get(name, {"versions": []})
            for v in entry["versions"]:
                if v["fingerprint"] == fp:
                    logger.info(f"{name}.v{v['version']} already holds fingerprint {fp[:12]}; nothing written")
                    return VersionRef(name, v["version"])

            known = self._fingerprint_index(index)
            for parent in staged.parents:
                if parent not in known:
                    raise InvariantViolation(f"parent {parent} of {name} is not in the catalog")

            version = max((v["version"] for v in entry["versions"]), default=0) + 1
            manifest = self._publish(staged, name, version)
            entry["versions"].append({"fingerprint": fp, "version": version})
            index["datasets"][name] = entry
            self._write_index(index)

        logger.info(f"Saved {manifest.ref} ({manifest.row_count} rows, fingerprint {fp[:12]})")
        return VersionRef(name, version)

    def _publish(self, staged, name, version):
        final_dir = self.version_dir(name, version)
        rel_prefix = f"{DATASETS_DIR}/{name}/v{version}/columns"
        tmp_dir = os.path.join(self.root, DATASETS_DIR, name, f".tmp-{uuid.uuid4().hex}")

        column_files = {}
        for f in staged.schema.fields:
            if f.name in staged.columns:
                column_files[f.name] = f"{rel_prefix}/{f.name}.col"
            elif f.name in staged.inherited:
                rel = staged.inherited[f.name]
                if not os.path.isfile(os.path.join(self.root, *rel.split("/"))):
                    raise InvariantViolation(f"inherited column file {rel} does not exist")
                column_files[f.name] = rel
            else:
                raise InvariantViolation(f"staged dataset has no data for column '{f.name}'")

        manifest = DatasetManifest(
            name=name,
            version=version,
            fingerprint=staged.fingerprint,
            schema=staged.schema,
            row_count=staged.row_count,
            column_files=column_files,
            parents=list(staged.parents),
            operation=staged.operation,
            created_at=generate_timestamp(),
        )
        try:
            ensure_directory(os.path.join(tmp_dir, "columns"))
            for col_name, column in staged.columns.items():
                if len(column) != staged.row_count:
                    raise InvariantViolation(
                        f"column '{col_name}' has {len(column)} rows, dataset has {staged.row_count}"
                    )
                with open(os.path.join(tmp_dir, "columns", f"{col_name}.col"), "wb") as out:
                    out.write(encode_column(column))
            write_manifest(manifest, tmp_dir)
            os.rename(tmp_dir, final_dir)
        except OSError as e:
            shutil.rmtree(tmp_dir, ignore_errors=True)
            raise IoFailure(f"cannot write {name}.v{version}: {e}")
        except BaseException:
            shutil.rmtree(tmp_dir, ignore_errors=True)
            raise
        return manifest

    def list_datasets(self):
        """Latest manifest of every name, sorted by name."""
        return [self.resolve(VersionRef(name)) for name in self.names()]

    def log(self, name):
        """
        Lineage of a name, newest version first.

        Args:
            name (str): Dataset name

        Returns:
            list[dict]: One entry per version with its fingerprint, operation kind
            and parents (fingerprint plus name/version when named)
        """
        validate_name(name)
        versions = self.versions(name)
        if not versions:
            raise NotFound(f"no dataset named '{name}'")
        located = self._fingerprint_index()
        entries = []
        for v in reversed(versions):
            manifest = self.resolve(VersionRef(name, v["version"]))
            entries.append({
                "ref": manifest.ref,
                "version": manifest.version,
                "fingerprint": manifest.fingerprint,
                "kind": manifest.operation.kind,
                "row_count": manifest.row_count,
                "created_at": manifest.created_at,
                "parents": [
                    {"fingerprint": p, "ref": str(located[p]) if p in located else None}
                    for p in manifest.parents
                ],
            })
        return entries

    def dependency_graph(self):
        """
        Name-level dependency graph over the latest version of every name.

        A version derived from an earlier version of its own name does not
        make the name its own parent.

        Returns:
            tuple[dict, dict]: (name -> latest manifest, name -> parent names)
        """
        located = self._fingerprint_index()
        latest = {name: self.resolve(VersionRef(name)) for name in self.names()}
        parents = {
            name: sorted({located[p].name for p in m.parents if p in located} - {name})
            for name, m in latest.items()
        }
        return latest, parents

    def find_stale(self, root=None, propagate=True):
        """
        Named datasets whose latest version is out of date.

        A dataset is stale when recomputing its fingerprint from its recorded
        operation and the latest versions of its parents gives a different
        value, or when the latest version of a dataset it was built from is
        stale. Parents of the dataset's own name keep their recorded version,
        so a name refined from its previous version is not stale for that.

        Args:
            root (str | VersionRef): Only report `root` and its descendants
            propagate (bool): Also report datasets whose inputs are stale; when
                False only datasets out of date with their own inputs are listed

        Returns:
            list[VersionRef]: Stale versions in dependency order
        """
        latest, parents = self.dependency_graph()
        latest_fp = {name: m.fingerprint for name, m in latest.items()}
        located = self._fingerprint_index()

        stale = set()
        # pinned: parents whose recorded version is still their latest one
        pinned = {name: [] for name in latest}
        for name, manifest in latest.items():
            current = []
            for p in manifest.parents:
                owner = located[p].name if p in located else None
                if owner is None or owner == name:
                    current.append(p)
                    continue
                current.append(latest_fp[owner])
                if latest_fp[owner] == p:
                    pinned[name].append(owner)
            if fingerprint(current, manifest.operation, manifest.dataset_schema) != manifest.fingerprint:
                stale.add(name)

        pinned_children = {name: [] for name in latest}
        for name, ps in pinned.items():
            for p in ps:
                pinned_children[p].append(name)
        if propagate:
            stale = self._descendants(stale, pinned_children)

        order = self._topological(latest, parents, pinned)
        scope = set(latest)
        if root is not None:
            root = VersionRef.parse(root).name
            if root not in latest:
                raise NotFound(f"no dataset named '{root}'")
            children = {name: [] for name in latest}
            for name, ps in parents.items():
                for p in ps:
                    children[p].append(name)
            scope = self._descendants([root], children)
        return [VersionRef(name, latest[name].version) for name in order if name in stale and name in scope]

    @staticmethod
    def _descendants(roots, children):
        seen = set(roots)
        queue = deque(sorted(seen))
        while queue:
            for child in children[queue.popleft()]:
                if child not in seen:
                    seen.add(child)
                    queue.append(child)
        return seen

    @staticmethod
    def _topological(latest, parents, pinned):
        """
        Order names parents-first, smallest name among the ready ones.

        Name-level edges can form a cycle through superseded versions; such a
        cycle is broken at a name whose pinned parents are all placed, which
        always exists because a pinned parent predates its child.
        """
        placed, order = set(), []
        remaining = set(latest)
        while remaining:
            ready = [n for n in remaining if all(p in placed for p in parents[n])]
            if not ready:
                ready = [n for n in remaining if all(p in placed for p in pinned[n])]
            if not ready:
                raise InvariantViolation("the catalog's pinned dependency graph has a cycle")
            name = min(ready)
            order.append(name)
            placed.add(name)
            remaining.discard(name)
        return order

    def gc(self, keep=None):
        """
        Delete versions that no kept version depends on.

        Args:
            keep (list[str | VersionRef]): Versions to keep along with all their
                ancestors; None keeps the latest version of every name

        Returns:
            int: Bytes freed
        """
        with self.lock():
            index = self._read_index()
            located = self._fingerprint_index(index)
            if keep is None:
                roots = [VersionRef(name) for name in index["datasets"]]
            else:
                roots = [VersionRef.parse(k) for k in keep]
            kept_manifests = {}
            queue = deque(self.resolve(r) for r in roots)
            while queue:
                manifest = queue.popleft()
                if manifest.fingerprint in kept_manifests:
                    continue
                kept_manifests[manifest.fingerprint] = manifest
                for p in manifest.parents:
                    if p in located and p not in kept_manifests:
                        queue.append(self.resolve(located[p]))

            referenced = set()
            for manifest in kept_manifests.values():
                referenced.update(manifest.column_files.values())

            freed = 0
            for name, entry in list(index["datasets"].items()):
                survivors = []
                for v in entry["versions"]:
                    if v["fingerprint"] in kept_manifests:
                        survivors.append(v)
                        continue
                    freed += self._delete_version(name, v["version"], referenced)
                if survivors:
                    entry["versions"] = survivors
                else:
                    del index["datasets"][name]
                    if not any(r.startswith(f"{DATASETS_DIR}/{name}/") for r in referenced):
                        shutil.rmtree(os.path.join(self.root, DATASETS_DIR, name), ignore_errors=True)
            self._write_index(index)
        logger.info(f"gc kept {len(kept_manifests)} versions and freed {freed} bytes")
        return freed

    def _delete_version(self, name, version, referenced):
        directory = self.version_dir(name, version)
        freed = 0
        kept_any = False
        for dirpath, _, filenames in os.walk(directory):
            for filename in filenames:
                full = os.path.join(dirpath, filename)
                rel = os.path.relpath(full, self.root).replace(os.sep, "/")
                if rel in referenced:
                    kept_any = True
                    continue
                freed += os.path.getsize(full)
                os.remove(full)
        if not kept_any:
            shutil.rmtree(directory, ignore_errors=True)
        logger.info(f"Deleted {name}.v{version} ({freed} bytes)")
        return freed
