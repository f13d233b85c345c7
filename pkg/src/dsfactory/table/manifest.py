"""
Dataset manifests: one immutable dataset version, serialized as canonical JSON.
"""

import os
import json
import logging
from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from dsfactory.engine.descriptor import OperationDescriptor
from dsfactory.errors import Corrupt, Missing
from dsfactory.table.schema import Schema
from dsfactory.utils import atomic_write_bytes, canonical_json

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"


class DatasetManifest(BaseModel):
    """One immutable dataset version."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str
    version: int = Field(ge=1)
    fingerprint: str
    dataset_schema: Schema = Field(alias="schema")
    row_count: int = Field(ge=0)
    column_files: Dict[str, str]
    parents: List[str] = Field(default_factory=list)
    operation: OperationDescriptor
    created_at: str

    @property
    def ref(self):
        return f"{self.name}.v{self.version}"

    def to_document(self):
        doc = self.model_dump(mode="json", by_alias=True)
        doc["operation"] = self.operation.canonical()
        return doc

    def to_bytes(self):
        return canonical_json(self.to_document(), allow_floats=False)

    @classmethod
    def from_bytes(cls, data):
        try:
            return cls.model_validate(json.loads(data.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
            raise Corrupt(f"unreadable manifest: {e}")


def write_manifest(manifest, directory):
    """
    Write a manifest into a version directory as canonical JSON.

    Args:
        manifest (DatasetManifest): Manifest to write
        directory (str): Version directory
    """
    atomic_write_bytes(os.path.join(directory, MANIFEST_FILENAME), manifest.to_bytes())


def read_manifest(directory):
    """
    Read a version directory's manifest.

    Non-canonical (for example hand-edited) manifests are accepted.

    Args:
        directory (str): Version directory

    Returns:
        DatasetManifest: Parsed manifest
    """
    path = os.path.join(directory, MANIFEST_FILENAME)
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        raise Missing(f"no manifest at {path}")
    return DatasetManifest.from_bytes(data)
