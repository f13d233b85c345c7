"""
Operation descriptors: the canonical definition of one stage, used for
fingerprints, provenance and staleness checks.
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from dsfactory.utils import canonical_json

OperationKind = Literal["etl", "filter", "mutate", "add_signals", "order_limit", "union"]
ROW_LOCAL_KINDS = ("filter", "mutate", "add_signals")


class SourceSpec(BaseModel):
    """
    One archive and the sidecar that describes it.

    archive_version is the storage change token of the archive (file mtime,
    HTTP ETag or Last-Modified) and sidecar_sha256 the digest of the sidecar
    bytes, so an edit that keeps both sizes still changes the descriptor.
    """

    model_config = ConfigDict(frozen=True)

    archive: str
    archive_size: int
    sidecar: Optional[str] = None
    sidecar_size: Optional[int] = None
    archive_version: Optional[str] = None
    sidecar_sha256: Optional[str] = None
    format: Literal["jsonl", "csv", "in-archive"] = "jsonl"


class OperationDescriptor(BaseModel):
    """
    Canonical stage definition.

    Only the fields relevant to `kind` are set; unset fields are omitted from
    the canonical form so that each logical operation has one serialization.
    """

    model_config = ConfigDict(frozen=True)

    kind: OperationKind
    expression_src: Optional[str] = None
    new_column: Optional[str] = None
    udf_id: Optional[str] = None
    udf_version: Optional[str] = None
    params: Dict[str, str] = Field(default_factory=dict)
    order_key: Optional[str] = None
    descending: Optional[bool] = None
    limit: Optional[int] = Field(default=None, ge=0)
    sources: Optional[List[SourceSpec]] = None

    @property
    def is_row_local(self):
        return self.kind in ROW_LOCAL_KINDS

    def canonical(self):
        return self.model_dump(mode="json", exclude_none=True)

    def canonical_bytes(self):
        return canonical_json(self.canonical(), allow_floats=False)
