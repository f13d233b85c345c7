#!/usr/bin/env python3
"""
User-Defined Functions

UDF specifications, their identity for fingerprinting, and the builtin UDF
registry (`byte_len`, `sha256_hex`, `hist_embed`).
"""

import logging
import hashlib
from typing import Callable, Dict, List, Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dsfactory.config import DEFAULT_BATCH_SIZE
from dsfactory.errors import UdfBadOutput, UnknownUdf
from dsfactory.table.schema import INT64, NAME_PATTERN, UTF8, ColumnType, fvec
from dsfactory.utils import canonical_json, sha256_hex

logger = logging.getLogger(__name__)

HIST_BINS = 256


class OutputColumn(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    type: ColumnType

    @field_validator("name")
    @classmethod
    def _check_name(cls, name):
        if not NAME_PATTERN.match(name):
            raise ValueError(f"invalid output column name '{name}'")
        return name

    @classmethod
    def parse(cls, text):
        """
        Parse `name:type[:dim]`, for example `embed:fvec:64` or `score:float64`.

        Args:
            text (str): Output column spelling

        Returns:
            OutputColumn: Parsed column
        """
        name, sep, type_text = text.partition(":")
        if not sep:
            raise ValueError(f"output column '{text}' is not of the form name:type[:dim]")
        return cls(name=name, type=ColumnType.parse(type_text))

    def describe(self):
        return f"{self.name}:{self.type}"


class UdfSpec(BaseModel):
    """How to run one UDF and what it produces."""

    model_config = ConfigDict(frozen=True)

    udf_id: str
    udf_version: str = "1"
    mode: Literal["builtin", "subprocess"] = "builtin"
    command: List[str] = Field(default_factory=list)
    outputs: List[OutputColumn]
    needs_sample_bytes: bool = True
    input_columns: List[str] = Field(default_factory=list)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if not self.outputs:
            raise ValueError("a UDF must declare at least one output column")
        names = [o.name for o in self.outputs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate UDF output columns {names}")
        if self.mode == "subprocess" and not self.command:
            raise ValueError("subprocess UDFs need a command")
        return self

    @property
    def command_sha256(self):
        return sha256_hex(canonical_json(list(self.command)))

    def identity_params(self):
        """
        Parameters that identify this UDF in an operation descriptor.

        Batch size is excluded: results do not depend on it.
        """
        params = {
            "mode": self.mode,
            "needs_sample_bytes": "true" if self.needs_sample_bytes else "false",
            "outputs": ",".join(o.describe() for o in self.outputs),
        }
        if self.input_columns:
            params["input_columns"] = ",".join(self.input_columns)
        if self.mode == "subprocess":
            params["command_sha256"] = self.command_sha256
        return params


class UdfRow(NamedTuple):
    """One row handed to a UDF."""

    uid: str
    sample: Optional[bytes]
    attrs: Dict[str, object]


def byte_len(rows):
    return [[len(r.sample) for r in rows]]


def sha256_payload(rows):
    return [[hashlib.sha256(r.sample).hexdigest() for r in rows]]


def byte_histogram(payload):
    """
    L1-normalized 256-bin histogram of a payload's byte values.

    Args:
        payload (bytes): Sample bytes

    Returns:
        np.ndarray | None: float32 vector, or None for an empty payload
    """
    if not payload:
        return None
    counts = np.bincount(np.frombuffer(payload, dtype=np.uint8), minlength=HIST_BINS)
    return (counts / counts.sum()).astype(np.float32)


def hist_embed(rows):
    return [[byte_histogram(r.sample) for r in rows]]


class BuiltinUdf(NamedTuple):
    fn: Callable
    outputs: List[OutputColumn]


BUILTIN_UDFS = {
    "byte_len": BuiltinUdf(byte_len, [OutputColumn(name="byte_len", type=INT64)]),
    "sha256_hex": BuiltinUdf(sha256_payload, [OutputColumn(name="sha256", type=UTF8)]),
    "hist_embed": BuiltinUdf(hist_embed, [OutputColumn(name="embed", type=fvec(HIST_BINS))]),
}


def builtin_spec(udf_id, output_name=None, batch_size=DEFAULT_BATCH_SIZE):
    """
    Build the spec of a builtin UDF.

    Args:
        udf_id (str): Registry name
        output_name (str): Optional name for the single output column
        batch_size (int): Rows per batch

    Returns:
        UdfSpec: Builtin spec
    """
    if udf_id not in BUILTIN_UDFS:
        raise UnknownUdf(f"unknown builtin UDF '{udf_id}' (known: {', '.join(sorted(BUILTIN_UDFS))})")
    outputs = BUILTIN_UDFS[udf_id].outputs
    if output_name:
        outputs = [OutputColumn(name=output_name, type=outputs[0].type)]
    return UdfSpec(udf_id=udf_id, udf_version="1", mode="builtin", outputs=outputs, batch_size=batch_size)


class BuiltinRunner:
    """Runs a builtin UDF with the same interface as a subprocess runner."""

    def __init__(self, spec):
        if spec.udf_id not in BUILTIN_UDFS:
            raise UnknownUdf(f"unknown builtin UDF '{spec.udf_id}'")
        self.spec = spec
        self.fn = BUILTIN_UDFS[spec.udf_id].fn

    def start(self):
        return self

    def run_batch(self, rows):
        columns = self.fn(rows)
        if len(columns) != len(self.spec.outputs) or any(len(c) != len(rows) for c in columns):
            raise UdfBadOutput(f"builtin {self.spec.udf_id} returned the wrong number of values")
        return columns

    def close(self):
        pass
