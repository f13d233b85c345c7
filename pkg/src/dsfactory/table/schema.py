"""
Column types and dataset schemas.
"""

import re
from typing import List, Literal

from pydantic import BaseModel, ConfigDict, RootModel, model_validator

from dsfactory.errors import InvariantViolation

NAME_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

UID_COLUMN = "_uid"
REF_SOURCE_URI = "_ref.source_uri"
REF_MEMBER_PATH = "_ref.member_path"
REF_OFFSET = "_ref.offset"
REF_LENGTH = "_ref.length"
REF_COLUMNS = (REF_SOURCE_URI, REF_MEMBER_PATH, REF_OFFSET, REF_LENGTH)
RESERVED_COLUMNS = (UID_COLUMN,) + REF_COLUMNS

TypeTag = Literal["int64", "float64", "bool", "utf8", "bytes", "fvec"]
TAG_CODES = {"int64": 0, "float64": 1, "bool": 2, "utf8": 3, "bytes": 4, "fvec": 5}
CODE_TAGS = {code: tag for tag, code in TAG_CODES.items()}
NUMERIC_TAGS = ("int64", "float64")


class ColumnType(BaseModel):
    """A column's value type; `dim` is the vector width for fvec and 0 otherwise."""

    model_config = ConfigDict(frozen=True)

    tag: TypeTag
    dim: int = 0

    @model_validator(mode="after")
    def _check_dim(self):
        if (self.tag == "fvec") != (self.dim >= 1):
            raise ValueError(f"dim must be >= 1 iff tag is fvec (tag={self.tag}, dim={self.dim})")
        return self

    @classmethod
    def parse(cls, text):
        """
        Parse `int64`, `utf8`, `fvec:64` or `fvec(64)`.

        Args:
            text (str): Type spelling

        Returns:
            ColumnType: Parsed type
        """
        text = text.strip()
        match = re.fullmatch(r"fvec[:(](\d+)\)?", text)
        if match:
            return cls(tag="fvec", dim=int(match.group(1)))
        return cls(tag=text)

    @property
    def is_numeric(self):
        return self.tag in NUMERIC_TAGS

    @property
    def code(self):
        return TAG_CODES[self.tag]

    def __str__(self):
        return f"fvec({self.dim})" if self.tag == "fvec" else self.tag


INT64 = ColumnType(tag="int64")
FLOAT64 = ColumnType(tag="float64")
BOOL = ColumnType(tag="bool")
UTF8 = ColumnType(tag="utf8")
BYTES = ColumnType(tag="bytes")


def fvec(dim):
    return ColumnType(tag="fvec", dim=dim)


class Field(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    type: ColumnType
    nullable: bool = True


RESERVED_FIELDS = (
    Field(name=UID_COLUMN, type=UTF8, nullable=False),
    Field(name=REF_SOURCE_URI, type=UTF8, nullable=False),
    Field(name=REF_MEMBER_PATH, type=UTF8, nullable=False),
    Field(name=REF_OFFSET, type=INT64, nullable=False),
    Field(name=REF_LENGTH, type=INT64, nullable=False),
)


def validate_column_name(name):
    if name in RESERVED_COLUMNS:
        return name
    if not NAME_PATTERN.match(name or ""):
        raise InvariantViolation(f"invalid column name '{name}'")
    return name


class Schema(RootModel[List[Field]]):
    """Ordered, uniquely named columns; the reserved sample-pointer columns are always present."""

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_names(self):
        names = [f.name for f in self.root]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in schema: {names}")
        for name in names:
            if name not in RESERVED_COLUMNS and not NAME_PATTERN.match(name):
                raise ValueError(f"invalid column name '{name}'")
        for reserved in RESERVED_FIELDS:
            if reserved not in self.root:
                raise ValueError(f"schema lacks reserved column {reserved.name}")
        return self

    @classmethod
    def for_samples(cls, attributes=()):
        """
        Build a schema of the reserved columns followed by attribute fields.

        Args:
            attributes (iterable[Field]): Attribute columns

        Returns:
            Schema: Full schema
        """
        return cls(list(RESERVED_FIELDS) + list(attributes))

    @property
    def fields(self):
        return list(self.root)

    @property
    def names(self):
        return [f.name for f in self.root]

    @property
    def attribute_fields(self):
        return [f for f in self.root if f.name not in RESERVED_COLUMNS]

    def has(self, name):
        return any(f.name == name for f in self.root)

    def field(self, name):
        for f in self.root:
            if f.name == name:
                return f
        return None

    def type_of(self, name):
        f = self.field(name)
        return f.type if f is not None else None

    def with_fields(self, new_fields):
        return Schema(list(self.root) + list(new_fields))

    def canonical(self):
        return [
            {"name": f.name, "nullable": f.nullable, "type": {"dim": f.type.dim, "tag": f.type.tag}}
            for f in self.root
        ]
