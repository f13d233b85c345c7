"""
Error hierarchy for Dataset Factory.

Every error carries the exit code the command line reports for its category:
2 for user errors, 3 for data errors and 4 for I/O errors.
"""

EXIT_OK = 0
EXIT_USER = 2
EXIT_DATA = 3
EXIT_IO = 4


class DatasetFactoryError(Exception):
    """Base class for all Dataset Factory errors."""

    exit_code = EXIT_DATA

    @property
    def kind(self):
        return type(self).__name__


class UserError(DatasetFactoryError):
    exit_code = EXIT_USER


class DataError(DatasetFactoryError):
    exit_code = EXIT_DATA


class IoError(DatasetFactoryError):
    exit_code = EXIT_IO


# storage

class NotFound(UserError):
    pass


class SchemeUnsupported(UserError):
    pass


class InvalidUri(UserError):
    pass


class IoFailure(IoError):
    pass


class RangeOutOfBounds(IoError):
    pass


class HttpRangeUnsupported(IoError):
    pass


# archive

class BadMagic(DataError):
    pass


class CompressedArchive(BadMagic):
    pass


class BadChecksum(DataError):
    pass


class TruncatedArchive(DataError):
    pass


class UnsupportedHeader(DataError):
    pass


class DuplicateMember(DataError):
    pass


# table codec and manifests

class InvariantViolation(DataError):
    pass


class BadVersion(DataError):
    pass


class Truncated(DataError):
    pass


class Corrupt(DataError):
    pass


class Missing(IoError):
    pass


# expressions

class ExprSyntaxError(UserError):
    """Raised when an expression cannot be parsed."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class UnknownColumn(UserError):
    pass


class UnknownParam(UserError):
    pass


class TypeMismatch(UserError):
    pass


class DimMismatch(UserError):
    pass


class BadParam(UserError):
    pass


# engine

class JoinKeyMissing(DataError):
    pass


class DuplicateKey(DataError):
    pass


class SchemaConflict(DataError):
    pass


class RaggedVector(DataError):
    pass


class ColumnExists(UserError):
    pass


class NonOrderableType(UserError):
    pass


class SchemaMismatch(DataError):
    pass


class DuplicateUid(DataError):
    pass


class UdfCrashed(DataError):
    pass


class UdfBadOutput(DataError):
    pass


class ProtocolViolation(DataError):
    pass


class UdfTimeout(DataError):
    pass


class UnknownUdf(UserError):
    pass


class NotRowLocal(UserError):
    pass


class DescriptorMismatch(UserError):
    pass


# catalog

class CatalogLocked(IoError):
    pass


class InvalidName(UserError):
    pass


class NonEmptyDir(UserError):
    pass


# cache

class CorruptEntry(IoError):
    pass


# cli

class BadShard(UserError):
    pass


class BadPipeline(UserError):
    pass
