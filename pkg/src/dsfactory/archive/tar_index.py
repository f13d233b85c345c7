#!/usr/bin/env python3
"""
Tar Archive Indexer

This module walks tar headers through ranged reads and records where every
regular-file member's data lives, so a sample can later be fetched with a single
ranged GET. Only headers (plus GNU long-name and pax payloads) are interpreted;
member data is never decoded.
"""

import logging
from typing import NamedTuple

from dsfactory.errors import (
    BadChecksum,
    BadMagic,
    CompressedArchive,
    DuplicateMember,
    TruncatedArchive,
    UnsupportedHeader,
)

logger = logging.getLogger(__name__)

# Constants
BLOCK_SIZE = 512
# Headers only by default; a wider window trades fetched bytes for fewer GETs
# on archives of very small members.
DEFAULT_READAHEAD = 0
ZERO_BLOCK = bytes(BLOCK_SIZE)

USTAR_MAGICS = (b"ustar\x0000", b"ustar  \x00", bytes(8))
COMPRESSED_MAGICS = {
    b"\x1f\x8b": "gzip",
    b"BZh": "bzip2",
    b"\xfd7zXZ\x00": "xz",
    b"\x28\xb5\x2f\xfd": "zstd",
}

REGULAR_TYPES = (b"0", b"\x00")
DIRECTORY_TYPE = b"5"
GNU_LONGNAME_TYPE = b"L"
PAX_TYPE = b"x"


class TarMember(NamedTuple):
    """Location of one regular-file member's data inside an archive."""

    member_path: str
    data_offset: int
    data_length: int
    typeflag: bytes = b"0"


def _padded(size):
    return ((size + BLOCK_SIZE - 1) // BLOCK_SIZE) * BLOCK_SIZE


def _cstring(field):
    return field.split(b"\x00", 1)[0].decode("utf-8", errors="replace")


def parse_number(field):
    """
    Parse a numeric header field.

    Octal text terminated by NUL or space, or GNU base-256 when the high bit of
    the first byte is set.

    Args:
        field (bytes): Raw header field

    Returns:
        int: Parsed value
    """
    if field and field[0] & 0x80:
        if field[0] == 0xFF:
            raise UnsupportedHeader("negative base-256 numeric field")
        return int.from_bytes(bytes([field[0] & 0x7F]) + field[1:], "big")
    text = field.replace(b"\x00", b" ").strip()
    if not text:
        return 0
    try:
        return int(text, 8)
    except ValueError:
        raise UnsupportedHeader(f"invalid octal field {field!r}")


def header_checksum(block):
    """
    Compute the header checksum with the checksum field read as spaces.

    Returns:
        tuple[int, int]: (unsigned sum, signed sum)
    """
    unsigned = sum(block[:148]) + 8 * 0x20 + sum(block[156:])
    signed = (
        sum(b - 256 if b > 127 else b for b in block[:148])
        + 8 * 0x20
        + sum(b - 256 if b > 127 else b for b in block[156:])
    )
    return unsigned, signed


def parse_pax_path(payload):
    """
    Extract the `path` keyword from pax extended header records.

    Args:
        payload (bytes): Extended header data

    Returns:
        str | None: Path override, if present
    """
    path = None
    pos = 0
    while pos < len(payload):
        space = payload.find(b" ", pos)
        if space < 0:
            break
        try:
            length = int(payload[pos:space])
        except ValueError:
            raise UnsupportedHeader("malformed pax record length")
        if length <= 0:
            raise UnsupportedHeader("malformed pax record length")
        record = payload[space + 1:pos + length]
        if record.endswith(b"\n"):
            record = record[:-1]
        key, sep, value = record.partition(b"=")
        if sep and key == b"path":
            path = value.decode("utf-8", errors="replace")
        pos += length
    return path


class _WindowReader:
    """Serves small reads from a read-ahead window fetched with ranged GETs."""

    def __init__(self, storage, uri, size, readahead):
        self.storage = storage
        self.uri = uri
        self.size = size
        self.readahead = readahead
        self.start = 0
        self.buf = b""

    def read(self, offset, length):
        if offset + length > self.size:
            raise TruncatedArchive(
                f"{self.uri} ends at {self.size} bytes, needed [{offset}, {offset + length})"
            )
        if length == 0:
            return b""
        if self.start <= offset and offset + length <= self.start + len(self.buf):
            rel = offset - self.start
            return self.buf[rel:rel + length]
        want = min(max(length, self.readahead), self.size - offset)
        self.buf = self.storage.read_range(self.uri, (offset, want))
        self.start = offset
        return self.buf[:length]


def index_tar(uri, storage, readahead=DEFAULT_READAHEAD):
    """
    Index the regular-file members of a tar archive.

    Args:
        uri (str | SourceUri): Archive location
        storage (Storage): Storage session used for ranged reads
        readahead (int): Window size in bytes; 0 reads each 512-byte header alone

    Returns:
        list[TarMember]: One entry per regular file, in archive order
    """
    size = storage.stat(uri)
    reader = _WindowReader(storage, uri, size, readahead)
    members = []
    seen = set()
    offset = 0
    long_name = None
    pax_path = None

    if size == 0:
        return members

    while True:
        if offset == size:
            raise TruncatedArchive(f"{uri} ends without end-of-archive blocks")
        block = reader.read(offset, BLOCK_SIZE)

        if offset == 0:
            for magic, name in COMPRESSED_MAGICS.items():
                if block.startswith(magic):
                    raise CompressedArchive(
                        f"{uri} is {name}-compressed; compressed archives cannot be randomly accessed"
                    )

        if block == ZERO_BLOCK:
            if offset + 2 * BLOCK_SIZE <= size:
                if reader.read(offset + BLOCK_SIZE, BLOCK_SIZE) != ZERO_BLOCK:
                    raise TruncatedArchive(f"isolated zero block at offset {offset} in {uri}")
            break

        magic = block[257:265]
        if magic not in USTAR_MAGICS:
            raise BadMagic(f"{uri}: no tar header magic at offset {offset}")

        stored = block[148:156].replace(b"\x00", b" ").strip()
        try:
            stored_sum = int(stored, 8)
        except ValueError:
            raise BadChecksum(f"{uri}: unreadable checksum field at offset {offset}")
        if stored_sum not in header_checksum(block):
            raise BadChecksum(f"{uri}: header checksum mismatch at offset {offset}")

        typeflag = block[156:157]
        member_size = parse_number(block[124:136])
        data_offset = offset + BLOCK_SIZE
        if data_offset + member_size > size:
            raise TruncatedArchive(f"{uri}: member data at {data_offset} runs past end of archive")
        next_offset = data_offset + _padded(member_size)

        if typeflag == GNU_LONGNAME_TYPE:
            long_name = _cstring(reader.read(data_offset, member_size))
        elif typeflag == PAX_TYPE:
            override = parse_pax_path(reader.read(data_offset, member_size))
            if override is not None:
                pax_path = override
        elif typeflag in REGULAR_TYPES or typeflag == DIRECTORY_TYPE:
            name = _cstring(block[0:100])
            if magic == USTAR_MAGICS[0]:
                prefix = _cstring(block[345:500])
                if prefix:
                    name = f"{prefix}/{name}"
            if long_name is not None:
                name = long_name
            if pax_path is not None:
                name = pax_path
            long_name = None
            pax_path = None

            if typeflag in REGULAR_TYPES:
                if not name:
                    raise UnsupportedHeader(f"{uri}: regular file with empty name at offset {offset}")
                if name in seen:
                    raise DuplicateMember(f"{uri}: duplicate member path '{name}'")
                seen.add(name)
                members.append(TarMember(name, data_offset, member_size, b"0"))
        else:
            raise UnsupportedHeader(
                f"{uri}: unsupported tar typeflag {typeflag!r} at offset {offset}"
            )

        offset = next_offset

    logger.info(f"Indexed {len(members)} members of {uri} ({storage.stats.get_count} GETs so far)")
    return members


def verify_member(uri, member, storage):
    """
    Fetch a member's payload through its index entry.

    Args:
        uri (str | SourceUri): Archive location
        member (TarMember): Entry from index_tar on the same archive
        storage (Storage): Storage session

    Returns:
        bytes: Member payload
    """
    if member.data_length == 0:
        return b""
    return storage.read_range(uri, (member.data_offset, member.data_length))
