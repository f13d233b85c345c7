"""
Helper for writing subprocess UDFs in Python.

A plugin script declares its output columns and a batch function, then calls
`serve`:

    from dsfactory.engine.plugin import serve

    def run(rows):
        return [[len(row["sample"]) for row in rows]]

    if __name__ == "__main__":
        serve([("n_bytes", "int64")], run)
"""

import sys
import base64
import logging

from dsfactory.engine.subprocess_runner import PROTOCOL_VERSION, read_frame, write_frame
from dsfactory.errors import ProtocolViolation
from dsfactory.table.schema import ColumnType

logger = logging.getLogger(__name__)


def _jsonable(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def serve(outputs, fn, stdin=None, stdout=None):
    """
    Answer the framed protocol until the runner sends `end`.

    Args:
        outputs (list[tuple[str, str]]): (column name, type spelling) pairs,
            for example ("embed", "fvec:64")
        fn (callable): Receives a list of row dicts with keys uid, sample
            (bytes or None) and attrs; returns one value list per output column
        stdin: Binary input stream (defaults to the process standard input)
        stdout: Binary output stream (defaults to the process standard output)

    Returns:
        int: Exit status, 0 after a clean end frame
    """
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    columns = []
    for name, type_text in outputs:
        col_type = ColumnType.parse(type_text)
        columns.append({"name": name, "type": col_type.tag, "dim": col_type.dim})

    hello = read_frame(stdin)
    if hello is None or hello.get("type") != "hello":
        raise ProtocolViolation("expected a hello frame")
    if hello.get("proto") != PROTOCOL_VERSION:
        raise ProtocolViolation(f"unsupported protocol version {hello.get('proto')}")
    write_frame(stdout, {"type": "schema", "columns": columns})

    while True:
        message = read_frame(stdin)
        if message is None or message.get("type") == "end":
            return 0
        if message.get("type") != "batch":
            raise ProtocolViolation(f"unexpected {message.get('type')!r} frame")
        rows = [
            {
                "uid": row["uid"],
                "sample": base64.b64decode(row["sample_b64"]) if row.get("sample_b64") is not None else None,
                "attrs": row.get("attrs") or {},
            }
            for row in message.get("rows", [])
        ]
        if rows:
            values = fn(rows)
        else:
            values = [[] for _ in columns]
        write_frame(stdout, {"type": "result", "values": [[_jsonable(v) for v in col] for col in values]})
