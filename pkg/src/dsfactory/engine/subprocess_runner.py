#!/usr/bin/env python3
"""
Subprocess UDF Runner

Runs a UDF as a child process speaking the framed protocol over its standard
input and output. Every frame is a 4-byte big-endian length followed by a
UTF-8 JSON body.

    runner -> child   {"type": "hello", "proto": 1, "input_columns": [...], "needs_sample_bytes": bool}
    child  -> runner  {"type": "schema", "columns": [{"name": ..., "type": ..., "dim": ...}]}
    runner -> child   {"type": "batch", "rows": [{"uid": ..., "sample_b64": ..., "attrs": {...}}]}
    child  -> runner  {"type": "result", "values": [[col0 values...], [col1 values...]]}
    runner -> child   {"type": "end"}
"""

import json
import queue
import base64
import struct
import logging
import threading
import subprocess

from dsfactory.config import DEFAULT_UDF_TIMEOUT
from dsfactory.errors import ProtocolViolation, UdfCrashed, UdfTimeout

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
FRAME_HEADER = struct.Struct(">I")
MAX_FRAME = 1 << 31
STDERR_TAIL = 64 * 1024
EXIT_WAIT = 10.0

_EOF = object()


def write_frame(stream, message):
    """
    Write one frame.

    Args:
        stream: Binary writable stream
        message (dict): JSON-serializable message
    """
    body = json.dumps(message, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    stream.write(FRAME_HEADER.pack(len(body)) + body)
    stream.flush()


def _read_exact(stream, n):
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream):
    """
    Read one frame.

    Args:
        stream: Binary readable stream

    Returns:
        dict | None: Decoded message, or None at a clean end of stream
    """
    header = _read_exact(stream, FRAME_HEADER.size)
    if not header:
        return None
    if len(header) < FRAME_HEADER.size:
        raise ProtocolViolation("stream ended inside a frame header")
    (length,) = FRAME_HEADER.unpack(header)
    if length > MAX_FRAME:
        raise ProtocolViolation(f"frame of {length} bytes exceeds the frame limit")
    body = _read_exact(stream, length)
    if len(body) < length:
        raise ProtocolViolation(f"stream ended inside a {length}-byte frame")
    try:
        message = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolViolation(f"frame is not UTF-8 JSON: {e}")
    if not isinstance(message, dict) or "type" not in message:
        raise ProtocolViolation("frame body must be a JSON object with a 'type'")
    return message


def declared_columns(outputs):
    return [{"name": o.name, "type": o.type.tag, "dim": o.type.dim} for o in outputs]


class SubprocessRunner:
    """
    One running UDF child process.

    A reader thread moves frames from the child's standard output onto a queue
    so that every wait can honour the per-batch timeout.
    """

    def __init__(self, spec, timeout=DEFAULT_UDF_TIMEOUT):
        self.spec = spec
        self.timeout = timeout
        self.process = None
        self._frames = queue.Queue()
        self._stderr = bytearray()
        self._threads = []

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.kill()
        return False

    def _pump_stdout(self):
        try:
            while True:
                message = read_frame(self.process.stdout)
                if message is None:
                    break
                self._frames.put(message)
        except ProtocolViolation as e:
            self._frames.put(e)
        except (OSError, ValueError):
            pass
        self._frames.put(_EOF)

    def _pump_stderr(self):
        try:
            for chunk in iter(lambda: self.process.stderr.read(4096), b""):
                self._stderr.extend(chunk)
                if len(self._stderr) > STDERR_TAIL:
                    del self._stderr[:len(self._stderr) - STDERR_TAIL]
        except (OSError, ValueError):
            pass

    def diagnostics(self):
        return bytes(self._stderr).decode("utf-8", errors="replace").strip()

    def start(self):
        """
        Spawn the child and perform the hello/schema handshake.

        Returns:
            SubprocessRunner: self
        """
        try:
            self.process = subprocess.Popen(
                list(self.spec.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as e:
            raise UdfCrashed(f"cannot start UDF {self.spec.udf_id}: {e}")

        for target in (self._pump_stdout, self._pump_stderr):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)

        logger.debug(f"Started UDF {self.spec.udf_id} (pid {self.process.pid})")
        self._send({
            "type": "hello",
            "proto": PROTOCOL_VERSION,
            "input_columns": list(self.spec.input_columns),
            "needs_sample_bytes": self.spec.needs_sample_bytes,
        })
        reply = self._receive("schema")
        declared = reply.get("columns")
        expected = declared_columns(self.spec.outputs)
        if not isinstance(declared, list):
            self.kill()
            raise ProtocolViolation("schema reply has no column list")
        normalized = [
            {"name": c.get("name"), "type": c.get("type"), "dim": c.get("dim") or 0}
            for c in declared if isinstance(c, dict)
        ]
        if normalized != expected:
            self.kill()
            raise ProtocolViolation(f"UDF {self.spec.udf_id} declared columns {normalized}, expected {expected}")
        return self

    def _send(self, message):
        try:
            write_frame(self.process.stdin, message)
        except (BrokenPipeError, OSError, ValueError):
            raise self._crashed("closed its input")

    def _crashed(self, what):
        code = self.process.poll()
        if code is None:
            try:
                code = self.process.wait(timeout=EXIT_WAIT)
            except subprocess.TimeoutExpired:
                self.process.kill()
                code = self.process.wait()
        for thread in self._threads:
            thread.join(timeout=1.0)
        detail = self.diagnostics()
        message = f"UDF {self.spec.udf_id} {what} (exit code {code})"
        if detail:
            message += f": {detail}"
        return UdfCrashed(message)

    def _receive(self, expected_type):
        try:
            message = self._frames.get(timeout=self.timeout)
        except queue.Empty:
            self.kill()
            raise UdfTimeout(f"UDF {self.spec.udf_id} sent nothing for {self.timeout} s")
        if message is _EOF:
            raise self._crashed(f"ended its output while a {expected_type} frame was due")
        if isinstance(message, ProtocolViolation):
            self.kill()
            raise message
        if message.get("type") != expected_type:
            self.kill()
            raise ProtocolViolation(f"expected a {expected_type} frame, got {message.get('type')!r}")
        return message

    def run_batch(self, rows):
        """
        Send one batch and wait for its result.

        Args:
            rows (list[UdfRow]): Rows in batch order

        Returns:
            list[list]: One value list per output column, in batch order
        """
        self._send({
            "type": "batch",
            "rows": [
                {
                    "uid": row.uid,
                    "sample_b64": base64.b64encode(row.sample).decode("ascii") if row.sample is not None else None,
                    "attrs": row.attrs,
                }
                for row in rows
            ],
        })
        reply = self._receive("result")
        values = reply.get("values")
        if not isinstance(values, list) or len(values) != len(self.spec.outputs):
            self.kill()
            raise ProtocolViolation(
                f"result must hold {len(self.spec.outputs)} value arrays, got "
                f"{len(values) if isinstance(values, list) else type(values).__name__}"
            )
        for column in values:
            if not isinstance(column, list) or len(column) != len(rows):
                self.kill()
                raise ProtocolViolation(f"result value arrays must hold {len(rows)} values each")
        return values

    def close(self):
        """Send the end frame and require a clean exit."""
        if self.process is None:
            return
        if self.process.poll() is None:
            self._send({"type": "end"})
            try:
                self.process.stdin.close()
            except OSError:
                pass
            try:
                code = self.process.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self.kill()
                raise UdfTimeout(f"UDF {self.spec.udf_id} did not exit after the end frame")
        else:
            code = self.process.returncode
        for thread in self._threads:
            thread.join(timeout=1.0)
        self.process = None
        if code != 0:
            raise UdfCrashed(f"UDF {self.spec.udf_id} exited with code {code}: {self.diagnostics()}")

    def kill(self):
        if self.process is not None and self.process.poll() is None:
            self.process.kill()
            self.process.wait()
        self.process = None
