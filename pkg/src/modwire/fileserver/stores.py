"""Store implementations: direct filesystem access, build-time snapshots,
and an initially-empty network-fed store.

Reads never raise; they return the content bytes or a store error value
that every implementation can render as one human-readable line.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class UnknownFile:
    """Base error tag every store can produce."""

    name: str

    def pretty(self) -> str:
        return f"Unknown_file: {self.name}"


@dataclass(frozen=True)
class IoFailure:
    """Direct-store extension tag for filesystem faults."""

    detail: str

    def pretty(self) -> str:
        return f"Io_failure: {self.detail}"


StoreError = UnknownFile | IoFailure

ReadResult = bytes | StoreError


def is_store_error(value: object) -> bool:
    return isinstance(value, (UnknownFile, IoFailure))


def store_read(handle, name: str) -> ReadResult:
    """Total read: the file bytes, or a renderable store error."""
    return handle.read(name)


class DirectStore:
    """Serves files straight from a directory root."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def read(self, name: str) -> ReadResult:
        target = (self.root / name).resolve()
        try:
            root = self.root.resolve()
            if root not in target.parents and target != root:
                return UnknownFile(name)
            if not target.is_file():
                return UnknownFile(name)
            return target.read_bytes()
        except OSError as e:
            return IoFailure(str(e))


class CrunchStore:
    """Immutable in-memory snapshot taken from a directory at build time."""

    def __init__(self, files: dict[str, bytes]):
        self._files = dict(files)

    def read(self, name: str) -> ReadResult:
        content = self._files.get(name)
        if content is None:
            return UnknownFile(name)
        return content


def snapshot_directory(root: Path) -> dict[str, bytes]:
    files = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            files[path.relative_to(root).as_posix()] = path.read_bytes()
    return files


def write_snapshot(path: Path, files: dict[str, bytes]) -> None:
    doc = {name: base64.b64encode(data).decode("ascii") for name, data in files.items()}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_snapshot(path: Path) -> dict[str, bytes]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {name: base64.b64decode(data) for name, data in doc.items()}


class NetStore:
    """Initially-empty store fed over the network.

    The upload protocol rides on the wrapped network handle: a request
    line ``PUT <name> <size>`` followed by exactly ``size`` payload bytes
    stores a file and answers ``OK``; any other line is a read of that
    name, answered with the file bytes or the rendered error.
    """

    def __init__(self, net):
        self.net = net
        self._files: dict[str, bytes] = {}

    def read(self, name: str) -> ReadResult:
        content = self._files.get(name)
        if content is None:
            return UnknownFile(name)
        return content

    def put(self, name: str, data: bytes) -> None:
        self._files[name] = data

    def serve_uploads(self) -> None:
        """Process upload/read requests until the network handle closes."""
        for conn in self.net.connections():
            try:
                line = conn.read_line()
                parts = line.split(" ")
                if len(parts) == 3 and parts[0] == "PUT":
                    try:
                        size = int(parts[2], 10)
                    except ValueError:
                        conn.send(b"ERR bad size\n")
                        continue
                    self.put(parts[1], conn.read_exact(size))
                    conn.send(b"OK\n")
                else:
                    result = self.read(line)
                    if is_store_error(result):
                        conn.send(result.pretty().encode("utf-8") + b"\n")
                    else:
                        conn.send(result)
            finally:
                conn.close()
