"""Network implementations: a TCP line server and an HTTP/1.1 wrapper.

A network handle owns a bound listening socket (or wraps another
handle) and serves a callback of shape ``request-text -> bytes or store
error``.  The TCP layer speaks a one-line protocol: each connection
sends a single request line and receives the raw reply.  The HTTP layer
reads a full request from the wrapped handle, passes the path to the
callback, and wraps the result in a response with the right status and
headers.
"""

from __future__ import annotations

import socket
from typing import Callable, Iterator

from ..errors import DeviceStartError
from .stores import ReadResult, UnknownFile, is_store_error

Callback = Callable[[str], ReadResult]

_MAX_LINE = 64 * 1024


class Connection:
    """Buffered raw access to one accepted socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    def read_line(self) -> str:
        while b"\n" not in self._buf:
            if len(self._buf) > _MAX_LINE:
                raise ValueError("request line too long")
            chunk = self._sock.recv(4096)
            if not chunk:
                break
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.rstrip(b"\r").decode("utf-8", errors="replace")

    def read_exact(self, size: int) -> bytes:
        while len(self._buf) < size:
            chunk = self._sock.recv(4096)
            if not chunk:
                break
            self._buf += chunk
        data, self._buf = self._buf[:size], self._buf[size:]
        return data

    def send(self, data: bytes) -> None:
        self._sock.sendall(data)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        self._sock.close()


class TcpipHandle:
    """Bound listening socket speaking the one-line request protocol."""

    def __init__(self, port: int):
        if not (1 <= port <= 65535):
            raise DeviceStartError(f"port {port} is out of range [1, 65535]")
        self.port = port
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind(("127.0.0.1", port))
            sock.listen(8)
        except OSError as e:
            sock.close()
            raise DeviceStartError(f"cannot bind port {port}: {e}") from e
        self._sock = sock

    def connections(self) -> Iterator[Connection]:
        """Sequential accept loop; ends when the handle is closed."""
        while True:
            try:
                client, _addr = self._sock.accept()
            except OSError:
                return
            yield Connection(client)

    def listen(self, callback: Callback) -> None:
        for conn in self.connections():
            try:
                line = conn.read_line()
                result = callback(line)
                if is_store_error(result):
                    conn.send(result.pretty().encode("utf-8") + b"\n")
                else:
                    conn.send(result)
            finally:
                conn.close()

    def close(self) -> None:
        self._sock.close()


def _http_response(status: int, reason: str, body: bytes) -> bytes:
    head = (
        f"HTTP/1.1 {status} {reason}\r\n"
        f"Content-Length: {len(body)}\r\n"
        f"Content-Type: application/octet-stream\r\n"
        f"Connection: close\r\n"
        f"\r\n"
    )
    return head.encode("ascii") + body


class HttpHandle:
    """HTTP/1.1 subset over a wrapped network handle: GET only,
    Content-Length framing, no keep-alive."""

    def __init__(self, inner):
        self.inner = inner
        self.port = getattr(inner, "port", None)

    def connections(self) -> Iterator[Connection]:
        return self.inner.connections()

    def listen(self, callback: Callback) -> None:
        for conn in self.inner.connections():
            try:
                self._serve_one(conn, callback)
            finally:
                conn.close()

    def _serve_one(self, conn: Connection, callback: Callback) -> None:
        try:
            request = conn.read_line()
            parts = request.split(" ")
            if len(parts) != 3 or not parts[2].startswith("HTTP/"):
                raise ValueError("malformed request line")
            method, path = parts[0], parts[1]
            while True:  # drain headers
                header = conn.read_line()
                if header == "":
                    break
            if method != "GET":
                raise ValueError(f"unsupported method {method}")
        except ValueError:
            conn.send(_http_response(400, "Bad Request", b"bad request\n"))
            return
        result = callback(path)
        if isinstance(result, UnknownFile):
            conn.send(_http_response(404, "Not Found", result.pretty().encode("utf-8") + b"\n"))
        elif is_store_error(result):
            conn.send(_http_response(500, "Internal Server Error",
                                     result.pretty().encode("utf-8") + b"\n"))
        else:
            conn.send(_http_response(200, "OK", result))

    def close(self) -> None:
        self.inner.close()


def network_listen(handle, callback: Callback) -> None:
    """Serve the callback on the handle until it is closed or interrupted."""
    handle.listen(callback)
