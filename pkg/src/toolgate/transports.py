"""Client-side transports for talking to upstream tool servers.

Two wire flavors: newline-delimited JSON-RPC over a child process's stdio,
and HTTP POST of one message per request. Both satisfy the federation
Transport protocol: send one message, get the decoded reply (None for
notifications, which have no reply by definition).
"""

from __future__ import annotations

import subprocess
import urllib.error
import urllib.request

from . import rpc
from .errors import ToolgateError


class TransportFailure(ToolgateError):
    pass


class ProcessTransport:
    """Spawns a server subprocess and exchanges newline-delimited messages."""

    def __init__(self, argv: list[str]):
        self.argv = list(argv)
        try:
            self.proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportFailure(f"cannot spawn {argv[0]!r}: {exc}") from exc

    def send(self, msg: rpc.RpcMessage) -> rpc.RpcMessage | None:
        proc = self.proc
        if proc.poll() is not None:
            raise TransportFailure(f"server process exited with {proc.returncode}")
        assert proc.stdin is not None and proc.stdout is not None
        line = rpc.encode(msg).decode("utf-8")
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportFailure(f"server pipe closed: {exc}") from exc
        if msg.kind == rpc.KIND_NOTIFICATION:
            return None
        reply = proc.stdout.readline()
        if not reply:
            raise TransportFailure("server closed its output without replying")
        return rpc.decode(reply)

    def close(self) -> None:
        if self.proc.poll() is None:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class HttpTransport:
    """POSTs each message to a /rpc endpoint, one message per request."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def send(self, msg: rpc.RpcMessage) -> rpc.RpcMessage | None:
        req = urllib.request.Request(
            self.url,
            data=rpc.encode(msg),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                if resp.status == 204:
                    return None
                body = resp.read()
        except urllib.error.URLError as exc:
            raise TransportFailure(f"cannot reach {self.url}: {exc}") from exc
        if not body:
            return None
        return rpc.decode(body)
