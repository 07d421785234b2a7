"""Byte transports carrying BridgeFrames between the station and robots.

Endpoints are addressed by id: ``STATION`` (-1) or a robot id. Both transports
move the exact same frame bytes; the loopback one is deterministic and used by
tests, the UDP one exercises a real socket path for demos.
"""
from __future__ import annotations

import socket
import time
from collections import defaultdict, deque

from .channel import STATION


class LoopbackTransport:
    def __init__(self):
        self._queues: dict[int, deque[bytes]] = defaultdict(deque)
        self.sent = 0

    def send(self, endpoint: int, data: bytes) -> None:
        self._queues[endpoint].append(bytes(data))
        self.sent += 1

    def recv_all(self, endpoint: int, expected: int = 0) -> list[bytes]:
        q = self._queues[endpoint]
        out = list(q)
        q.clear()
        return out

    def close(self) -> None:
        self._queues.clear()


class UdpTransport:
    """One datagram per frame over local UDP sockets.

    The station listens on ``station_port`` (0 picks a free port); each robot
    gets its own socket on an ephemeral port. Delivery timing is wall-clock, so
    runs over this transport are not bit-reproducible.
    """

    def __init__(self, n_robots: int, host: str = "127.0.0.1", station_port: int = 0, timeout: float = 0.05):
        self.host = host
        self.timeout = timeout
        self._socks: dict[int, socket.socket] = {}
        self._addrs: dict[int, tuple[str, int]] = {}
        try:
            for ep, port in [(STATION, station_port)] + [(i, 0) for i in range(n_robots)]:
                s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
                s.bind((host, port))
                self._socks[ep] = s
                self._addrs[ep] = s.getsockname()
        except OSError:
            self.close()
            raise
        self._tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sent = 0

    @property
    def station_address(self) -> tuple[str, int]:
        return self._addrs[STATION]

    def send(self, endpoint: int, data: bytes) -> None:
        self._tx.sendto(bytes(data), self._addrs[endpoint])
        self.sent += 1

    def recv_all(self, endpoint: int, expected: int = 0) -> list[bytes]:
        """Drain the endpoint's socket, waiting up to ``timeout`` for ``expected`` datagrams."""
        s = self._socks[endpoint]
        out = []
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic() if len(out) < expected else 0.0
            s.settimeout(max(remaining, 0.0))
            try:
                data, _ = s.recvfrom(2048)
            except (BlockingIOError, socket.timeout):
                break
            out.append(data)
        return out

    def close(self) -> None:
        for s in self._socks.values():
            s.close()
        self._socks.clear()
        tx = getattr(self, "_tx", None)
        if tx is not None:
            tx.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
