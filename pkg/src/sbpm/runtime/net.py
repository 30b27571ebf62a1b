"""Persistent TCP links between engine nodes.

One duplex connection per node pair, negotiated with HELLO/HELLO_ACK; either
side may dial. MSG frames carry envelopes toward the receiving dispatcher,
which answers ACK (delivered), NACK(pool_full) (parked; a late ACK follows
when the pool drains), or NACK(reason) for hard failures. Lost links
reconnect with exponential backoff (100 ms base, doubling, 5 s cap).
"""

from __future__ import annotations

import socket
import struct
import threading
import time

from sbpm.runtime.envelope import Envelope
from sbpm.runtime.wire import (
    ACK,
    HELLO,
    HELLO_ACK,
    MAX_FRAME_BYTES,
    MSG,
    NACK,
    PING,
    PONG,
    FrameTooLarge,
    WireError,
    WireFrame,
    decode_payload,
    encode_frame,
)

BACKOFF_BASE_S = 0.1
BACKOFF_CAP_S = 5.0


class FrameHandler:
    """Inbound frame callbacks; the engine subclasses this. All no-ops."""

    def on_msg(self, node_id: str, instance_id: str, envelope: Envelope) -> tuple[str, "str | None"]:
        return "nack", "no handler"

    def on_ack(self, node_id: str, instance_id: str, envelope: Envelope) -> None:
        pass

    def on_nack(self, node_id: str, instance_id: str, envelope: Envelope, reason: str) -> None:
        pass

    def on_node_connected(self, node_id: str) -> None:
        pass


class _Link:
    def __init__(self, sock: socket.socket, node_id: str):
        self.sock = sock
        self.node_id = node_id
        self.write_lock = threading.Lock()
        self.alive = True

    def send(self, frame: WireFrame) -> None:
        data = encode_frame(frame)
        with self.write_lock:
            self.sock.sendall(data)

    def close(self) -> None:
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class NodeNetwork:
    """Frame listener plus outbound link registry for one engine node."""

    def __init__(self, node_id: str, handler: FrameHandler, host: str = "127.0.0.1", port: int = 0):
        self.node_id = node_id
        self.handler = handler
        self._links: dict[str, _Link] = {}
        self._peers: dict[str, tuple[str, int]] = {}
        self._lock = threading.Lock()
        self._closed = False

        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(16)
        self.host, self.port = self._listener.getsockname()
        threading.Thread(target=self._accept_loop, daemon=True, name=f"net-accept-{node_id}").start()

    # ------------------------------------------------------------- outbound

    def add_peer(self, node_id: str, host: str, port: int) -> None:
        with self._lock:
            self._peers[node_id] = (host, port)

    def send(self, node_id: str, frame: WireFrame) -> None:
        link = self._get_or_connect(node_id)
        try:
            link.send(frame)
        except OSError:
            self._drop_link(node_id)
            raise

    def send_msg(self, node_id: str, instance_id: str, envelope: Envelope) -> None:
        self.send(node_id, WireFrame(kind=MSG, node=self.node_id, instance=instance_id, envelope=envelope))

    def send_ack(self, node_id: str, instance_id: str, envelope: Envelope) -> None:
        self.send(
            node_id,
            WireFrame(kind=ACK, node=self.node_id, instance=instance_id, envelope=envelope, ack_seq=envelope.seq),
        )

    def send_nack(self, node_id: str, instance_id: str, envelope: Envelope, reason: str) -> None:
        self.send(
            node_id,
            WireFrame(
                kind=NACK, node=self.node_id, instance=instance_id,
                envelope=envelope, ack_seq=envelope.seq, reason=reason,
            ),
        )

    def _get_or_connect(self, node_id: str) -> _Link:
        with self._lock:
            link = self._links.get(node_id)
            if link is not None and link.alive:
                return link
            peer = self._peers.get(node_id)
        if peer is None:
            raise WireError(f"no address known for node {node_id!r}")
        return self._connect_with_backoff(node_id, peer)

    def _connect_with_backoff(self, node_id: str, peer: tuple[str, int]) -> _Link:
        delay = BACKOFF_BASE_S
        deadline = time.monotonic() + 10.0
        last_error: Exception | None = None
        while time.monotonic() < deadline and not self._closed:
            try:
                sock = socket.create_connection(peer, timeout=2.0)
                link = _Link(sock, node_id)
                link.send(WireFrame(kind=HELLO, node=self.node_id))
                with self._lock:
                    self._links[node_id] = link
                threading.Thread(
                    target=self._read_loop, args=(link,), daemon=True, name=f"net-read-{node_id}"
                ).start()
                return link
            except OSError as exc:
                last_error = exc
                time.sleep(delay)
                delay = min(delay * 2, BACKOFF_CAP_S)
        raise WireError(f"cannot reach node {node_id!r}: {last_error}")

    def _drop_link(self, node_id: str) -> None:
        with self._lock:
            link = self._links.pop(node_id, None)
        if link is not None:
            link.close()

    # -------------------------------------------------------------- inbound

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._read_loop, args=(_Link(sock, ""),), daemon=True).start()

    def _read_loop(self, link: _Link) -> None:
        sock = link.sock
        try:
            while not self._closed:
                frame = self._read_frame(sock)
                if frame is None:
                    break
                self._handle_frame(link, frame)
        except (OSError, WireError):
            pass
        finally:
            link.alive = False
            if link.node_id:
                with self._lock:
                    if self._links.get(link.node_id) is link:
                        del self._links[link.node_id]

    def _read_frame(self, sock: socket.socket) -> "WireFrame | None":
        header = _read_exactly(sock, 4)
        if header is None:
            return None
        (length,) = struct.unpack(">I", header)
        if length > MAX_FRAME_BYTES:
            raise FrameTooLarge(length)
        body = _read_exactly(sock, length)
        if body is None:
            return None
        return decode_payload(body)

    def _handle_frame(self, link: _Link, frame: WireFrame) -> None:
        if frame.kind == HELLO:
            link.node_id = frame.node
            with self._lock:
                self._links[frame.node] = link
            link.send(WireFrame(kind=HELLO_ACK, node=self.node_id))
            self.handler.on_node_connected(frame.node)
        elif frame.kind == HELLO_ACK:
            link.node_id = frame.node
            with self._lock:
                self._links.setdefault(frame.node, link)
            self.handler.on_node_connected(frame.node)
        elif frame.kind == PING:
            link.send(WireFrame(kind=PONG, node=self.node_id))
        elif frame.kind == PONG:
            pass
        elif frame.kind == MSG:
            assert frame.envelope is not None and frame.instance is not None
            result, reason = self.handler.on_msg(frame.node, frame.instance, frame.envelope)
            if result == "ack":
                link.send(WireFrame(kind=ACK, node=self.node_id, instance=frame.instance,
                                    envelope=frame.envelope, ack_seq=frame.envelope.seq))
            elif result == "nack":
                link.send(WireFrame(kind=NACK, node=self.node_id, instance=frame.instance,
                                    envelope=frame.envelope, ack_seq=frame.envelope.seq,
                                    reason=reason or "rejected"))
            # "parked": the dispatcher acks later, when the pool drains.
        elif frame.kind == ACK:
            assert frame.envelope is not None and frame.instance is not None
            self.handler.on_ack(frame.node, frame.instance, frame.envelope)
        elif frame.kind == NACK:
            assert frame.envelope is not None and frame.instance is not None
            self.handler.on_nack(frame.node, frame.instance, frame.envelope, frame.reason or "rejected")

    def close(self) -> None:
        self._closed = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            links = list(self._links.values())
            self._links.clear()
        for link in links:
            link.close()


def _read_exactly(sock: socket.socket, n: int) -> "bytes | None":
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf
