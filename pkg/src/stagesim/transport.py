"""Localhost socket transport for the task-queue protocol.

The local-process backend hosts its queues behind a small TCP server so
senders and receivers speak the documented frame format instead of sharing
Python objects. One server serves any number of named queues; clients hold a
persistent connection and issue request/reply frames.

Request payloads:
    connect: {"queue": name}                          -> {"ok": true, "sender": id}
    push:    {"queue": name, "sender": id, "item": {...}} -> {"ok": true}
    done:    {"queue": name, "sender": id}            -> {"ok": true}
    pull:    {"queue": name, "receiver": id}          -> {"ok": true, "result":
              "data"|"wait"|"empty", "item": {...}?}
Errors come back as {"ok": false, "error": msg} and surface as ProtocolError.
"""

from __future__ import annotations

import socket
import threading

from .errors import ProtocolError
from .queueproto import (
    PullKind,
    PullResult,
    SenderHandle,
    TaskQueue,
    _LEN,
    decode_frame,
    encode_frame,
)
from .workload import DataItem, ItemKind


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def _recv_frame(sock: socket.socket) -> tuple[str, dict] | None:
    header = _recv_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    body = _recv_exact(sock, length)
    if body is None:
        return None
    return decode_frame(header + body)


def _item_to_wire(item: DataItem) -> dict:
    return {"id": item.id, "size_mb": item.size_mb, "kind": item.kind.value}


def _item_from_wire(doc: dict) -> DataItem:
    return DataItem(id=doc["id"], size_mb=doc["size_mb"], kind=ItemKind(doc["kind"]))


class QueueServer:
    """Serves a set of named TaskQueues over localhost TCP."""

    def __init__(self, queues: dict[str, TaskQueue]):
        self._queues = queues
        self._handles: dict[tuple[str, int], SenderHandle] = {}
        self._handles_lock = threading.Lock()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(64)
        self.address: tuple[str, int] = self._sock.getsockname()
        self._closing = False
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return  # listener closed
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket) -> None:
        with conn:
            while True:
                try:
                    frame = _recv_frame(conn)
                except ProtocolError as exc:
                    conn.sendall(encode_frame("reply", {"ok": False, "error": str(exc)}))
                    return
                if frame is None:
                    return
                op, payload = frame
                try:
                    reply = self._apply(op, payload)
                except ProtocolError as exc:
                    reply = {"ok": False, "error": str(exc)}
                except KeyError as exc:
                    reply = {"ok": False, "error": f"unknown queue {exc}"}
                try:
                    conn.sendall(encode_frame("reply", reply))
                except OSError:
                    return

    def _apply(self, op: str, payload: dict) -> dict:
        q = self._queues[payload["queue"]]
        if op == "connect":
            handle = q.sender_connect()
            with self._handles_lock:
                self._handles[(q.name, handle.sender_id)] = handle
            return {"ok": True, "sender": handle.sender_id}
        if op == "push":
            handle = self._sender_handle(q, payload["sender"])
            handle.push(_item_from_wire(payload["item"]))
            return {"ok": True}
        if op == "done":
            handle = self._sender_handle(q, payload["sender"])
            handle.close()
            return {"ok": True}
        if op == "pull":
            res = q.pull(payload["receiver"])
            if res.kind is PullKind.DATA:
                assert res.item is not None
                return {"ok": True, "result": "data", "item": _item_to_wire(res.item)}
            return {"ok": True, "result": res.kind.value}
        raise ProtocolError(f"unsupported op {op!r}")

    def _sender_handle(self, q: TaskQueue, sender_id: int) -> SenderHandle:
        with self._handles_lock:
            handle = self._handles.get((q.name, sender_id))
        if handle is None:
            raise ProtocolError(f"queue {q.name!r}: unknown sender {sender_id}")
        return handle

    def close(self) -> None:
        self._closing = True
        try:
            self._sock.close()
        except OSError:
            pass


class QueueClient:
    """One persistent connection to a QueueServer; not thread-safe (one per worker)."""

    def __init__(self, address: tuple[str, int]):
        self._sock = socket.create_connection(address)

    def _request(self, op: str, payload: dict) -> dict:
        self._sock.sendall(encode_frame(op, payload))
        frame = _recv_frame(self._sock)
        if frame is None:
            raise ProtocolError("transport closed mid-request")
        _, reply = frame
        if not reply.get("ok"):
            raise ProtocolError(reply.get("error", "transport error"))
        return reply

    def connect(self, queue: str) -> int:
        return int(self._request("connect", {"queue": queue})["sender"])

    def push(self, queue: str, sender_id: int, item: DataItem) -> None:
        self._request("push", {"queue": queue, "sender": sender_id, "item": _item_to_wire(item)})

    def done(self, queue: str, sender_id: int) -> None:
        self._request("done", {"queue": queue, "sender": sender_id})

    def pull(self, queue: str, receiver_id: str) -> PullResult:
        reply = self._request("pull", {"queue": queue, "receiver": receiver_id})
        if reply["result"] == "data":
            return PullResult(PullKind.DATA, _item_from_wire(reply["item"]))
        return PullResult(PullKind(reply["result"]))

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass
