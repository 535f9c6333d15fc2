"""Three-entity task-queue protocol: senders, receivers, and the queue.

Receivers pull; they never block on the queue. A pull resolves to exactly one
of three results:

* ``Data(item)`` -- an item was available and is now owned by this receiver;
* ``Wait``      -- no item available, but at least one sender is still
                   connected, so more data may arrive;
* ``Empty``     -- no item available and no sender connected: the stream is
                   finished and the receiver must terminate.

Senders connect before pushing and disconnect when done; the sender count is
what lets the queue distinguish "starved" from "finished". Delivery is
exactly-once: a popped item is owned by the single receiver that pulled it.
A receiver that was handed Empty must stop; pulling again is a protocol
violation.

System precondition: every sender connects before any receiver's first pull
(both engines establish this ordering at setup). A sender that connected late
could otherwise find all receivers already terminated and its items stranded.

Wire format (local transport): frames are length-prefixed JSON documents,
``<4-byte big-endian length><json body>``, body ``{"v": FRAME_VERSION,
"op": "connect" | "push" | "done" | "pull", "payload": {...}}``. Responses use
the same framing with ``op: "reply"``. See `transport` for the socket layer.
"""

from __future__ import annotations

import json
import struct
import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigurationError, ProtocolError
from .workload import DataItem

DEFAULT_WAIT_INTERVAL_S = 1.0  # how long receivers pause after a Wait result

# ---------------------------------------------------------------------------
# Pull results
# ---------------------------------------------------------------------------


class PullKind(Enum):
    DATA = "data"
    WAIT = "wait"
    EMPTY = "empty"


@dataclass(frozen=True)
class PullResult:
    kind: PullKind
    item: DataItem | None = None


WAIT = PullResult(PullKind.WAIT)
EMPTY = PullResult(PullKind.EMPTY)


def data(item: DataItem) -> PullResult:
    return PullResult(PullKind.DATA, item)


# ---------------------------------------------------------------------------
# Queue
# ---------------------------------------------------------------------------


class SenderHandle:
    """Capability to push into one queue; invalid after close()."""

    __slots__ = ("queue", "sender_id", "closed")

    def __init__(self, queue: "TaskQueue", sender_id: int):
        self.queue = queue
        self.sender_id = sender_id
        self.closed = False

    def push(self, item: DataItem) -> None:
        self.queue.push(self, item)

    def close(self) -> None:
        self.queue.sender_disconnect(self)


class TaskQueue:
    """FIFO item queue with sender-connection tracking.

    Thread-safe; a single lock guards all state. `push` blocks while the queue
    is at capacity (unbounded by default). Receivers are identified only so a
    pull after Empty can be rejected; the queue never targets deliveries.
    """

    def __init__(self, name: str = "queue", capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise ConfigurationError("queue capacity must be >= 1 (or None for unbounded)")
        self.name = name
        self.capacity = capacity
        self._items: deque[DataItem] = deque()
        self._lock = threading.Lock()
        self._not_full = threading.Condition(self._lock)
        self._senders: set[int] = set()
        self._next_sender = 0
        self._finished_receivers: set[str] = set()
        self._pushed = 0
        self._delivered = 0

    # -- sender side ---------------------------------------------------------

    def sender_connect(self) -> SenderHandle:
        with self._lock:
            sid = self._next_sender
            self._next_sender += 1
            self._senders.add(sid)
            return SenderHandle(self, sid)

    def sender_disconnect(self, handle: SenderHandle) -> None:
        with self._lock:
            if handle.closed or handle.sender_id not in self._senders:
                raise ProtocolError(f"queue {self.name!r}: sender disconnected twice")
            handle.closed = True
            self._senders.discard(handle.sender_id)

    def push(self, handle: SenderHandle, item: DataItem) -> None:
        with self._not_full:
            if handle.closed or handle.sender_id not in self._senders:
                raise ProtocolError(f"queue {self.name!r}: push from disconnected sender")
            while self.capacity is not None and len(self._items) >= self.capacity:
                self._not_full.wait()
            self._items.append(item)
            self._pushed += 1

    # -- receiver side --------------------------------------------------------

    def pull(self, receiver_id: str) -> PullResult:
        with self._not_full:
            if receiver_id in self._finished_receivers:
                raise ProtocolError(
                    f"queue {self.name!r}: receiver {receiver_id!r} pulled after Empty"
                )
            if self._items:
                item = self._items.popleft()
                self._delivered += 1
                self._not_full.notify()
                return data(item)
            if self._senders:
                return WAIT
            self._finished_receivers.add(receiver_id)
            return EMPTY

    # -- introspection ---------------------------------------------------------

    @property
    def connected_senders(self) -> int:
        with self._lock:
            return len(self._senders)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


# ---------------------------------------------------------------------------
# Message framing (used by the local transport)
# ---------------------------------------------------------------------------

FRAME_VERSION = 1
_LEN = struct.Struct(">I")
_MAX_FRAME = 1 << 20

OPS = ("connect", "push", "done", "pull", "reply")


def encode_frame(op: str, payload: dict) -> bytes:
    if op not in OPS:
        raise ProtocolError(f"unknown frame op {op!r}")
    body = json.dumps({"v": FRAME_VERSION, "op": op, "payload": payload}).encode()
    if len(body) > _MAX_FRAME:
        raise ProtocolError(f"frame body too large ({len(body)} bytes)")
    return _LEN.pack(len(body)) + body


def decode_frame(buf: bytes) -> tuple[str, dict]:
    """Decode one complete frame; raises on version or op mismatch."""
    if len(buf) < _LEN.size:
        raise ProtocolError("truncated frame header")
    (length,) = _LEN.unpack(buf[: _LEN.size])
    body = buf[_LEN.size : _LEN.size + length]
    if len(body) != length:
        raise ProtocolError("truncated frame body")
    doc = json.loads(body.decode())
    if doc.get("v") != FRAME_VERSION:
        raise ProtocolError(f"frame version {doc.get('v')!r} != {FRAME_VERSION}")
    op = doc.get("op")
    if op not in OPS:
        raise ProtocolError(f"unknown frame op {op!r}")
    return op, doc.get("payload", {})
