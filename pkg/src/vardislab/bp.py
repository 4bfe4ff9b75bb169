"""Beaconing protocol: client registration, buffering modes, beacon assembly.

A BP entity multiplexes payloads from registered client protocols into
beacons. Three buffering disciplines are supported: an unbounded FIFO
queue (each payload sent exactly once), a single overwritable buffer that
is cleared after transmission (at most once), and a single overwritable
buffer that is never cleared (repeated until overwritten).

Beacon generation times come from next_interval(); the entity itself is
clocked externally by whoever owns the event loop.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .wire import (
    BP_HEADER_BYTES,
    BP_PER_PAYLOAD_OVERHEAD,
    DEFAULT_MAX_BEACON_BYTES,
    Beacon,
)


class AlreadyRegistered(Exception):
    pass


class NotRegistered(Exception):
    pass


class PayloadTooLarge(Exception):
    pass


class BufferMode(Enum):
    QUEUEING = "queueing"
    BUFFERED_ONCE = "buffered-once"
    BUFFERED_REPEATED = "buffered-repeated"


@dataclass
class BeaconTiming:
    """Inter-beacon time distribution at average rate `rate_hz`."""

    distribution: str = "periodic-jitter"  # or "exponential"
    rate_hz: float = 10.0
    jitter: float = 0.1

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError("beacon rate must be positive")
        if self.distribution not in ("periodic-jitter", "exponential"):
            raise ValueError(f"unknown timing distribution {self.distribution!r}")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter fraction must be in [0, 1)")


def next_interval(timing: BeaconTiming, rng) -> float:
    """Draw one inter-beacon time."""
    if timing.distribution == "exponential":
        return rng.exponential(1.0 / timing.rate_hz)
    period = 1.0 / timing.rate_hz
    if timing.jitter == 0.0:
        return period
    return rng.uniform((1.0 - timing.jitter) * period, (1.0 + timing.jitter) * period)


def next_beacon_time(timing: BeaconTiming, rng, now: float) -> float:
    return now + next_interval(timing, rng)


class ClientRegistration:
    """Per-client buffer state inside a BP entity."""

    __slots__ = ("client_id", "mode", "queue", "slot")

    def __init__(self, client_id: int, mode: BufferMode):
        self.client_id = client_id
        self.mode = mode
        self.queue: deque[bytes] = deque()
        self.slot: bytes | None = None

    def submit(self, payload: bytes) -> None:
        if self.mode is BufferMode.QUEUEING:
            self.queue.append(payload)
        else:
            self.slot = payload

    def peek(self) -> bytes | None:
        if self.mode is BufferMode.QUEUEING:
            return self.queue[0] if self.queue else None
        return self.slot

    def consume(self) -> None:
        """Apply the post-insertion rule after the payload entered a beacon."""
        if self.mode is BufferMode.QUEUEING:
            self.queue.popleft()
        elif self.mode is BufferMode.BUFFERED_ONCE:
            self.slot = None
        # BUFFERED_REPEATED keeps the slot

    def has_payload(self) -> bool:
        return bool(self.queue) if self.mode is BufferMode.QUEUEING else self.slot is not None


class BeaconingProtocol:
    """One node's BP entity. Single-threaded, clocked by the owner."""

    def __init__(self, node_id: int, max_beacon_bytes: int = DEFAULT_MAX_BEACON_BYTES):
        if max_beacon_bytes < BP_HEADER_BYTES + BP_PER_PAYLOAD_OVERHEAD + 1:
            raise ValueError("max beacon size below fixed header size")
        self.node_id = node_id
        self.max_beacon_bytes = max_beacon_bytes
        self.bp_seqno = 0
        self.clients: dict[int, ClientRegistration] = {}

    @property
    def max_payload_bytes(self) -> int:
        """Largest single client payload that can ever fit a beacon."""
        return min(
            255, self.max_beacon_bytes - BP_HEADER_BYTES - BP_PER_PAYLOAD_OVERHEAD
        )

    def register_client(self, client_id: int, mode: BufferMode) -> ClientRegistration:
        if client_id in self.clients:
            raise AlreadyRegistered(f"client {client_id} already registered")
        reg = ClientRegistration(client_id, mode)
        self.clients[client_id] = reg
        return reg

    def deregister_client(self, client_id: int) -> None:
        if client_id not in self.clients:
            raise NotRegistered(f"client {client_id} not registered")
        del self.clients[client_id]

    def query_client(self, client_id: int) -> BufferMode:
        if client_id not in self.clients:
            raise NotRegistered(f"client {client_id} not registered")
        return self.clients[client_id].mode

    def submit_payload(self, reg: ClientRegistration, payload: bytes) -> None:
        if not payload:
            raise ValueError("payload must be non-empty")
        if len(payload) > self.max_payload_bytes:
            raise PayloadTooLarge(
                f"{len(payload)} B payload exceeds budget {self.max_payload_bytes} B"
            )
        reg.submit(payload)

    def assemble_beacon(self) -> Beacon | None:
        """Visit clients in ascending id, take at most one payload each.

        Payloads that do not fit the remaining budget are skipped and stay
        buffered per their mode. Returns None when nothing was included:
        an empty beacon is never transmitted.
        """
        budget = self.max_beacon_bytes - BP_HEADER_BYTES
        included: list[tuple[int, bytes]] = []
        for client_id in sorted(self.clients):
            reg = self.clients[client_id]
            payload = reg.peek()
            if payload is None:
                continue
            need = BP_PER_PAYLOAD_OVERHEAD + len(payload)
            if need > budget:
                continue
            budget -= need
            included.append((client_id, payload))
            reg.consume()
        if not included:
            return None
        beacon = Beacon(self.node_id, self.bp_seqno, tuple(included))
        self.bp_seqno += 1
        return beacon

    def on_receive_beacon(self, beacon: Beacon) -> list[tuple[int, int, bytes]]:
        """Dispatch received payloads to registered clients.

        Returns (client_id, sender, payload) triples; payloads for unknown
        client ids are dropped silently.
        """
        out = []
        for client_id, data in beacon.payloads:
            if client_id in self.clients:
                out.append((client_id, beacon.sender, data))
        return out

    def has_pending_payload(self) -> bool:
        return any(reg.has_payload() for reg in self.clients.values())
