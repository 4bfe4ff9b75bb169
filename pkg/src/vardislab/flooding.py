"""Comparator protocol: per-update network-wide flooding.

Every variable update is wrapped in its own packet and put into a
broadcast queue. A worker pulls the head packet, waits an exponentially
distributed backoff (10 ms mean), transmits it, and repeats the same
packet until it has been sent `rep_cnt` times. Receivers suppress
duplicates per source: a packet is dropped when its sequence number is
not strictly newer than anything seen from that source.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

FLOOD_HEADER_BYTES = 14  # source(6) + seqno(4) + ttl(1) + reserved(3)
DEFAULT_MEAN_BACKOFF_S = 0.010
DEFAULT_TTL = 64


@dataclass(frozen=True, slots=True)
class FloodPacket:
    source: int
    flood_seqno: int
    payload: bytes
    ttl: int = DEFAULT_TTL  # carried but never acted upon

    @property
    def wire_size(self) -> int:
        return FLOOD_HEADER_BYTES + len(self.payload)


class FloodingEntity:
    """One node's flooding instance with its broadcast queue."""

    def __init__(self, node_id: int, rep_cnt: int = 1,
                 mean_backoff_s: float = DEFAULT_MEAN_BACKOFF_S):
        if rep_cnt < 1:
            raise ValueError("rep_cnt must be at least 1")
        self.node_id = node_id
        self.rep_cnt = rep_cnt
        self.mean_backoff_s = mean_backoff_s
        self.queue: deque[list] = deque()  # [packet, remaining repetitions]
        self.highest_seen: dict[int, int] = {}
        self._next_seqno = 0

    def queue_length(self) -> int:
        return len(self.queue)

    def submit(self, payload: bytes) -> FloodPacket:
        """Originate a new flood for a local variable update."""
        packet = FloodPacket(self.node_id, self._next_seqno, payload)
        self._next_seqno += 1
        self.highest_seen[self.node_id] = packet.flood_seqno
        self.queue.append([packet, self.rep_cnt])
        return packet

    def draw_backoff(self, rng) -> float:
        return rng.exponential(self.mean_backoff_s)

    def worker_step(self) -> FloodPacket:
        """Transmit the head packet and apply the repetition rule.

        Caller is responsible for having waited the backoff period first.
        A packet with repetitions left stays at the front of the queue.
        """
        head = self.queue[0]
        packet = head[0]
        head[1] -= 1
        if head[1] == 0:
            self.queue.popleft()
        return packet

    def receive(self, packet: FloodPacket) -> bool:
        """Returns True when the packet is new: deliver it and forward it."""
        if packet.source == self.node_id:
            return False
        seen = self.highest_seen.get(packet.source)
        if seen is not None and packet.flood_seqno <= seen:
            return False
        self.highest_seen[packet.source] = packet.flood_seqno
        self.queue.append([packet, self.rep_cnt])
        return True
