"""Deterministic discrete-event kernel for the protocol experiments.

One Simulation wires a deployment, an abstract lossy broadcast channel,
per-node protocol entities (beaconing + variable dissemination, or the
flooding comparator) and per-node traffic generators. Events are executed
in (time, insertion order); all randomness comes from named substreams
derived from (master seed, replication, node, purpose), so a run is a
pure function of (config, seed).

The channel has no carrier sensing and no collisions: every transmission
reaches each receiver j independently with probability 1 - q[i][j] after
the frame's airtime. Transmissions whose loss probability is exactly 1
are skipped outright and links with q = 0 deliver without consuming a
random draw.

Variable values follow the measurement layout: 8 B generation timestamp
(double) plus 4 B application sequence number, pre-incremented so the
first update carries 1.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from heapq import heappop, heappush

import numpy as np

from . import rng as rngmod
from .bp import BeaconingProtocol, BeaconTiming, BufferMode, next_interval
from .deployment import Deployment, build_deployment
from .flooding import FLOOD_HEADER_BYTES, FloodingEntity, FloodPacket
from .vardis import VarDisEntity
from .wire import (
    VariableSpecification,
    VarValue,
    decode_beacon,
    decode_payload,
    encode_beacon,
    encode_payload,
)

PHY_OVERHEAD_BYTES = 27
PHY_RATE_BPS = 36e6

VARDIS_CLIENT_ID = 7

PROTOCOL_VARDIS = "vardis"
PROTOCOL_FLOODING = "flooding"
PROTOCOL_VARDIS_ALWAYS_REPEAT = "vardis-always-repeat"
PROTOCOLS = (PROTOCOL_VARDIS, PROTOCOL_FLOODING, PROTOCOL_VARDIS_ALWAYS_REPEAT)

SAMPLE_CSV_HEADER = ("consumer", "producer", "var_id", "app_seqno",
                     "gen_time_s", "recv_time_s")

_VALUE = struct.Struct("<dI")
_FLOOD_HEAD = struct.Struct("<IB")  # flood seqno + ttl after the 6 B source

# event kinds, hot ones first in the dispatch chain
_DELIVER = 0
_BEACON = 1
_TRAFFIC = 2
_FLOOD_TX = 3
_QSAMPLE = 4


class ConfigInvalid(Exception):
    pass


def pack_value(gen_time_s: float, app_seqno: int) -> bytes:
    return _VALUE.pack(gen_time_s, app_seqno)


def unpack_value(data: bytes) -> tuple[float, int]:
    return _VALUE.unpack(data)


def airtime_s(frame_bytes: int) -> float:
    return (frame_bytes + PHY_OVERHEAD_BYTES) * 8.0 / PHY_RATE_BPS


@dataclass(frozen=True)
class SimConfig:
    """Everything one replication needs besides its seed."""

    deployment: Deployment
    q: np.ndarray
    protocol: str = PROTOCOL_VARDIS
    timing: BeaconTiming = field(default_factory=BeaconTiming)
    rep_cnt: int = 1
    max_sum_cnt: int = 10
    max_beacon_bytes: int = 200
    summaries: bool = True
    update_period_s: float = 5.0
    update_distribution: str = "periodic"  # or "exponential"
    producers: tuple[int, ...] = (0,)
    record_consumers: tuple[int, ...] = ()
    duration_s: float = 100.0
    warmup_s: float = 30.0
    flood_mean_backoff_s: float = 0.010
    queue_sample_interval_s: float = 1.0

    def validated(self) -> "SimConfig":
        n = self.deployment.node_count
        problems = []
        if self.protocol not in PROTOCOLS:
            problems.append(f"unknown protocol {self.protocol!r}")
        if self.q.shape != (n, n):
            problems.append(f"loss matrix shape {self.q.shape} != ({n}, {n})")
        if self.rep_cnt < 1 or self.rep_cnt > 15:
            problems.append(f"rep_cnt {self.rep_cnt} outside 1..15")
        if self.max_sum_cnt < 0:
            problems.append("max_sum_cnt must be >= 0")
        if self.update_period_s <= 0:
            problems.append("update_period_s must be positive")
        if self.update_distribution not in ("periodic", "exponential"):
            problems.append(f"unknown update distribution {self.update_distribution!r}")
        if self.duration_s < 0:
            problems.append("duration_s must be non-negative")
        if not 0 <= self.warmup_s <= self.duration_s:
            problems.append("warmup_s must lie in [0, duration_s]")
        for node in (*self.producers, *self.record_consumers):
            if not 0 <= node < n:
                problems.append(f"node {node} not in deployment of {n} nodes")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self


@dataclass
class RunResult:
    """Raw output of one replication."""

    seed: int
    replication: int
    samples: list  # (consumer, producer, var_id, app_seqno, gen_time, recv_time)
    issued: dict  # producer -> updates generated after warm-up
    queue_samples: list  # (time, mean queue length over nodes), flooding only
    beacons_tx: int = 0
    frames_tx: int = 0

    def pair_samples(self, producer: int, consumer: int) -> list:
        return [s for s in self.samples if s[1] == producer and s[0] == consumer]


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_CSV_HEADER)
        for consumer, producer, var_id, app_seqno, gen_t, recv_t in samples:
            writer.writerow(
                (consumer, producer, var_id, app_seqno, repr(gen_t), repr(recv_t))
            )


def read_samples_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SAMPLE_CSV_HEADER:
            raise ValueError(f"unexpected sample header {header}")
        for row in reader:
            out.append(
                (int(row[0]), int(row[1]), int(row[2]), int(row[3]),
                 float(row[4]), float(row[5]))
            )
    return out


class Simulation:
    """One replication. Strictly single-threaded."""

    def __init__(self, config: SimConfig, seed: int, replication: int = 0):
        self.cfg = config.validated()
        self.seed = seed
        self.replication = replication
        self.n = self.cfg.deployment.node_count
        self._heap: list = []
        self._evseq = 0
        self._samples: list = []
        self._issued: dict[int, int] = {p: 0 for p in self.cfg.producers}
        self._queue_samples: list = []
        self._beacons_tx = 0
        self._frames_tx = 0
        self._record = set(self.cfg.record_consumers)
        self._app_seqno = {p: 0 for p in self.cfg.producers}
        self._build_channel()
        self._traffic_rngs = [
            rngmod.stream(seed, replication, i, "traffic") for i in range(self.n)
        ]
        if self.cfg.protocol == PROTOCOL_FLOODING:
            self._build_flooding()
        else:
            self._build_vardis()

    # -- construction -------------------------------------------------------

    def _build_channel(self):
        q = self.cfg.q
        self._channel_rngs = [
            rngmod.stream(self.seed, self.replication, i, "channel")
            for i in range(self.n)
        ]
        self._sure_receivers = []
        self._maybe_receivers = []
        for i in range(self.n):
            sure = [j for j in range(self.n) if j != i and q[i, j] == 0.0]
            maybe = [j for j in range(self.n) if j != i and 0.0 < q[i, j] < 1.0]
            self._sure_receivers.append(tuple(sure))
            self._maybe_receivers.append(
                (tuple(maybe), q[i, maybe].copy()) if maybe else ((), None)
            )

    def _build_vardis(self):
        cfg = self.cfg
        self._beacon_rngs = [
            rngmod.stream(self.seed, self.replication, i, "beacon")
            for i in range(self.n)
        ]
        self._bps = []
        self._vardis = []
        self._regs = []
        self._parked = [False] * self.n
        self._parked_at = [0.0] * self.n
        for i in range(self.n):
            bp = BeaconingProtocol(i, cfg.max_beacon_bytes)
            reg = bp.register_client(VARDIS_CLIENT_ID, BufferMode.BUFFERED_ONCE)
            ent = VarDisEntity(
                i,
                max_payload_bytes=bp.max_payload_bytes,
                max_summary_count=cfg.max_sum_cnt,
                summaries_enabled=cfg.summaries,
                always_repeat=cfg.protocol == PROTOCOL_VARDIS_ALWAYS_REPEAT,
                beacon_rate_hint=cfg.timing.rate_hz,
            )
            self._bps.append(bp)
            self._vardis.append(ent)
            self._regs.append(reg)
        for producer in cfg.producers:
            spec = VariableSpecification(producer, producer, cfg.rep_cnt)
            self._vardis[producer].create_variable(
                spec, VarValue(pack_value(0.0, 0)), now=0.0
            )
        for i in range(self.n):
            if self._vardis[i].has_pending():
                self._push(next_interval(cfg.timing, self._beacon_rngs[i]),
                           _BEACON, i, None)
            else:
                self._parked[i] = True
                self._parked_at[i] = 0.0
        self._schedule_initial_traffic()

    def _build_flooding(self):
        cfg = self.cfg
        self._backoff_rngs = [
            rngmod.stream(self.seed, self.replication, i, "backoff")
            for i in range(self.n)
        ]
        self._floods = [
            FloodingEntity(i, cfg.rep_cnt, cfg.flood_mean_backoff_s)
            for i in range(self.n)
        ]
        self._worker_busy = [False] * self.n
        self._schedule_initial_traffic()
        if cfg.queue_sample_interval_s > 0:
            self._push(cfg.queue_sample_interval_s, _QSAMPLE, 0, None)

    def _schedule_initial_traffic(self):
        for producer in self.cfg.producers:
            self._push(self._next_update_gap(producer), _TRAFFIC, producer, None)

    def _next_update_gap(self, producer: int) -> float:
        if self.cfg.update_distribution == "exponential":
            return self._traffic_rngs[producer].exponential(self.cfg.update_period_s)
        return self.cfg.update_period_s

    # -- event machinery ----------------------------------------------------

    def _push(self, time: float, kind: int, node: int, frame) -> None:
        self._evseq += 1
        heappush(self._heap, (time, self._evseq, kind, node, frame))

    def _broadcast(self, sender: int, frame: bytes, now: float) -> None:
        self._frames_tx += 1
        arrive = now + airtime_s(len(frame))
        for j in self._sure_receivers[sender]:
            self._push(arrive, _DELIVER, j, frame)
        maybe, losses = self._maybe_receivers[sender]
        if maybe:
            draws = self._channel_rngs[sender].random(len(maybe))
            for idx, j in enumerate(maybe):
                if draws[idx] >= losses[idx]:
                    self._push(arrive, _DELIVER, j, frame)

    def run(self) -> RunResult:
        duration = self.cfg.duration_s
        heap = self._heap
        flooding = self.cfg.protocol == PROTOCOL_FLOODING
        while heap:
            time, _, kind, node, frame = heappop(heap)
            if time > duration:
                break
            if kind == _DELIVER:
                if flooding:
                    self._on_flood_deliver(node, frame, time)
                else:
                    self._on_beacon_deliver(node, frame, time)
            elif kind == _BEACON:
                self._on_beacon(node, time)
            elif kind == _TRAFFIC:
                self._on_traffic(node, time)
            elif kind == _FLOOD_TX:
                self._on_flood_tx(node, time)
            else:
                self._on_queue_sample(time)
        return RunResult(
            seed=self.seed,
            replication=self.replication,
            samples=self._samples,
            issued=self._issued,
            queue_samples=self._queue_samples,
            beacons_tx=self._beacons_tx,
            frames_tx=self._frames_tx,
        )

    # -- variable-dissemination path -----------------------------------------

    def _on_beacon(self, i: int, now: float) -> None:
        bp = self._bps[i]
        payload = self._vardis[i].make_payload(now)
        if payload is not None:
            bp.submit_payload(self._regs[i], encode_payload(payload))
        beacon = bp.assemble_beacon()
        if beacon is not None:
            self._beacons_tx += 1
            self._broadcast(i, encode_beacon(beacon, self.cfg.max_beacon_bytes), now)
        if self._vardis[i].has_pending() or bp.has_pending_payload():
            self._push(
                now + next_interval(self.cfg.timing, self._beacon_rngs[i]),
                _BEACON, i, None,
            )
        else:
            self._parked[i] = True
            self._parked_at[i] = now

    def _unpark(self, i: int, now: float) -> None:
        """Re-arm a parked beacon clock, replaying the skipped beacon times."""
        rng = self._beacon_rngs[i]
        timing = self.cfg.timing
        t = self._parked_at[i]
        while True:
            t += next_interval(timing, rng)
            if t > now:
                break
        self._parked[i] = False
        self._push(t, _BEACON, i, None)

    def _on_beacon_deliver(self, j: int, frame: bytes, now: float) -> None:
        beacon = decode_beacon(frame)
        for _, _, data in self._bps[j].on_receive_beacon(beacon):
            events = self._vardis[j].process_payload(decode_payload(data), now)
            if events:
                if j in self._record:
                    self._record_adoptions(j, events, now)
                if self._parked[j] and self._vardis[j].has_pending():
                    self._unpark(j, now)

    def _record_adoptions(self, consumer: int, events, now: float) -> None:
        warmup = self.cfg.warmup_s
        for ev in events:
            if ev[0] == "updated" or ev[0] == "created":
                _, var_id, app_seqno_ignored, value = ev
                if len(value) != _VALUE.size:
                    continue
                gen_time, app_seqno = _VALUE.unpack(value)
                if gen_time > warmup:
                    self._samples.append(
                        (consumer, var_id, var_id, app_seqno, gen_time, now)
                    )

    def _on_traffic(self, producer: int, now: float) -> None:
        self._app_seqno[producer] += 1
        value = VarValue(pack_value(now, self._app_seqno[producer]))
        if self.cfg.protocol == PROTOCOL_FLOODING:
            flood = self._floods[producer]
            rec_bytes = struct.pack("<HIB", producer, self._app_seqno[producer], 12)
            flood.submit(rec_bytes + value.data)
            self._kick_worker(producer, now)
        else:
            self._vardis[producer].update_variable(producer, value, now)
            if self._parked[producer]:
                self._unpark(producer, now)
        if now > self.cfg.warmup_s:
            self._issued[producer] += 1
        self._push(now + self._next_update_gap(producer), _TRAFFIC, producer, None)

    # -- flooding path --------------------------------------------------------

    def _kick_worker(self, i: int, now: float) -> None:
        if not self._worker_busy[i] and self._floods[i].queue:
            self._worker_busy[i] = True
            self._push(
                now + self._floods[i].draw_backoff(self._backoff_rngs[i]),
                _FLOOD_TX, i, None,
            )

    def _on_flood_tx(self, i: int, now: float) -> None:
        flood = self._floods[i]
        packet = flood.worker_step()
        frame = (
            packet.source.to_bytes(6, "little")
            + _FLOOD_HEAD.pack(packet.flood_seqno, packet.ttl)
            + b"\x00\x00\x00"
            + packet.payload
        )
        self._broadcast(i, frame, now)
        if flood.queue:
            self._push(now + flood.draw_backoff(self._backoff_rngs[i]),
                       _FLOOD_TX, i, None)
        else:
            self._worker_busy[i] = False

    def _on_flood_deliver(self, j: int, frame: bytes, now: float) -> None:
        source = int.from_bytes(frame[:6], "little")
        flood_seqno, ttl = _FLOOD_HEAD.unpack_from(frame, 6)
        payload = frame[FLOOD_HEADER_BYTES:]
        packet = FloodPacket(source, flood_seqno, payload, ttl)
        if not self._floods[j].receive(packet):
            return
        self._kick_worker(j, now)
        if j in self._record and len(payload) == 7 + _VALUE.size:
            var_id, app_seqno, _ = struct.unpack_from("<HIB", payload)
            gen_time, value_seqno = _VALUE.unpack_from(payload, 7)
            if gen_time > self.cfg.warmup_s:
                self._samples.append(
                    (j, source, var_id, value_seqno, gen_time, now)
                )

    def _on_queue_sample(self, now: float) -> None:
        mean_len = sum(len(f.queue) for f in self._floods) / self.n
        self._queue_samples.append((now, mean_len))
        nxt = now + self.cfg.queue_sample_interval_s
        if nxt <= self.cfg.duration_s:
            self._push(nxt, _QSAMPLE, 0, None)


def run(config: SimConfig, seed: int, replication: int = 0) -> RunResult:
    """Run one replication; deterministic in (config, seed, replication)."""
    return Simulation(config, seed, replication).run()


def _run_one(args) -> RunResult:
    config, seed, replication = args
    return Simulation(config, seed, replication).run()


def run_replications(config: SimConfig, master_seed: int, replications: int,
                     jobs: int = 1) -> list[RunResult]:
    """Independent replications; order of results is by replication index."""
    tasks = [(config, master_seed, rep) for rep in range(replications)]
    if jobs <= 1 or replications <= 1:
        return [_run_one(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))


def make_sim_config(kind: str, k: int, *, per: float | None = None,
                    span_m: float = 1120.0, producers: str = "reference",
                    **kwargs) -> SimConfig:
    """Convenience builder: deployment + loss matrix + reference designation.

    producers: "reference" puts one producer at the deployment's reference
    producer node; "all" makes every node a producer (grid traffic model).
    """
    dep, q = build_deployment(kind, k, per=per, span_m=span_m)
    if producers == "reference":
        prods = (dep.producer,)
    elif producers == "all":
        prods = tuple(range(dep.node_count))
    else:
        raise ConfigInvalid(f"unknown producers designation {producers!r}")
    kwargs.setdefault("record_consumers", (dep.consumer,))
    return SimConfig(deployment=dep, q=q, producers=prods, **kwargs)
