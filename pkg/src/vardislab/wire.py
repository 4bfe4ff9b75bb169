"""Record types and wire encodings for everything carried inside a beacon.

All multi-byte integers are little-endian. A payload is a sequence of
sections in fixed priority order (create, delete, update, summary,
create-request, update-request); each section starts with a 1-byte section
type and a 1-byte record count, followed by the concatenated records.
Worked byte-level examples live in docs/wire-format.md.

Field widths:
  node id   6 B   (48-bit, MAC-address-like)
  var id    2 B
  seqno     4 B on the wire (strict integer comparison, no wrap handling)
  rep cnt   1 B   (1..15)
  lengths   1 B   (description <= 32 B, value <= 64 B)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

MAX_NODE_ID = (1 << 48) - 1
MAX_VAR_ID = (1 << 16) - 1
MAX_SEQNO = (1 << 32) - 1  # wire width; runs never get near this
MAX_REP_CNT = 15
MAX_DESCRIPTION_BYTES = 32
MAX_VALUE_BYTES = 64

BP_VERSION = 1
BP_HEADER_BYTES = 11  # version(1) + sender(6) + bp seqno(4)
BP_PER_PAYLOAD_OVERHEAD = 2  # client id(1) + payload length(1)
DEFAULT_MAX_BEACON_BYTES = 200


class EncodedTooLarge(Exception):
    """Encoded object exceeds the caller-supplied size limit."""


class MalformedPayload(Exception):
    """Byte sequence is not a valid payload or beacon."""


class SectionType(IntEnum):
    CREATE = 1
    DELETE = 2
    UPDATE = 3
    SUMMARY = 4
    REQ_CREATE = 5
    REQ_UPDATE = 6


_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_VAR_SEQ = struct.Struct("<HI")


def _check_range(name: str, value: int, lo: int, hi: int) -> None:
    if not isinstance(value, int) or not lo <= value <= hi:
        raise ValueError(f"{name} must be an integer in [{lo}, {hi}], got {value!r}")


class _Reader:
    """Cursor over immutable bytes; raises MalformedPayload on truncation."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise MalformedPayload(
                f"truncated: wanted {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u48(self) -> int:
        return int.from_bytes(self.take(6), "little")

    def done(self) -> bool:
        return self.pos == len(self.data)


@dataclass(frozen=True, slots=True)
class VariableSpecification:
    """Identity and dissemination settings of a shared variable."""

    var_id: int
    producer: int
    rep_cnt: int
    description: str = ""

    def __post_init__(self):
        _check_range("var_id", self.var_id, 0, MAX_VAR_ID)
        _check_range("producer", self.producer, 0, MAX_NODE_ID)
        _check_range("rep_cnt", self.rep_cnt, 1, MAX_REP_CNT)
        if len(self.description.encode()) > MAX_DESCRIPTION_BYTES:
            raise ValueError(f"description exceeds {MAX_DESCRIPTION_BYTES} bytes")

    @property
    def wire_size(self) -> int:
        return 2 + 6 + 1 + 1 + len(self.description.encode())

    def encode_into(self, buf: bytearray) -> None:
        buf += _U16.pack(self.var_id)
        buf += self.producer.to_bytes(6, "little")
        desc = self.description.encode()
        buf.append(self.rep_cnt)
        buf.append(len(desc))
        buf += desc

    @classmethod
    def decode(cls, r: _Reader) -> "VariableSpecification":
        var_id = r.u16()
        producer = r.u48()
        rep_cnt = r.u8()
        desc = r.take(r.u8())
        try:
            return cls(var_id, producer, rep_cnt, desc.decode())
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedPayload(str(exc)) from exc


@dataclass(frozen=True, slots=True)
class VarValue:
    """Opaque value block, length-prefixed on the wire."""

    data: bytes = b""

    def __post_init__(self):
        if len(self.data) > MAX_VALUE_BYTES:
            raise ValueError(f"value exceeds {MAX_VALUE_BYTES} bytes")

    @property
    def wire_size(self) -> int:
        return 1 + len(self.data)

    def encode_into(self, buf: bytearray) -> None:
        buf.append(len(self.data))
        buf += self.data

    @classmethod
    def decode(cls, r: _Reader) -> "VarValue":
        return cls(r.take(r.u8()))


@dataclass(frozen=True, slots=True)
class VarUpdateRecord:
    var_id: int
    seqno: int
    value: VarValue

    def __post_init__(self):
        _check_range("var_id", self.var_id, 0, MAX_VAR_ID)
        _check_range("seqno", self.seqno, 0, MAX_SEQNO)

    @property
    def wire_size(self) -> int:
        return 2 + 4 + self.value.wire_size

    def encode_into(self, buf: bytearray) -> None:
        buf += _VAR_SEQ.pack(self.var_id, self.seqno)
        self.value.encode_into(buf)

    @classmethod
    def decode(cls, r: _Reader) -> "VarUpdateRecord":
        var_id = r.u16()
        seqno = r.u32()
        return cls(var_id, seqno, VarValue.decode(r))


@dataclass(frozen=True, slots=True)
class VarSummaryRecord:
    var_id: int
    seqno: int

    def __post_init__(self):
        _check_range("var_id", self.var_id, 0, MAX_VAR_ID)
        _check_range("seqno", self.seqno, 0, MAX_SEQNO)

    wire_size = 6

    def encode_into(self, buf: bytearray) -> None:
        buf += _VAR_SEQ.pack(self.var_id, self.seqno)

    @classmethod
    def decode(cls, r: _Reader) -> "VarSummaryRecord":
        return cls(r.u16(), r.u32())


@dataclass(frozen=True, slots=True)
class VarCreateRecord:
    """Instruction to create a variable: its specification plus a value."""

    spec: VariableSpecification
    initial: VarUpdateRecord

    def __post_init__(self):
        if self.spec.var_id != self.initial.var_id:
            raise ValueError("create record var ids disagree")

    @property
    def wire_size(self) -> int:
        return self.spec.wire_size + self.initial.wire_size

    def encode_into(self, buf: bytearray) -> None:
        self.spec.encode_into(buf)
        self.initial.encode_into(buf)

    @classmethod
    def decode(cls, r: _Reader) -> "VarCreateRecord":
        spec = VariableSpecification.decode(r)
        initial = VarUpdateRecord.decode(r)
        try:
            return cls(spec, initial)
        except ValueError as exc:
            raise MalformedPayload(str(exc)) from exc


@dataclass(frozen=True, slots=True)
class VarDeleteRecord:
    var_id: int

    def __post_init__(self):
        _check_range("var_id", self.var_id, 0, MAX_VAR_ID)

    wire_size = 2

    def encode_into(self, buf: bytearray) -> None:
        buf += _U16.pack(self.var_id)

    @classmethod
    def decode(cls, r: _Reader) -> "VarDeleteRecord":
        return cls(r.u16())


@dataclass(frozen=True, slots=True)
class VarReqCreateRecord:
    var_id: int

    def __post_init__(self):
        _check_range("var_id", self.var_id, 0, MAX_VAR_ID)

    wire_size = 2

    def encode_into(self, buf: bytearray) -> None:
        buf += _U16.pack(self.var_id)

    @classmethod
    def decode(cls, r: _Reader) -> "VarReqCreateRecord":
        return cls(r.u16())


@dataclass(frozen=True, slots=True)
class VarReqUpdateRecord:
    """Request for newer values: carries the requester's stored seqno."""

    var_id: int
    seqno: int

    def __post_init__(self):
        _check_range("var_id", self.var_id, 0, MAX_VAR_ID)
        _check_range("seqno", self.seqno, 0, MAX_SEQNO)

    wire_size = 6

    def encode_into(self, buf: bytearray) -> None:
        buf += _VAR_SEQ.pack(self.var_id, self.seqno)

    @classmethod
    def decode(cls, r: _Reader) -> "VarReqUpdateRecord":
        return cls(r.u16(), r.u32())


RECORD_TYPES = {
    SectionType.CREATE: VarCreateRecord,
    SectionType.DELETE: VarDeleteRecord,
    SectionType.UPDATE: VarUpdateRecord,
    SectionType.SUMMARY: VarSummaryRecord,
    SectionType.REQ_CREATE: VarReqCreateRecord,
    SectionType.REQ_UPDATE: VarReqUpdateRecord,
}

SECTION_HEADER_BYTES = 2  # section type(1) + record count(1)
MAX_RECORDS_PER_SECTION = 255


@dataclass(frozen=True, slots=True)
class VarDisPayload:
    """Sections in strict priority order, each non-empty."""

    sections: tuple = field(default=())

    def __post_init__(self):
        last = 0
        for stype, records in self.sections:
            stype = SectionType(stype)
            if stype <= last:
                raise ValueError("sections out of priority order or duplicated")
            last = stype
            if not records:
                raise ValueError(f"empty section {stype.name}")
            if len(records) > MAX_RECORDS_PER_SECTION:
                raise ValueError(f"section {stype.name} has too many records")
            want = RECORD_TYPES[stype]
            for rec in records:
                if not isinstance(rec, want):
                    raise ValueError(
                        f"section {stype.name} holds {type(rec).__name__}"
                    )

    @property
    def wire_size(self) -> int:
        return sum(
            SECTION_HEADER_BYTES + sum(r.wire_size for r in records)
            for _, records in self.sections
        )

    def section(self, stype: SectionType):
        for s, records in self.sections:
            if s == stype:
                return records
        return ()


def encode_payload(payload: VarDisPayload, limit: int | None = None) -> bytes:
    """Serialize a payload; raises EncodedTooLarge if over `limit` bytes."""
    buf = bytearray()
    for stype, records in payload.sections:
        buf.append(stype)
        buf.append(len(records))
        for rec in records:
            rec.encode_into(buf)
    if limit is not None and len(buf) > limit:
        raise EncodedTooLarge(f"payload is {len(buf)} B, limit {limit} B")
    return bytes(buf)


def decode_payload(data: bytes) -> VarDisPayload:
    """Inverse of encode_payload; raises MalformedPayload on bad input."""
    r = _Reader(data)
    sections = []
    last = 0
    while not r.done():
        raw_type = r.u8()
        try:
            stype = SectionType(raw_type)
        except ValueError:
            raise MalformedPayload(f"unknown section type {raw_type}") from None
        if stype <= last:
            raise MalformedPayload(f"section {stype.name} out of priority order")
        last = stype
        count = r.u8()
        if count == 0:
            raise MalformedPayload(f"empty section {stype.name}")
        rec_cls = RECORD_TYPES[stype]
        sections.append((stype, tuple(rec_cls.decode(r) for _ in range(count))))
    return VarDisPayload(tuple(sections))


@dataclass(frozen=True, slots=True)
class Beacon:
    """One broadcast: sender identity plus client-protocol payloads."""

    sender: int
    bp_seqno: int
    payloads: tuple = ()  # of (client_protocol_id, payload bytes)

    def __post_init__(self):
        _check_range("sender", self.sender, 0, MAX_NODE_ID)
        _check_range("bp_seqno", self.bp_seqno, 0, MAX_SEQNO)
        for client_id, data in self.payloads:
            _check_range("client_protocol_id", client_id, 0, 255)
            if not 0 < len(data) <= 255:
                raise ValueError("payload length must be in 1..255")

    @property
    def wire_size(self) -> int:
        return BP_HEADER_BYTES + sum(
            BP_PER_PAYLOAD_OVERHEAD + len(data) for _, data in self.payloads
        )


def encode_beacon(beacon: Beacon, limit: int | None = DEFAULT_MAX_BEACON_BYTES) -> bytes:
    buf = bytearray()
    buf.append(BP_VERSION)
    buf += beacon.sender.to_bytes(6, "little")
    buf += _U32.pack(beacon.bp_seqno)
    for client_id, data in beacon.payloads:
        buf.append(client_id)
        buf.append(len(data))
        buf += data
    if limit is not None and len(buf) > limit:
        raise EncodedTooLarge(f"beacon is {len(buf)} B, limit {limit} B")
    return bytes(buf)


def decode_beacon(data: bytes) -> Beacon:
    r = _Reader(data)
    version = r.u8()
    if version != BP_VERSION:
        raise MalformedPayload(f"unsupported beacon version {version}")
    sender = r.u48()
    bp_seqno = r.u32()
    payloads = []
    while not r.done():
        client_id = r.u8()
        length = r.u8()
        if length == 0:
            raise MalformedPayload("zero-length client payload")
        payloads.append((client_id, r.take(length)))
    return Beacon(sender, bp_seqno, tuple(payloads))
