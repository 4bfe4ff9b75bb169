"""Variable-dissemination state machine over a beaconing service.

Each node keeps a real-time database of shared variables. Modifying
operations (create, update, delete) are repeated in `rep_cnt` distinct
future beacons by every node that learns about them. Summaries advertise
(var id, seqno) pairs round-robin so neighbours can detect missing
variables or stale values and request them.

Payload sections are filled in fixed priority order: creates, deletes,
updates, summaries, create-requests, update-requests. Space in a payload
is bounded by `max_payload_bytes`; the summary section is additionally
bounded by `max_summary_count`.
"""

from __future__ import annotations

from bisect import bisect_left, insort

from .wire import (
    SectionType,
    VarCreateRecord,
    VarDeleteRecord,
    VarDisPayload,
    VariableSpecification,
    VarReqCreateRecord,
    VarReqUpdateRecord,
    VarSummaryRecord,
    VarUpdateRecord,
    VarValue,
)

SECTION_HEADER = 2


class VariableExists(Exception):
    pass


class NotFound(Exception):
    pass


class NotProducer(Exception):
    pass


class BeingDeleted(Exception):
    pass


class DatabaseEntry:
    """One variable as stored at one node."""

    __slots__ = (
        "spec",
        "value",
        "seqno",
        "last_update_received",
        "count_create",
        "count_update",
        "count_delete",
        "to_be_deleted",
    )

    def __init__(self, spec: VariableSpecification, value: VarValue, seqno: int,
                 now: float):
        self.spec = spec
        self.value = value
        self.seqno = seqno
        self.last_update_received = now
        self.count_create = 0
        self.count_update = 0
        self.count_delete = 0
        self.to_be_deleted = False


class VarDisEntity:
    """One node's protocol instance, driven by its node's event loop."""

    def __init__(
        self,
        node_id: int,
        max_payload_bytes: int = 187,
        max_summary_count: int = 10,
        summaries_enabled: bool = True,
        always_repeat: bool = False,
        beacon_rate_hint: float = 10.0,
    ):
        self.node_id = node_id
        self.max_payload_bytes = max_payload_bytes
        self.max_summary_count = max_summary_count
        self.summaries_enabled = summaries_enabled
        self.always_repeat = always_repeat
        self.beacon_rate_hint = beacon_rate_hint

        self.db: dict[int, DatabaseEntry] = {}
        self._live_ids: list[int] = []  # sorted, excludes to-be-deleted entries
        self._summary_cursor = 0
        self._pending_create: set[int] = set()
        self._pending_update: set[int] = set()
        self._pending_delete: set[int] = set()
        self._req_create: set[int] = set()
        self._req_update: dict[int, int] = {}  # var id -> newest remote seqno seen
        self._tombstones: dict[int, float] = {}  # var id -> suppression expiry

    # -- application-facing CRUD ------------------------------------------

    def create_variable(self, spec: VariableSpecification, value: VarValue,
                        now: float) -> None:
        if spec.producer != self.node_id:
            raise NotProducer(f"node {self.node_id} is not {spec.producer}")
        if self._known(spec.var_id, now):
            raise VariableExists(f"variable {spec.var_id} exists")
        self._insert(spec, value, seqno=0, now=now)
        entry = self.db[spec.var_id]
        entry.count_create = spec.rep_cnt
        self._pending_create.add(spec.var_id)

    def update_variable(self, var_id: int, value: VarValue, now: float) -> None:
        entry = self._writable(var_id)
        entry.seqno += 1
        entry.value = value
        entry.last_update_received = now
        entry.count_update = entry.spec.rep_cnt
        self._pending_update.add(var_id)

    def delete_variable(self, var_id: int, now: float) -> None:
        entry = self._writable(var_id)
        self._mark_deleted(entry)

    def read_variable(self, var_id: int):
        entry = self.db.get(var_id)
        if entry is None or entry.to_be_deleted:
            raise NotFound(f"variable {var_id} not found")
        return entry.value, entry.seqno, entry.last_update_received

    def list_variables(self) -> list[int]:
        return list(self._live_ids)

    def _writable(self, var_id: int) -> DatabaseEntry:
        entry = self.db.get(var_id)
        if entry is None:
            raise NotFound(f"variable {var_id} not found")
        if entry.spec.producer != self.node_id:
            raise NotProducer(f"node {self.node_id} did not create {var_id}")
        if entry.to_be_deleted:
            raise BeingDeleted(f"variable {var_id} is being deleted")
        return entry

    # -- internal state transitions ---------------------------------------

    def _known(self, var_id: int, now: float) -> bool:
        if var_id in self.db:
            return True
        expiry = self._tombstones.get(var_id)
        if expiry is None:
            return False
        if now >= expiry:
            del self._tombstones[var_id]
            return False
        return True

    def _insert(self, spec, value, seqno, now) -> None:
        self.db[spec.var_id] = DatabaseEntry(spec, value, seqno, now)
        insort(self._live_ids, spec.var_id)
        self._req_create.discard(spec.var_id)
        self._tombstones.pop(spec.var_id, None)

    def _mark_deleted(self, entry: DatabaseEntry) -> None:
        var_id = entry.spec.var_id
        entry.to_be_deleted = True
        entry.count_delete = entry.spec.rep_cnt
        entry.count_create = 0
        entry.count_update = 0
        self._pending_create.discard(var_id)
        self._pending_update.discard(var_id)
        self._pending_delete.add(var_id)
        self._req_create.discard(var_id)
        self._req_update.pop(var_id, None)
        idx = bisect_left(self._live_ids, var_id)
        if idx < len(self._live_ids) and self._live_ids[idx] == var_id:
            del self._live_ids[idx]

    def _drop_entry(self, var_id: int, now: float) -> None:
        entry = self.db.pop(var_id)
        self._pending_delete.discard(var_id)
        # suppress re-creation by stale neighbour summaries for a while
        ttl = 10.0 * entry.spec.rep_cnt / self.beacon_rate_hint
        self._tombstones[var_id] = now + ttl

    # -- transmit path ------------------------------------------------------

    def has_pending(self) -> bool:
        """True when the next payload would carry at least one record."""
        if self._pending_create or self._pending_update or self._pending_delete:
            return True
        if self._req_create or self._req_update:
            return True
        if self._live_ids and (self.summaries_enabled or self.always_repeat):
            return True
        return False

    def make_payload(self, now: float, max_payload_bytes: int | None = None,
                     max_summary_count: int | None = None) -> VarDisPayload | None:
        """Build the next beacon payload, or None when all sections are empty.

        Inclusion of a create/update/delete record decrements the entry's
        remaining-repetition counter; summaries advance the round-robin
        cursor; request sections drain the pending request sets.
        """
        budget = self.max_payload_bytes if max_payload_bytes is None else max_payload_bytes
        max_sum = self.max_summary_count if max_summary_count is None else max_summary_count
        sections = []

        if self._pending_create:
            records, budget = self._fill_creates(budget)
            if records:
                sections.append((SectionType.CREATE, tuple(records)))

        if self._pending_delete:
            records, budget = self._fill_deletes(budget, now)
            if records:
                sections.append((SectionType.DELETE, tuple(records)))

        records, budget = self._fill_updates(budget)
        if records:
            sections.append((SectionType.UPDATE, tuple(records)))

        if self.summaries_enabled and self._live_ids:
            records, budget = self._fill_summaries(budget, max_sum)
            if records:
                sections.append((SectionType.SUMMARY, tuple(records)))

        if self._req_create:
            records, budget = self._fill_req_creates(budget)
            if records:
                sections.append((SectionType.REQ_CREATE, tuple(records)))

        if self._req_update:
            records, budget = self._fill_req_updates(budget)
            if records:
                sections.append((SectionType.REQ_UPDATE, tuple(records)))

        if not sections:
            return None
        return VarDisPayload(tuple(sections))

    def _fill_creates(self, budget):
        records = []
        header = SECTION_HEADER
        for var_id in sorted(self._pending_create):
            entry = self.db[var_id]
            rec = VarCreateRecord(
                entry.spec, VarUpdateRecord(var_id, entry.seqno, entry.value)
            )
            need = header + rec.wire_size
            if need > budget or len(records) == 255:
                continue
            budget -= need
            header = 0
            records.append(rec)
            entry.count_create -= 1
            if entry.count_create == 0:
                self._pending_create.discard(var_id)
        return records, budget

    def _fill_deletes(self, budget, now):
        records = []
        header = SECTION_HEADER
        for var_id in sorted(self._pending_delete):
            entry = self.db[var_id]
            rec = VarDeleteRecord(var_id)
            need = header + rec.wire_size
            if need > budget or len(records) == 255:
                continue
            budget -= need
            header = 0
            records.append(rec)
            entry.count_delete -= 1
            if entry.count_delete == 0:
                self._drop_entry(var_id, now)
        return records, budget

    def _fill_updates(self, budget):
        records = []
        header = SECTION_HEADER
        if self.always_repeat:
            # every known value rides in every beacon, counters untouched
            for var_id in self._live_ids:
                entry = self.db[var_id]
                rec = VarUpdateRecord(var_id, entry.seqno, entry.value)
                need = header + rec.wire_size
                if need > budget or len(records) == 255:
                    continue
                budget -= need
                header = 0
                records.append(rec)
            return records, budget
        for var_id in sorted(self._pending_update):
            entry = self.db[var_id]
            rec = VarUpdateRecord(var_id, entry.seqno, entry.value)
            need = header + rec.wire_size
            if need > budget or len(records) == 255:
                continue
            budget -= need
            header = 0
            records.append(rec)
            entry.count_update -= 1
            if entry.count_update == 0:
                self._pending_update.discard(var_id)
        return records, budget

    def _fill_summaries(self, budget, max_sum):
        live = self._live_ids
        n = len(live)
        limit = min(max_sum, n, 255)
        records = []
        header = SECTION_HEADER
        start = bisect_left(live, self._summary_cursor)
        if start == n:
            start = 0
        taken = 0
        while taken < limit:
            need = header + 6
            if need > budget:
                break
            var_id = live[(start + taken) % n]
            entry = self.db[var_id]
            records.append(VarSummaryRecord(var_id, entry.seqno))
            budget -= need
            header = 0
            taken += 1
        if taken:
            self._summary_cursor = live[(start + taken - 1) % n] + 1
        return records, budget

    def _fill_req_creates(self, budget):
        records = []
        header = SECTION_HEADER
        for var_id in sorted(self._req_create):
            need = header + 2
            if need > budget or len(records) == 255:
                break
            records.append(VarReqCreateRecord(var_id))
            budget -= need
            header = 0
        for rec in records:
            self._req_create.discard(rec.var_id)
        return records, budget

    def _fill_req_updates(self, budget):
        records = []
        header = SECTION_HEADER
        for var_id in sorted(self._req_update):
            need = header + 6
            if need > budget or len(records) == 255:
                break
            records.append(VarReqUpdateRecord(var_id, self.db[var_id].seqno))
            budget -= need
            header = 0
        for rec in records:
            del self._req_update[rec.var_id]
        return records, budget

    # -- receive path -------------------------------------------------------

    def process_payload(self, payload: VarDisPayload, now: float) -> list[tuple]:
        """Apply a received payload; returns application-visible changes.

        Event kinds: "created" and "updated" carry (var_id, seqno, value
        bytes) and are exactly the adoptions an application would observe;
        the rest describe protocol-internal reactions.
        """
        events = []
        for stype, records in payload.sections:
            if stype == SectionType.UPDATE:
                for rec in records:
                    self._on_update(rec, now, events)
            elif stype == SectionType.SUMMARY:
                for rec in records:
                    self._on_summary(rec, now, events)
            elif stype == SectionType.CREATE:
                for rec in records:
                    self._on_create(rec, now, events)
            elif stype == SectionType.DELETE:
                for rec in records:
                    self._on_delete(rec, now, events)
            elif stype == SectionType.REQ_CREATE:
                for rec in records:
                    self._on_req_create(rec, events)
            elif stype == SectionType.REQ_UPDATE:
                for rec in records:
                    self._on_req_update(rec, events)
        return events

    def _on_create(self, rec: VarCreateRecord, now: float, events) -> None:
        var_id = rec.spec.var_id
        if self._known(var_id, now):
            return
        self._insert(rec.spec, rec.initial.value, rec.initial.seqno, now)
        entry = self.db[var_id]
        entry.count_create = rec.spec.rep_cnt
        self._pending_create.add(var_id)
        events.append(("created", var_id, rec.initial.seqno, rec.initial.value.data))

    def _on_delete(self, rec: VarDeleteRecord, now: float, events) -> None:
        entry = self.db.get(rec.var_id)
        if entry is None or entry.to_be_deleted:
            return
        self._mark_deleted(entry)
        events.append(("delete-marked", rec.var_id))

    def _on_update(self, rec: VarUpdateRecord, now: float, events) -> None:
        entry = self.db.get(rec.var_id)
        if entry is None:
            # value without a specification: ask neighbours for the create
            if not self._known(rec.var_id, now):
                self._req_create.add(rec.var_id)
                events.append(("req-create", rec.var_id))
            return
        if entry.to_be_deleted or rec.seqno == entry.seqno:
            return
        if rec.seqno > entry.seqno:
            entry.value = rec.value
            entry.seqno = rec.seqno
            entry.last_update_received = now
            entry.count_update = entry.spec.rep_cnt
            self._pending_update.add(rec.var_id)
            armed = self._req_update.get(rec.var_id)
            if armed is not None and entry.seqno >= armed:
                del self._req_update[rec.var_id]
            events.append(("updated", rec.var_id, rec.seqno, rec.value.data))
        else:
            # sender is behind: re-announce the current value rep_cnt times
            entry.count_update = entry.spec.rep_cnt
            self._pending_update.add(rec.var_id)
            events.append(("stale", rec.var_id))

    def _on_summary(self, rec: VarSummaryRecord, now: float, events) -> None:
        entry = self.db.get(rec.var_id)
        if entry is None:
            if not self._known(rec.var_id, now):
                self._req_create.add(rec.var_id)
                events.append(("req-create", rec.var_id))
            return
        if entry.to_be_deleted:
            return
        if rec.seqno > entry.seqno:
            prev = self._req_update.get(rec.var_id, -1)
            if rec.seqno > prev:
                self._req_update[rec.var_id] = rec.seqno
            events.append(("req-update", rec.var_id))

    def _on_req_create(self, rec: VarReqCreateRecord, events) -> None:
        entry = self.db.get(rec.var_id)
        if entry is None or entry.to_be_deleted:
            return
        entry.count_create = entry.spec.rep_cnt
        self._pending_create.add(rec.var_id)

    def _on_req_update(self, rec: VarReqUpdateRecord, events) -> None:
        entry = self.db.get(rec.var_id)
        if entry is None or entry.to_be_deleted:
            return
        if entry.seqno > rec.seqno:
            entry.count_update = entry.spec.rep_cnt
            self._pending_update.add(rec.var_id)
