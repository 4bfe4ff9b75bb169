import pytest

from vardislab.vardis import (
    BeingDeleted,
    NotFound,
    NotProducer,
    VarDisEntity,
    VariableExists,
)
from vardislab.wire import (
    SectionType,
    VariableSpecification,
    VarReqCreateRecord,
    VarSummaryRecord,
    VarUpdateRecord,
    VarValue,
)

NODE = 1
OTHER = 2


def entity(**kw):
    kw.setdefault("max_payload_bytes", 187)
    return VarDisEntity(NODE, **kw)


def spec(var_id=7, rep_cnt=3, producer=NODE):
    return VariableSpecification(var_id, producer, rep_cnt, f"v{var_id}")


def drain_payloads(ent, n, now=0.0):
    return [ent.make_payload(now + i) for i in range(n)]


class TestCreate:
    def test_create_then_read(self):
        ent = entity()
        ent.create_variable(spec(), VarValue(b"init"), now=0.0)
        value, seqno, _ = ent.read_variable(7)
        assert value == VarValue(b"init")
        assert seqno == 0

    def test_create_twice_rejected(self):
        ent = entity()
        ent.create_variable(spec(), VarValue(b"x"), now=0.0)
        with pytest.raises(VariableExists):
            ent.create_variable(spec(), VarValue(b"y"), now=1.0)

    def test_create_by_non_producer_rejected(self):
        ent = entity()
        with pytest.raises(NotProducer):
            ent.create_variable(spec(producer=OTHER), VarValue(b"x"), now=0.0)

    def test_create_repeats_in_exactly_rep_cnt_payloads(self):
        ent = entity(summaries_enabled=False)
        ent.create_variable(spec(rep_cnt=3), VarValue(b"x"), now=0.0)
        payloads = drain_payloads(ent, 5)
        with_create = [
            p for p in payloads if p is not None and p.section(SectionType.CREATE)
        ]
        assert len(with_create) == 3
        assert payloads[3] is None and payloads[4] is None


class TestUpdate:
    def test_two_updates_reach_seqno_two(self):
        ent = entity()
        ent.create_variable(spec(), VarValue(b"a"), now=0.0)
        ent.update_variable(7, VarValue(b"b"), now=1.0)
        ent.update_variable(7, VarValue(b"c"), now=2.0)
        value, seqno, _ = ent.read_variable(7)
        assert seqno == 2
        assert value == VarValue(b"c")

    def test_update_from_non_producer_rejected(self):
        producer = entity()
        producer.create_variable(spec(), VarValue(b"a"), now=0.0)
        consumer = VarDisEntity(OTHER)
        payload = producer.make_payload(0.0)
        consumer.process_payload(payload, now=0.1)
        with pytest.raises(NotProducer):
            consumer.update_variable(7, VarValue(b"evil"), now=0.2)

    def test_update_not_found(self):
        with pytest.raises(NotFound):
            entity().update_variable(99, VarValue(b"a"), now=0.0)

    def test_update_repeats_in_exactly_next_rep_cnt_payloads(self):
        ent = entity(summaries_enabled=False)
        ent.create_variable(spec(rep_cnt=2), VarValue(b"a"), now=0.0)
        drain_payloads(ent, 3)  # drain the create repetitions
        ent.update_variable(7, VarValue(b"b"), now=3.0)
        payloads = drain_payloads(ent, 4, now=4.0)
        with_update = [
            p for p in payloads if p is not None and p.section(SectionType.UPDATE)
        ]
        assert len(with_update) == 2
        assert payloads[2] is None


class TestDelete:
    def test_delete_unknown(self):
        with pytest.raises(NotFound):
            entity().delete_variable(99, now=0.0)

    def test_delete_then_update_rejected(self):
        ent = entity()
        ent.create_variable(spec(), VarValue(b"a"), now=0.0)
        ent.delete_variable(7, now=1.0)
        with pytest.raises(BeingDeleted):
            ent.update_variable(7, VarValue(b"b"), now=2.0)

    def test_read_not_found_after_delete_drains(self):
        ent = entity(summaries_enabled=False)
        ent.create_variable(spec(rep_cnt=2), VarValue(b"a"), now=0.0)
        drain_payloads(ent, 2)
        ent.delete_variable(7, now=2.0)
        with pytest.raises(NotFound):
            ent.read_variable(7)
        deletes = [
            p for p in drain_payloads(ent, 4, now=3.0)
            if p is not None and p.section(SectionType.DELETE)
        ]
        assert len(deletes) == 2
        assert 7 not in ent.db


class TestMakePayload:
    def test_empty_db_yields_none(self):
        assert entity().make_payload(0.0) is None

    def test_round_robin_summaries_over_25_variables(self):
        ent = entity(max_summary_count=10)
        ent.summaries_enabled = False
        for var_id in range(1, 26):
            ent.create_variable(spec(var_id, rep_cnt=1), VarValue(b"x"), now=0.0)
        # flush the create repetitions so only summaries remain
        while ent.make_payload(0.0) is not None:
            pass
        ent.summaries_enabled = True
        p = ent.make_payload(0.0)
        first = [r.var_id for r in p.section(SectionType.SUMMARY)]
        second = [
            r.var_id for r in ent.make_payload(1.0).section(SectionType.SUMMARY)
        ]
        third = [
            r.var_id for r in ent.make_payload(2.0).section(SectionType.SUMMARY)
        ]
        assert first == list(range(1, 11))
        assert second == list(range(11, 21))
        assert third == list(range(21, 26)) + list(range(1, 6))

    def test_updates_outrank_summaries_for_space(self):
        # budget fits exactly one 21 B update section and nothing else
        ent = entity(max_payload_bytes=23)
        ent.create_variable(spec(rep_cnt=1), VarValue(bytes(12)), now=0.0)
        ent.make_payload(0.0)  # create repetition goes out first
        ent.update_variable(7, VarValue(bytes(12)), now=1.0)
        p = ent.make_payload(1.0)
        assert [s for s, _ in p.sections] == [SectionType.UPDATE]
        assert p.wire_size == 21

    def test_sections_appear_in_priority_order(self):
        ent = entity()
        ent.create_variable(spec(5, rep_cnt=1), VarValue(b"a"), now=0.0)
        ent.update_variable(5, VarValue(b"b"), now=0.5)
        ent.process_payload(
            _payload_with_summary(VarSummaryRecord(40, 3)), now=1.0
        )
        p = ent.make_payload(1.0)
        types = [s for s, _ in p.sections]
        assert types == sorted(types)
        assert p.section(SectionType.REQ_CREATE) == (VarReqCreateRecord(40),)


def _payload_with_summary(*records):
    from vardislab.wire import VarDisPayload

    return VarDisPayload(((SectionType.SUMMARY, tuple(records)),))


def _payload_with_update(*records):
    from vardislab.wire import VarDisPayload

    return VarDisPayload(((SectionType.UPDATE, tuple(records)),))


class TestProcessPayload:
    def make_producer_consumer(self, rep_cnt=3):
        producer = VarDisEntity(NODE, summaries_enabled=False)
        producer.create_variable(spec(rep_cnt=rep_cnt), VarValue(b"a"), now=0.0)
        consumer = VarDisEntity(OTHER, summaries_enabled=False)
        consumer.process_payload(producer.make_payload(0.0), now=0.1)
        return producer, consumer

    def test_equal_seqno_discarded(self):
        _, consumer = self.make_producer_consumer()
        consumer.db[7].seqno = 5
        events = consumer.process_payload(
            _payload_with_update(VarUpdateRecord(7, 5, VarValue(b"dup"))), now=1.0
        )
        assert events == []
        assert consumer.db[7].value == VarValue(b"a")

    def test_newer_seqno_adopted(self):
        _, consumer = self.make_producer_consumer()
        events = consumer.process_payload(
            _payload_with_update(VarUpdateRecord(7, 4, VarValue(b"new"))), now=1.0
        )
        assert ("updated", 7, 4, b"new") in events
        assert consumer.db[7].seqno == 4
        assert consumer.db[7].count_update == 3

    def test_stale_seqno_triggers_reannounce(self):
        _, consumer = self.make_producer_consumer()
        consumer.db[7].seqno = 5
        consumer.db[7].count_update = 0
        consumer.process_payload(
            _payload_with_update(VarUpdateRecord(7, 3, VarValue(b"old"))), now=1.0
        )
        assert consumer.db[7].seqno == 5
        assert consumer.db[7].count_update == 3
        p = consumer.make_payload(2.0)
        (rec,) = p.section(SectionType.UPDATE)
        assert rec.seqno == 5

    def test_summary_for_missing_var_requests_create(self):
        ent = entity(summaries_enabled=False)
        ent.process_payload(_payload_with_summary(VarSummaryRecord(9, 4)), now=0.0)
        p = ent.make_payload(1.0)
        assert p.section(SectionType.REQ_CREATE) == (VarReqCreateRecord(9),)
        # cleared after inclusion, re-armed by a fresh summary
        assert ent.make_payload(2.0) is None
        ent.process_payload(_payload_with_summary(VarSummaryRecord(9, 4)), now=3.0)
        assert ent.make_payload(4.0).section(SectionType.REQ_CREATE)

    def test_summary_with_newer_seqno_requests_update(self):
        _, consumer = self.make_producer_consumer()
        consumer.process_payload(
            _payload_with_summary(VarSummaryRecord(7, 9)), now=1.0
        )
        p = consumer.make_payload(2.0)
        (req,) = p.section(SectionType.REQ_UPDATE)
        assert req.var_id == 7
        assert req.seqno == 0  # requester's stored seqno, not the summarised one

    def test_summary_with_old_seqno_ignored(self):
        _, consumer = self.make_producer_consumer()
        drain_payloads(consumer, 4)  # flush the adopted create's repetitions
        consumer.db[7].seqno = 5
        consumer.process_payload(
            _payload_with_summary(VarSummaryRecord(7, 2)), now=1.0
        )
        assert consumer.make_payload(2.0) is None

    def test_create_for_known_var_ignored(self):
        producer, consumer = self.make_producer_consumer()
        consumer.db[7].seqno = 8
        payload = _recreate_payload(producer)
        consumer.process_payload(payload, now=5.0)
        assert consumer.db[7].seqno == 8  # unchanged

    def test_req_create_schedules_create_repetitions(self):
        producer, _ = self.make_producer_consumer(rep_cnt=2)
        from vardislab.wire import VarDisPayload

        drain_payloads(producer, 3)  # nothing pending any more
        producer.process_payload(
            VarDisPayload(((SectionType.REQ_CREATE, (VarReqCreateRecord(7),)),)),
            now=5.0,
        )
        assert producer.db[7].count_create == 2

    def test_req_update_only_served_when_strictly_newer(self):
        producer, _ = self.make_producer_consumer(rep_cnt=2)
        from vardislab.wire import VarDisPayload, VarReqUpdateRecord

        producer.update_variable(7, VarValue(b"b"), now=1.0)
        drain_payloads(producer, 3, now=2.0)
        producer.process_payload(
            VarDisPayload(((SectionType.REQ_UPDATE, (VarReqUpdateRecord(7, 1),)),)),
            now=5.0,
        )
        assert producer.db[7].count_update == 0  # requester already current
        producer.process_payload(
            VarDisPayload(((SectionType.REQ_UPDATE, (VarReqUpdateRecord(7, 0),)),)),
            now=6.0,
        )
        assert producer.db[7].count_update == 2

    def test_update_for_unknown_var_requests_create(self):
        ent = entity(summaries_enabled=False)
        ent.process_payload(
            _payload_with_update(VarUpdateRecord(42, 3, VarValue(b"x"))), now=0.0
        )
        assert ent.make_payload(1.0).section(SectionType.REQ_CREATE) == (
            VarReqCreateRecord(42),
        )

    def test_delete_blocks_further_updates(self):
        producer, consumer = self.make_producer_consumer()
        from vardislab.wire import VarDeleteRecord, VarDisPayload

        consumer.process_payload(
            VarDisPayload(((SectionType.DELETE, (VarDeleteRecord(7),)),)), now=1.0
        )
        assert consumer.db[7].to_be_deleted
        assert consumer.db[7].count_delete == 3
        consumer.process_payload(
            _payload_with_update(VarUpdateRecord(7, 9, VarValue(b"zombie"))), now=2.0
        )
        assert consumer.db[7].seqno == 0

    def test_tombstone_suppresses_recreation_by_stale_summary(self):
        ent = entity(summaries_enabled=False, beacon_rate_hint=10.0)
        ent.create_variable(spec(rep_cnt=1), VarValue(b"a"), now=0.0)
        ent.make_payload(0.0)
        ent.delete_variable(7, now=1.0)
        ent.make_payload(1.0)  # drains the single delete repetition
        assert 7 not in ent.db
        ent.process_payload(_payload_with_summary(VarSummaryRecord(7, 0)), now=1.5)
        assert ent.make_payload(2.0) is None  # no create-request armed
        # after the tombstone expires (10 * rep_cnt / rate = 1 s) it re-arms
        ent.process_payload(_payload_with_summary(VarSummaryRecord(7, 0)), now=2.5)
        assert ent.make_payload(3.0).section(SectionType.REQ_CREATE)


def _recreate_payload(producer):
    producer.db[7].count_create = 1
    producer._pending_create.add(7)
    return producer.make_payload(9.0)


class TestAlwaysRepeat:
    def test_value_rides_in_every_payload(self):
        ent = entity(always_repeat=True, summaries_enabled=False)
        ent.create_variable(spec(rep_cnt=1), VarValue(b"a"), now=0.0)
        for i in range(5):
            p = ent.make_payload(float(i))
            (rec,) = p.section(SectionType.UPDATE)
            assert rec.seqno == 0

    def test_has_pending_reflects_mode(self):
        ent = entity(always_repeat=True, summaries_enabled=False)
        assert not ent.has_pending()
        ent.create_variable(spec(rep_cnt=1), VarValue(b"a"), now=0.0)
        ent.make_payload(0.0)
        assert ent.has_pending()


class TestHasPending:
    def test_idle_without_summaries(self):
        ent = entity(summaries_enabled=False)
        ent.create_variable(spec(rep_cnt=1), VarValue(b"a"), now=0.0)
        assert ent.has_pending()
        ent.make_payload(0.0)
        assert not ent.has_pending()

    def test_summaries_keep_entity_busy(self):
        ent = entity(summaries_enabled=True)
        ent.create_variable(spec(rep_cnt=1), VarValue(b"a"), now=0.0)
        ent.make_payload(0.0)
        assert ent.has_pending()
