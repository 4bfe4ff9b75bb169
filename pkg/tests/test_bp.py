import numpy as np
import pytest

from vardislab.bp import (
    AlreadyRegistered,
    BeaconingProtocol,
    BeaconTiming,
    BufferMode,
    NotRegistered,
    PayloadTooLarge,
    next_beacon_time,
    next_interval,
)


def make_bp(max_beacon=200):
    return BeaconingProtocol(node_id=1, max_beacon_bytes=max_beacon)


class TestRegistration:
    def test_double_register_rejected(self):
        bp = make_bp()
        bp.register_client(2, BufferMode.BUFFERED_ONCE)
        with pytest.raises(AlreadyRegistered):
            bp.register_client(2, BufferMode.QUEUEING)

    def test_register_deregister_register(self):
        bp = make_bp()
        bp.register_client(2, BufferMode.BUFFERED_ONCE)
        bp.deregister_client(2)
        bp.register_client(2, BufferMode.QUEUEING)
        assert bp.query_client(2) is BufferMode.QUEUEING

    def test_query_unknown(self):
        with pytest.raises(NotRegistered):
            make_bp().query_client(9)


class TestBufferModes:
    def test_buffered_once_overwrite_then_clear(self):
        bp = make_bp()
        reg = bp.register_client(2, BufferMode.BUFFERED_ONCE)
        bp.submit_payload(reg, b"A")
        bp.submit_payload(reg, b"B")
        beacon = bp.assemble_beacon()
        assert beacon.payloads == ((2, b"B"),)
        assert bp.assemble_beacon() is None

    def test_buffered_repeated_persists(self):
        bp = make_bp()
        reg = bp.register_client(2, BufferMode.BUFFERED_REPEATED)
        bp.submit_payload(reg, b"A")
        assert bp.assemble_beacon().payloads == ((2, b"A"),)
        assert bp.assemble_beacon().payloads == ((2, b"A"),)

    def test_queueing_fifo_exactly_once(self):
        bp = make_bp()
        reg = bp.register_client(2, BufferMode.QUEUEING)
        bp.submit_payload(reg, b"A")
        bp.submit_payload(reg, b"B")
        assert bp.assemble_beacon().payloads == ((2, b"A"),)
        assert bp.assemble_beacon().payloads == ((2, b"B"),)
        assert bp.assemble_beacon() is None

    def test_payload_too_large_rejected_on_submit(self):
        bp = make_bp(200)
        reg = bp.register_client(2, BufferMode.BUFFERED_ONCE)
        with pytest.raises(PayloadTooLarge):
            bp.submit_payload(reg, bytes(188))
        bp.submit_payload(reg, bytes(187))

    def test_empty_payload_rejected(self):
        bp = make_bp()
        reg = bp.register_client(2, BufferMode.QUEUEING)
        with pytest.raises(ValueError):
            bp.submit_payload(reg, b"")


class TestAssembly:
    def test_no_payloads_no_beacon(self):
        bp = make_bp()
        bp.register_client(2, BufferMode.BUFFERED_ONCE)
        assert bp.assemble_beacon() is None

    def test_single_client_150b_payload_fits_200b_cap(self):
        bp = make_bp(200)
        reg = bp.register_client(2, BufferMode.BUFFERED_ONCE)
        bp.submit_payload(reg, bytes(150))
        beacon = bp.assemble_beacon()
        assert beacon is not None
        assert beacon.wire_size == 11 + 2 + 150

    def test_oversized_payload_skipped_slot_retained(self):
        bp = make_bp(300)
        big = bp.register_client(1, BufferMode.BUFFERED_REPEATED)
        bp.submit_payload(big, bytes(250))
        # shrink the cap afterwards so the buffered payload no longer fits
        bp.max_beacon_bytes = 200
        assert bp.assemble_beacon() is None
        assert big.peek() is not None

    def test_clients_visited_in_ascending_id_order(self):
        bp = make_bp()
        hi = bp.register_client(9, BufferMode.BUFFERED_ONCE)
        lo = bp.register_client(3, BufferMode.BUFFERED_ONCE)
        bp.submit_payload(hi, b"hi")
        bp.submit_payload(lo, b"lo")
        assert bp.assemble_beacon().payloads == ((3, b"lo"), (9, b"hi"))

    def test_budget_shared_across_clients(self):
        bp = make_bp(200)
        a = bp.register_client(1, BufferMode.BUFFERED_ONCE)
        b = bp.register_client(2, BufferMode.BUFFERED_ONCE)
        bp.submit_payload(a, bytes(100))
        bp.submit_payload(b, bytes(100))
        beacon = bp.assemble_beacon()
        assert [cid for cid, _ in beacon.payloads] == [1]
        assert b.peek() is not None  # retried in the next beacon
        assert bp.assemble_beacon().payloads[0][0] == 2

    def test_bp_seqno_increments_only_on_transmission(self):
        bp = make_bp()
        reg = bp.register_client(2, BufferMode.QUEUEING)
        assert bp.assemble_beacon() is None
        assert bp.bp_seqno == 0
        bp.submit_payload(reg, b"A")
        assert bp.assemble_beacon().bp_seqno == 0
        assert bp.bp_seqno == 1


class TestDispatch:
    def test_registered_and_unregistered(self):
        tx = make_bp()
        vardis = tx.register_client(7, BufferMode.BUFFERED_ONCE)
        other = tx.register_client(8, BufferMode.BUFFERED_ONCE)
        tx.submit_payload(vardis, b"v")
        tx.submit_payload(other, b"o")
        beacon = tx.assemble_beacon()

        rx = BeaconingProtocol(node_id=2)
        rx.register_client(7, BufferMode.BUFFERED_ONCE)
        assert rx.on_receive_beacon(beacon) == [(7, 1, b"v")]

    def test_multiple_payloads_dispatch(self):
        tx = make_bp()
        for cid in (3, 5):
            bp_reg = tx.register_client(cid, BufferMode.BUFFERED_ONCE)
            tx.submit_payload(bp_reg, bytes([cid]))
        beacon = tx.assemble_beacon()
        rx = BeaconingProtocol(node_id=2)
        rx.register_client(3, BufferMode.QUEUEING)
        rx.register_client(5, BufferMode.QUEUEING)
        assert rx.on_receive_beacon(beacon) == [(3, 1, b"\x03"), (5, 1, b"\x05")]


class TestTiming:
    def test_periodic_jitter_bounds(self):
        timing = BeaconTiming("periodic-jitter", rate_hz=10, jitter=0.10)
        rng = np.random.default_rng(0)
        gaps = np.array([next_interval(timing, rng) for _ in range(5000)])
        assert gaps.min() >= 0.09
        assert gaps.max() <= 0.11

    def test_zero_jitter_is_exact_period(self):
        timing = BeaconTiming("periodic-jitter", rate_hz=10, jitter=0.0)
        rng = np.random.default_rng(0)
        assert next_interval(timing, rng) == pytest.approx(0.1)

    def test_exponential_mean_within_one_percent(self):
        timing = BeaconTiming("exponential", rate_hz=10)
        rng = np.random.default_rng(1)
        gaps = rng.exponential(0.1, size=0)  # keep array dtype for concat
        draws = np.array([next_interval(timing, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 0.1) < 0.001

    def test_periodic_mean_within_one_percent(self):
        timing = BeaconTiming("periodic-jitter", rate_hz=10, jitter=0.10)
        rng = np.random.default_rng(2)
        draws = np.array([next_interval(timing, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 0.1) < 0.001

    def test_next_beacon_time_offsets_now(self):
        timing = BeaconTiming("periodic-jitter", rate_hz=10, jitter=0.0)
        rng = np.random.default_rng(0)
        assert next_beacon_time(timing, rng, 5.0) == pytest.approx(5.1)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            BeaconTiming("periodic-jitter", rate_hz=0)
        with pytest.raises(ValueError):
            BeaconTiming("weird", rate_hz=1)
