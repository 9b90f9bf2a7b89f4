import pytest

from saratoga.netsim import (EventQueue, SimLink, SimLinkConfig, TcpPhase,
                             TcpRefConfig, count_rate_peaks, run_tcp_reference)


def drain(eventq):
    while len(eventq):
        eventq.run_next()


class TestEventQueue:
    def test_time_order_and_tie_break(self):
        q = EventQueue()
        seen = []
        q.schedule(2.0, lambda: seen.append("late"))
        q.schedule(1.0, lambda: seen.append("a"))
        q.schedule(1.0, lambda: seen.append("b"))
        drain(q)
        assert seen == ["a", "b", "late"]

    def test_no_scheduling_in_the_past(self):
        q = EventQueue()
        q.schedule(1.0, lambda: None)
        q.run_next()
        with pytest.raises(ValueError):
            q.schedule(0.5, lambda: None)


class TestSimLink:
    def _arrivals(self, cfg, sends, sizes=None):
        q = EventQueue()
        got = []
        link = SimLink(cfg, q, lambda p, t: got.append((p, t)))
        for i, when in enumerate(sends):
            size = sizes[i] if sizes else 1250
            q.schedule(when, lambda i=i, s=size: link.send(i, s, q.now))
        drain(q)
        return got, link

    def test_serialization_plus_propagation(self):
        cfg = SimLinkConfig(rate=1e6, one_way_delay=0.25, loss_prob=0.0, seed=1)
        got, _ = self._arrivals(cfg, [0.0])
        assert got == [(0, pytest.approx(0.0 + 0.01 + 0.25))]

    def test_back_to_back_serialization(self):
        cfg = SimLinkConfig(rate=1e6, one_way_delay=0.0, loss_prob=0.0, seed=1)
        got, _ = self._arrivals(cfg, [0.0, 0.0, 0.0])
        assert [t for _, t in got] == [pytest.approx(0.01 * k) for k in (1, 2, 3)]

    def test_total_loss_delivers_nothing(self):
        cfg = SimLinkConfig(rate=1e6, one_way_delay=0.01, loss_prob=1.0, seed=1)
        got, link = self._arrivals(cfg, [i * 0.02 for i in range(50)])
        assert got == [] and link.dropped_loss == 50

    def test_queue_tail_drop(self):
        cfg = SimLinkConfig(rate=1e5, one_way_delay=0.0, loss_prob=0.0,
                            queue_len=5, seed=1)
        got, link = self._arrivals(cfg, [0.0] * 9)
        assert len(got) == 5
        assert link.dropped_queue == 4
        assert sorted(p for p, _ in got) == [0, 1, 2, 3, 4]  # tail drop

    def test_causality(self):
        cfg = SimLinkConfig(rate=5e5, one_way_delay=0.1, loss_prob=0.2, seed=3)
        sends = [i * 0.004 for i in range(500)]
        got, _ = self._arrivals(cfg, sends)
        min_latency = 1250 * 8 / 5e5 + 0.1
        by_packet = dict((p, t) for p, t in got)
        for p, t in by_packet.items():
            assert t >= sends[p] + min_latency - 1e-12
        arrivals = [t for _, t in got]
        assert arrivals == sorted(arrivals)  # FIFO link never reorders

    def test_delivered_fraction_tracks_loss_prob(self):
        cfg = SimLinkConfig(rate=1e9, one_way_delay=0.0, loss_prob=0.05,
                            queue_len=10**6, seed=12)
        q = EventQueue()
        got = []
        link = SimLink(cfg, q, lambda p, t: got.append(p))
        for i in range(100_000):
            q.schedule(i * 1e-5, lambda i=i: link.send(i, 1250, q.now))
        drain(q)
        frac = len(got) / 100_000
        assert abs(frac - 0.95) <= 0.005

    def test_determinism(self):
        cfg = SimLinkConfig(rate=1e6, one_way_delay=0.02, loss_prob=0.3, seed=99)
        a, _ = self._arrivals(cfg, [i * 0.01 for i in range(200)])
        b, _ = self._arrivals(cfg, [i * 0.01 for i in range(200)])
        assert a == b


FIG1 = SimLinkConfig(rate=128000, one_way_delay=0.25, loss_prob=0.0,
                     queue_len=20, seed=5)


class TestTcpReference:
    def test_unlimited_queue_converges_flat(self):
        st = run_tcp_reference(FIG1, 120.0, unlimited_queue=True)
        tail = [r for _, r in st.trace[len(st.trace) // 2:]]
        assert all(r == pytest.approx(128000.0) for r in tail)
        assert st.loss_events == 0

    def test_queue_limited_sawtooth(self):
        st = run_tcp_reference(FIG1, 120.0)
        # peaks exceed the link rate, troughs are half-peaks
        peaks = count_rate_peaks(st.trace, 128000.0)
        assert peaks >= 6  # >= 3 per simulated minute over 2 minutes
        assert st.utilization < 1.0
        rates = [r for _, r in st.trace]
        top = max(rates[len(rates) // 2:])
        after = [rates[i + 1] for i in range(len(rates) - 1)
                 if rates[i] == top and rates[i + 1] < top]
        assert after and after[0] == pytest.approx(top / 2)

    def test_two_seeds_identical_without_random_loss(self):
        a = run_tcp_reference(FIG1, 60.0)
        b = run_tcp_reference(SimLinkConfig(rate=128000, one_way_delay=0.25,
                                            loss_prob=0.0, queue_len=20, seed=77),
                              60.0)
        assert a.trace == b.trace

    def test_random_loss_reduces_utilization(self):
        lossy = SimLinkConfig(rate=128000, one_way_delay=0.25, loss_prob=0.01,
                              queue_len=20, seed=5)
        st = run_tcp_reference(lossy, 120.0)
        assert st.utilization <= 0.60
        assert st.loss_events > 0

    def test_slow_start_doubles_then_ca_adds_one(self):
        st = run_tcp_reference(FIG1, 30.0)
        rates = [r for _, r in st.trace]
        seg_rate = 256 * 8 / 0.5
        assert rates[0] == pytest.approx(seg_rate)       # one segment per rtt
        assert rates[1] == pytest.approx(2 * seg_rate)   # doubling
        assert rates[2] == pytest.approx(4 * seg_rate)

    def test_invalid_duration(self):
        with pytest.raises(ValueError):
            run_tcp_reference(FIG1, 0.0)


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SimLinkConfig(rate=0)
        with pytest.raises(ValueError):
            SimLinkConfig(loss_prob=1.5)
        with pytest.raises(ValueError):
            SimLinkConfig(queue_len=0)
        with pytest.raises(ValueError):
            SimLinkConfig(one_way_delay=-1)
