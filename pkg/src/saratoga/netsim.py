"""Deterministic seeded link simulator and the TCP reference flow.

The simulator runs on simulated time only: a single event queue orders all
callbacks, ties broken by insertion, so identical configs and seeds replay
identical event logs. One ``SimLink`` models one direction of a link as a
drop-tail queue in front of a serializer, followed by fixed propagation
delay and i.i.d. Bernoulli loss.

The TCP reference is a fluid additive-increase/multiplicative-decrease rate
process sampled once per round-trip epoch, not a segment-level stack: it
reproduces the slow-start ramp, the congestion-avoidance sawtooth against a
drop-tail queue, and the rate halving on loss, which is the behaviour the
line-rate comparison is about. Its segment size and queue defaults are
declared in ``TcpRefConfig`` and reported with every result.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable


@dataclass(frozen=True)
class SimLinkConfig:
    rate: float = 128000.0        # bits/s
    one_way_delay: float = 0.25   # seconds
    loss_prob: float = 0.0        # i.i.d. per packet
    queue_len: int = 20           # packets waiting or in service
    seed: int = 0
    frame_overhead: int = 28      # UDP + IP bytes added to every datagram

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.one_way_delay < 0:
            raise ValueError("delay must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.queue_len < 1:
            raise ValueError("queue_len must be >= 1")
        if self.frame_overhead < 0:
            raise ValueError("frame_overhead must be >= 0")


class EventQueue:
    """Time-ordered callback queue; ties pop in insertion order."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self.now = 0.0

    def schedule(self, when: float, fn: Callable[[], None]) -> None:
        if when < self.now:
            raise ValueError(f"cannot schedule at {when} before now={self.now}")
        heapq.heappush(self._heap, (when, self._seq, fn))
        self._seq += 1

    def __len__(self) -> int:
        return len(self._heap)

    def run_next(self) -> None:
        when, _, fn = heapq.heappop(self._heap)
        self.now = when
        fn()


class SimLink:
    """One direction of a link: drop-tail queue, serializer, delay, loss."""

    def __init__(self, cfg: SimLinkConfig, eventq: EventQueue,
                 deliver: Callable[[object, float], None], seed: int | None = None):
        self.cfg = cfg
        self._eventq = eventq
        self._deliver = deliver
        self._rng = random.Random(cfg.seed if seed is None else seed)
        self._busy_until = 0.0
        self.in_queue = 0
        self.delivered = 0
        self.dropped_queue = 0
        self.dropped_loss = 0

    def send(self, payload: object, nbytes: int, now: float) -> tuple[bool, float]:
        """Offer one packet to the link.

        Returns (accepted, serialization_end). A full queue tail-drops the
        packet, costing no serialization time. Loss is drawn per accepted
        packet and applied after serialization.
        """
        if self.in_queue >= self.cfg.queue_len:
            self.dropped_queue += 1
            return False, now
        self.in_queue += 1
        start = max(now, self._busy_until)
        tx_end = start + nbytes * 8.0 / self.cfg.rate
        self._busy_until = tx_end
        lost = self._rng.random() < self.cfg.loss_prob
        arrival = tx_end + self.cfg.one_way_delay

        def _depart() -> None:
            self.in_queue -= 1
            if lost:
                self.dropped_loss += 1
            else:
                self.delivered += 1
                self._deliver(payload, arrival)

        self._eventq.schedule(tx_end, _depart)
        return True, tx_end


# ---------------------------------------------------------------------------
# TCP reference flow


@dataclass(frozen=True)
class TcpRefConfig:
    segment_bytes: int = 256
    initial_window: float = 1.0


class TcpPhase:
    SLOW_START = "slow_start"
    CONGESTION_AVOIDANCE = "congestion_avoidance"
    FAST_RECOVERY = "fast_recovery"


@dataclass
class TcpRefState:
    cwnd: float
    ssthresh: float
    rtt: float
    state: str
    trace: list[tuple[float, float]] = field(default_factory=list)
    queue_trace: list[tuple[float, float]] = field(default_factory=list)
    utilization: float = 0.0
    loss_events: int = 0


def run_tcp_reference(link: SimLinkConfig, duration: float,
                      tcp: TcpRefConfig = TcpRefConfig(),
                      unlimited_queue: bool = False) -> TcpRefState:
    """Fluid AIMD rate trace over a bottleneck described by ``link``.

    The flow sends ``cwnd`` segments per round-trip epoch. Loss events are
    queue overflow (in-flight beyond pipe plus buffer) or the per-packet
    Bernoulli draw, collapsed to at most one window halving per epoch. The
    traced rate is the offered load ``cwnd * segment / rtt``; with an
    unbounded buffer the flow is modeled as saturating at link rate (the
    self-clocking regime), so the trace converges instead of diverging.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    rtt = max(2.0 * link.one_way_delay, 1e-3)
    seg = tcp.segment_bytes
    cap = link.rate * rtt / (8.0 * seg)  # pkts per epoch at link rate
    pipe = float("inf") if unlimited_queue else cap + link.queue_len
    rng = random.Random(link.seed)

    st = TcpRefState(cwnd=tcp.initial_window, ssthresh=float("inf"),
                     rtt=rtt, state=TcpPhase.SLOW_START)
    t = 0.0
    delivered = 0.0
    epochs = 0
    while t < duration:
        st.trace.append((t, st.cwnd * seg * 8.0 / rtt))
        st.queue_trace.append((t, min(max(st.cwnd - cap, 0.0), float(link.queue_len))))
        delivered += min(st.cwnd, cap) * (1.0 - link.loss_prob)
        epochs += 1

        draw = rng.random()  # one draw per epoch keeps replays aligned
        overflow = st.cwnd > pipe
        random_loss = (link.loss_prob > 0
                       and draw > (1.0 - link.loss_prob) ** st.cwnd)
        if overflow or random_loss:
            st.loss_events += 1
            st.ssthresh = max(st.cwnd / 2.0, 2.0)
            st.cwnd = st.ssthresh
            st.state = TcpPhase.FAST_RECOVERY
        elif st.state == TcpPhase.SLOW_START:
            st.cwnd = min(st.cwnd * 2.0, st.ssthresh if st.ssthresh != float("inf")
                          else st.cwnd * 2.0)
            if st.cwnd >= st.ssthresh:
                st.state = TcpPhase.CONGESTION_AVOIDANCE
        else:
            st.cwnd += 1.0
            st.state = TcpPhase.CONGESTION_AVOIDANCE
        if unlimited_queue:
            st.cwnd = min(st.cwnd, cap)
        t += rtt

    st.utilization = delivered / (cap * epochs) if epochs else 0.0
    return st


def count_rate_peaks(trace: list[tuple[float, float]], threshold: float) -> int:
    """Local maxima above ``threshold`` (a sawtooth peak per backoff)."""
    peaks = 0
    for i in range(1, len(trace) - 1):
        _, prev = trace[i - 1]
        _, here = trace[i]
        _, nxt = trace[i + 1]
        if here > threshold and here >= prev and here > nxt:
            peaks += 1
    return peaks
