"""Drive sender and receiver sessions over the simulated link.

The harness owns everything the sessions abstract away: the event queue is
the clock, two one-directional links carry packet objects between the
endpoints, timers are replayed through the queue, and sink writes land in
an in-memory buffer. Given a config and seed the whole run is bit-for-bit
reproducible, action logs included.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import wire
from .netsim import EventQueue, SimLink, SimLinkConfig, TcpRefConfig, run_tcp_reference
from .rate import Pacer
from .session import (Abort, Finished, PacketArrived, ReceiverSession, SendPacket,
                      SenderSession, SendReady, SetTimer, StreamData, TimerFired,
                      TransferConfig, TransferMode, TransferReport, WriteSink)


class TransferFailed(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class StreamFeed:
    """Constant-bit-rate synthetic stream source."""

    rate_bps: float
    chunk_interval: float = 0.01
    seed: int = 0

    def chunks(self, duration: float):
        rng = random.Random(self.seed)
        t = 0.0
        per_chunk = max(1, int(self.rate_bps * self.chunk_interval / 8.0))
        while t < duration:
            yield t, rng.randbytes(per_chunk)
            t += self.chunk_interval


@dataclass
class SimResult:
    report: TransferReport
    sender_report: TransferReport
    receiver_report: TransferReport
    sink: bytearray
    delivered: list[tuple[int, bytes]]  # in-order stream deliveries
    tx_log: list[tuple[float, str, int]] = field(default_factory=list)


class _Driver:
    """Event-queue glue between two sessions and a duplex link."""

    def __init__(self, link_cfg: SimLinkConfig, cfg: TransferConfig,
                 record_tx: bool = False, record_actions: bool = False):
        self.link_cfg = link_cfg
        self.cfg = cfg
        self.eventq = EventQueue()
        seeds = random.Random(link_cfg.seed)
        self.session_id = seeds.getrandbits(32)
        fwd_seed = seeds.getrandbits(64)
        rev_seed = seeds.getrandbits(64)
        self.fwd = SimLink(link_cfg, self.eventq,
                           lambda pkt, t: self._arrive("r", pkt, t), seed=fwd_seed)
        self.rev = SimLink(link_cfg, self.eventq,
                           lambda pkt, t: self._arrive("s", pkt, t), seed=rev_seed)
        self.sessions: dict[str, object] = {}
        self.links = {"s": self.fwd, "r": self.rev}
        self.timers: dict[tuple[str, str], float] = {}
        self.finished: dict[str, TransferReport] = {}
        self.aborted: dict[str, str] = {}
        self.sink = bytearray()
        self.delivered: list[tuple[int, bytes]] = []
        self.tx_log: list[tuple[float, str, int]] = [] if record_tx else None
        self.action_log: list = [] if record_actions else None

    # -- plumbing ---------------------------------------------------------

    def _arrive(self, who: str, pkt: wire.Packet, now: float) -> None:
        self._dispatch(who, PacketArrived(pkt, now))

    def _dispatch(self, who: str, event) -> None:
        session = self.sessions[who]
        self._apply(who, session.on_event(event))

    def _apply(self, who: str, actions) -> None:
        if self.action_log is not None:
            self.action_log.extend((who, a) for a in actions)
        for action in actions:
            if isinstance(action, SendPacket):
                when = max(self.eventq.now, action.earliest)
                self.eventq.schedule(
                    when, lambda w=who, p=action.packet: self._transmit(w, p))
            elif isinstance(action, SetTimer):
                self.timers[(who, action.timer_id)] = action.deadline
                self.eventq.schedule(
                    action.deadline,
                    lambda w=who, t=action.timer_id, d=action.deadline:
                        self._fire_timer(w, t, d))
            elif isinstance(action, WriteSink):
                end = action.offset + len(action.data)
                if len(self.sink) < end:
                    self.sink.extend(bytes(end - len(self.sink)))
                self.sink[action.offset:end] = action.data
                self.delivered.append((action.offset, action.data))
            elif isinstance(action, Finished):
                self.finished[who] = action.report
            elif isinstance(action, Abort):
                self.aborted[who] = action.reason

    def _transmit(self, who: str, pkt: wire.Packet) -> None:
        now = self.eventq.now
        size = wire.encoded_size(pkt) + self.link_cfg.frame_overhead
        _, tx_end = self.links[who].send(pkt, size, now)
        if self.tx_log is not None:
            self.tx_log.append((now, who, size))
        self.eventq.schedule(tx_end, lambda w=who: self._dispatch(w, SendReady(tx_end)))

    def _fire_timer(self, who: str, timer_id: str, deadline: float) -> None:
        if self.timers.get((who, timer_id)) != deadline:
            return  # superseded by a later re-arm
        del self.timers[(who, timer_id)]
        self._dispatch(who, TimerFired(timer_id, deadline))

    def _done(self, who: str) -> bool:
        return who in self.finished or who in self.aborted

    def run(self, max_duration: float) -> None:
        while len(self.eventq) and not (self._done("s") and self._done("r")):
            if self.eventq.now > max_duration:
                raise TransferFailed("max_duration")
            self.eventq.run_next()


def _merge_reports(driver: _Driver) -> TransferReport:
    sender = driver.finished.get("s")
    receiver = driver.finished.get("r")
    if sender is None or receiver is None:
        # dict preserves insertion order: first abort is the root cause
        reason = next(iter(driver.aborted.values()), "incomplete")
        raise TransferFailed(reason)
    merged = TransferReport(
        bytes_delivered=sender.bytes_delivered,
        unique_bytes=sender.unique_bytes,
        retransmitted_bytes=sender.retransmitted_bytes,
        duration=receiver.duration,
        status_packets=receiver.status_packets,
        digest_ok=receiver.digest_ok,
        gap_bytes=receiver.gap_bytes,
    )
    if merged.duration > 0:
        merged.goodput = 8.0 * merged.unique_bytes / merged.duration
    return merged


def run_transfer(link_cfg: SimLinkConfig, source, cfg: TransferConfig = TransferConfig(),
                 pacer: Pacer | None = None, max_duration: float = 3600.0,
                 record_tx: bool = False) -> SimResult:
    """One complete file transfer over the simulated link.

    ``source`` is a byte source (anything with ``size``, ``read_at``,
    ``sha256``) or plain bytes. Raises :class:`TransferFailed` when either
    endpoint aborts or the run exceeds ``max_duration`` simulated seconds.
    """
    if isinstance(source, (bytes, bytearray)):
        from .session import BytesSource
        source = BytesSource(bytes(source))
    driver = _Driver(link_cfg, cfg, record_tx=record_tx)
    sender = SenderSession(driver.session_id, cfg, pacer or Pacer("line"),
                           source=source, mode=TransferMode.FILE)
    receiver = ReceiverSession(cfg)
    driver.sessions = {"s": sender, "r": receiver}
    driver._apply("r", receiver.start(0.0))
    driver._apply("s", sender.start(0.0))
    driver.run(max_duration)
    report = _merge_reports(driver)
    return SimResult(report, driver.finished["s"], driver.finished["r"],
                     driver.sink, driver.delivered, driver.tx_log or [])


def run_stream(link_cfg: SimLinkConfig, feed: StreamFeed, duration: float,
               cfg: TransferConfig = TransferConfig(), pacer: Pacer | None = None,
               max_duration: float = 3600.0) -> tuple[SimResult, bytes]:
    """Stream ``feed`` for ``duration`` simulated seconds, then drain.

    Returns the sim result and the exact bytes the source fed, for
    delivered-prefix comparison. In-order deliveries (gaps excluded) are in
    ``result.delivered``.
    """
    driver = _Driver(link_cfg, cfg)
    sender = SenderSession(driver.session_id, cfg, pacer or Pacer("line"),
                           mode=TransferMode.STREAM)
    receiver = ReceiverSession(cfg)
    driver.sessions = {"s": sender, "r": receiver}
    driver._apply("r", receiver.start(0.0))
    driver._apply("s", sender.start(0.0))

    sent = bytearray()
    for t, chunk in feed.chunks(duration):
        sent += chunk
        driver.eventq.schedule(
            t, lambda c=chunk, t=t: driver._apply(
                "s", sender.on_event(StreamData(c, t))))
    driver.eventq.schedule(
        duration, lambda: driver._apply("s", sender.finish_stream(duration)))
    driver.run(max_duration)
    report = _merge_reports(driver)
    return (SimResult(report, driver.finished["s"], driver.finished["r"],
                      driver.sink, driver.delivered, []), bytes(sent))


@dataclass
class ComparisonReport:
    saratoga_utilization: float
    tcp_utilization: float
    saratoga_trace: list[tuple[float, float]]
    tcp_trace: list[tuple[float, float]]
    tcp_queue_trace: list[tuple[float, float]]
    saratoga_report: TransferReport
    tcp_loss_events: int

    def as_dict(self) -> dict:
        return {
            "saratoga_utilization": self.saratoga_utilization,
            "tcp_utilization": self.tcp_utilization,
            "saratoga": self.saratoga_report.as_dict(),
            "tcp_loss_events": self.tcp_loss_events,
        }


def bin_rate_trace(tx_log: list[tuple[float, str, int]], who: str,
                   bin_s: float = 1.0) -> list[tuple[float, float]]:
    """Per-bin send rate (bits/s) from a timestamped transmission log."""
    bins: dict[int, int] = {}
    for t, w, size in tx_log:
        if w == who:
            bins[int(t / bin_s)] = bins.get(int(t / bin_s), 0) + size
    return [(i * bin_s, total * 8.0 / bin_s) for i, total in sorted(bins.items())]


def run_comparison(link_cfg: SimLinkConfig, file_size: int = 512 * 1024,
                   duration: float = 120.0,
                   cfg: TransferConfig = TransferConfig(),
                   tcp: TcpRefConfig = TcpRefConfig()) -> ComparisonReport:
    """Line-rate transfer vs. the TCP reference over identically configured,
    separately seeded links; reports each flow's share of link capacity
    carried as unique goodput."""
    from .session import SparseSource

    src = SparseSource(file_size) if file_size > (1 << 22) else None
    data_seed = random.Random(link_cfg.seed ^ 0x5A5A5A5A)
    source = src or BytesFromSeed(file_size, data_seed)
    result = run_transfer(link_cfg, source, cfg, record_tx=True)
    sar_util = 0.0
    if result.report.duration > 0:
        sar_util = (8.0 * result.report.unique_bytes
                    / (link_cfg.rate * result.report.duration))

    tcp_link = SimLinkConfig(rate=link_cfg.rate, one_way_delay=link_cfg.one_way_delay,
                             loss_prob=link_cfg.loss_prob, queue_len=link_cfg.queue_len,
                             seed=link_cfg.seed + 1,
                             frame_overhead=link_cfg.frame_overhead)
    tcp_state = run_tcp_reference(tcp_link, duration, tcp)
    return ComparisonReport(
        saratoga_utilization=sar_util,
        tcp_utilization=tcp_state.utilization,
        saratoga_trace=bin_rate_trace(result.tx_log, "s"),
        tcp_trace=tcp_state.trace,
        tcp_queue_trace=tcp_state.queue_trace,
        saratoga_report=result.report,
        tcp_loss_events=tcp_state.loss_events,
    )


class BytesFromSeed:
    """Deterministic pseudo-random in-memory source."""

    def __init__(self, size: int, rng: random.Random):
        from .session import BytesSource
        self._inner = BytesSource(rng.randbytes(size))
        self.size = size

    def read_at(self, offset: int, length: int) -> bytes:
        return self._inner.read_at(offset, length)

    def sha256(self) -> bytes:
        return self._inner.sha256()


def write_trace_csv(path: str, report: ComparisonReport) -> None:
    """Fig-1-style traces: ``time_s,flow,rate_bps,queue_pkts``."""
    with open(path, "w") as f:
        f.write("time_s,flow,rate_bps,queue_pkts\n")
        for t, rate in report.saratoga_trace:
            f.write(f"{t:.3f},saratoga,{rate:.1f},0\n")
        for (t, rate), (_, q) in zip(report.tcp_trace, report.tcp_queue_trace):
            f.write(f"{t:.3f},tcp,{rate:.1f},{q:.1f}\n")
