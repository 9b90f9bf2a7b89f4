"""Sender and receiver transfer state machines.

Sessions are pure with respect to I/O: they consume timestamped events
(packet arrivals, timer expiries, clear-to-send signals, stream data) and
emit actions (packets to send, timers to arm, sink writes, a final report).
Sockets, clocks, and files live in whatever harness drives them — the
deterministic simulator and the real UDP loop run identical session code.

Flow control: a session emits at most a small burst of SendPacket actions
and then waits; the harness answers each transmitted packet with one
SendReady event once the interface has serialized it. Data packets are
produced one per SendReady, which is what "as fast as the interface can
send" means at line rate, and pacer policies further delay each packet via
the ``earliest`` field.
"""

from __future__ import annotations

import bisect
import enum
import hashlib
from dataclasses import dataclass, field

from . import wire
from .holes import HoleTracker, RangeBeyondEnd, subtract_ranges
from .rate import Pacer
from .wire import (Data, DescriptorWidth, Direction, Metadata, Packet,
                   Request, Status, UNBOUNDED, select_descriptor_width)

# Timer identifiers.
TIMER_IDLE = "idle"
TIMER_STATUS = "status"
TIMER_LINGER = "linger"

# Abort reasons.
IDLE_TIMEOUT = "idle_timeout"
DIGEST_MISMATCH = "digest_mismatch"
PROTOCOL_VIOLATION = "protocol_violation"
SOURCE_OVERRUN = "source_overrun"

ZERO_DIGEST = bytes(wire.DIGEST_LEN)


class TransferMode(enum.Enum):
    FILE = "file"
    STREAM = "stream"


class SenderState(enum.Enum):
    AWAITING_REQUEST = "awaiting_request"
    TRANSFERRING = "transferring"
    DRAINING = "draining"
    DONE = "done"
    FAILED = "failed"


class ReceiverState(enum.Enum):
    AWAITING_METADATA = "awaiting_metadata"
    RECEIVING = "receiving"
    COMPLETE = "complete"
    DRAINED = "drained"  # stream shutdown; completion is undefined for streams
    FAILED = "failed"


# ---------------------------------------------------------------------------
# Events and actions


@dataclass(frozen=True)
class PacketArrived:
    packet: Packet
    now: float


@dataclass(frozen=True)
class TimerFired:
    timer_id: str
    now: float


@dataclass(frozen=True)
class StreamData:
    data: bytes
    now: float


@dataclass(frozen=True)
class SendReady:
    """The interface finished serializing one of our packets."""
    now: float


Event = PacketArrived | TimerFired | StreamData | SendReady


@dataclass(frozen=True)
class SendPacket:
    packet: Packet
    earliest: float


@dataclass(frozen=True)
class SetTimer:
    timer_id: str
    deadline: float


@dataclass(frozen=True)
class WriteSink:
    offset: int
    data: bytes


@dataclass(frozen=True)
class Finished:
    report: "TransferReport"


@dataclass(frozen=True)
class Abort:
    reason: str


Action = SendPacket | SetTimer | WriteSink | Finished | Abort


@dataclass
class TransferReport:
    bytes_delivered: int = 0
    unique_bytes: int = 0
    retransmitted_bytes: int = 0
    duration: float = 0.0
    goodput: float = 0.0
    status_packets: int = 0
    digest_ok: bool = False
    gap_bytes: int = 0

    def as_dict(self) -> dict:
        return {
            "bytes_delivered": self.bytes_delivered,
            "unique_bytes": self.unique_bytes,
            "retransmitted_bytes": self.retransmitted_bytes,
            "duration": self.duration,
            "goodput": self.goodput,
            "status_packets": self.status_packets,
            "digest_ok": self.digest_ok,
            "gap_bytes": self.gap_bytes,
        }


@dataclass(frozen=True)
class TransferConfig:
    wire: wire.WireConfig = field(default_factory=wire.WireConfig)
    status_interval: float = 0.2
    max_idle: float = 5.0
    stream_window: int = 1 << 20
    path: str = "data.bin"

    def __post_init__(self) -> None:
        if self.status_interval <= 0 or self.max_idle <= 0:
            raise ValueError("intervals must be positive")
        if self.stream_window < 1:
            raise ValueError("stream_window must be >= 1")


# ---------------------------------------------------------------------------
# Byte sources


class BytesSource:
    """In-memory random-access byte source."""

    def __init__(self, data: bytes):
        self._data = data
        self.size = len(data)

    def read_at(self, offset: int, length: int) -> bytes:
        return self._data[offset:offset + length]

    def sha256(self) -> bytes:
        return hashlib.sha256(self._data).digest()


class FileSource:
    """Random-access view of a file on disk."""

    def __init__(self, fileobj, size: int):
        self._f = fileobj
        self.size = size
        self._digest: bytes | None = None

    def read_at(self, offset: int, length: int) -> bytes:
        self._f.seek(offset)
        return self._f.read(length)

    def sha256(self) -> bytes:
        if self._digest is None:
            h = hashlib.sha256()
            self._f.seek(0)
            for block in iter(lambda: self._f.read(1 << 20), b""):
                h.update(block)
            self._digest = h.digest()
        return self._digest


class SparseSource:
    """Synthetic source of arbitrary logical size; content derived from
    offset so huge transfers need no real backing bytes."""

    def __init__(self, size: int):
        self.size = size

    def read_at(self, offset: int, length: int) -> bytes:
        out = bytearray()
        block_no = offset // 32
        skip = offset % 32
        while len(out) < length + skip:
            out += hashlib.sha256(block_no.to_bytes(16, "big")).digest()
            block_no += 1
        return bytes(out[skip:skip + length])

    def sha256(self) -> bytes:
        h = hashlib.sha256()
        pos = 0
        while pos < self.size:
            n = min(1 << 20, self.size - pos)
            h.update(self.read_at(pos, n))
            pos += n
        return h.digest()


# ---------------------------------------------------------------------------
# Sender


class SenderSession:
    """File or stream sender.

    Emits data retransmit-first: byte ranges reported missing by the peer
    go out before any new bytes. The end-of-data flag rides on the last
    packet the sender currently has to offer, soliciting an immediate
    status, and every status-requested flag doubles as an RTT probe.
    """

    def __init__(self, session_id: int, cfg: TransferConfig, pacer: Pacer,
                 source=None, mode: TransferMode = TransferMode.FILE,
                 await_request: bool = False):
        self.session_id = session_id
        self.cfg = cfg
        self.pacer = pacer
        self.mode = mode
        self.source = source
        if mode is TransferMode.FILE:
            if source is None:
                raise ValueError("file mode needs a source")
            self.size = source.size
            self.width = select_descriptor_width(self.size)
            self._digest = source.sha256()
        else:
            self.size = None
            self.width = DescriptorWidth.W128
            self._digest = ZERO_DIGEST
        self.state = (SenderState.AWAITING_REQUEST if await_request
                      else SenderState.TRANSFERRING)
        self.cursor = 0
        self.retransmit_queue: list[tuple[int, int]] = []
        self.report = TransferReport()

        self._streaming = mode is TransferMode.STREAM
        self._tx_pending = 0
        self._started_at = 0.0
        self._last_rx = 0.0
        self._last_sr = float("-inf")
        self._sr_sent_at: float | None = None
        self._sr_target = 0  # receiver knowledge proving it saw the probe
        self._rtt_est = 0.0
        self._eod_flagged = False
        self._recent_sends: list[tuple[float, int, int]] = []
        self._metadata_sent_at = float("-inf")
        self._pkts_since_feedback = 0
        self._last_loss_feedback = float("-inf")
        # Stream buffer: bytes in [base, base + len(buf)) kept for repair.
        self._buf = bytearray()
        self._buf_base = 0
        self._appended = 0
        self._source_closed = False
        self._peer_progress = 0

    # -- entry points -----------------------------------------------------

    def start(self, now: float) -> list[Action]:
        """Initiate a push transfer (or arm timers when awaiting a get)."""
        self._started_at = now
        self._last_rx = now
        actions: list[Action] = [SetTimer(TIMER_IDLE, now + self.cfg.max_idle)]
        if self.state is SenderState.TRANSFERRING:
            self._emit_opening(now, actions)
            self._pump(now, actions)
        return actions

    def on_event(self, event: Event) -> list[Action]:
        if self.state in (SenderState.DONE, SenderState.FAILED):
            return []
        actions: list[Action] = []
        if isinstance(event, SendReady):
            self._tx_pending = max(0, self._tx_pending - 1)
            self._pump(event.now, actions)
        elif isinstance(event, PacketArrived):
            self._on_packet(event.packet, event.now, actions)
        elif isinstance(event, TimerFired):
            self._on_timer(event.timer_id, event.now, actions)
        elif isinstance(event, StreamData):
            self._on_stream_data(event.data, event.now, actions)
        else:
            raise TypeError(f"unknown event {event!r}")
        return actions

    def finish_stream(self, now: float) -> list[Action]:
        """No more stream data will arrive; drain and close."""
        self._source_closed = True
        actions: list[Action] = []
        if self.state is SenderState.TRANSFERRING:
            self._pump(now, actions)
        return actions

    # -- internals --------------------------------------------------------

    def _emit_opening(self, now: float, actions: list[Action]) -> None:
        actions.append(SendPacket(
            Request(self.session_id, Direction.PUT, self.cfg.path, self._streaming),
            now))
        actions.append(SendPacket(self._metadata(), now))
        self._metadata_sent_at = now
        self._tx_pending += 2

    def _metadata(self) -> Metadata:
        size = UNBOUNDED if self._streaming else self.size
        return Metadata(self.session_id, size, self._digest, self.cfg.path,
                        self._streaming)

    def _on_packet(self, packet: Packet, now: float, actions: list[Action]) -> None:
        if packet.session_id != self.session_id:
            self._abort(PROTOCOL_VIOLATION, actions)
            return
        self._last_rx = now
        actions.append(SetTimer(TIMER_IDLE, now + self.cfg.max_idle))
        if isinstance(packet, Request):
            if self.state is SenderState.AWAITING_REQUEST and packet.direction is Direction.GET:
                self.state = SenderState.TRANSFERRING
                self._started_at = now
                self._emit_opening(now, actions)
                self._pump(now, actions)
        elif isinstance(packet, Status):
            self._on_status(packet, now, actions)

    def _on_status(self, status: Status, now: float, actions: list[Action]) -> None:
        self.report.status_packets += 1
        self._peer_progress = max(self._peer_progress, status.progress)

        # A round-trip sample counts only once the peer's report provably
        # covers the solicited offset; unsolicited periodic statuses arriving
        # early would otherwise drag the estimate far below the true RTT.
        rtt_sample: float | None = None
        knowledge = max([status.progress] + [s for s, _ in status.holes])
        if self._sr_sent_at is not None and knowledge >= self._sr_target:
            rtt_sample = now - self._sr_sent_at
            self._sr_sent_at = None
            if rtt_sample > 0:
                self._rtt_est = (rtt_sample if self._rtt_est == 0.0
                                 else 0.9 * self._rtt_est + 0.1 * rtt_sample)

        if status.complete:
            self._feed_tfrc([], rtt_sample, now)
            self._finish(now, actions)
            return

        # Anything at or past the cursor has never been sent, so a reported
        # gap there is just the peer seeing the end of the file, not loss.
        holes = subtract_ranges([(s, e) for s, e in status.holes],
                                [(self.cursor, 1 << 128)])
        fresh = self._fresh_holes(holes, now)
        if self.state is SenderState.DRAINING:
            # The peer has everything we ever sent in flight or better; a
            # shortfall with no reported holes means the tail (and possibly
            # the metadata) never arrived.
            if (not self._streaming and not holes and not fresh
                    and status.progress < self.size):
                fresh = self._fresh_holes([(status.progress, self.size)], now)
            if fresh:
                self.state = SenderState.TRANSFERRING
                self._eod_flagged = False
        # Only guard-filtered holes count as loss events: gaps that merely
        # reflect data still in flight would poison the loss estimate.
        self._feed_tfrc(fresh, rtt_sample, now)
        if fresh:
            self._queue_retransmits(fresh)
        self._pump(now, actions)

    def _feed_tfrc(self, fresh: list[tuple[int, int]], rtt_sample: float | None,
                   now: float) -> None:
        if self.pacer.tfrc is None:
            self._pkts_since_feedback = 0
            return
        events = len(fresh)
        if events and now - self._last_loss_feedback < max(self._rtt_est, 1e-9):
            events = 1  # losses within one round trip are one event
        if events:
            self._last_loss_feedback = now
        events = min(events, self._pkts_since_feedback)
        self.pacer.tfrc.on_feedback(rtt_sample, events, self._pkts_since_feedback)
        self._pkts_since_feedback = 0

    def _fresh_holes(self, holes: list[tuple[int, int]],
                     now: float) -> list[tuple[int, int]]:
        """Reported holes minus anything queued or sent too recently for the
        peer's report to know about (a report in flight crosses data in
        flight; within ~a round trip it proves nothing)."""
        if not holes:
            return []
        guard = 1.25 * self._rtt_est + 0.02
        self._recent_sends = [r for r in self._recent_sends if r[0] > now - guard]
        cut = sorted((s, e) for _, s, e in self._recent_sends)
        merged: list[tuple[int, int]] = []
        for s, e in cut:
            if merged and s <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], e))
            else:
                merged.append((s, e))
        fresh = subtract_ranges(holes, merged)
        return subtract_ranges(fresh, self.retransmit_queue)

    def _queue_retransmits(self, fresh: list[tuple[int, int]]) -> None:
        if self._streaming:
            fresh = [(max(s, self._buf_base), e) for s, e in fresh
                     if e > self._buf_base]
        merged = sorted(self.retransmit_queue + fresh)
        self.retransmit_queue = merged

    def _pump(self, now: float, actions: list[Action]) -> None:
        """Emit the next data packet if the interface is free."""
        if self.state is not SenderState.TRANSFERRING or self._tx_pending:
            return
        pkt = self._next_data(now)
        if pkt is not None:
            earliest = self.pacer.earliest_send(wire.encoded_size(pkt), now)
            actions.append(SendPacket(pkt, earliest))
            self._tx_pending += 1
            self._pkts_since_feedback += 1
            return
        if self._streaming and not self._source_closed:
            return  # idle until more stream data shows up
        self.state = SenderState.DRAINING
        if (not self._streaming
                and now - self._metadata_sent_at > self.cfg.status_interval):
            # Cheap insurance against a lost metadata packet: without it the
            # peer cannot verify size and digest, so it can never complete.
            actions.append(SendPacket(self._metadata(), now))
            self._metadata_sent_at = now
            self._tx_pending += 1
        if not self._eod_flagged:
            self._emit_probe(now, actions)
        actions.append(SetTimer(TIMER_STATUS, now + self.cfg.status_interval))

    def _next_data(self, now: float) -> Data | None:
        payload_max = self.cfg.wire.max_payload
        offset = None
        while self.retransmit_queue:
            start, end = self.retransmit_queue[0]
            if self._streaming:
                start = max(start, self._buf_base)
                if start >= end:
                    self.retransmit_queue.pop(0)
                    continue
            take = min(payload_max, end - start)
            if start + take >= end:
                self.retransmit_queue.pop(0)
            else:
                self.retransmit_queue[0] = (start + take, end)
            payload = self._read(start, take)
            self.report.retransmitted_bytes += take
            offset = start
            break
        if offset is None:
            avail = (self.size if not self._streaming else self._appended) - self.cursor
            if avail <= 0:
                return None
            take = min(payload_max, avail)
            payload = self._read(self.cursor, take)
            offset = self.cursor
            self.cursor += take
            self.report.unique_bytes += take
        self._recent_sends.append((now, offset, offset + take))
        self.report.bytes_delivered += take

        last = not self.retransmit_queue and self._nothing_new_left()
        eod = last and (not self._streaming or self._source_closed)
        if eod:
            self._eod_flagged = True
        sr = eod or now - self._last_sr >= self.cfg.status_interval
        if sr:
            self._last_sr = now
            if self._sr_sent_at is None:
                self._sr_sent_at = now
                self._sr_target = offset + take
        return Data(self.session_id, self.width, offset, payload,
                    self._streaming, eod, sr)

    def _nothing_new_left(self) -> bool:
        bound = self.size if not self._streaming else self._appended
        return self.cursor >= bound

    def _read(self, offset: int, length: int) -> bytes:
        if not self._streaming:
            return self.source.read_at(offset, length)
        lo = offset - self._buf_base
        return bytes(self._buf[lo:lo + length])

    def _emit_probe(self, now: float, actions: list[Action]) -> None:
        """Empty end-of-data packet soliciting a status."""
        offset = self.cursor
        probe = Data(self.session_id, self.width, offset, b"",
                     self._streaming, True, True)
        self._eod_flagged = True
        self._last_sr = now
        actions.append(SendPacket(probe, now))
        self._tx_pending += 1

    def _on_timer(self, timer_id: str, now: float, actions: list[Action]) -> None:
        if timer_id == TIMER_IDLE:
            if now - self._last_rx >= self.cfg.max_idle:
                self._abort(IDLE_TIMEOUT, actions)
            else:
                actions.append(SetTimer(TIMER_IDLE, self._last_rx + self.cfg.max_idle))
        elif timer_id == TIMER_STATUS and self.state is SenderState.DRAINING:
            if (not self._streaming
                    and now - self._metadata_sent_at > self.cfg.status_interval):
                actions.append(SendPacket(self._metadata(), now))
                self._metadata_sent_at = now
                self._tx_pending += 1
            self._emit_probe(now, actions)
            actions.append(SetTimer(TIMER_STATUS, now + self.cfg.status_interval))

    def _on_stream_data(self, data: bytes, now: float, actions: list[Action]) -> None:
        if not self._streaming or self._source_closed or not data:
            return
        self._buf += data
        self._appended += len(data)
        if self._appended - self.cursor > self.cfg.stream_window:
            self._abort(SOURCE_OVERRUN, actions)
            return
        self._trim_buffer()
        if self.state is SenderState.DRAINING:
            self.state = SenderState.TRANSFERRING
            self._eod_flagged = False
        self._pump(now, actions)

    def _trim_buffer(self) -> None:
        # Bytes below the peer's contiguous progress are never re-requested.
        floor = self._peer_progress
        if floor > self._buf_base:
            del self._buf[:floor - self._buf_base]
            self._buf_base = floor
            self.retransmit_queue = [(max(s, floor), e)
                                     for s, e in self.retransmit_queue if e > floor]

    def _finish(self, now: float, actions: list[Action]) -> None:
        self.state = SenderState.DONE
        self.report.duration = now - self._started_at
        if self.report.duration > 0:
            self.report.goodput = 8.0 * self.report.unique_bytes / self.report.duration
        self.report.digest_ok = True
        actions.append(Finished(self.report))

    def _abort(self, reason: str, actions: list[Action]) -> None:
        self.state = SenderState.FAILED
        actions.append(Abort(reason))


# ---------------------------------------------------------------------------
# Receiver


class ReceiverSession:
    """File or stream receiver.

    Writes arrive as WriteSink actions (the harness owns the actual sink);
    duplicates are discarded before they ever reach it. File bytes are also
    folded into a running digest along the contiguous prefix so completion
    can verify end-to-end integrity without re-reading the sink.
    """

    def __init__(self, cfg: TransferConfig, session_id: int | None = None):
        self.cfg = cfg
        self.session_id = session_id
        self.mode: TransferMode | None = None
        self.width = DescriptorWidth.W128
        self.tracker = HoleTracker()
        self.state = ReceiverState.AWAITING_METADATA
        self.report = TransferReport()
        self.path: str | None = None

        self._expected_digest: bytes | None = None
        self._hasher = hashlib.sha256()
        self._digest_pos = 0
        self._pending: list[tuple[int, bytes]] = []  # out-of-order chunks
        self._deliver_pos = 0
        self._started_at = 0.0
        self._last_rx = 0.0
        self._last_status_at = float("-inf")
        self._completed_at: float | None = None
        self._eod_seen = False
        self._finished = False

    def start(self, now: float) -> list[Action]:
        self._started_at = now
        self._last_rx = now
        return [SetTimer(TIMER_IDLE, now + self.cfg.max_idle)]

    def on_event(self, event: Event) -> list[Action]:
        if self.state is ReceiverState.FAILED or self._finished:
            return []
        actions: list[Action] = []
        if isinstance(event, PacketArrived):
            self._on_packet(event.packet, event.now, actions)
        elif isinstance(event, TimerFired):
            self._on_timer(event.timer_id, event.now, actions)
        elif isinstance(event, SendReady):
            pass
        else:
            raise TypeError(f"unknown event {event!r}")
        return actions

    # -- internals --------------------------------------------------------

    def _on_packet(self, packet: Packet, now: float, actions: list[Action]) -> None:
        if self.session_id is None:
            self.session_id = packet.session_id
        elif packet.session_id != self.session_id:
            self._abort(PROTOCOL_VIOLATION, actions)
            return
        self._last_rx = now
        if self.state is not ReceiverState.COMPLETE:
            actions.append(SetTimer(TIMER_IDLE, now + self.cfg.max_idle))
        if self.mode is None and not isinstance(packet, Status):
            self.mode = (TransferMode.STREAM if packet.streaming
                         else TransferMode.FILE)

        if isinstance(packet, Request):
            self.path = packet.path
            return
        if isinstance(packet, Metadata):
            self._on_metadata(packet, now, actions)
        elif isinstance(packet, Data):
            self._on_data(packet, now, actions)
        # Status packets addressed to a receiver carry nothing actionable.

    def _on_metadata(self, meta: Metadata, now: float, actions: list[Action]) -> None:
        if self.state in (ReceiverState.COMPLETE, ReceiverState.DRAINED):
            self._answer_probe(now, actions)
            return
        if self._expected_digest is None:
            self.path = self.path or meta.path
            self._expected_digest = meta.digest
            if not (meta.streaming and meta.transfer_size == UNBOUNDED):
                try:
                    self.tracker.set_expected_size(meta.transfer_size)
                except RangeBeyondEnd:
                    self._abort(PROTOCOL_VIOLATION, actions)
                    return
            if self.state is ReceiverState.AWAITING_METADATA:
                self.state = ReceiverState.RECEIVING
                actions.append(SetTimer(TIMER_STATUS, now + self.cfg.status_interval))
        self._maybe_complete(now, actions)

    def _on_data(self, data: Data, now: float, actions: list[Action]) -> None:
        if self.state in (ReceiverState.COMPLETE, ReceiverState.DRAINED):
            if data.status_requested or data.end_of_data:
                self._answer_probe(now, actions)
            return
        if self.state is ReceiverState.AWAITING_METADATA:
            # Data outran the metadata; collect it and report meanwhile.
            self.state = ReceiverState.RECEIVING
            actions.append(SetTimer(TIMER_STATUS, now + self.cfg.status_interval))
        self.width = data.width
        if data.payload:
            try:
                new = self.tracker.mark_received(data.offset, len(data.payload))
            except (RangeBeyondEnd, ValueError):
                self._abort(PROTOCOL_VIOLATION, actions)
                return
            fresh = 0
            for start, end in new:
                chunk = data.payload[start - data.offset:end - data.offset]
                fresh += len(chunk)
                if self.mode is TransferMode.FILE:
                    actions.append(WriteSink(start, chunk))
                bisect.insort(self._pending, (start, chunk))
            self.report.unique_bytes += fresh
            self.report.retransmitted_bytes += len(data.payload) - fresh
            self.report.bytes_delivered += len(data.payload)
            if self.mode is TransferMode.STREAM:
                self._abandon_stale(actions)
            self._release(actions)
        if data.end_of_data:
            self._eod_seen = True
        if not self._maybe_complete(now, actions):
            if data.end_of_data and self._has_holes():
                self._emit_status(now, actions)
            elif data.status_requested or data.end_of_data:
                self._emit_status(now, actions)

    def _has_holes(self) -> bool:
        return bool(self.tracker.hole_list(1))

    def _abandon_stale(self, actions: list[Action]) -> None:
        """Give up on holes that fell a full window behind the high water."""
        floor = self.tracker.high_water - self.cfg.stream_window
        if floor <= 0:
            return
        stale = [(s, min(e, floor)) for s, e in self.tracker.hole_list()
                 if s < floor]
        for start, end in stale:
            self.tracker.mark_received(start, end - start)
            self.report.gap_bytes += end - start

    def _release(self, actions: list[Action]) -> None:
        """Deliver in-order bytes: digest feed (file) or sink writes (stream)."""
        prefix = self.tracker.contiguous_prefix()
        while self._pending and self._pending[0][0] < prefix:
            start, chunk = self._pending.pop(0)
            if self.mode is TransferMode.FILE:
                if start == self._digest_pos:
                    self._hasher.update(chunk)
                    self._digest_pos = start + len(chunk)
            else:
                actions.append(WriteSink(start, chunk))
        self._deliver_pos = max(self._deliver_pos, prefix)

    def _maybe_complete(self, now: float, actions: list[Action]) -> bool:
        if self.mode is TransferMode.STREAM:
            if (self._eod_seen and self.state is ReceiverState.RECEIVING
                    and not self._has_holes()):
                self.state = ReceiverState.DRAINED
                self._completed_at = now
                self._emit_status(now, actions, complete=True)
                actions.append(SetTimer(TIMER_LINGER, now + self.cfg.max_idle))
            return self.state is ReceiverState.DRAINED
        if self._expected_digest is None or not self.tracker.is_complete():
            return False
        if self.state is not ReceiverState.RECEIVING:
            return True
        self._release(actions)
        if self.tracker.expected_size == 0:
            digest = hashlib.sha256(b"").digest()
        else:
            digest = self._hasher.digest()
        if digest != self._expected_digest:
            self._abort(DIGEST_MISMATCH, actions)
            return False
        self.state = ReceiverState.COMPLETE
        self._completed_at = now
        self.report.digest_ok = True
        self._emit_status(now, actions, complete=True)
        actions.append(SetTimer(TIMER_LINGER, now + self.cfg.max_idle))
        return True

    def _answer_probe(self, now: float, actions: list[Action]) -> None:
        self._emit_status(now, actions, complete=True)

    def _emit_status(self, now: float, actions: list[Action],
                     complete: bool = False) -> None:
        holes = tuple(self.tracker.hole_list(self.cfg.wire.max_holes_per_status))
        status = Status(self.session_id or 0, self.width,
                        self.tracker.contiguous_prefix(), holes,
                        self.mode is TransferMode.STREAM, complete)
        actions.append(SendPacket(status, now))
        self.report.status_packets += 1
        self._last_status_at = now

    def _on_timer(self, timer_id: str, now: float, actions: list[Action]) -> None:
        if timer_id == TIMER_LINGER:
            if self.state in (ReceiverState.COMPLETE, ReceiverState.DRAINED):
                self._finish(actions)
        elif timer_id == TIMER_IDLE:
            if self.state in (ReceiverState.COMPLETE, ReceiverState.DRAINED):
                return
            if now - self._last_rx >= self.cfg.max_idle:
                self._abort(IDLE_TIMEOUT, actions)
            else:
                actions.append(SetTimer(TIMER_IDLE, self._last_rx + self.cfg.max_idle))
        elif timer_id == TIMER_STATUS and self.state is ReceiverState.RECEIVING:
            if now - self._last_status_at >= self.cfg.status_interval:
                self._emit_status(now, actions)
            actions.append(SetTimer(TIMER_STATUS, now + self.cfg.status_interval))

    def _finish(self, actions: list[Action]) -> None:
        self._finished = True
        end = self._completed_at if self._completed_at is not None else self._last_rx
        self.report.duration = end - self._started_at
        if self.report.duration > 0:
            self.report.goodput = 8.0 * self.report.unique_bytes / self.report.duration
        actions.append(Finished(self.report))

    def _abort(self, reason: str, actions: list[Action]) -> None:
        self.state = ReceiverState.FAILED
        actions.append(Abort(reason))
