"""Real-network harness: one UDP socket, one session, one thread.

The same sender/receiver state machines the simulator drives are wired to
a datagram socket and the monotonic clock. Pacing is honoured by holding
each outbound packet until its ``earliest`` stamp; at line rate the loop
sends as fast as the socket accepts, which is the intended behaviour on a
dedicated link.
"""

from __future__ import annotations

import collections
import hashlib
import select
import socket
import sys
import time

from . import wire
from .session import (Abort, Finished, PacketArrived, ReceiverSession,
                      SendPacket, SenderSession, SendReady, SetTimer,
                      StreamData, TimerFired, TransferConfig, TransferMode,
                      TransferReport, WriteSink)

DEFAULT_PORT = 7542
_SOCK_BUF = 1 << 22
_BATCH = 32


class UdpTransferError(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _Loop:
    def __init__(self, sock: socket.socket, session_obj, cfg: TransferConfig,
                 peer=None, sink=None, tx_log: list | None = None):
        self.sock = sock
        self.session = session_obj
        self.cfg = cfg
        self.peer = peer
        self.sink = sink
        self.tx_log = tx_log
        self.timers: dict[str, float] = {}
        self.egress: collections.deque[tuple[float, wire.Packet]] = collections.deque()
        self.finished: TransferReport | None = None
        self.aborted: str | None = None
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def apply(self, actions) -> None:
        for action in actions:
            if isinstance(action, SendPacket):
                self.egress.append((action.earliest, action.packet))
            elif isinstance(action, SetTimer):
                self.timers[action.timer_id] = action.deadline
            elif isinstance(action, WriteSink):
                if self.sink is not None:
                    self.sink.seek(action.offset)
                    self.sink.write(action.data)
            elif isinstance(action, Finished):
                self.finished = action.report
            elif isinstance(action, Abort):
                self.aborted = action.reason

    def _pump_egress(self) -> None:
        sent = 0
        while self.egress and sent < _BATCH:
            earliest, pkt = self.egress[0]
            now = self.now()
            if earliest > now:
                break
            self.egress.popleft()
            if self.peer is not None:
                try:
                    self.sock.sendto(wire.encode_packet(pkt, self.cfg.wire), self.peer)
                except OSError:
                    pass  # transient send failure; loss repair covers it
                if self.tx_log is not None:
                    self.tx_log.append((now, wire.encoded_size(pkt)))
            sent += 1
            self.apply(self.session.on_event(SendReady(self.now())))

    def _fire_timers(self) -> None:
        now = self.now()
        for timer_id, deadline in list(self.timers.items()):
            if deadline <= now and self.timers.get(timer_id) == deadline:
                del self.timers[timer_id]
                self.apply(self.session.on_event(TimerFired(timer_id, now)))

    def _drain_socket(self) -> None:
        for _ in range(_BATCH * 4):
            try:
                datagram, addr = self.sock.recvfrom(65536)
            except BlockingIOError:
                return
            except OSError:
                return
            try:
                pkt = wire.decode_packet(datagram, self.cfg.wire)
            except wire.WireError:
                continue  # not ours; ignore
            if self.session.session_id is not None and \
                    pkt.session_id != self.session.session_id:
                continue  # stray traffic on our port
            if self.peer is None:
                self.peer = addr
            self.apply(self.session.on_event(PacketArrived(pkt, self.now())))

    def run(self, hard_deadline: float) -> TransferReport:
        self.sock.setblocking(False)
        while self.finished is None and self.aborted is None:
            if self.now() > hard_deadline:
                raise UdpTransferError("max_duration")
            self._pump_egress()
            self._drain_socket()
            self._fire_timers()
            wait = 0.05
            if self.egress:
                wait = min(wait, max(0.0, self.egress[0][0] - self.now()))
            if self.timers:
                wait = min(wait, max(0.0, min(self.timers.values()) - self.now()))
            if self.egress and self.egress[0][0] <= self.now():
                wait = 0.0
            select.select([self.sock], [], [], wait)
        if self.aborted is not None:
            raise UdpTransferError(self.aborted)
        return self.finished


def send_file(path: str, host: str, port: int, cfg: TransferConfig,
              pacer, session_id: int | None = None,
              max_duration: float = 3600.0) -> TransferReport:
    """Push one file to a listening receiver; returns the sender report."""
    from .session import FileSource
    import os
    import random

    f = open(path, "rb")
    try:
        source = FileSource(f, os.fstat(f.fileno()).st_size)
        sid = session_id if session_id is not None else random.getrandbits(32)
        sender = SenderSession(sid, cfg, pacer, source=source,
                               mode=TransferMode.FILE)
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            _tune(sock)
            loop = _Loop(sock, sender, cfg, peer=(host, port), tx_log=[])
            loop.apply(sender.start(0.0))
            report = loop.run(max_duration)
            report_tx = loop.tx_log
            return report
        finally:
            sock.close()
    finally:
        f.close()


def recv_file(output_path: str, port: int, cfg: TransferConfig,
              bind_host: str = "", wait: float = 30.0,
              max_duration: float = 3600.0) -> TransferReport:
    """Receive one inbound transfer and write it to ``output_path``."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        _tune(sock)
        sock.bind((bind_host, port))
        sock.settimeout(wait)
        try:
            first, addr = sock.recvfrom(65536)
        except socket.timeout:
            raise UdpTransferError("no_transfer") from None
        receiver = ReceiverSession(cfg)
        with open(output_path, "wb") as sink:
            loop = _Loop(sock, receiver, cfg, peer=addr, sink=sink)
            loop.apply(receiver.start(0.0))
            try:
                pkt = wire.decode_packet(first, cfg.wire)
                loop.apply(receiver.on_event(PacketArrived(pkt, loop.now())))
            except wire.WireError:
                pass
            report = loop.run(max_duration)
            sink.flush()
        return report
    finally:
        sock.close()


def _tune(sock: socket.socket) -> None:
    for opt in (socket.SO_RCVBUF, socket.SO_SNDBUF):
        try:
            sock.setsockopt(socket.SOL_SOCKET, opt, _SOCK_BUF)
        except OSError:
            pass
