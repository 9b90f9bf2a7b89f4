"""Line-delimited JSON serialization of session events and actions.

One event or action per line, for replay debugging and determinism checks:
two runs with the same config and seed must produce byte-identical logs.
Schema documented in docs/trace-format.md.
"""

from __future__ import annotations

import base64
import json

from . import session, wire


def _packet_dict(pkt: wire.Packet) -> dict:
    d: dict = {"session_id": pkt.session_id, "streaming": pkt.streaming}
    if isinstance(pkt, wire.Request):
        d.update(type="request", direction=pkt.direction.name.lower(),
                 path=pkt.path)
    elif isinstance(pkt, wire.Metadata):
        d.update(type="metadata", transfer_size=str(pkt.transfer_size),
                 digest=pkt.digest.hex(), path=pkt.path)
    elif isinstance(pkt, wire.Data):
        d.update(type="data", width=pkt.width.bits, offset=str(pkt.offset),
                 payload=base64.b64encode(pkt.payload).decode(),
                 end_of_data=pkt.end_of_data,
                 status_requested=pkt.status_requested)
    else:
        d.update(type="status", width=pkt.width.bits, progress=str(pkt.progress),
                 holes=[[str(s), str(e)] for s, e in pkt.holes],
                 complete=pkt.complete)
    return d


def _packet_from_dict(d: dict) -> wire.Packet:
    kind = d["type"]
    if kind == "request":
        return wire.Request(d["session_id"], wire.Direction[d["direction"].upper()],
                            d["path"], d["streaming"])
    if kind == "metadata":
        return wire.Metadata(d["session_id"], int(d["transfer_size"]),
                             bytes.fromhex(d["digest"]), d["path"], d["streaming"])
    width = {16: wire.DescriptorWidth.W16, 32: wire.DescriptorWidth.W32,
             64: wire.DescriptorWidth.W64, 128: wire.DescriptorWidth.W128}[d["width"]]
    if kind == "data":
        return wire.Data(d["session_id"], width, int(d["offset"]),
                         base64.b64decode(d["payload"]), d["streaming"],
                         d["end_of_data"], d["status_requested"])
    return wire.Status(d["session_id"], width, int(d["progress"]),
                       tuple((int(s), int(e)) for s, e in d["holes"]),
                       d["streaming"], d["complete"])


def event_to_json(who: str, event: session.Event) -> str:
    if isinstance(event, session.PacketArrived):
        body = {"event": "packet_arrived", "now": event.now,
                "packet": _packet_dict(event.packet)}
    elif isinstance(event, session.TimerFired):
        body = {"event": "timer_fired", "now": event.now,
                "timer_id": event.timer_id}
    elif isinstance(event, session.StreamData):
        body = {"event": "stream_data", "now": event.now,
                "data": base64.b64encode(event.data).decode()}
    elif isinstance(event, session.SendReady):
        body = {"event": "send_ready", "now": event.now}
    else:
        raise TypeError(f"not an event: {event!r}")
    return json.dumps({"who": who, **body}, sort_keys=True)


def event_from_json(line: str) -> tuple[str, session.Event]:
    d = json.loads(line)
    kind = d["event"]
    if kind == "packet_arrived":
        ev: session.Event = session.PacketArrived(_packet_from_dict(d["packet"]),
                                                  d["now"])
    elif kind == "timer_fired":
        ev = session.TimerFired(d["timer_id"], d["now"])
    elif kind == "stream_data":
        ev = session.StreamData(base64.b64decode(d["data"]), d["now"])
    elif kind == "send_ready":
        ev = session.SendReady(d["now"])
    else:
        raise ValueError(f"unknown event kind {kind!r}")
    return d["who"], ev


def action_to_json(who: str, action: session.Action) -> str:
    if isinstance(action, session.SendPacket):
        body = {"action": "send_packet", "earliest": action.earliest,
                "packet": _packet_dict(action.packet)}
    elif isinstance(action, session.SetTimer):
        body = {"action": "set_timer", "timer_id": action.timer_id,
                "deadline": action.deadline}
    elif isinstance(action, session.WriteSink):
        body = {"action": "write_sink", "offset": str(action.offset),
                "data": base64.b64encode(action.data).decode()}
    elif isinstance(action, session.Finished):
        body = {"action": "finished", "report": action.report.as_dict()}
    elif isinstance(action, session.Abort):
        body = {"action": "abort", "reason": action.reason}
    else:
        raise TypeError(f"not an action: {action!r}")
    return json.dumps({"who": who, **body}, sort_keys=True)


class TraceWriter:
    """Appends event/action lines to a file-like object."""

    def __init__(self, fileobj):
        self._f = fileobj

    def event(self, who: str, event: session.Event) -> None:
        self._f.write(event_to_json(who, event) + "\n")

    def action(self, who: str, action: session.Action) -> None:
        self._f.write(action_to_json(who, action) + "\n")
