"""Binary wire codec for the transfer protocol.

Every packet starts with a fixed 8-byte header, followed by a per-type body.
All multi-byte integers are big-endian.

Header layout:
┌────────────┬───────┬──────────────────────────────────────────────────┐
│ Field      │ Bytes │ Description                                      │
├────────────┼───────┼──────────────────────────────────────────────────┤
│ ver/type   │   1   │ high nibble: version (1); low nibble: PacketType │
│ flags      │   1   │ see flag bits below                              │
│ session_id │   4   │ 32-bit transfer session identifier               │
│ body_len   │   2   │ byte length of the body that follows             │
└────────────┴───────┴──────────────────────────────────────────────────┘

Flag bits:
  bit 0-1  descriptor width code: 00=16-bit, 01=32-bit, 10=64-bit, 11=128-bit
  bit 2    streaming transfer
  bit 3    end-of-data
  bit 4    status requested
  bit 5-7  reserved; written as zero, ignored on decode

Bodies (big-endian throughout; "desc" means an unsigned integer of the
descriptor width declared in the flags):
  Request  (type 1): direction u8 (0=get, 1=put); path u16 length + UTF-8
  Metadata (type 2): transfer_size u128; digest 32 bytes; path u16 len + UTF-8
  Data     (type 3): offset desc; payload = remainder of body
  Status   (type 4): progress desc; hole count u16; count x (start desc, end desc)

Bytes past the declared body are ignored on decode (forward compatibility),
as are the reserved flag bits. The full byte-offset tables live in
docs/wire-format.md and the golden vectors under tests/vectors/.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

HEADER_LEN = 8
VERSION = 1
DIGEST_LEN = 32
MAX_PATH_BYTES = 1024
UDP_PAYLOAD_CEILING = 65507

# Sentinel transfer_size announcing an open-ended (streaming) transfer.
UNBOUNDED = (1 << 128) - 1

FLAG_WIDTH_LOW = 0x01
FLAG_WIDTH_HIGH = 0x02
FLAG_STREAMING = 0x04
FLAG_END_OF_DATA = 0x08
FLAG_STATUS_REQUESTED = 0x10
_RESERVED_FLAGS = 0xE0


class WireError(Exception):
    """Base class for every encode/decode failure."""


class OversizeField(WireError):
    """A field exceeds its wire limit (path, payload, hole count, offset)."""


class Truncated(WireError):
    """Buffer ends before the declared fields do."""


class BadVersion(WireError):
    """Header carries an unsupported protocol version."""


class UnknownType(WireError):
    """Header carries an unrecognised packet type."""


class MalformedHoles(WireError):
    """Status hole list is unsorted, overlapping, or has an empty range."""


class MalformedField(WireError):
    """A body field is not decodable (bad UTF-8, unknown direction code)."""


class PacketType(enum.IntEnum):
    REQUEST = 1
    METADATA = 2
    DATA = 3
    STATUS = 4


class Direction(enum.IntEnum):
    GET = 0
    PUT = 1


class DescriptorWidth(enum.IntEnum):
    """Width of offset/size fields, as the 2-bit wire code."""

    W16 = 0
    W32 = 1
    W64 = 2
    W128 = 3

    @property
    def nbytes(self) -> int:
        return 2 << self.value

    @property
    def bits(self) -> int:
        return 16 << self.value

    @property
    def max_value(self) -> int:
        return (1 << self.bits) - 1


def select_descriptor_width(size: int) -> DescriptorWidth:
    """Smallest descriptor width whose range covers ``size``."""
    if size < 0:
        raise ValueError("size must be non-negative")
    for width in DescriptorWidth:
        if size <= width.max_value:
            return width
    raise OversizeField(f"size {size} exceeds 128-bit range")


@dataclass(frozen=True)
class WireConfig:
    max_payload: int = 1452
    max_holes_per_status: int = 64

    def __post_init__(self) -> None:
        if self.max_payload < 1:
            raise ValueError("max_payload must be >= 1")
        worst_header = HEADER_LEN + DescriptorWidth.W128.nbytes
        if self.max_payload + worst_header > UDP_PAYLOAD_CEILING:
            raise ValueError("max_payload exceeds UDP datagram ceiling")
        if self.max_holes_per_status < 1:
            raise ValueError("max_holes_per_status must be >= 1")
        status_size = HEADER_LEN + 2 + (1 + 2 * self.max_holes_per_status) * 16
        if status_size > UDP_PAYLOAD_CEILING:
            raise ValueError("max_holes_per_status exceeds UDP datagram ceiling")


@dataclass(frozen=True)
class Request:
    session_id: int
    direction: Direction
    path: str
    streaming: bool = False


@dataclass(frozen=True)
class Metadata:
    session_id: int
    transfer_size: int
    digest: bytes
    path: str
    streaming: bool = False


@dataclass(frozen=True)
class Data:
    session_id: int
    width: DescriptorWidth
    offset: int
    payload: bytes
    streaming: bool = False
    end_of_data: bool = False
    status_requested: bool = False


@dataclass(frozen=True)
class Status:
    session_id: int
    width: DescriptorWidth
    progress: int
    holes: tuple[tuple[int, int], ...] = field(default_factory=tuple)
    streaming: bool = False
    complete: bool = False  # carried by the end-of-data flag


Packet = Request | Metadata | Data | Status


def _check_uint(value: int, bits: int, what: str) -> None:
    if not 0 <= value < (1 << bits):
        raise OversizeField(f"{what} {value} does not fit in {bits} bits")


def _check_holes(holes: tuple[tuple[int, int], ...], width: DescriptorWidth) -> None:
    prev_end = -1
    for start, end in holes:
        if not (0 <= start < end <= width.max_value + 1):
            raise MalformedHoles(f"bad hole [{start}, {end})")
        if start <= prev_end:
            raise MalformedHoles("holes out of order or overlapping")
        prev_end = end


def _encode_path(path: str) -> bytes:
    raw = path.encode("utf-8")
    if len(raw) > MAX_PATH_BYTES:
        raise OversizeField(f"path is {len(raw)} bytes, limit {MAX_PATH_BYTES}")
    return len(raw).to_bytes(2, "big") + raw


def _header(ptype: PacketType, flags: int, session_id: int, body_len: int) -> bytes:
    _check_uint(session_id, 32, "session_id")
    return bytes((
        (VERSION << 4) | ptype,
        flags,
    )) + session_id.to_bytes(4, "big") + body_len.to_bytes(2, "big")


def encode_packet(packet: Packet, cfg: WireConfig = WireConfig()) -> bytes:
    """Serialize a packet; deterministic for a given packet and config."""
    flags = 0
    if packet.streaming:
        flags |= FLAG_STREAMING

    if isinstance(packet, Request):
        body = bytes((packet.direction,)) + _encode_path(packet.path)
        ptype = PacketType.REQUEST
    elif isinstance(packet, Metadata):
        _check_uint(packet.transfer_size, 128, "transfer_size")
        if len(packet.digest) != DIGEST_LEN:
            raise OversizeField(f"digest must be {DIGEST_LEN} bytes")
        body = packet.transfer_size.to_bytes(16, "big") + packet.digest + _encode_path(packet.path)
        ptype = PacketType.METADATA
    elif isinstance(packet, Data):
        flags |= packet.width
        if packet.end_of_data:
            flags |= FLAG_END_OF_DATA
        if packet.status_requested:
            flags |= FLAG_STATUS_REQUESTED
        if len(packet.payload) > cfg.max_payload:
            raise OversizeField(f"payload {len(packet.payload)} > max {cfg.max_payload}")
        if packet.offset < 0 or packet.offset + len(packet.payload) > packet.width.max_value + 1:
            raise OversizeField("offset + payload exceeds descriptor range")
        body = packet.offset.to_bytes(packet.width.nbytes, "big") + packet.payload
        ptype = PacketType.DATA
    elif isinstance(packet, Status):
        flags |= packet.width
        if packet.complete:
            flags |= FLAG_END_OF_DATA
        _check_uint(packet.progress, packet.width.bits, "progress")
        if len(packet.holes) > cfg.max_holes_per_status:
            raise OversizeField(
                f"{len(packet.holes)} holes > max {cfg.max_holes_per_status}")
        _check_holes(packet.holes, packet.width)
        n = packet.width.nbytes
        parts = [packet.progress.to_bytes(n, "big"), len(packet.holes).to_bytes(2, "big")]
        for start, end in packet.holes:
            parts.append(start.to_bytes(n, "big"))
            parts.append(end.to_bytes(n, "big"))
        body = b"".join(parts)
        ptype = PacketType.STATUS
    else:
        raise TypeError(f"not a packet: {packet!r}")

    return _header(ptype, flags, packet.session_id, len(body)) + body


def encoded_size(packet: Packet) -> int:
    """Wire size in bytes without materializing the encoding."""
    if isinstance(packet, Request):
        return HEADER_LEN + 1 + 2 + len(packet.path.encode("utf-8"))
    if isinstance(packet, Metadata):
        return HEADER_LEN + 16 + DIGEST_LEN + 2 + len(packet.path.encode("utf-8"))
    if isinstance(packet, Data):
        return HEADER_LEN + packet.width.nbytes + len(packet.payload)
    if isinstance(packet, Status):
        return HEADER_LEN + packet.width.nbytes * (1 + 2 * len(packet.holes)) + 2
    raise TypeError(f"not a packet: {packet!r}")


class _Reader:
    """Bounds-checked cursor over a byte buffer; never reads past the end."""

    def __init__(self, buf: bytes, limit: int):
        self._buf = buf
        self._pos = 0
        self._limit = limit

    @property
    def remaining(self) -> int:
        return self._limit - self._pos

    def take(self, n: int, what: str) -> bytes:
        if n > self.remaining:
            raise Truncated(f"need {n} bytes for {what}, have {self.remaining}")
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out

    def take_uint(self, n: int, what: str) -> int:
        return int.from_bytes(self.take(n, what), "big")

    def take_rest(self) -> bytes:
        return self.take(self.remaining, "rest")


def _decode_path(r: _Reader) -> str:
    n = r.take_uint(2, "path length")
    if n > MAX_PATH_BYTES:
        raise OversizeField(f"path length {n} > {MAX_PATH_BYTES}")
    raw = r.take(n, "path")
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedField("path is not valid UTF-8") from exc


def decode_packet(buf: bytes, cfg: WireConfig = WireConfig()) -> Packet:
    """Parse one datagram. Inverse of :func:`encode_packet` on its image.

    Raises a :class:`WireError` subclass on any malformed input; never
    raises anything else and never returns a packet violating the type
    invariants documented above.
    """
    if len(buf) < HEADER_LEN:
        raise Truncated(f"datagram of {len(buf)} bytes is shorter than the header")
    version = buf[0] >> 4
    if version != VERSION:
        raise BadVersion(f"version {version}")
    try:
        ptype = PacketType(buf[0] & 0x0F)
    except ValueError:
        raise UnknownType(f"packet type {buf[0] & 0x0F}") from None
    flags = buf[1]
    session_id = int.from_bytes(buf[2:6], "big")
    body_len = int.from_bytes(buf[6:8], "big")
    if HEADER_LEN + body_len > len(buf):
        raise Truncated(f"declared body of {body_len} bytes exceeds datagram")

    width = DescriptorWidth(flags & (FLAG_WIDTH_LOW | FLAG_WIDTH_HIGH))
    streaming = bool(flags & FLAG_STREAMING)
    end_of_data = bool(flags & FLAG_END_OF_DATA)
    status_requested = bool(flags & FLAG_STATUS_REQUESTED)
    r = _Reader(buf, HEADER_LEN + body_len)
    r.take(HEADER_LEN, "header")

    if ptype is PacketType.REQUEST:
        code = r.take_uint(1, "direction")
        try:
            direction = Direction(code)
        except ValueError:
            raise MalformedField(f"direction code {code}") from None
        return Request(session_id, direction, _decode_path(r), streaming)

    if ptype is PacketType.METADATA:
        transfer_size = r.take_uint(16, "transfer size")
        digest = r.take(DIGEST_LEN, "digest")
        return Metadata(session_id, transfer_size, digest, _decode_path(r), streaming)

    if ptype is PacketType.DATA:
        offset = r.take_uint(width.nbytes, "offset")
        payload = r.take_rest()
        if len(payload) > cfg.max_payload:
            raise OversizeField(f"payload {len(payload)} > max {cfg.max_payload}")
        if offset + len(payload) > width.max_value + 1:
            raise OversizeField("offset + payload exceeds descriptor range")
        return Data(session_id, width, offset, payload,
                    streaming, end_of_data, status_requested)

    progress = r.take_uint(width.nbytes, "progress")
    count = r.take_uint(2, "hole count")
    if count > cfg.max_holes_per_status:
        raise OversizeField(f"{count} holes > max {cfg.max_holes_per_status}")
    holes = []
    for _ in range(count):
        start = r.take_uint(width.nbytes, "hole start")
        end = r.take_uint(width.nbytes, "hole end")
        holes.append((start, end))
    holes_t = tuple(holes)
    _check_holes(holes_t, width)
    return Status(session_id, width, progress, holes_t, streaming, end_of_data)
