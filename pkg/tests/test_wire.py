import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saratoga import wire
from saratoga.wire import (Data, DescriptorWidth, Direction, Metadata, Request,
                           Status, WireConfig, decode_packet, encode_packet,
                           encoded_size, select_descriptor_width)

from packet_gen import random_packet

CFG = WireConfig()
VECTOR_DIR = Path(__file__).parent / "vectors"


class TestDescriptorWidth:
    def test_largest_16_bit_value(self):
        assert select_descriptor_width(65535) is DescriptorWidth.W16

    def test_first_value_past_16_bits(self):
        assert select_descriptor_width(65536) is DescriptorWidth.W32

    def test_full_128_bit_range(self):
        assert select_descriptor_width(2**128 - 1) is DescriptorWidth.W128

    @pytest.mark.parametrize("bits", [16, 32, 64, 128])
    def test_minimality_at_every_boundary(self, bits):
        width = select_descriptor_width(2**bits - 1)
        assert width.bits == bits
        if bits < 128:
            assert select_descriptor_width(2**bits).bits == 2 * bits
        # every narrower width falls short of the selected size
        for other in DescriptorWidth:
            if other.bits < bits:
                assert 2**bits - 1 > other.max_value

    def test_wire_codes(self):
        assert [w.value for w in DescriptorWidth] == [0, 1, 2, 3]
        assert [w.nbytes for w in DescriptorWidth] == [2, 4, 8, 16]


class TestEncode:
    def test_small_data_packet_layout(self):
        pkt = Data(1, DescriptorWidth.W16, 0, b"ab")
        enc = encode_packet(pkt, CFG)
        assert len(enc) == 8 + 2 + 2
        assert enc[0] == 0x13  # version 1, type 3
        assert enc == bytes.fromhex("130000000001000400006162")

    def test_status_roundtrip(self):
        pkt = Status(7, DescriptorWidth.W32, 1000, ((1000, 2000),))
        assert decode_packet(encode_packet(pkt, CFG), CFG) == pkt

    def test_too_many_holes(self):
        holes = tuple((i * 10, i * 10 + 5) for i in range(65))
        pkt = Status(1, DescriptorWidth.W32, 0, holes)
        with pytest.raises(wire.OversizeField):
            encode_packet(pkt, CFG)

    def test_payload_over_limit(self):
        pkt = Data(1, DescriptorWidth.W32, 0, bytes(CFG.max_payload + 1))
        with pytest.raises(wire.OversizeField):
            encode_packet(pkt, CFG)

    def test_path_over_limit(self):
        with pytest.raises(wire.OversizeField):
            encode_packet(Request(1, Direction.GET, "x" * 1025), CFG)

    def test_offset_beyond_width(self):
        pkt = Data(1, DescriptorWidth.W16, 65535, b"ab")
        with pytest.raises(wire.OversizeField):
            encode_packet(pkt, CFG)

    def test_unsorted_holes_rejected(self):
        pkt = Status(1, DescriptorWidth.W16, 0, ((50, 60), (10, 20)))
        with pytest.raises(wire.MalformedHoles):
            encode_packet(pkt, CFG)

    def test_encoded_size_matches(self):
        rng = random.Random(7)
        for _ in range(200):
            pkt = random_packet(rng, CFG)
            assert encoded_size(pkt) == len(encode_packet(pkt, CFG))


class TestDecode:
    def test_empty_buffer(self):
        with pytest.raises(wire.Truncated):
            decode_packet(b"", CFG)

    def test_bad_version(self):
        enc = bytearray(encode_packet(Data(1, DescriptorWidth.W16, 0, b"x"), CFG))
        enc[0] = (2 << 4) | 3
        with pytest.raises(wire.BadVersion):
            decode_packet(bytes(enc), CFG)

    def test_unknown_type(self):
        enc = bytearray(encode_packet(Data(1, DescriptorWidth.W16, 0, b"x"), CFG))
        enc[0] = (1 << 4) | 9
        with pytest.raises(wire.UnknownType):
            decode_packet(bytes(enc), CFG)

    def test_reserved_flag_bits_ignored(self):
        pkt = Data(1, DescriptorWidth.W16, 0, b"hello")
        enc = bytearray(encode_packet(pkt, CFG))
        enc[1] |= 0x80
        assert decode_packet(bytes(enc), CFG) == pkt

    def test_truncated_body(self):
        enc = encode_packet(Metadata(1, 100, bytes(32), "f"), CFG)
        with pytest.raises(wire.Truncated):
            decode_packet(enc[:20], CFG)

    def test_declared_body_longer_than_datagram(self):
        enc = bytearray(encode_packet(Data(1, DescriptorWidth.W16, 0, b"xy"), CFG))
        enc[6:8] = (999).to_bytes(2, "big")
        with pytest.raises(wire.Truncated):
            decode_packet(bytes(enc), CFG)

    def test_overlapping_holes_rejected(self):
        enc = bytearray(encode_packet(
            Status(1, DescriptorWidth.W16, 0, ((10, 30),)), CFG))
        # forge a second hole overlapping the first
        body = enc[8:] + (20).to_bytes(2, "big") + (40).to_bytes(2, "big")
        forged = enc[:8] + body
        forged[6:8] = len(body).to_bytes(2, "big")
        forged[8 + 2:8 + 4] = (2).to_bytes(2, "big")
        with pytest.raises(wire.MalformedHoles):
            decode_packet(bytes(forged), CFG)

    def test_bad_direction_code(self):
        enc = bytearray(encode_packet(Request(1, Direction.GET, "p"), CFG))
        enc[8] = 7
        with pytest.raises(wire.MalformedField):
            decode_packet(bytes(enc), CFG)

    def test_non_utf8_path(self):
        enc = bytearray(encode_packet(Request(1, Direction.GET, "pp"), CFG))
        enc[11] = 0xFF
        with pytest.raises(wire.MalformedField):
            decode_packet(bytes(enc), CFG)

    def test_trailing_bytes_ignored(self):
        pkt = Status(3, DescriptorWidth.W16, 5, ((6, 9),))
        assert decode_packet(encode_packet(pkt, CFG) + b"junk", CFG) == pkt


class TestRoundtrip:
    def test_seeded_roundtrip_10k(self):
        rng = random.Random(0x5EED)
        for _ in range(10_000):
            pkt = random_packet(rng, CFG)
            assert decode_packet(encode_packet(pkt, CFG), CFG) == pkt

    @given(st.binary(max_size=64), st.integers(0, 2**32 - 1))
    @settings(max_examples=300)
    def test_hypothesis_data_roundtrip(self, payload, session):
        payload = payload[:CFG.max_payload]
        pkt = Data(session, DescriptorWidth.W64, 12345, payload,
                   streaming=True, end_of_data=True)
        assert decode_packet(encode_packet(pkt, CFG), CFG) == pkt

    def test_boundary_offsets(self):
        for bits in (16, 32, 64, 128):
            width = DescriptorWidth(select_descriptor_width(2**bits - 1))
            for offset in (0, 2**(bits - 1), 2**bits - 3):
                pkt = Data(9, width, offset, b"ab"[:max(0, 2**bits - offset)][:2])
                if offset + len(pkt.payload) <= 2**bits:
                    assert decode_packet(encode_packet(pkt, CFG), CFG) == pkt
            top = 2**bits - 1
            st_pkt = Status(9, width, top, ((0, top),))
            assert decode_packet(encode_packet(st_pkt, CFG), CFG) == st_pkt


def _decodes_safely(buf: bytes) -> None:
    try:
        pkt = decode_packet(buf, CFG)
    except wire.WireError:
        return
    # whatever decodes must satisfy the type invariants
    reenc = encode_packet(pkt, CFG)
    assert decode_packet(reenc, CFG) == pkt


class TestFuzz:
    def test_random_bytes_never_crash(self):
        rng = random.Random(97)
        for _ in range(20_000):
            _decodes_safely(rng.randbytes(rng.randrange(0, 80)))

    def test_mutated_valid_packets_never_crash(self):
        rng = random.Random(98)
        for _ in range(20_000):
            buf = bytearray(encode_packet(random_packet(rng, CFG), CFG))
            for _ in range(rng.randrange(1, 4)):
                buf[rng.randrange(len(buf))] = rng.randrange(256)
            if rng.random() < 0.3:
                buf = buf[:rng.randrange(len(buf) + 1)]
            _decodes_safely(bytes(buf))

    @given(st.binary(max_size=2100))
    @settings(max_examples=500)
    def test_hypothesis_fuzz(self, buf):
        _decodes_safely(buf)


class TestGoldenVectors:
    def test_all_vectors_decode_and_reencode(self):
        cases = _golden_cases()
        assert len(cases) >= 4
        for name, expected in cases.items():
            raw = bytes.fromhex((VECTOR_DIR / f"{name}.hex").read_text().strip())
            pkt = decode_packet(raw, CFG)
            assert pkt == expected, name
            assert encode_packet(pkt, CFG) == raw, name


def _golden_cases() -> dict:
    return {
        "data_w16": Data(1, DescriptorWidth.W16, 0, b"ab"),
        "request_put": Request(0xDEADBEEF, Direction.PUT, "imagery/pass42.bin"),
        "metadata": Metadata(0xDEADBEEF, 3_000_000, bytes(range(32)),
                             "imagery/pass42.bin"),
        "status_two_holes": Status(0xDEADBEEF, DescriptorWidth.W32, 1000,
                                   ((1000, 2000), (5000, 6000))),
        "data_w128_streaming": Data(7, DescriptorWidth.W128, 2**100, b"xyz",
                                    streaming=True, end_of_data=True,
                                    status_requested=True),
        "status_complete": Status(7, DescriptorWidth.W128, 2**100 + 3, (),
                                  streaming=True, complete=True),
    }


if __name__ == "__main__":
    # regenerate the golden vector files
    VECTOR_DIR.mkdir(exist_ok=True)
    for name, pkt in _golden_cases().items():
        (VECTOR_DIR / f"{name}.hex").write_text(encode_packet(pkt, CFG).hex() + "\n")
        print("wrote", name)
