"""Codec tests: byte semantics, path equivalence, roundtrip laws, container format."""

import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weightpack import codec

# Bit patterns with special float semantics; the codec must treat them as raw bytes.
SPECIAL_WORDS = [
    0x00000000,  # +0.0
    0x80000000,  # -0.0
    0x7F800000,  # +inf
    0xFF800000,  # -inf
    0x7FC00000,  # quiet NaN
    0x7F800001,  # signaling NaN
    0xFFC01234,  # NaN with payload
    0x00000001,  # smallest subnormal
    0x007FFFFF,  # largest subnormal
    0x807FFFFF,  # negative subnormal
    0x3F800000,  # 1.0
    0xFF7FFFFF,  # most negative finite
]


def floats_from_words(words) -> np.ndarray:
    return np.array(words, dtype=np.uint32).view(np.float32)


def word_bits(values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float32).view(np.uint32)


def random_words(n, seed=0) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 1 << 32, size=n, dtype=np.uint32)


class TestRoundToHelpers:
    def test_bits_to_round_to_rounds_up_to_bytes(self):
        assert codec.bits_to_round_to(14) == 2
        assert {b: codec.bits_to_round_to(b) for b in (8, 16, 24, 32)} == {8: 1, 16: 2, 24: 3, 32: 4}
        assert codec.bits_to_round_to(1) == 1
        assert codec.bits_to_round_to(17) == 3

    @pytest.mark.parametrize("bad", [0, 33, -1])
    def test_bits_to_round_to_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            codec.bits_to_round_to(bad)

    def test_truncation_masks(self):
        assert codec.truncation_mask(1) == 0xFF000000
        assert codec.truncation_mask(2) == 0xFFFF0000
        assert codec.truncation_mask(3) == 0xFFFFFF00
        assert codec.truncation_mask(4) == 0xFFFFFFFF

    @pytest.mark.parametrize("bad", [0, 5, 2.5])
    def test_round_to_validation(self, bad):
        with pytest.raises(ValueError):
            codec.truncation_mask(bad)


class TestPack:
    def test_keeps_top_bytes_of_one(self):
        # 1.0 is 0x3F800000; the low byte is already zero.
        block = codec.pack([1.0], 3)
        assert block.payload == bytes([0x3F, 0x80, 0x00])
        assert block.weight_count == 1

    def test_keeps_sign_byte_of_minus_two(self):
        # -2.0 is 0xC0000000.
        assert codec.pack([-2.0], 1).payload == bytes([0xC0])

    def test_pi_top_two_bytes(self):
        # Oracle: reinterpret as a word, mask 0xFFFF0000, emit the top bytes.
        value = np.float32(3.14159274)
        word = int(word_bits(np.array([value]))[0])
        masked = word & 0xFFFF0000
        expected = struct.pack(">I", masked)[:2]
        assert expected == bytes([0x40, 0x49])
        assert codec.pack([value], 2).payload == expected

    def test_empty_input(self):
        block = codec.pack([], 2)
        assert block.payload == b""
        assert block.weight_count == 0

    def test_matrix_input_flattens_row_major(self):
        m = floats_from_words([0x11223344, 0x55667788, 0x99AABBCC, 0xDDEEFF00]).reshape(2, 2)
        assert codec.pack(m, 1).payload == bytes([0x11, 0x55, 0x99, 0xDD])

    def test_r4_payload_is_big_endian_word_stream(self):
        words = random_words(37)
        payload = codec.pack(words.view(np.float32), 4).payload
        assert payload == words.astype(">u4").tobytes()


@pytest.mark.parametrize("r", [1, 2, 3, 4])
class TestPathEquivalence:
    LENGTHS = [0, 1, 7, 8, 9, 1003]

    def test_vectorized_matches_scalar(self, r):
        for n in self.LENGTHS:
            weights = floats_from_words(random_words(n, seed=n))
            assert codec.pack_vectorized(weights, r) == codec.pack(weights, r)

    @pytest.mark.parametrize("workers", [1, 2, 8])
    def test_parallel_matches_scalar(self, r, workers):
        for n in self.LENGTHS:
            weights = floats_from_words(random_words(n, seed=n))
            assert codec.pack_parallel(weights, r, workers) == codec.pack(weights, r)

    def test_specials_survive_all_paths(self, r):
        weights = floats_from_words(SPECIAL_WORDS * 3)
        reference = codec.pack(weights, r)
        assert codec.pack_vectorized(weights, r) == reference
        assert codec.pack_parallel(weights, r, 5) == reference


class TestUnpack:
    def test_single_byte_restores_half(self):
        # 0x3F000000: exponent 126, mantissa 0, i.e. 2**-1.
        block = codec.PackedBlock(1, 1, bytes([0x3F]))
        assert codec.unpack(block).tolist() == [0.5]

    def test_two_bytes_restore_truncated_pi(self):
        block = codec.PackedBlock(2, 1, bytes([0x40, 0x49]))
        restored = codec.unpack(block)
        assert int(restored.view(np.uint32)[0]) == 0x40490000
        assert restored.tolist() == [3.140625]

    def test_r4_roundtrip_is_bit_exact(self):
        weights = floats_from_words(np.concatenate([random_words(100), SPECIAL_WORDS]))
        restored = codec.unpack(codec.pack(weights, 4))
        assert np.array_equal(word_bits(restored), word_bits(weights))

    def test_payload_length_mismatch_raises(self):
        with pytest.raises(codec.MalformedBlock):
            codec.PackedBlock(2, 3, bytes(5))

    def test_signaling_nan_truncates_to_infinity(self):
        # Dropping NaN payload bytes may leave an all-zero mantissa.
        block = codec.pack(floats_from_words([0x7F800001]), 3)
        assert codec.unpack(block).tolist() == [float("inf")]


@given(
    words=st.lists(st.integers(0, 2**32 - 1), max_size=200),
    r=st.integers(1, 4),
)
@settings(max_examples=150, deadline=None)
def test_roundtrip_mask_law(words, r):
    """bits(unpack(pack(x, r))) == bits(x) AND truncation_mask(r), always."""
    weights = floats_from_words(words + SPECIAL_WORDS)
    restored = codec.unpack(codec.pack(weights, r))
    expected = word_bits(weights) & np.uint32(codec.truncation_mask(r))
    assert np.array_equal(word_bits(restored), expected)


@given(
    words=st.lists(st.integers(0, 2**32 - 1), max_size=100),
    r=st.integers(1, 4),
)
@settings(max_examples=100, deadline=None)
def test_pack_is_idempotent_after_roundtrip(words, r):
    weights = floats_from_words(words)
    first = codec.pack(weights, r)
    assert codec.pack(codec.unpack(first), r) == first


@pytest.mark.parametrize("r,n", [(1, 11), (2, 8), (3, 5), (4, 3)])
def test_size_law(r, n):
    block = codec.pack(floats_from_words(random_words(n)), r)
    assert len(block.payload) == n * r
    assert block.raw_bytes == 4 * n
    assert block.wire_bytes == codec.STREAM_HEADER_BYTES + n * r


class TestContainer:
    def test_header_layout(self):
        block = codec.pack(floats_from_words([0x01020304]), 3)
        buf = io.BytesIO()
        written = codec.write_stream(buf, block)
        data = buf.getvalue()
        assert written == len(data) == 14 + 3
        assert data[:4] == b"ADT1"
        assert data[4] == 1  # version
        assert data[5] == 3  # round_to
        assert data[6:14] == struct.pack("<Q", 1)
        assert data[14:] == bytes([0x01, 0x02, 0x03])

    @pytest.mark.parametrize("r", [1, 2, 3, 4])
    def test_roundtrip(self, r):
        weights = floats_from_words(np.concatenate([random_words(33), SPECIAL_WORDS]))
        buf = io.BytesIO()
        codec.write_stream(buf, codec.pack(weights, r))
        buf.seek(0)
        block = codec.read_stream(buf)
        expected = word_bits(weights) & np.uint32(codec.truncation_mask(r))
        assert np.array_equal(word_bits(codec.unpack(block)), expected)

    def test_empty_container(self):
        buf = io.BytesIO()
        codec.write_stream(buf, codec.pack([], 2))
        buf.seek(0)
        block = codec.read_stream(buf)
        assert block.weight_count == 0
        assert codec.unpack(block).size == 0

    def _packed_bytes(self, n=4, r=2) -> bytes:
        buf = io.BytesIO()
        codec.write_stream(buf, codec.pack(floats_from_words(random_words(n)), r))
        return buf.getvalue()

    def test_truncated_header_reports_offset(self):
        with pytest.raises(codec.MalformedBlock, match="byte 6"):
            codec.read_stream(io.BytesIO(self._packed_bytes()[:6]))

    def test_truncated_payload_reports_offset(self):
        data = self._packed_bytes(n=4, r=2)
        with pytest.raises(codec.MalformedBlock, match="byte 19"):
            codec.read_stream(io.BytesIO(data[:-3]))

    def test_trailing_bytes_rejected(self):
        with pytest.raises(codec.MalformedBlock, match="trailing data"):
            codec.read_stream(io.BytesIO(self._packed_bytes() + b"x"))

    def test_bad_magic(self):
        data = b"NOPE" + self._packed_bytes()[4:]
        with pytest.raises(codec.MalformedBlock, match="magic"):
            codec.read_stream(io.BytesIO(data))

    def test_bad_version(self):
        data = self._packed_bytes()
        with pytest.raises(codec.MalformedBlock, match="version"):
            codec.read_stream(io.BytesIO(data[:4] + b"\x07" + data[5:]))

    def test_bad_round_to_byte(self):
        data = self._packed_bytes()
        with pytest.raises(codec.MalformedBlock, match="round_to"):
            codec.read_stream(io.BytesIO(data[:5] + b"\x05" + data[6:]))
