"""Byte-granularity truncation codec for 32-bit float weight arrays.

Packing keeps the most significant ``round_to`` bytes of each IEEE-754
single-precision weight, in most-significant-first order, independent of
host endianness. Unpacking restores 32-bit words by zero-filling the
discarded low bytes. The codec is value-agnostic: NaN/Inf/subnormal bit
patterns pass through the same byte rules as ordinary values.

Three packing paths produce byte-identical output:

- ``pack``            scalar reference loop, one weight at a time
- ``pack_vectorized`` byte-shuffle over fixed groups of 8 weights with a
                      scalar tail (models a 256-bit register shuffle plus
                      masked store)
- ``pack_parallel``   contiguous chunks fanned out to worker threads, each
                      chunk writing its own disjoint payload span
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

WORD_BYTES = 4
MIN_ROUND_TO = 1
MAX_ROUND_TO = 4
VECTOR_GROUP = 8  # weights per shuffle group

STREAM_MAGIC = b"ADT1"
STREAM_VERSION = 1
_STREAM_HEADER = struct.Struct("<4sBBQ")  # magic, version, round_to, weight_count
STREAM_HEADER_BYTES = _STREAM_HEADER.size

_WORD = struct.Struct(">I")

# Byte-gather index per round_to: for each of the 8 weights in a group, the
# first round_to bytes of its big-endian word.
_GROUP_SHUFFLE = {
    r: np.array([w * WORD_BYTES + k for w in range(VECTOR_GROUP) for k in range(r)], dtype=np.intp)
    for r in range(MIN_ROUND_TO, MAX_ROUND_TO + 1)
}


class MalformedBlock(ValueError):
    """Raised when a packed block or stream is internally inconsistent."""


def check_round_to(round_to: int) -> int:
    """Validate a byte count in 1..4 and return it as a plain int."""
    r = int(round_to)
    if r != round_to or not MIN_ROUND_TO <= r <= MAX_ROUND_TO:
        raise ValueError(f"round_to must be an integer in [1, 4], got {round_to!r}")
    return r


def bits_to_round_to(bits: int) -> int:
    """Round a bit width up to the number of whole bytes that keeps it.

    Widths are byte-granular on the wire, so e.g. 14 bits become 2 bytes.
    """
    if not 1 <= bits <= 32:
        raise ValueError(f"bits must be in [1, 32], got {bits}")
    return -(-int(bits) // 8)


def truncation_mask(round_to: int) -> int:
    """High mask with round_to*8 one-bits: the bits a roundtrip preserves."""
    r = check_round_to(round_to)
    return (0xFFFFFFFF << (8 * (WORD_BYTES - r))) & 0xFFFFFFFF


@dataclass(frozen=True)
class PackedBlock:
    """A compressed weight payload plus the framing needed to unpack it.

    ``payload`` holds ``weight_count * round_to`` bytes, each weight's
    retained bytes stored most-significant-first.
    """

    round_to: int
    weight_count: int
    payload: bytes

    def __post_init__(self) -> None:
        check_round_to(self.round_to)
        if self.weight_count < 0:
            raise MalformedBlock(f"negative weight_count {self.weight_count}")
        expected = self.weight_count * self.round_to
        if len(self.payload) != expected:
            raise MalformedBlock(
                f"payload holds {len(self.payload)} bytes, "
                f"expected {self.weight_count} weights * {self.round_to} = {expected}"
            )

    @property
    def raw_bytes(self) -> int:
        """Size of the uncompressed word stream."""
        return self.weight_count * WORD_BYTES

    @property
    def wire_bytes(self) -> int:
        """Payload plus stream header, as counted on the simulated link."""
        return STREAM_HEADER_BYTES + len(self.payload)


def _as_words(weights) -> np.ndarray:
    """Coerce input to a flat array of native-order 32-bit words."""
    arr = np.ascontiguousarray(weights, dtype=np.float32).reshape(-1)
    return arr.view(np.uint32)


def pack(weights, round_to: int) -> PackedBlock:
    """Pack weights by keeping the top ``round_to`` bytes of each word.

    Scalar reference path: iterates weights one at a time and copies the
    most significant bytes. The other pack paths are checked against this
    one byte for byte.
    """
    r = check_round_to(round_to)
    words = _as_words(weights)
    payload = bytearray(words.size * r)
    pos = 0
    for word in words.tolist():
        payload[pos : pos + r] = _WORD.pack(word)[:r]
        pos += r
    return PackedBlock(r, words.size, bytes(payload))


def _pack_span(words: np.ndarray, r: int) -> bytes:
    """Group byte-shuffle kernel over a span of native-order words."""
    n = words.size
    if n == 0:
        return b""
    full = n - n % VECTOR_GROUP
    pieces = []
    if full:
        # Big-endian byte stream of the full groups, gathered r bytes per word.
        stream = np.ascontiguousarray(words[:full]).astype(">u4").view(np.uint8)
        pieces.append(stream.reshape(-1, WORD_BYTES * VECTOR_GROUP)[:, _GROUP_SHUFFLE[r]].tobytes())
    for word in words[full:].tolist():
        pieces.append(_WORD.pack(word)[:r])
    return b"".join(pieces)


def pack_vectorized(weights, round_to: int) -> PackedBlock:
    """Pack via byte shuffles over groups of 8 weights; bit-equal to pack()."""
    r = check_round_to(round_to)
    words = _as_words(weights)
    return PackedBlock(r, words.size, _pack_span(words, r))


def pack_parallel(weights, round_to: int, worker_count: int) -> PackedBlock:
    """Pack with ``worker_count`` threads over contiguous weight chunks.

    Each worker packs one chunk into its own disjoint payload span, so the
    output is byte-identical to pack() for every worker count.
    """
    r = check_round_to(round_to)
    if worker_count < 1:
        raise ValueError(f"worker_count must be >= 1, got {worker_count}")
    words = _as_words(weights)
    n = words.size
    if worker_count == 1 or n < worker_count:
        return PackedBlock(r, n, _pack_span(words, r))

    bounds = [n * i // worker_count for i in range(worker_count + 1)]
    payload = bytearray(n * r)
    view = memoryview(payload)

    def pack_chunk(i: int) -> None:
        lo, hi = bounds[i], bounds[i + 1]
        view[lo * r : hi * r] = _pack_span(words[lo:hi], r)

    with ThreadPoolExecutor(max_workers=worker_count) as pool:
        list(pool.map(pack_chunk, range(worker_count)))
    return PackedBlock(r, n, bytes(payload))


def unpack(block: PackedBlock) -> np.ndarray:
    """Restore float32 weights, zero-filling the discarded low bytes.

    Returns a fresh writable float32 array of length ``weight_count``.
    """
    r = check_round_to(block.round_to)
    n = block.weight_count
    if len(block.payload) != n * r:
        raise MalformedBlock(
            f"payload holds {len(block.payload)} bytes, expected {n * r}"
        )
    kept = np.frombuffer(block.payload, dtype=np.uint8).reshape(n, r)
    words = np.zeros((n, WORD_BYTES), dtype=np.uint8)
    words[:, :r] = kept
    return words.reshape(-1).view(">u4").astype(np.uint32).view(np.float32)


def write_stream(stream: BinaryIO, block: PackedBlock) -> int:
    """Write the packed stream container; returns bytes written."""
    header = _STREAM_HEADER.pack(STREAM_MAGIC, STREAM_VERSION, block.round_to, block.weight_count)
    stream.write(header)
    stream.write(block.payload)
    return len(header) + len(block.payload)


def read_stream(stream: BinaryIO) -> PackedBlock:
    """Read and validate a packed stream container.

    Raises MalformedBlock with an offset diagnostic on truncation, bad
    magic/version, an out-of-range round_to, or a payload length that does
    not match the declared weight count.
    """
    header = stream.read(STREAM_HEADER_BYTES)
    if len(header) < STREAM_HEADER_BYTES:
        raise MalformedBlock(
            f"truncated header: stream ends at byte {len(header)}, "
            f"need {STREAM_HEADER_BYTES}"
        )
    magic, version, round_to, weight_count = _STREAM_HEADER.unpack(header)
    if magic != STREAM_MAGIC:
        raise MalformedBlock(f"bad magic {magic!r} at offset 0, expected {STREAM_MAGIC!r}")
    if version != STREAM_VERSION:
        raise MalformedBlock(f"unsupported version {version} at offset 4")
    if not MIN_ROUND_TO <= round_to <= MAX_ROUND_TO:
        raise MalformedBlock(f"round_to byte {round_to} at offset 5 outside [1, 4]")
    expected = weight_count * round_to
    payload = stream.read(expected + 1)
    if len(payload) < expected:
        raise MalformedBlock(
            f"truncated payload: stream ends at byte {STREAM_HEADER_BYTES + len(payload)}, "
            f"declared count {weight_count} needs {expected} payload bytes"
        )
    if len(payload) > expected:
        raise MalformedBlock(
            f"trailing data at offset {STREAM_HEADER_BYTES + expected}: "
            f"declared count {weight_count} accounts for only {expected} payload bytes"
        )
    return PackedBlock(round_to, weight_count, payload)
