"""Simulated device boundary: framing, byte accounting, and link cost model.

Every payload that crosses between the master copy and a worker copy goes
through this module, which appends one immutable record per transfer to an
append-only ledger. Link time is modeled from configured bandwidth/latency;
the per-record pack/unpack seconds are likewise modeled (from configured
codec throughputs) so ledger CSVs are reproducible run to run. Measured
codec wall time is aggregated separately in the run profile.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

from .codec import PackedBlock

TO_WORKER = "to_worker"
TO_HOST = "to_host"

LEDGER_HEADER = (
    "batch",
    "direction",
    "layer",
    "raw_bytes",
    "wire_bytes",
    "pack_s",
    "unpack_s",
    "link_s",
)

#: Phase names of the run profile, in report order.
PHASES = ("to_worker", "to_host", "forward", "backward", "update", "l2_norm", "pack", "unpack")


class EmptyLedger(ValueError):
    """Raised when a report is requested for a ledger with no records."""


@dataclass(frozen=True)
class LinkModel:
    """Simulated link: sustained bandwidth in bytes/second plus per-message latency."""

    bandwidth: float
    latency: float = 0.0

    def __post_init__(self) -> None:
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.latency < 0:
            raise ValueError(f"latency must be >= 0, got {self.latency}")

    def seconds(self, wire_bytes: int) -> float:
        return self.latency + wire_bytes / self.bandwidth


@dataclass(frozen=True)
class TransferRecord:
    """One boundary crossing. `layer` is an index, or "all" for a combined payload.

    `weight_raw_bytes`/`weight_wire_bytes` isolate the weight stream (header
    included) from bias bytes riding in the same transfer; they are derived
    bookkeeping and not part of the ledger CSV schema.
    """

    batch: int
    direction: str
    layer: int | str
    raw_bytes: int
    wire_bytes: int
    pack_seconds: float
    unpack_seconds: float
    link_seconds: float
    weight_raw_bytes: int = 0
    weight_wire_bytes: int = 0


class TransferLedger:
    """Append-only transfer log with aggregation helpers.

    Appends may come from concurrent worker transfers; aggregation is meant
    to run between batches, after appends quiesce.
    """

    def __init__(self) -> None:
        self._records: list[TransferRecord] = []
        self._lock = threading.Lock()

    def append(self, record: TransferRecord) -> None:
        with self._lock:
            self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[TransferRecord, ...]:
        return tuple(self._records)

    def _select(self, direction: str | None) -> Iterable[TransferRecord]:
        if direction is None:
            return self._records
        return (r for r in self._records if r.direction == direction)

    def total_wire_bytes(self, direction: str | None = None) -> int:
        return sum(r.wire_bytes for r in self._select(direction))

    def total_raw_bytes(self, direction: str | None = None) -> int:
        return sum(r.raw_bytes for r in self._select(direction))

    def total_link_seconds(self, direction: str | None = None) -> float:
        return sum(r.link_seconds for r in self._select(direction))

    def total_pack_seconds(self) -> float:
        return sum(r.pack_seconds for r in self._records)

    def total_unpack_seconds(self) -> float:
        return sum(r.unpack_seconds for r in self._records)

    def weight_stream_bytes(self) -> tuple[int, int]:
        """(raw, wire) byte totals of the to-worker weight stream."""
        raw = sum(r.weight_raw_bytes for r in self._select(TO_WORKER))
        wire = sum(r.weight_wire_bytes for r in self._select(TO_WORKER))
        return raw, wire

    def weight_stream_ratio(self) -> float:
        """Raw over wire size of all weight bytes sent to workers."""
        raw, wire = self.weight_stream_bytes()
        if wire == 0:
            raise EmptyLedger("no to-worker weight transfers recorded")
        return raw / wire

    def write_csv(self, stream: IO[str]) -> None:
        stream.write(",".join(LEDGER_HEADER) + "\n")
        for r in self._records:
            stream.write(
                f"{r.batch},{r.direction},{r.layer},{r.raw_bytes},{r.wire_bytes},"
                f"{r.pack_seconds!r},{r.unpack_seconds!r},{r.link_seconds!r}\n"
            )


def send_weights(
    block: PackedBlock,
    link: LinkModel,
    ledger: TransferLedger,
    *,
    batch: int = 0,
    layer: int | str = 0,
    bias_bytes: int = 0,
    pack_seconds: float = 0.0,
    unpack_seconds: float = 0.0,
) -> tuple[PackedBlock, TransferRecord]:
    """Account a packed weight payload crossing to a worker.

    The block itself is returned unchanged (the simulation moves no data);
    the appended record counts header + payload (+ any bias bytes riding
    along) as wire bytes and models the link time.
    """
    wire = block.wire_bytes + bias_bytes
    record = TransferRecord(
        batch=batch,
        direction=TO_WORKER,
        layer=layer,
        raw_bytes=block.raw_bytes + bias_bytes,
        wire_bytes=wire,
        pack_seconds=pack_seconds,
        unpack_seconds=unpack_seconds,
        link_seconds=link.seconds(wire),
        weight_raw_bytes=block.raw_bytes,
        weight_wire_bytes=block.wire_bytes,
    )
    ledger.append(record)
    return block, record


def send_to_host(
    payload_bytes: int,
    link: LinkModel,
    ledger: TransferLedger,
    *,
    batch: int = 0,
    layer: int | str = "all",
) -> TransferRecord:
    """Account an uncompressed worker-to-host payload (gradients)."""
    record = TransferRecord(
        batch=batch,
        direction=TO_HOST,
        layer=layer,
        raw_bytes=payload_bytes,
        wire_bytes=payload_bytes,
        pack_seconds=0.0,
        unpack_seconds=0.0,
        link_seconds=link.seconds(payload_bytes),
    )
    ledger.append(record)
    return record


@dataclass(frozen=True)
class CodecCostModel:
    """Deterministic per-record codec cost: raw bytes over a fixed throughput."""

    pack_rate: float = 1.5e9  # bytes/second read by the packer
    unpack_rate: float = 6.0e9

    def __post_init__(self) -> None:
        if self.pack_rate <= 0 or self.unpack_rate <= 0:
            raise ValueError("codec rates must be > 0")

    def pack_seconds(self, raw_bytes: int) -> float:
        return raw_bytes / self.pack_rate

    def unpack_seconds(self, raw_bytes: int) -> float:
        return raw_bytes / self.unpack_rate


class TransferBoundary:
    """The only path between master weights and worker weight copies.

    Wraps the accounting functions with a codec cost model; the training
    loop unpacks the block it sent through here and copies biases itself,
    so every worker array traces back to an accounted transfer.
    """

    def __init__(self, link: LinkModel, ledger: TransferLedger, cost: CodecCostModel | None = None):
        self.link = link
        self.ledger = ledger
        self.cost = cost or CodecCostModel()

    def send_weights(
        self, batch: int, layer: int, block: PackedBlock, bias_bytes: int = 0
    ) -> TransferRecord:
        raw = block.raw_bytes
        _, record = send_weights(
            block,
            self.link,
            self.ledger,
            batch=batch,
            layer=layer,
            bias_bytes=bias_bytes,
            pack_seconds=self.cost.pack_seconds(raw),
            unpack_seconds=self.cost.unpack_seconds(raw),
        )
        return record

    def return_gradients(self, batch: int, parameter_count: int) -> TransferRecord:
        """Account one worker's gradient contribution going back to the host."""
        return send_to_host(
            parameter_count * 4, self.link, self.ledger, batch=batch, layer="all"
        )


def profile_report(ledger: TransferLedger, wall_times: Mapping[str, float]) -> dict:
    """Assemble the per-phase profile for one run.

    `wall_times` maps phase names (see PHASES) to measured wall seconds.
    Transfer phases additionally carry their modeled link seconds, and the
    codec phases their modeled seconds, both summed from the ledger.
    """
    if len(ledger) == 0:
        raise EmptyLedger("ledger has no records")
    phases = {}
    for name in PHASES:
        phases[name] = {"wall_s": float(wall_times.get(name, 0.0))}
    phases["to_worker"]["modeled_link_s"] = ledger.total_link_seconds(TO_WORKER)
    phases["to_host"]["modeled_link_s"] = ledger.total_link_seconds(TO_HOST)
    phases["pack"]["modeled_s"] = ledger.total_pack_seconds()
    phases["unpack"]["modeled_s"] = ledger.total_unpack_seconds()
    weight_raw, weight_wire = ledger.weight_stream_bytes()
    return {
        "phases": phases,
        "wire_bytes": {
            TO_WORKER: ledger.total_wire_bytes(TO_WORKER),
            TO_HOST: ledger.total_wire_bytes(TO_HOST),
        },
        "raw_bytes": {
            TO_WORKER: ledger.total_raw_bytes(TO_WORKER),
            TO_HOST: ledger.total_raw_bytes(TO_HOST),
        },
        "weight_stream": {
            "raw_bytes": weight_raw,
            "wire_bytes": weight_wire,
            "ratio": (weight_raw / weight_wire) if weight_wire else None,
        },
    }
