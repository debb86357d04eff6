"""End-to-end training loop routing every weight transfer through the codec.

Per batch: master weights are packed at each layer's current width, cross
the simulated boundary (biases ride along uncompressed), and each simulated
worker unpacks its own copy. Workers compute gradients on the truncated
copies over fixed 8-sample chunks; the host gathers the contributions with
a deterministic pairwise reduction and updates the full-precision master,
then (in adaptive mode) feeds post-update weight norms to the controller.

Master weights are never truncated in place; only the copies that crossed
the boundary are. Every statement of the batch loop runs under a phase
timer so the profile accounts essentially all loop wall time.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .codec import pack_vectorized, unpack
from .config import RunConfig
from .dataset import load_csv, load_f32, make_blobs, train_val_split
from .net import (
    GradientSet,
    Layer,
    Network,
    gather_and_update,
    forward,
    backward,
    init_network,
    init_sgd_state,
    learning_rate_at,
    pairwise_sum,
)
from .precision import FixedPrecision, PrecisionController, TRACE_HEADER, l2_norm
from .transfer import PHASES, TransferBoundary, TransferLedger, profile_report

#: Samples per gradient leaf chunk. Workers own contiguous runs of these
#: global chunks, so the reduction tree (and thus the update bits) does not
#: depend on the worker count for power-of-two-aligned batch splits.
GRAD_CHUNK = 8

METRICS_HEADER = ("epoch", "batch", "loss", "val_top1", "bytes_sent", "codec_ms")


class PhaseTimer:
    """Accumulates wall seconds per profile phase."""

    def __init__(self) -> None:
        self.seconds = {name: 0.0 for name in PHASES}

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - start


@dataclass
class RunResult:
    config: RunConfig
    metrics_rows: list[list]
    trace_rows: list[tuple]
    ledger: TransferLedger
    profile: dict
    net: Network
    losses: list[float] = field(default_factory=list)
    val_top1: list[float] = field(default_factory=list)


def _chunk_ranges(n: int, size: int = GRAD_CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _split_chunks(chunks: list, parts: int) -> list[list]:
    """Partition leaf chunks into contiguous runs, one per worker.

    For power-of-two worker counts the boundaries land on the pairwise
    reduction tree's block structure, so per-worker partial sums are exact
    subtrees of the single-worker reduction. Other counts fall back to an
    even split (still deterministic, no longer regrouping-exact).
    """
    n = len(chunks)
    if n == 0:
        return []
    if parts & (parts - 1) == 0:
        span = 1
        while span * parts < n:
            span *= 2
        bounds = [min(n, w * span) for w in range(parts + 1)]
    else:
        bounds = [n * w // parts for w in range(parts + 1)]
    runs = [chunks[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]
    return [run for run in runs if run]


def worker_contribution(
    wnet: Network,
    batch_x: np.ndarray,
    batch_y: np.ndarray,
    chunks: list[tuple[int, int]],
    timer: PhaseTimer,
) -> tuple[GradientSet, float]:
    """One worker's mean gradients plus its summed loss over its chunks."""
    piece_grads: list[GradientSet] = []
    piece_losses: list[float] = []
    for lo, hi in chunks:
        with timer.phase("forward"):
            fwd = forward(wnet, batch_x[lo:hi], batch_y[lo:hi])
        with timer.phase("backward"):
            piece_grads.append(backward(wnet, fwd, batch_y[lo:hi]))
        piece_losses.append(fwd.loss * (hi - lo))
    with timer.phase("backward"):
        dtype = wnet.layers[0].weights.dtype
        count = sum(g.sample_count for g in piece_grads)
        weight_grads = []
        bias_grads = []
        for i in range(len(wnet.layers)):
            gw = pairwise_sum([g.weight_grads[i] * dtype.type(g.sample_count) for g in piece_grads])
            weight_grads.append(gw / dtype.type(count))
            gb = pairwise_sum([g.bias_grads[i] * dtype.type(g.sample_count) for g in piece_grads])
            bias_grads.append(gb / dtype.type(count))
        loss_sum = float(pairwise_sum(piece_losses))
    return GradientSet(weight_grads, bias_grads, count), loss_sum


def evaluate(net: Network, x: np.ndarray, y: np.ndarray, chunk: int = 512) -> tuple[float, float]:
    """(top-1 accuracy, mean loss) over a dataset, in fixed-size chunks."""
    correct = 0
    loss_sum = 0.0
    for lo in range(0, len(x), chunk):
        hi = min(lo + chunk, len(x))
        fwd = forward(net, x[lo:hi], y[lo:hi])
        correct += int((np.argmax(fwd.probs, axis=1) == y[lo:hi]).sum())
        loss_sum += fwd.loss * (hi - lo)
    return correct / len(x), loss_sum / len(x)


def _load_dataset(cfg: RunConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    d = cfg.data
    if d.source == "synthetic":
        x, y = make_blobs(d.samples, d.classes, d.features, rng, d.center_scale, d.noise)
        return x, y, d.classes
    path = Path(d.source)
    if path.suffix == ".csv":
        x, y = load_csv(path)
    elif path.suffix == ".f32":
        x, y = load_f32(path, d.features)
    else:
        raise ValueError(f"unsupported dataset file {path} (expected .csv or .f32)")
    return x, y, int(y.max()) + 1


def _make_schedule(cfg: RunConfig, num_layers: int):
    if cfg.mode == "baseline":
        return FixedPrecision(num_layers, 32)
    if cfg.mode == "oracle":
        return FixedPrecision(num_layers, cfg.oracle_bits)
    return PrecisionController(num_layers, cfg.precision)


def run_training(cfg: RunConfig, use_boundary: bool = True) -> RunResult:
    """Run the configured training end to end.

    `use_boundary=False` runs the plain SGD twin: workers read master
    weights directly and nothing is packed or accounted, which serves as
    the oracle for lossless-codec transparency.
    """
    rng = np.random.default_rng(cfg.seed)
    x, y, classes = _load_dataset(cfg, rng)
    xtr, ytr, xval, yval = train_val_split(x, y, cfg.data.val_fraction, rng)

    net = init_network([x.shape[1], *cfg.hidden, classes], rng)
    schedule = _make_schedule(cfg, len(net.layers))
    adaptive = isinstance(schedule, PrecisionController)
    ledger = TransferLedger()
    boundary = TransferBoundary(cfg.link, ledger, cfg.codec_cost) if use_boundary else None
    state = init_sgd_state(net)
    timer = PhaseTimer()

    metrics_rows: list[list] = []
    trace_rows: list[tuple] = []
    losses: list[float] = []
    val_curve: list[float] = []
    global_batch = 0
    loop_wall = 0.0
    batch_size = cfg.sgd.batch_size

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(xtr))
        loop_start = time.perf_counter()
        for start in range(0, len(xtr), batch_size):
            with timer.phase("forward"):
                idx = order[start : start + batch_size]
                batch_x = xtr[idx]
                batch_y = ytr[idx]
                chunks = _chunk_ranges(len(idx))
                assignments = _split_chunks(chunks, cfg.workers)

            records_before = len(ledger)
            if boundary is not None:
                with timer.phase("pack"):
                    blocks = [
                        pack_vectorized(layer.weights, schedule.current_round_to(i))
                        for i, layer in enumerate(net.layers)
                    ]
                worker_nets = []
                for _ in assignments:
                    wlayers = []
                    for i, layer in enumerate(net.layers):
                        with timer.phase("to_worker"):
                            boundary.send_weights(
                                global_batch, i, blocks[i], bias_bytes=layer.biases.nbytes
                            )
                        with timer.phase("unpack"):
                            ww = unpack(blocks[i]).reshape(layer.weights.shape)
                            wlayers.append(Layer(ww, layer.biases.copy()))
                    worker_nets.append(Network(wlayers))
            else:
                worker_nets = [net] * len(assignments)

            contributions = []
            loss_parts = []
            for wnet, worker_chunks in zip(worker_nets, assignments):
                grads, loss_sum = worker_contribution(wnet, batch_x, batch_y, worker_chunks, timer)
                contributions.append(grads)
                loss_parts.append(loss_sum)
            if boundary is not None:
                with timer.phase("to_host"):
                    for _ in assignments:
                        boundary.return_gradients(global_batch, net.parameter_count)

            with timer.phase("update"):
                lr = learning_rate_at(cfg.sgd, global_batch)
                gather_and_update(net, contributions, cfg.sgd, state, lr)
                batch_loss = float(pairwise_sum(loss_parts)) / len(idx)
                losses.append(batch_loss)

            if adaptive:
                with timer.phase("l2_norm"):
                    for i, layer in enumerate(net.layers):
                        norm = l2_norm(layer.weights)
                        bits = schedule.observe_batch(i, norm)
                        st = schedule.state(i)
                        trace_rows.append(
                            (global_batch, i, norm, st.last_delta, st.interval_counter, bits)
                        )

            with timer.phase("update"):
                new_records = ledger.records[records_before:]
                bytes_sent = sum(r.wire_bytes for r in new_records)
                codec_ms = 1e3 * sum(r.pack_seconds + r.unpack_seconds for r in new_records)
                metrics_rows.append([epoch, global_batch, batch_loss, None, bytes_sent, codec_ms])
            global_batch += 1
        loop_wall += time.perf_counter() - loop_start

        val_top1, _ = evaluate(net, xval, yval)
        val_curve.append(val_top1)
        metrics_rows[-1][3] = val_top1

    profile = _build_profile(cfg, schedule, ledger, timer, loop_wall, global_batch, losses, val_curve)
    return RunResult(
        config=cfg,
        metrics_rows=metrics_rows,
        trace_rows=trace_rows,
        ledger=ledger,
        profile=profile,
        net=net,
        losses=losses,
        val_top1=val_curve,
    )


def _build_profile(cfg, schedule, ledger, timer, loop_wall, batches, losses, val_curve) -> dict:
    if len(ledger):
        profile = profile_report(ledger, timer.seconds)
    else:
        profile = {"phases": {name: {"wall_s": timer.seconds[name]} for name in PHASES}}
    profile.update(
        {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "epochs": cfg.epochs,
            "workers": cfg.workers,
            "batches": batches,
            "loop_wall_s": loop_wall,
            "final_train_loss": losses[-1] if losses else None,
            "final_val_top1": val_curve[-1] if val_curve else None,
            "layer_bits": [
                schedule.current_bits(i) for i in range(schedule.num_layers)
            ],
        }
    )
    return profile


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(stream, rows) -> None:
    stream.write(",".join(METRICS_HEADER) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def write_trace_csv(stream, rows) -> None:
    stream.write(",".join(TRACE_HEADER) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def write_run_outputs(out_dir: str | Path, result: RunResult) -> dict[str, Path]:
    """Write metrics.csv, trace.csv, ledger.csv, profile.json, config.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.{'json' if name in ('profile', 'config') else 'csv'}"
             for name in ("metrics", "trace", "ledger", "profile", "config")}
    with open(paths["metrics"], "w") as fp:
        write_metrics_csv(fp, result.metrics_rows)
    with open(paths["trace"], "w") as fp:
        write_trace_csv(fp, result.trace_rows)
    with open(paths["ledger"], "w") as fp:
        result.ledger.write_csv(fp)
    with open(paths["profile"], "w") as fp:
        json.dump(result.profile, fp, indent=2, sort_keys=True)
        fp.write("\n")
    with open(paths["config"], "w") as fp:
        json.dump(asdict(result.config), fp, indent=2, sort_keys=True)
        fp.write("\n")
    return paths
