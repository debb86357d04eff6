"""Run configuration: INI-style sections parsed into validated dataclasses.

The format is a flat key=value file with sections, so experiment configs
diff cleanly. `weightpack train --print-defaults` emits the full default
file; unknown sections or keys are rejected with the offending location.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .net import SgdConfig
from .precision import PrecisionConfig
from .transfer import CodecCostModel, LinkModel

MODES = ("baseline", "oracle", "a2dtwp")

DEFAULT_CONFIG = """\
[run]
# baseline: fixed 32-bit transfers. oracle: fixed at oracle_bits.
# a2dtwp: adaptive per-layer precision.
mode = a2dtwp
epochs = 10
workers = 2

[data]
# "synthetic" generates seeded Gaussian blobs; otherwise a path to a
# .csv or .f32 dataset file (rows: features..., label).
source = synthetic
samples = 10000
classes = 4
features = 784
val_fraction = 0.2
center_scale = 6.0
noise = 1.0

[model]
hidden = 128,64

[optimizer]
learning_rate = 0.05
momentum = 0.9
weight_decay = 5e-4
batch_size = 64
# exponential decay: every N batches multiply by the factor; 0 disables
lr_decay_every = 0
lr_decay_factor = 0.16

[precision]
threshold = -2e-3
interval = 50
step_bits = 8
initial_bits = 8
# escalation counter survives above-threshold batches unless consecutive
consecutive = false
# only used by mode = oracle
oracle_bits = 16

[link]
bandwidth = 12e9
latency = 5e-6
# modeled codec throughputs for the ledger's pack_s/unpack_s columns
pack_rate = 1.5e9
unpack_rate = 6e9
"""


class ConfigError(ValueError):
    """Raised with a [section] key diagnostic for invalid configuration."""


@dataclass
class DataConfig:
    source: str = "synthetic"
    samples: int = 10000
    classes: int = 4
    features: int = 784
    val_fraction: float = 0.2
    center_scale: float = 6.0
    noise: float = 1.0


@dataclass
class RunConfig:
    mode: str = "a2dtwp"
    seed: int = 0
    epochs: int = 10
    workers: int = 2
    data: DataConfig = field(default_factory=DataConfig)
    hidden: tuple[int, ...] = (128, 64)
    sgd: SgdConfig = field(default_factory=lambda: SgdConfig(learning_rate=0.05))
    precision: PrecisionConfig = field(default_factory=PrecisionConfig)
    oracle_bits: int = 16
    link: LinkModel = field(default_factory=lambda: LinkModel(bandwidth=12e9, latency=5e-6))
    codec_cost: CodecCostModel = field(default_factory=CodecCostModel)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"[run] mode: {self.mode!r} not one of {'/'.join(MODES)}")
        if self.epochs < 1:
            raise ConfigError(f"[run] epochs: must be >= 1, got {self.epochs}")
        if self.workers < 1:
            raise ConfigError(f"[run] workers: must be >= 1, got {self.workers}")
        if self.mode == "oracle" and self.oracle_bits not in (8, 16, 24, 32):
            raise ConfigError(
                f"[precision] oracle_bits: must be one of 8/16/24/32, got {self.oracle_bits}"
            )


class _Sections:
    """Typed access to a parsed INI file with location-tagged errors."""

    def __init__(self, parser: configparser.ConfigParser):
        self._parser = parser
        self._seen: set[tuple[str, str]] = set()

    def get(self, section: str, key: str, cast, default):
        self._seen.add((section, key))
        if not self._parser.has_option(section, key):
            return default
        raw = self._parser.get(section, key)
        try:
            return cast(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None

    def check_unknown(self) -> None:
        for section in self._parser.sections():
            if section not in {s for s, _ in self._seen}:
                raise ConfigError(f"[{section}]: unknown section")
            for key in self._parser.options(section):
                if (section, key) not in self._seen:
                    raise ConfigError(f"[{section}] {key}: unknown key")


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int_tuple(raw: str) -> tuple[int, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


def parse_config(text: str, seed: int, mode_override: str | None = None) -> RunConfig:
    """Parse config text into a validated RunConfig.

    The seed always comes from the caller (the CLI requires --seed); an
    optional mode override replaces the file's [run] mode.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    sec = _Sections(parser)

    mode = sec.get("run", "mode", str.strip, "a2dtwp")
    epochs = sec.get("run", "epochs", int, 10)
    workers = sec.get("run", "workers", int, 2)

    data = DataConfig(
        source=sec.get("data", "source", str.strip, "synthetic"),
        samples=sec.get("data", "samples", int, 10000),
        classes=sec.get("data", "classes", int, 4),
        features=sec.get("data", "features", int, 784),
        val_fraction=sec.get("data", "val_fraction", float, 0.2),
        center_scale=sec.get("data", "center_scale", float, 6.0),
        noise=sec.get("data", "noise", float, 1.0),
    )
    hidden = sec.get("model", "hidden", _int_tuple, (128, 64))

    try:
        sgd = SgdConfig(
            learning_rate=sec.get("optimizer", "learning_rate", float, 0.05),
            momentum=sec.get("optimizer", "momentum", float, 0.9),
            weight_decay=sec.get("optimizer", "weight_decay", float, 5e-4),
            batch_size=sec.get("optimizer", "batch_size", int, 64),
            lr_decay_every=sec.get("optimizer", "lr_decay_every", int, 0),
            lr_decay_factor=sec.get("optimizer", "lr_decay_factor", float, 0.16),
        )
    except ValueError as exc:
        raise ConfigError(f"[optimizer] {exc}") from None

    try:
        precision = PrecisionConfig(
            threshold=sec.get("precision", "threshold", float, -2e-3),
            interval=sec.get("precision", "interval", int, 50),
            step_bits=sec.get("precision", "step_bits", int, 8),
            initial_bits=sec.get("precision", "initial_bits", int, 8),
            consecutive=sec.get("precision", "consecutive", _bool, False),
        )
    except ValueError as exc:
        raise ConfigError(f"[precision] {exc}") from None
    oracle_bits = sec.get("precision", "oracle_bits", int, 16)

    try:
        link = LinkModel(
            bandwidth=sec.get("link", "bandwidth", float, 12e9),
            latency=sec.get("link", "latency", float, 5e-6),
        )
        codec_cost = CodecCostModel(
            pack_rate=sec.get("link", "pack_rate", float, 1.5e9),
            unpack_rate=sec.get("link", "unpack_rate", float, 6e9),
        )
    except ValueError as exc:
        raise ConfigError(f"[link] {exc}") from None

    sec.check_unknown()
    return RunConfig(
        mode=mode_override or mode,
        seed=seed,
        epochs=epochs,
        workers=workers,
        data=data,
        hidden=hidden,
        sgd=sgd,
        precision=precision,
        oracle_bits=oracle_bits,
        link=link,
        codec_cost=codec_cost,
    )


def load_config(path: str | Path, seed: int, mode_override: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, seed, mode_override)
