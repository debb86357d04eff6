"""Byte-truncation weight codec, adaptive precision control, and a
desk-scale training harness that accounts every byte crossing the
simulated host/worker boundary."""

from .codec import (
    MalformedBlock,
    PackedBlock,
    bits_to_round_to,
    pack,
    pack_parallel,
    pack_vectorized,
    read_stream,
    truncation_mask,
    unpack,
    write_stream,
)
from .precision import (
    FixedPrecision,
    LayerPrecisionState,
    PrecisionConfig,
    PrecisionController,
    UnknownLayer,
    change_rate,
    l2_norm,
)
from .net import (
    GradientSet,
    Network,
    NonFiniteParameters,
    SgdConfig,
    ShapeMismatch,
    backward,
    forward,
    gather_and_update,
    init_network,
    init_sgd_state,
)
from .transfer import (
    EmptyLedger,
    LinkModel,
    TransferBoundary,
    TransferLedger,
    TransferRecord,
    profile_report,
    send_weights,
)
from .config import RunConfig, load_config, parse_config
from .training import RunResult, run_training, write_run_outputs

__version__ = "0.1.0"
