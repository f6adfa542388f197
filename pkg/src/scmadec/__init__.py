"""Sparse code multiple access (SCMA) encoding and message-passing detection."""

from .channel import (
    DistributedMatrix,
    Frame,
    FrameStream,
    ReceivedFrame,
    apply_distributed_matrix,
    ebn0_to_n0,
    encode,
    multiplex,
)
from .decoder import DecodeResult, DecoderConfig, decode, decode_batch
from .fixedpoint import FixedPointFormat, Quantization, quantize
from .metrics import OpCounters, audit, predict
from .system import (
    CodebookError,
    ScmaSystem,
    UserLayer,
    build_mapping_matrix,
    derive_factor_graph,
    is_regular,
    load_codebook,
    reference_system,
)

__version__ = "0.1.0"
