"""Streaming reasoning runtime: streaming masks, decoupled positions and a dual KV cache
on a toy decoder, plus stream preparation and evaluation utilities."""

from tays.numerics import ToyModelConfig, init_model
from tays.runtime import CostModel, FrameStream, RuntimeConfig, run_batch, run_interleaved, run_parallel

__all__ = [
    "CostModel",
    "FrameStream",
    "RuntimeConfig",
    "ToyModelConfig",
    "init_model",
    "run_batch",
    "run_interleaved",
    "run_parallel",
]
__version__ = "0.1.0"
