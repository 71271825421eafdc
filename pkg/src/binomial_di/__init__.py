"""Deterministic identification over the discrete-time Binomial channel."""

__version__ = "0.1.0"

from .channel import ChannelParams
from .codec import DecoderConfig, decoding_metric, identify
from .packing import Codebook, PackingConfig, construct_saturated

__all__ = [
    "ChannelParams",
    "Codebook",
    "DecoderConfig",
    "PackingConfig",
    "construct_saturated",
    "decoding_metric",
    "identify",
    "__version__",
]
