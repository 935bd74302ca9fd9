"""Heatmap quantization for sub-pixel landmark localization.

Encoders map continuous landmark coordinates onto a strided heatmap grid,
decoders map (predicted) heatmaps back to coordinates. Randomized-rounding
encoding combined with expectation decoding reconstructs coordinates
without quantization error; threshold encoding with argmax decoding does not.
"""

__version__ = "0.1.0"

from .decode import (
    ActivationSet,
    FourNeighborOfMax,
    NineNeighborUnion,
    TopK,
    decode_argmax,
    decode_argmax_bias_corrected,
    decode_expectation,
    decode_quarter_shift,
    select_activation_set,
)
from .heatmap import (
    GaussianConfig,
    HeatmapGrid,
    encode_binary,
    encode_expected,
    encode_gaussian,
    encode_sampled,
)
from .quantizer import (
    FractionalDecomposition,
    GridPoint,
    Point,
    decompose,
    quantize_random_round,
    quantize_threshold,
    threshold_bias,
)
from .rng import RngStream

__all__ = [
    "ActivationSet",
    "FourNeighborOfMax",
    "FractionalDecomposition",
    "GaussianConfig",
    "GridPoint",
    "HeatmapGrid",
    "NineNeighborUnion",
    "Point",
    "RngStream",
    "TopK",
    "decode_argmax",
    "decode_argmax_bias_corrected",
    "decode_expectation",
    "decode_quarter_shift",
    "decompose",
    "encode_binary",
    "encode_expected",
    "encode_gaussian",
    "encode_sampled",
    "quantize_random_round",
    "quantize_threshold",
    "select_activation_set",
    "threshold_bias",
]
