"""LUT-based image restoration: bit-split dual-branch inference over separable
1D tables, channel-wise integer shifts, rotation ensemble, error-bounded
adaptive table compression with cached-buffer queries, and a floating-point
reference model the integer engine matches bit-exactly at stride 1.
"""

from .engine import OpCounter, forward, lut_query
from .model import Lut1D, LutPack, ModelDescriptor, make_descriptor
from .planes import BitSplit, FeatureMap
from .refnet import make_reference_net, random_reference_net, ref_forward, ref_forward_quantized
from .sampling import build_buffer, cached_forward, compress_pack, interp_error, search_stride
from .transfer import transfer_model, transfer_unit

__version__ = "0.1.0"

__all__ = [
    "BitSplit",
    "FeatureMap",
    "Lut1D",
    "LutPack",
    "ModelDescriptor",
    "OpCounter",
    "build_buffer",
    "cached_forward",
    "compress_pack",
    "forward",
    "interp_error",
    "lut_query",
    "make_descriptor",
    "make_reference_net",
    "random_reference_net",
    "ref_forward",
    "ref_forward_quantized",
    "search_stride",
    "transfer_model",
    "transfer_unit",
]
