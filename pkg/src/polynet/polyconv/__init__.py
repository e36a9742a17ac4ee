"""Polynomial-density filters and the graph convolution built on them."""

from .basis import DEGREES, MonomialBasis, basis_for_degree
from .conv import ConvLayerSpec, conv_backward, conv_forward
from .filters import PolyFilter

__all__ = [
    "DEGREES",
    "MonomialBasis",
    "basis_for_degree",
    "ConvLayerSpec",
    "conv_backward",
    "conv_forward",
    "PolyFilter",
]
