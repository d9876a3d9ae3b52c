from .bitstream import (
    Bitstream,
    BitstreamError,
    ChecksumError,
    bpp,
    compressed_copy,
    deserialize_model,
    load,
    save,
    serialize_model,
)
from .huffman import BitString, Codebook, CorruptStreamError, huffman_decode, huffman_encode
from .quantize import QuantizationError, QuantizedTensor, dequantize, quantize

__all__ = [
    "BitString",
    "Bitstream",
    "BitstreamError",
    "ChecksumError",
    "Codebook",
    "CorruptStreamError",
    "QuantizationError",
    "QuantizedTensor",
    "bpp",
    "compressed_copy",
    "dequantize",
    "deserialize_model",
    "huffman_decode",
    "huffman_encode",
    "load",
    "quantize",
    "save",
    "serialize_model",
]
