from .functional import DegenerateVectorError, cosine_similarity, mse_loss, pixel_shuffle, pixel_unshuffle
from .optim import Adam, AdamState, adam_step
from .tensor import (
    DEFAULT_DTYPE,
    DimensionError,
    GraphError,
    NonFiniteError,
    Tensor,
    concat,
    elementwise,
    matmul,
    no_grad,
    tensor,
)

__all__ = [
    "Adam",
    "AdamState",
    "DEFAULT_DTYPE",
    "DegenerateVectorError",
    "DimensionError",
    "GraphError",
    "NonFiniteError",
    "Tensor",
    "adam_step",
    "concat",
    "cosine_similarity",
    "elementwise",
    "matmul",
    "mse_loss",
    "no_grad",
    "pixel_shuffle",
    "pixel_unshuffle",
    "tensor",
]
