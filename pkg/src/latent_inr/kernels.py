"""Select the compiled kernels when built, the numpy fallback otherwise.

Set ``LATENT_INR_PURE_PYTHON=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("LATENT_INR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import hashgrid_backward, hashgrid_forward, huffman_pack, huffman_unpack

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

if BACKEND == "python":
    from ._fallback import hashgrid_backward, hashgrid_forward, huffman_pack, huffman_unpack

__all__ = ["BACKEND", "hashgrid_backward", "hashgrid_forward", "huffman_pack", "huffman_unpack"]
