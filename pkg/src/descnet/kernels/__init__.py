"""Hot numeric kernels with a selectable backend.

Two interchangeable implementations of the inner loops that dominate
runtime (convolution + max-over-time pooling and its backward pass,
K-means assignment/update, embedding-gradient scatter):

* ``descnet.kernels.jit`` -- numba ``@njit`` loops (default),
* ``descnet.kernels.reference`` -- pure numpy.

Selection happens once at import time via the ``DESCNET_BACKEND``
environment variable: ``numba`` (default) or ``numpy``. Requesting
``numba`` explicitly when numba cannot be imported is an error; the
implicit default falls back to numpy with a warning. Each backend is
deterministic; results agree to floating-point reassociation error
(see ``benchmarks/bench_kernels.py`` for a timing comparison).
"""

import os
import warnings

_ENV_VAR = "DESCNET_BACKEND"
_choice = os.environ.get(_ENV_VAR, "").strip().lower()

if _choice in ("", "numba", "jit"):
    try:
        from . import jit as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice:
            raise ImportError(
                f"{_ENV_VAR}={_choice!r} requested but numba is not importable"
            )
        warnings.warn("numba unavailable; using pure-numpy kernels", RuntimeWarning)
        from . import reference as _impl

        BACKEND = "numpy"
elif _choice in ("numpy", "reference"):
    from . import reference as _impl

    BACKEND = "numpy"
else:
    raise ValueError(f"unknown {_ENV_VAR}={_choice!r}; use 'numba' or 'numpy'")

conv_pool_forward = _impl.conv_pool_forward
conv_pool_backward = _impl.conv_pool_backward
kmeans_assign = _impl.kmeans_assign
kmeans_update = _impl.kmeans_update
scatter_add_rows = _impl.scatter_add_rows

__all__ = [
    "BACKEND",
    "conv_pool_forward",
    "conv_pool_backward",
    "kmeans_assign",
    "kmeans_update",
    "scatter_add_rows",
]
