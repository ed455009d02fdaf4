"""Backend selection for the per-family accumulation kernels.

The hot path of every fit is a one-pass accumulation of the pooled
log-likelihood, score and Hessian over the observation array.  A compiled
extension provides that pass when available; ``LRSCAN_PURE_PYTHON=1`` forces
the numpy fallback.  Both backends expose the same functions and agree to
floating-point roundoff (see ``benchmarks/bench_backends.py`` for the speed
comparison).
"""

import os

if os.environ.get("LRSCAN_PURE_PYTHON") == "1":
    from . import _fallback as backend
else:
    try:
        from . import _core as backend  # type: ignore[no-redef]
    except ImportError:
        from . import _fallback as backend  # type: ignore[no-redef]

BACKEND_NAME = backend.NAME
