"""Backend selection for the pair-voting kernel.

The compiled Cython kernel is used when it was built; otherwise the
numpy implementation takes over. Set ``VPTRACK_PURE_PYTHON=1`` to force
the fallback (useful for benchmarking and backend-equivalence tests).
"""

import os

from . import _voting_py

if os.environ.get("VPTRACK_PURE_PYTHON") == "1":
    _impl = _voting_py
else:
    try:
        from . import _voting as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _voting_py

BACKEND = _impl.BACKEND_NAME


def accumulate_votes(normals, lengths, orientations, idx_i, idx_j, grid):
    """Dispatch to the active kernel; see _voting_py.accumulate_votes."""
    _impl.accumulate_votes(normals, lengths, orientations, idx_i, idx_j, grid)


def available_backends() -> dict:
    """Name -> module for every kernel importable in this environment."""
    backends = {"numpy": _voting_py}
    try:
        from . import _voting  # type: ignore[attr-defined]

        backends["cython"] = _voting
    except ImportError:
        pass
    return backends
