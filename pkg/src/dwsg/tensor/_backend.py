"""Pick the compiled canonicalizer when available."""

import os

BACKEND = "python"
if os.environ.get("DWSG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._canon import canonicalize  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from ._canon_py import canonicalize
else:
    from ._canon_py import canonicalize

__all__ = ["BACKEND", "canonicalize"]
