"""Backend selection for the resolution inner loop.

Prefers the compiled extension, falls back to pure Python. Set
``OMAFVD_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
the backend-equivalence tests).
"""
import os

if os.environ.get("OMAFVD_PURE_PYTHON"):
    from . import _speedups_py as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _speedups_py as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND
NAL_TYPE_EXTRACTOR: int = _impl.NAL_TYPE_EXTRACTOR
split_nal_spans = _impl.split_nal_spans
resolve_sample_payload = _impl.resolve_sample_payload
