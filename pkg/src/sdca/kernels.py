"""Backend selection for the hot loops.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
numpy reference ``_pykernels`` is. Set ``SDCA_KERNELS=python`` to force the
fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["BACKEND", "backend", "available_backends", "sdca12_epca_segment",
           "pss_epca_segment", "weighted_gram_apply"]


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _ckernels is not None else [])


def backend(name: str = "auto"):
    """Kernel module for ``name`` in ``{"auto", "python", "compiled"}``.

    ``"auto"`` honours ``SDCA_KERNELS`` and otherwise prefers the compiled one.
    """
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    if name == "auto":
        forced = os.environ.get("SDCA_KERNELS", "auto")
        if forced != "auto":
            return backend(forced)
        return _ckernels if _ckernels is not None else _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")


_impl = backend(os.environ.get("SDCA_KERNELS", "auto"))
BACKEND = "compiled" if _impl is _ckernels and _ckernels is not None else "python"

sdca12_epca_segment = _impl.sdca12_epca_segment
pss_epca_segment = _impl.pss_epca_segment
weighted_gram_apply = _impl.weighted_gram_apply
