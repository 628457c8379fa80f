"""Kernel backend selection.

The compiled extension is used when available; set MODE2SIM_PURE_PYTHON=1 to
force the numpy fallback (useful for the backend benchmark and debugging).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MODE2SIM_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND

DUPLEX_CODES = {"hd": _kernels_py.DUPLEX_HD, "sbfd": _kernels_py.DUPLEX_SBFD, "ibfd": _kernels_py.DUPLEX_IBFD}
DECODER_CODES = {"mppd": _kernels_py.DECODER_MPPD, "ipd": _kernels_py.DECODER_IPD}

MISS_NONE = _kernels_py.MISS_NONE
MISS_HALF_DUPLEX = _kernels_py.MISS_HALF_DUPLEX
MISS_PSCCH = _kernels_py.MISS_PSCCH
MISS_PSSCH = _kernels_py.MISS_PSSCH
MISS_SELF = _kernels_py.MISS_SELF

decode_slot = _impl.decode_slot
build_busy_map = _impl.build_busy_map
free_map_at = _impl.free_map_at


def backends() -> dict[str, object]:
    """All importable kernel backends, keyed by name."""
    found: dict[str, object] = {_kernels_py.BACKEND: _kernels_py}
    try:
        from . import _kernels

        found[_kernels.BACKEND] = _kernels
    except ImportError:
        pass
    return found
