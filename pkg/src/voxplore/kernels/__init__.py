"""Voxel kernel backend selection.

The compiled extension is preferred when built; the pure-Python fallback is
API- and result-identical. Set ``VOXPLORE_KERNELS=python`` or
``VOXPLORE_KERNELS=native`` to force a backend (the benchmark and the
equivalence tests use this).
"""

from __future__ import annotations

import os

from voxplore.kernels import fallback as _fallback

_requested = os.environ.get("VOXPLORE_KERNELS", "").strip().lower()

if _requested == "python":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from voxplore.kernels import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = _fallback
        BACKEND = "python"

UNKNOWN = _fallback.UNKNOWN
FREE = _fallback.FREE
OCCUPIED = _fallback.OCCUPIED

# Forward nudge applied past a hit point so the surface cell is the one
# entered by the ray, in voxel units.
HIT_EPS = 1e-6

walk_cells = _impl.walk_cells
integrate_rays = _impl.integrate_rays
segment_blocked = _impl.segment_blocked
visible_filter = _impl.visible_filter
box_state = _impl.box_state
sphere_state = _impl.sphere_state
ray_box_hits = _impl.ray_box_hits
