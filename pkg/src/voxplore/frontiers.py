"""Incremental frontier detection over map change sets.

A frontier is an unknown voxel adjacent to a free voxel; it is a surface
frontier when additionally adjacent to an occupied voxel, else a void
frontier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from voxplore.grid import FREE, OCCUPIED, UNKNOWN, VoxelMap

VOID = 0
SURFACE = 1

LABEL_NAMES = {VOID: "void", SURFACE: "surface"}

_FACE_OFFSETS = [
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
]

_ALL_OFFSETS = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]

_BUCKET = 8


def neighbor_offsets(connectivity: int):
    if connectivity == 6:
        return _FACE_OFFSETS
    if connectivity == 26:
        return _ALL_OFFSETS
    raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")


@dataclass
class FrontierDelta:
    added: dict = field(default_factory=dict)
    removed: set = field(default_factory=set)
    relabeled: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.relabeled)


class FrontierSet:
    """Labeled frontier voxels with a coarse spatial bucket index.

    Covered flags are owned by the regulation cycle; this class only stores
    them. The bucket index answers box queries for visibility recomputes.
    """

    def __init__(self, connectivity: int = 6):
        self.connectivity = connectivity
        self.offsets = neighbor_offsets(connectivity)
        self.frontiers: dict = {}
        self.covered: set = set()
        self._buckets: dict = {}

    def __len__(self) -> int:
        return len(self.frontiers)

    def __contains__(self, idx) -> bool:
        return idx in self.frontiers

    def label(self, idx) -> int:
        return self.frontiers[idx]

    def surface_count(self) -> int:
        return sum(1 for v in self.frontiers.values() if v == SURFACE)

    def non_covered(self):
        return (f for f in self.frontiers if f not in self.covered)

    def _bucket_of(self, idx):
        return (idx[0] // _BUCKET, idx[1] // _BUCKET, idx[2] // _BUCKET)

    def _add(self, idx, label) -> None:
        self.frontiers[idx] = label
        self._buckets.setdefault(self._bucket_of(idx), set()).add(idx)

    def _remove(self, idx) -> None:
        del self.frontiers[idx]
        self.covered.discard(idx)
        b = self._bucket_of(idx)
        cell = self._buckets[b]
        cell.discard(idx)
        if not cell:
            del self._buckets[b]

    def candidates_in_box(self, lo, hi):
        """Frontiers inside the grid-coordinate box [lo, hi] (superset-safe)."""
        b_lo = [int(np.floor(lo[i])) // _BUCKET for i in range(3)]
        b_hi = [int(np.floor(hi[i])) // _BUCKET for i in range(3)]
        out = []
        for bi in range(b_lo[0], b_hi[0] + 1):
            for bj in range(b_lo[1], b_hi[1] + 1):
                for bk in range(b_lo[2], b_hi[2] + 1):
                    cell = self._buckets.get((bi, bj, bk))
                    if cell:
                        out.extend(cell)
        return out


def classify(vmap: VoxelMap, idx, offsets) -> int | None:
    """Frontier label for one voxel, or None when it is not a frontier."""
    if vmap.states[idx] != UNKNOWN:
        return None
    nx, ny, nz = vmap.dims
    has_free = False
    has_occ = False
    for dx, dy, dz in offsets:
        i, j, k = idx[0] + dx, idx[1] + dy, idx[2] + dz
        if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
            continue
        st = vmap.states[i, j, k]
        if st == FREE:
            has_free = True
        elif st == OCCUPIED:
            has_occ = True
    if not has_free:
        return None
    return SURFACE if has_occ else VOID


def update_frontiers(fset: FrontierSet, vmap: VoxelMap, changes) -> FrontierDelta:
    """Re-examine changed voxels and their neighbors against the map.

    After the update the set equals a from-scratch recompute; only voxels
    touched by the change set and their neighbors are visited.
    """
    delta = FrontierDelta()
    if changes.empty:
        return delta
    offsets = fset.offsets
    nx, ny, nz = vmap.dims
    candidates = set(changes.changed.keys())
    for idx in changes.changed:
        for dx, dy, dz in offsets:
            i, j, k = idx[0] + dx, idx[1] + dy, idx[2] + dz
            if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
                candidates.add((i, j, k))
    for idx in candidates:
        new_label = classify(vmap, idx, offsets)
        if idx in fset.frontiers:
            old_label = fset.frontiers[idx]
            if new_label is None:
                fset._remove(idx)
                delta.removed.add(idx)
            elif new_label != old_label:
                fset.frontiers[idx] = new_label
                delta.relabeled[idx] = new_label
        elif new_label is not None:
            fset._add(idx, new_label)
            delta.added[idx] = new_label
    return delta


def recompute_frontiers(vmap: VoxelMap, connectivity: int = 6) -> dict:
    """Full-map frontier computation (vectorized reference)."""
    offsets = neighbor_offsets(connectivity)
    unknown = vmap.states == UNKNOWN
    has_free = np.zeros_like(unknown)
    has_occ = np.zeros_like(unknown)
    for off in offsets:
        shifted_free = _shift_eq(vmap.states, off, FREE)
        shifted_occ = _shift_eq(vmap.states, off, OCCUPIED)
        has_free |= shifted_free
        has_occ |= shifted_occ
    mask = unknown & has_free
    out = {}
    for i, j, k in zip(*np.nonzero(mask)):
        out[(int(i), int(j), int(k))] = SURFACE if has_occ[i, j, k] else VOID
    return out


def _shift_eq(states: np.ndarray, off, value: int) -> np.ndarray:
    """Mask of voxels whose neighbor at +off equals the given state."""
    out = np.zeros(states.shape, dtype=bool)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    for ax in range(3):
        o = off[ax]
        n = states.shape[ax]
        if o > 0:
            dst[ax] = slice(0, n - o)
            src[ax] = slice(o, n)
        elif o < 0:
            dst[ax] = slice(-o, n)
            src[ax] = slice(0, n + o)
    out[tuple(dst)] = states[tuple(src)] == value
    return out
