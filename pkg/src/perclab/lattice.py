"""Hypercubic lattice geometry with free or periodic boundaries.

Sites are indexed in row-major order: flat index i maps to coordinates
(c_0, ..., c_{d-1}) with c_a = (i // stride_a) % side_a, where stride_a
is the product of the side lengths of all later axes. Interior sites
have coordination number z = 2d.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

FREE = "free"
PERIODIC = "periodic"

# headroom for signed 64-bit index arithmetic in the kernels
_MAX_SITES = 2**62
_MAX_DIM = 62  # axis bitmasks live in a uint64


class GeometryError(ValueError):
    """Invalid lattice geometry or out-of-range site index."""


@dataclass(frozen=True)
class LatticeGeometry:
    """Immutable d-dimensional hypercubic lattice.

    Parameters
    ----------
    sides : sequence of int
        Side length per axis, in sites; every entry >= 1. Periodic
        boundaries require every side >= 3 so the 2d neighbor slots of a
        site are pairwise distinct.
    boundary : str
        ``"free"`` or ``"periodic"``.
    """

    sides: tuple[int, ...]
    boundary: str = FREE

    def __post_init__(self):
        sides = tuple(int(s) for s in self.sides)
        object.__setattr__(self, "sides", sides)
        if len(sides) == 0:
            raise GeometryError("at least one axis is required")
        if len(sides) > _MAX_DIM:
            raise GeometryError(f"dimension {len(sides)} exceeds {_MAX_DIM}")
        if any(s < 1 for s in sides):
            raise GeometryError(f"side lengths must be >= 1, got {sides}")
        if self.boundary not in (FREE, PERIODIC):
            raise GeometryError(f"unknown boundary {self.boundary!r}")
        if self.boundary == PERIODIC and min(sides) < 3:
            raise GeometryError(
                f"periodic boundaries require every side >= 3, got {sides}"
            )
        n = 1
        for s in sides:
            n *= s
        if n > _MAX_SITES:
            raise GeometryError(f"site count {n} exceeds the index range")

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @cached_property
    def site_count(self) -> int:
        n = 1
        for s in self.sides:
            n *= s
        return n

    @cached_property
    def sides_array(self) -> np.ndarray:
        a = np.asarray(self.sides, dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def strides(self) -> np.ndarray:
        st = np.empty(self.d, dtype=np.int64)
        acc = 1
        for a in range(self.d - 1, -1, -1):
            st[a] = acc
            acc *= self.sides[a]
        st.flags.writeable = False
        return st

    @cached_property
    def spanning_axes_mask(self) -> int:
        """Bitmask of axes along which spanning is geometrically possible.

        An axis of side 1 has coinciding faces; a lone coordinate cannot
        connect two opposite boundaries, so such axes are excluded.
        """
        mask = 0
        for a, s in enumerate(self.sides):
            if s >= 2:
                mask |= 1 << a
        return mask

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.site_count:
            raise GeometryError(f"site index {i} outside [0, {self.site_count})")
        return i

    def index_to_coords(self, i: int) -> tuple[int, ...]:
        i = self._check_index(i)
        return tuple(
            (i // int(self.strides[a])) % self.sides[a] for a in range(self.d)
        )

    def coords_to_index(self, coords) -> int:
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.d:
            raise GeometryError(f"expected {self.d} coordinates, got {len(coords)}")
        i = 0
        for a, c in enumerate(coords):
            if not 0 <= c < self.sides[a]:
                raise GeometryError(f"coordinate {c} outside [0, {self.sides[a]}) on axis {a}")
            i += c * int(self.strides[a])
        return i

    def neighbors(self, i: int) -> list[int]:
        """Nearest neighbors of site i, axis-major, minus then plus direction.

        Periodic boundaries give exactly 2d distinct entries; free
        boundaries give between d and 2d.
        """
        i = self._check_index(i)
        out = []
        for a in range(self.d):
            side = self.sides[a]
            stride = int(self.strides[a])
            c = (i // stride) % side
            if c > 0:
                out.append(i - stride)
            elif self.periodic:
                out.append(i + (side - 1) * stride)
            if c < side - 1:
                out.append(i + stride)
            elif self.periodic:
                out.append(i - (side - 1) * stride)
        return out

    def coords_of(self, indices) -> np.ndarray:
        """Vectorized index -> coordinate rows, shape (len(indices), d)."""
        idx = np.asarray(indices, dtype=np.int64)
        return (idx[:, None] // self.strides[None, :]) % self.sides_array[None, :]

    def displacement(self, i: int, j: int) -> np.ndarray:
        """Coordinate displacement from i to j.

        Under periodic boundaries the minimum-image convention applies,
        with each component in [-side/2, side/2).
        """
        ci = np.asarray(self.index_to_coords(i), dtype=np.int64)
        cj = np.asarray(self.index_to_coords(j), dtype=np.int64)
        delta = cj - ci
        if self.periodic:
            sides = self.sides_array
            delta = (delta + sides // 2) % sides - sides // 2
        return delta

    def manifest_fields(self) -> dict:
        return {"d": self.d, "sides": list(self.sides), "boundary": self.boundary}
