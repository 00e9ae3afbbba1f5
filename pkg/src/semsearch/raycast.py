"""Grid ray-casting primitives shared by sensing, graph building and gain estimation.

All geometry lives in cell units on an [y, x]-indexed grid; positions are cell
centers. Two traversal flavors are provided:

* supercover lines: every cell the segment touches, including both side cells
  at exact corner crossings. Used for collision checks (an occupied cell
  anywhere on the supercover blocks; corner cutting is therefore impossible).
* ray fans: precomputed cell sequences for a bundle of equally spaced ray
  directions, marched until an occupied cell or the range end. Used for
  sensing sweeps and coverage-gain estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def supercover_line(y0: int, x0: int, y1: int, x1: int) -> list[tuple[int, int]]:
    """All cells touched by the segment between two cell centers.

    Integer arithmetic only; at an exact corner crossing both side cells are
    emitted before the diagonal cell, so the result is symmetric as a set
    under endpoint swap.
    """
    dy, dx = y1 - y0, x1 - x0
    ny, nx = abs(dy), abs(dx)
    sy = 1 if dy > 0 else -1
    sx = 1 if dx > 0 else -1
    y, x = y0, x0
    cells = [(y, x)]
    iy = ix = 0
    while ix < nx or iy < ny:
        # compare (ix + 0.5) / nx against (iy + 0.5) / ny without division
        tx = (2 * ix + 1) * ny
        ty = (2 * iy + 1) * nx
        if tx == ty:
            cells.append((y, x + sx))
            cells.append((y + sy, x))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif tx < ty:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((y, x))
    return cells


def walk_line(y0: int, x0: int, y1: int, x1: int) -> list[tuple[int, int]]:
    """4-connected cell walk between two cell centers.

    Subset of the supercover (at corner crossings only the x-side cell is
    walked), so a collision-free supercover implies a collision-free walk.
    Consecutive cells always share an edge; used for robot motion.
    """
    dy, dx = y1 - y0, x1 - x0
    ny, nx = abs(dy), abs(dx)
    sy = 1 if dy > 0 else -1
    sx = 1 if dx > 0 else -1
    y, x = y0, x0
    cells = [(y, x)]
    iy = ix = 0
    while ix < nx or iy < ny:
        tx = (2 * ix + 1) * ny
        ty = (2 * iy + 1) * nx
        if tx == ty:
            cells.append((y, x + sx))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif tx < ty:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((y, x))
    return cells


def los_clear(blocking: np.ndarray, y0: int, x0: int, y1: int, x1: int) -> bool:
    """True if no cell on the supercover between the two centers blocks.

    Endpoints are included in the check; callers wanting permissive endpoints
    must exclude them beforehand.
    """
    h, w = blocking.shape
    for y, x in supercover_line(y0, x0, y1, x1):
        if not (0 <= y < h and 0 <= x < w) or blocking[y, x]:
            return False
    return True


def segment_clear(blocking: np.ndarray, y0: int, x0: int, y1: int, x1: int) -> bool:
    """los_clear with endpoints exempted (they host graph nodes)."""
    h, w = blocking.shape
    for y, x in supercover_line(y0, x0, y1, x1):
        if (y, x) == (y0, x0) or (y, x) == (y1, x1):
            continue
        if not (0 <= y < h and 0 <= x < w) or blocking[y, x]:
            return False
    return True


def _ray_offsets(angle: float, radius: float) -> list[tuple[int, int]]:
    """Cells entered by a ray from a cell center, in visiting order.

    A cell is listed when the ray enters it at parameter t < radius + 1 (one
    cell of slack; callers filter by center distance). The origin cell is not
    listed. Ties (exact corner crossings) step both axes at once; with the
    default equally spaced fans such ties only arise for axis-aligned rays,
    which have no crossings on the other axis.
    """
    c, s = math.cos(angle), math.sin(angle)
    tmax = radius + 1.0
    # boundary-crossing parameters along each axis
    tx = [(k + 0.5) / abs(c) for k in range(int(tmax * abs(c)) + 2)] if abs(c) > 1e-12 else []
    ty = [(k + 0.5) / abs(s) for k in range(int(tmax * abs(s)) + 2)] if abs(s) > 1e-12 else []
    tx = [t for t in tx if t < tmax]
    ty = [t for t in ty if t < tmax]
    sx = 1 if c > 0 else -1
    sy = 1 if s > 0 else -1
    x = y = 0
    out = []
    ix = iy = 0
    while ix < len(tx) or iy < len(ty):
        if iy >= len(ty) or (ix < len(tx) and tx[ix] < ty[iy] - 1e-12):
            x += sx
            ix += 1
        elif ix >= len(tx) or ty[iy] < tx[ix] - 1e-12:
            y += sy
            iy += 1
        else:
            x += sx
            y += sy
            ix += 1
            iy += 1
        out.append((y, x))
    return out


@dataclass(frozen=True)
class RayFan:
    """Precomputed fan of equally spaced rays as padded offset arrays.

    offs_y/offs_x are [R, L] int32 offsets from the origin cell, valid where
    `valid`; `center_ok` additionally requires the cell center to lie within
    the fan radius. Padding entries are (0, 0) and invalid.
    """

    num_rays: int
    radius: float
    offs_y: np.ndarray
    offs_x: np.ndarray
    valid: np.ndarray
    center_ok: np.ndarray


@lru_cache(maxsize=32)
def build_ray_fan(num_rays: int, radius_cells: float) -> RayFan:
    rays = [_ray_offsets(2.0 * math.pi * i / num_rays, radius_cells) for i in range(num_rays)]
    length = max(len(r) for r in rays)
    offs_y = np.zeros((num_rays, length), dtype=np.int32)
    offs_x = np.zeros((num_rays, length), dtype=np.int32)
    valid = np.zeros((num_rays, length), dtype=bool)
    for i, r in enumerate(rays):
        for j, (dy, dx) in enumerate(r):
            offs_y[i, j] = dy
            offs_x[i, j] = dx
            valid[i, j] = True
    center_ok = valid & (np.hypot(offs_y, offs_x) <= radius_cells + 1e-9)
    return RayFan(num_rays, radius_cells, offs_y, offs_x, valid, center_ok)


def sweep_visible(fan: RayFan, occupied: np.ndarray, y: int, x: int) -> np.ndarray:
    """Boolean mask of cells visible from (y, x) through `occupied`.

    A cell is visible when some ray reaches it before hitting an occupied
    cell (the first occupied cell on a ray is itself visible and stops the
    ray) and its center lies within the fan radius. The origin cell is always
    visible. Out-of-grid cells stop rays.
    """
    h, w = occupied.shape
    iy = y + fan.offs_y
    ix = x + fan.offs_x
    inb = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    iyc = np.clip(iy, 0, h - 1)
    ixc = np.clip(ix, 0, w - 1)
    blocked = ~inb | occupied[iyc, ixc] | ~fan.valid
    # reached[k]: no blocker strictly before position k on the ray
    reached = np.ones_like(blocked)
    reached[:, 1:] = np.cumprod(~blocked[:, :-1], axis=1)
    vis_flat = reached & fan.center_ok & inb
    mask = np.zeros((h, w), dtype=bool)
    mask[iyc[vis_flat], ixc[vis_flat]] = True
    mask[y, x] = True
    return mask


def ray_gain(fan: RayFan, occupancy: np.ndarray, y: int, x: int) -> float:
    """Mean number of unexplored cells visible per ray of the fan.

    `occupancy` is a belief grid (-1 occupied, 0 unexplored, 1 free); rays
    stop at belief-occupied cells and count unexplored cells whose center is
    within the fan radius.
    """
    h, w = occupancy.shape
    iy = y + fan.offs_y
    ix = x + fan.offs_x
    inb = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    iyc = np.clip(iy, 0, h - 1)
    ixc = np.clip(ix, 0, w - 1)
    vals = occupancy[iyc, ixc]
    blocked = ~inb | (vals == -1) | ~fan.valid
    reached = np.ones_like(blocked)
    reached[:, 1:] = np.cumprod(~blocked[:, :-1], axis=1)
    counted = reached & fan.center_ok & inb & (vals == 0)
    return float(counted.sum()) / fan.num_rays
