"""Procedural 2-D shape library on a 16x16 occupancy grid.

Seven families (rectangle, ellipse, triangle, L, T, U, H), each with two
size parameters measured in cells. A fixed catalog assigns concrete
(family, a, b) instances to the train and test splits. Cell size is 1 cm,
so the grid spans 16 cm and shapes of 7-12 cells match 7-12 cm objects.
"""

import numpy as np

GRID_N = 16
CELL_SIZE = 0.01  # metres per cell
GRID_EXTENT = GRID_N * CELL_SIZE
_CENTER = (GRID_N - 1) / 2.0  # index coordinates of the grid centre


def _cell_offsets():
    idx = np.arange(GRID_N) - _CENTER
    dy, dx = np.meshgrid(idx, idx, indexing="ij")
    return dx, dy  # in cells, x along columns, y along rows


def _center_mask(mask: np.ndarray) -> np.ndarray:
    """Shift the occupied bounding box to the grid centre (integer shift)."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("shape mask is empty")
    dr = (GRID_N - 1 - rows[0] - rows[-1]) // 2
    dc = (GRID_N - 1 - cols[0] - cols[-1]) // 2
    return np.roll(np.roll(mask, dr, axis=0), dc, axis=1)


def _rect(a, b):
    dx, dy = _cell_offsets()
    return (np.abs(dx) <= a / 2.0 - 0.5 + 1e-9) & (np.abs(dy) <= b / 2.0 - 0.5 + 1e-9)


def _ellipse(a, b):
    dx, dy = _cell_offsets()
    return (dx / (a / 2.0)) ** 2 + (dy / (b / 2.0)) ** 2 <= 1.0 + 1e-9


def _triangle(a, b):
    # isoceles, base width a at the bottom, height b, apex up
    dx, dy = _cell_offsets()
    frac = (dy + b / 2.0) / b  # 0 at apex row, 1 at base
    return (dy >= -b / 2.0 - 1e-9) & (dy <= b / 2.0 + 1e-9) & \
        (np.abs(dx) <= (a / 2.0) * np.clip(frac, 0.0, 1.0) + 1e-9)


def _bar_union(rects):
    """Union of integer cell rectangles given as (r0, r1, c0, c1) inclusive."""
    mask = np.zeros((GRID_N, GRID_N), dtype=bool)
    for r0, r1, c0, c1 in rects:
        mask[r0:r1 + 1, c0:c1 + 1] = True
    return mask


def _l_shape(a, t):
    a, t = int(a), int(t)
    return _bar_union([(0, a - 1, 0, t - 1),          # vertical arm
                       (a - t, a - 1, 0, a - 1)])     # horizontal arm


def _t_shape(a, t):
    a, t = int(a), int(t)
    c0 = (a - t) // 2
    return _bar_union([(0, t - 1, 0, a - 1),          # top bar
                       (0, a - 1, c0, c0 + t - 1)])   # stem


def _u_shape(a, t):
    a, t = int(a), int(t)
    return _bar_union([(0, a - 1, 0, t - 1),
                       (0, a - 1, a - t, a - 1),
                       (a - t, a - 1, 0, a - 1)])


def _h_shape(a, t):
    a, t = int(a), int(t)
    r0 = (a - t) // 2
    return _bar_union([(0, a - 1, 0, t - 1),
                       (0, a - 1, a - t, a - 1),
                       (r0, r0 + t - 1, 0, a - 1)])


SHAPE_FAMILIES = {
    "rect": _rect,
    "ellipse": _ellipse,
    "triangle": _triangle,
    "l": _l_shape,
    "t": _t_shape,
    "u": _u_shape,
    "h": _h_shape,
}

# Fixed split: 12 training instances and 7 held-out instances. Test
# instances reuse families but with parameter values absent from training.
TRAIN_SHAPES = (
    ("rect", 10, 6), ("rect", 12, 12),
    ("ellipse", 10, 10), ("ellipse", 12, 8),
    ("triangle", 10, 8), ("triangle", 12, 12),
    ("l", 10, 4), ("l", 12, 5),
    ("t", 10, 4), ("t", 12, 5),
    ("u", 10, 4), ("h", 12, 4),
)
TEST_SHAPES = (
    ("rect", 8, 10), ("ellipse", 8, 12), ("triangle", 8, 10),
    ("l", 8, 3), ("t", 8, 6), ("u", 12, 5), ("h", 10, 5),
)


def shape_grid(shape_id) -> np.ndarray:
    """Occupancy grid in {0, 1} (float64) at the canonical orientation."""
    family, a, b = shape_id
    if family not in SHAPE_FAMILIES:
        raise KeyError(f"unknown shape family {family!r}")
    mask = SHAPE_FAMILIES[family](a, b)
    return _center_mask(mask).astype(np.float64)


def random_shape_id(rng: np.random.Generator):
    """Random family and sizes; the unlimited stream for shape pretraining."""
    family = list(SHAPE_FAMILIES)[rng.integers(len(SHAPE_FAMILIES))]
    if family in ("rect", "ellipse", "triangle"):
        a = int(rng.integers(7, 13))
        b = int(rng.integers(6, 13))
        return (family, a, b)
    a = int(rng.integers(8, 13))
    t = int(rng.integers(3, max(4, a // 2)))
    return (family, a, t)


def rotate_grid(grid: np.ndarray, theta: float) -> np.ndarray:
    """Rotate by `theta` about the grid centre with inverse-map bilinear
    resampling; output values stay in [0, 1]. theta=0 is an exact identity."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape != (GRID_N, GRID_N):
        raise ValueError(f"grid must be {GRID_N}x{GRID_N}, got {grid.shape}")
    if theta == 0.0:
        return grid.copy()
    c, s = np.cos(theta), np.sin(theta)
    idx = np.arange(GRID_N) - _CENTER
    out_y, out_x = np.meshgrid(idx, idx, indexing="ij")
    # inverse map: source = R(-theta) @ dest
    src_x = c * out_x + s * out_y + _CENTER
    src_y = -s * out_x + c * out_y + _CENTER
    x0 = np.floor(src_x).astype(int)
    y0 = np.floor(src_y).astype(int)
    fx = src_x - x0
    fy = src_y - y0

    def sample(yi, xi):
        inside = (yi >= 0) & (yi < GRID_N) & (xi >= 0) & (xi < GRID_N)
        vals = np.zeros_like(src_x)
        vals[inside] = grid[yi[inside], xi[inside]]
        return vals

    v00 = sample(y0, x0)
    v01 = sample(y0, x0 + 1)
    v10 = sample(y0 + 1, x0)
    v11 = sample(y0 + 1, x0 + 1)
    out = (v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx
           + v10 * fy * (1 - fx) + v11 * fy * fx)
    return out


def grid_centroid_cells(grid: np.ndarray):
    """Centroid of occupied cells in (x, y) cell offsets from the centre."""
    occ = grid > 0.5
    if not occ.any():
        raise ValueError("empty grid")
    rows, cols = np.nonzero(occ)
    return ((cols - _CENTER).mean(), (rows - _CENTER).mean())


def occupied_cell_offsets(grid: np.ndarray) -> np.ndarray:
    """Object-frame (x, y) positions of occupied cell centres, in metres,
    measured from the occupied-cell centroid (the centre of mass)."""
    occ = grid > 0.5
    rows, cols = np.nonzero(occ)
    cx, cy = grid_centroid_cells(grid)
    xs = (cols - _CENTER - cx) * CELL_SIZE
    ys = (rows - _CENTER - cy) * CELL_SIZE
    return np.stack([xs, ys], axis=1)


def interior_mask(grid: np.ndarray) -> np.ndarray:
    """Cells whose full 3x3 neighbourhood has a uniform value."""
    g = grid > 0.5
    out = np.zeros_like(g)
    inner = np.ones_like(g[1:-1, 1:-1])
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            inner &= g[1 + dr:GRID_N - 1 + dr, 1 + dc:GRID_N - 1 + dc] == g[1:-1, 1:-1]
    out[1:-1, 1:-1] = inner
    return out
