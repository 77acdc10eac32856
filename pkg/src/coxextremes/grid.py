"""Rectangles, regular grids, gridded fields and the GF1 text format.

A grid node ``(i, j)`` sits at ``(x0 + i dx, y0 + j dy)`` and represents the
cell of size ``dx x dy`` centred on it.  Field values are stored as arrays of
shape ``(ny, nx)`` (row-major, rows along ``y``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ParameterError

MAX_GRID_POINTS = 2**22
_TOL = 1e-9


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax >= self.xmin and self.ymax >= self.ymin):
            raise ParameterError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return (
            (pts[:, 0] >= self.xmin - tol)
            & (pts[:, 0] <= self.xmax + tol)
            & (pts[:, 1] >= self.ymin - tol)
            & (pts[:, 1] <= self.ymax + tol)
        )

    def expand(self, r: float) -> "Rect":
        """Bounding box of ``self (+) B_r(o)``."""
        return Rect(self.xmin - r, self.xmax + r, self.ymin - r, self.ymax + r)

    def erode(self, r: float) -> "Rect":
        """``self (-) B_r(o)``; raises if nothing is left."""
        return Rect(self.xmin + r, self.xmax - r, self.ymin + r, self.ymax - r)

    def distance(self, x, y) -> np.ndarray:
        """Euclidean distance from points to the rectangle (0 inside)."""
        ddx = np.maximum(np.maximum(self.xmin - np.asarray(x), np.asarray(x) - self.xmax), 0.0)
        ddy = np.maximum(np.maximum(self.ymin - np.asarray(y), np.asarray(y) - self.ymax), 0.0)
        return np.hypot(ddx, ddy)

    def intersect(self, other: "Rect") -> "Rect | None":
        xmin, xmax = max(self.xmin, other.xmin), min(self.xmax, other.xmax)
        ymin, ymax = max(self.ymin, other.ymin), min(self.ymax, other.ymax)
        if xmin > xmax or ymin > ymax:
            return None
        return Rect(xmin, xmax, ymin, ymax)

    def translate(self, ox: float, oy: float) -> "Rect":
        return Rect(self.xmin + ox, self.xmax + ox, self.ymin + oy, self.ymax + oy)


@dataclass(frozen=True)
class GridSpec:
    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ParameterError("grid needs at least one node")
        if not (self.dx > 0 and self.dy > 0):
            raise ParameterError("grid spacing must be positive")
        if self.nx * self.ny > MAX_GRID_POINTS:
            raise ParameterError(f"grid has {self.nx * self.ny} points, above the maximum {MAX_GRID_POINTS}")

    @classmethod
    def over(cls, rect: Rect, nx: int, ny: int) -> "GridSpec":
        """Grid with nodes on the corners of ``rect`` (``nx`` by ``ny`` nodes)."""
        dx = rect.width / (nx - 1) if nx > 1 else 1.0
        dy = rect.height / (ny - 1) if ny > 1 else 1.0
        return cls(rect.xmin, rect.ymin, dx, dy, nx, ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def node_box(self) -> Rect:
        return Rect(self.x0, self.x0 + (self.nx - 1) * self.dx, self.y0, self.y0 + (self.ny - 1) * self.dy)

    @property
    def cell_box(self) -> Rect:
        """Union of all node cells."""
        return Rect(
            self.x0 - self.dx / 2,
            self.x0 + (self.nx - 0.5) * self.dx,
            self.y0 - self.dy / 2,
            self.y0 + (self.ny - 0.5) * self.dy,
        )

    def nodes(self) -> np.ndarray:
        """Node coordinates as an array of shape ``(ny, nx, 2)``."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.stack([gx, gy], axis=-1)

    def expanded(self, mx: int, my: int | None = None) -> "GridSpec":
        """Same lattice with ``mx`` (``my``) extra nodes on each side."""
        my = mx if my is None else my
        return GridSpec(self.x0 - mx * self.dx, self.y0 - my * self.dy, self.dx, self.dy,
                        self.nx + 2 * mx, self.ny + 2 * my)

    def margin_for(self, r: float) -> tuple[int, int]:
        """Node margins whose cells cover a band of width ``r``."""
        return math.ceil(r / self.dx - _TOL), math.ceil(r / self.dy - _TOL)

    def index_ranges(self, rect: Rect) -> tuple[slice, slice]:
        """Slices (rows, cols) of the nodes lying in ``rect``."""
        i0 = max(math.ceil((rect.xmin - self.x0) / self.dx - _TOL), 0)
        i1 = min(math.floor((rect.xmax - self.x0) / self.dx + _TOL), self.nx - 1)
        j0 = max(math.ceil((rect.ymin - self.y0) / self.dy - _TOL), 0)
        j1 = min(math.floor((rect.ymax - self.y0) / self.dy + _TOL), self.ny - 1)
        return slice(j0, max(j1 + 1, j0)), slice(i0, max(i1 + 1, i0))

    def subgrid(self, rect: Rect) -> tuple["GridSpec", tuple[slice, slice]]:
        rows, cols = self.index_ranges(rect)
        if rows.stop <= rows.start or cols.stop <= cols.start:
            raise DomainError(f"no grid nodes inside {rect}")
        spec = GridSpec(self.x0 + cols.start * self.dx, self.y0 + rows.start * self.dy,
                        self.dx, self.dy, cols.stop - cols.start, rows.stop - rows.start)
        return spec, (rows, cols)

    def cell_weights(self, region: Rect) -> np.ndarray:
        """Area of each node cell intersected with ``region``."""
        xs, ys = self.xs, self.ys
        wx = np.clip(np.minimum(xs + self.dx / 2, region.xmax) - np.maximum(xs - self.dx / 2, region.xmin), 0, None)
        wy = np.clip(np.minimum(ys + self.dy / 2, region.ymax) - np.maximum(ys - self.dy / 2, region.ymin), 0, None)
        return wy[:, None] * wx[None, :]

    def same_lattice(self, other: "GridSpec") -> bool:
        if not (math.isclose(self.dx, other.dx) and math.isclose(self.dy, other.dy)):
            return False
        ox = (other.x0 - self.x0) / self.dx
        oy = (other.y0 - self.y0) / self.dy
        return abs(ox - round(ox)) < 1e-6 and abs(oy - round(oy)) < 1e-6

    def offset_of(self, other: "GridSpec") -> tuple[int, int]:
        """Column/row offset of ``other``'s first node inside this lattice."""
        return round((other.x0 - self.x0) / self.dx), round((other.y0 - self.y0) / self.dy)


@dataclass
class GridField:
    """Scalar field on a regular grid.

    ``mask`` marks valid nodes (``None`` means all valid); ``meta`` carries
    free-form provenance such as ``c_psi`` or bandwidths.
    """

    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.spec.shape)
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(self.spec.shape)
        if not np.all(np.isfinite(self.values)):
            raise DomainError("grid field values must be finite")

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridField":
        return cls(spec, np.full(spec.shape, float(value)))

    @property
    def valid(self) -> np.ndarray:
        return np.ones(self.spec.shape, dtype=bool) if self.mask is None else self.mask

    def restrict(self, rect: Rect) -> "GridField":
        spec, (rows, cols) = self.spec.subgrid(rect)
        mask = None if self.mask is None else self.mask[rows, cols]
        return GridField(spec, self.values[rows, cols].copy(), mask, dict(self.meta))

    def window_on(self, spec: GridSpec) -> np.ndarray:
        """Values at the nodes of ``spec``, which must be a sub-lattice of this grid."""
        if not self.spec.same_lattice(spec):
            raise DomainError("grids are not on a common lattice")
        ox, oy = self.spec.offset_of(spec)
        if ox < 0 or oy < 0 or ox + spec.nx > self.spec.nx or oy + spec.ny > self.spec.ny:
            raise DomainError("requested grid is not covered by this field")
        return self.values[oy:oy + spec.ny, ox:ox + spec.nx]

    def interpolate(self, pts) -> np.ndarray:
        """Bilinear interpolation at points; outside the node box values are clamped to the edge."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        s = self.spec
        fx = np.clip((pts[:, 0] - s.x0) / s.dx, 0, s.nx - 1)
        fy = np.clip((pts[:, 1] - s.y0) / s.dy, 0, s.ny - 1)
        i0 = np.minimum(np.floor(fx).astype(int), max(s.nx - 2, 0))
        j0 = np.minimum(np.floor(fy).astype(int), max(s.ny - 2, 0))
        i1 = np.minimum(i0 + 1, s.nx - 1)
        j1 = np.minimum(j0 + 1, s.ny - 1)
        tx = fx - i0
        ty = fy - j0
        v = self.values
        return ((1 - ty) * ((1 - tx) * v[j0, i0] + tx * v[j0, i1])
                + ty * ((1 - tx) * v[j1, i0] + tx * v[j1, i1]))


def integrate(field: GridField, region: Rect) -> float:
    """Midpoint-rule integral of ``field`` over ``region``.

    Each node contributes ``value * area(cell & region)``; this reduces to the
    plain cell sum when ``region`` is aligned with cell boundaries.  An empty
    intersection returns 0 with a warning.
    """
    w = field.spec.cell_weights(region)
    if not w.any():
        warnings.warn(f"region {region} does not intersect the grid", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.sum(w * field.values))


def _meta_lines(meta: dict | None) -> list[str]:
    return [f"# {k}={meta[k]}" for k in sorted(meta)] if meta else []


def write_gf1(path, field: GridField, meta: dict | None = None) -> None:
    s = field.spec
    lines = [f"GF1 {s.nx} {s.ny} {s.x0!r} {s.y0!r} {s.dx!r} {s.dy!r}"]
    lines += _meta_lines(meta)
    lines += [" ".join(f"{v:.17g}" for v in row) for row in field.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_gf1(path) -> GridField:
    header, *rest = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    tok = header.split()
    if len(tok) != 7 or tok[0] != "GF1":
        raise DomainError(f"{path}: not a GF1 file")
    nx, ny = int(tok[1]), int(tok[2])
    x0, y0, dx, dy = map(float, tok[3:])
    meta = {}
    data = []
    for ln in rest:
        if ln.startswith("#"):
            k, _, v = ln[1:].strip().partition("=")
            meta[k] = v
        else:
            data.extend(ln.split())
    if len(data) != nx * ny:
        raise DomainError(f"{path}: expected {nx * ny} values, found {len(data)}")
    return GridField(GridSpec(x0, y0, dx, dy, nx, ny), np.array(data, dtype=float), meta=meta)
