"""Planar point patterns, Poisson sampling from gridded intensities, thinning
and the thinning-plus-superposition repair of a distorted Cox sample."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .grid import GridField, Rect


@dataclass
class PointPattern:
    points: np.ndarray
    window: Rect
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(self.window.contains(self.points, tol=1e-9)):
            raise DomainError("pattern has points outside its window")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n(self) -> int:
        return len(self.points)

    def restrict(self, window: Rect) -> "PointPattern":
        return PointPattern(self.points[window.contains(self.points)], window, dict(self.meta))

    def union(self, other: "PointPattern") -> "PointPattern":
        return PointPattern(np.vstack([self.points, other.points]), self.window, dict(self.meta))

    def count_in(self, region: Rect) -> int:
        return int(region.contains(self.points).sum())


def write_pp1(path, pattern: PointPattern, meta: dict | None = None) -> None:
    w = pattern.window
    lines = [f"PP1 {pattern.n} {w.xmin!r} {w.xmax!r} {w.ymin!r} {w.ymax!r}"]
    if meta:
        lines += [f"# {k}={meta[k]}" for k in sorted(meta)]
    lines += [f"{x:.17g} {y:.17g}" for x, y in pattern.points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pp1(path) -> PointPattern:
    header, *rest = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    tok = header.split()
    if len(tok) != 6 or tok[0] != "PP1":
        raise DomainError(f"{path}: not a PP1 file")
    n = int(tok[1])
    window = Rect(*map(float, tok[2:]))
    meta, rows = {}, []
    for ln in rest:
        if ln.startswith("#"):
            k, _, v = ln[1:].strip().partition("=")
            meta[k] = v
        else:
            rows.append([float(v) for v in ln.split()])
    if len(rows) != n:
        raise DomainError(f"{path}: header announces {n} points, found {len(rows)}")
    return PointPattern(np.array(rows).reshape(-1, 2), window, meta)


class CellSampler:
    """Draws locations from the piecewise-constant density of a gridded intensity on a window.

    Each node cell is clipped to the window; its mass is ``value * clipped area``
    and locations are uniform within the clipped cell.
    """

    def __init__(self, intensity: GridField, window: Rect):
        s = intensity.spec
        w = s.cell_weights(window)
        vals = intensity.values
        if np.any(vals[w > 0] < 0):
            raise DomainError("intensity has negative values on the window")
        mass = (w * vals).ravel()
        self.window = window
        self.total = float(mass.sum())
        self._cdf = np.cumsum(mass)
        xs, ys = s.xs, s.ys
        self._xl = np.maximum(xs - s.dx / 2, window.xmin)
        self._xw = np.minimum(xs + s.dx / 2, window.xmax) - self._xl
        self._yl = np.maximum(ys - s.dy / 2, window.ymin)
        self._yw = np.minimum(ys + s.dy / 2, window.ymax) - self._yl
        self._nx = s.nx

    def locations(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty((0, 2))
        cells = np.searchsorted(self._cdf, rng.random(n) * self.total, side="right")
        cells = np.minimum(cells, self._cdf.size - 1)
        j, i = np.divmod(cells, self._nx)
        u = rng.random((n, 2))
        x = self._xl[i] + u[:, 0] * self._xw[i]
        y = self._yl[j] + u[:, 1] * self._yw[j]
        return np.column_stack([x, y])


def sample_poisson(intensity: GridField, window: Rect, seed=None) -> PointPattern:
    """Poisson process with the (cellwise constant) intensity restricted to ``window``."""
    rng = np.random.default_rng(seed)
    sampler = CellSampler(intensity, window)
    n = int(rng.poisson(sampler.total)) if sampler.total > 0 else 0
    return PointPattern(sampler.locations(rng, n), window)


def _retention(pattern: PointPattern, p) -> np.ndarray:
    if isinstance(p, GridField):
        prob = p.interpolate(pattern.points)
    else:
        prob = np.broadcast_to(np.asarray(p, dtype=float), (pattern.n,))
    return np.clip(prob, 0.0, 1.0)


def thin(pattern: PointPattern, p, seed=None) -> PointPattern:
    """Keep each point independently with probability ``p`` (grid field, array or scalar)."""
    rng = np.random.default_rng(seed)
    keep = rng.random(pattern.n) < _retention(pattern, p)
    return PointPattern(pattern.points[keep], pattern.window, dict(pattern.meta))


def repair_to_base(pattern_f: PointPattern, f: GridField, psi_hat: GridField, window: Rect,
                   seed=None) -> PointPattern:
    """Turn a sample of ``CP(f psi)`` into a sample of ``CP(psi)`` on ``window``.

    Points are thinned with ``min(1, 1/f)`` and superposed with a Poisson
    sample of intensity ``(1 - f)_+ psi_hat``; the result is restricted to
    ``window``.
    """
    rng = np.random.default_rng(seed)
    if not f.spec == psi_hat.spec:
        raise DomainError("f and psi_hat must share one grid")
    fv = f.interpolate(pattern_f.points)
    if np.any(fv <= 0):
        raise DomainError("f vanishes at a point of the pattern")
    keep = rng.random(pattern_f.n) < np.minimum(1.0, 1.0 / fv)
    kept = pattern_f.points[keep]
    kept = kept[window.contains(kept)]
    extra_intensity = GridField(f.spec, np.clip(1.0 - f.values, 0.0, None) * psi_hat.values)
    extra = sample_poisson(extra_intensity, window, rng)
    return PointPattern(np.vstack([kept, extra.points]), window,
                        {"kept": int(len(kept)), "added": extra.n, "input": pattern_f.n})
