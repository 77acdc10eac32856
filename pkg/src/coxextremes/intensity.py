"""Non-parametric recovery of the storm-centre intensity from one observed field.

The contributing storm centres of an observation ``y`` on ``K`` form a
Poisson process with intensity ``b * psi``.  ``b`` is known once the storm
profile is known, so a kernel estimate of ``b * psi`` divided by ``b``
estimates ``psi`` itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .grid import GridField, GridSpec, Rect
from .points import PointPattern
from .storm import DiskStorm, GaussianStorm, components

EPANECHNIKOV_2D = 2.0 / math.pi
B_FLOOR = 1e-8
STABILITY_RATIO = 1e-2


class UnderResolvedWarning(RuntimeWarning):
    """Kernel bandwidth is below two grid spacings."""


def default_stability_radius(shape, ratio: float = STABILITY_RATIO) -> float:
    """Largest radius at which every component still exceeds ``ratio`` times its peak."""
    radii = []
    for comp, _ in components(shape):
        if isinstance(comp, GaussianStorm):
            radii.append(min(comp.R, comp.spread * math.sqrt(-2.0 * math.log(ratio))))
        elif isinstance(comp, DiskStorm):
            radii.append(comp.R)
        else:
            radii.append(comp.R)
    return min(radii)


@dataclass(frozen=True)
class KernelConfig:
    """Kernel estimator settings.

    ``restriction`` selects the output domain of the corrected estimator:
    ``"radius"`` keeps nodes within ``stability_radius`` of ``K``, ``"K"``
    keeps ``K`` only.
    """

    bandwidth: float | None = None
    edge: str = "ripley"
    stability_radius: float | None = None
    restriction: str = "radius"
    b_floor: float = B_FLOOR
    bandwidth_factor: float = 0.7

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ParameterError("bandwidth must be positive")
        if self.edge not in ("ripley", "none"):
            raise ParameterError(f"unknown edge correction {self.edge!r}")
        if self.restriction not in ("radius", "K"):
            raise ParameterError(f"unknown restriction {self.restriction!r}")
        if self.stability_radius is not None and not self.stability_radius > 0:
            raise ParameterError("stability radius must be positive")


def default_bandwidth(window: Rect, count: int, factor: float = 0.7) -> float:
    """``factor * sqrt(|window| / count)``; the mean inter-point spacing scaled."""
    return factor * math.sqrt(window.area / max(count, 1))


@dataclass
class CorrectionField:
    b: GridField
    mu_Y: float
    y: GridField
    K: Rect


def _offsets(spec: GridSpec, tx: float, ty: float, reach: float | None):
    # index window of nodes within ``reach`` (box) of (tx, ty); full grid if None
    if reach is None:
        i0, i1, j0, j1 = 0, spec.nx - 1, 0, spec.ny - 1
    else:
        i0 = max(math.ceil((tx - reach - spec.x0) / spec.dx), 0)
        i1 = min(math.floor((tx + reach - spec.x0) / spec.dx), spec.nx - 1)
        j0 = max(math.ceil((ty - reach - spec.y0) / spec.dy), 0)
        j1 = min(math.floor((ty + reach - spec.y0) / spec.dy), spec.ny - 1)
    if i1 < i0 or j1 < j0:
        return None
    ddx = spec.x0 + spec.dx * np.arange(i0, i1 + 1) - tx
    ddy = spec.y0 + spec.dy * np.arange(j0, j1 + 1) - ty
    return slice(j0, j1 + 1), slice(i0, i1 + 1), ddx, ddy


def correcting_factor(y: GridField, shape, mu_Y: float, K: Rect | None = None,
                      spec: GridSpec | None = None, full_scan: bool = False) -> CorrectionField:
    """``b(s) = mu_Y^-1 E_X max_{t in K} X(t - s) / y(t)`` on the nodes of ``spec``.

    The maximum runs over grid nodes of ``y`` inside ``K`` (all of ``y``'s
    grid by default).  ``spec`` defaults to ``y``'s lattice extended to cover
    ``K (+) B_R``.  ``full_scan`` evaluates every (t, s) pair instead of the
    support window of each ``t``; both give identical values.
    """
    if K is None:
        K = y.spec.node_box
    k_spec, (rows, cols) = y.spec.subgrid(K)
    yk = y.values[rows, cols]
    if np.any(yk <= 0):
        raise DomainError("observation must be strictly positive on K")
    if spec is None:
        mx, my = k_spec.margin_for(shape.R)
        spec = k_spec.expanded(mx, my)
    tx, ty = np.meshgrid(k_spec.xs, k_spec.ys)
    inv = 1.0 / yk
    b = np.zeros(spec.shape)
    for comp, weight in components(shape):
        best = np.zeros(spec.shape)
        reach = None if full_scan else comp.R
        for x, yy, q in zip(tx.ravel(), ty.ravel(), inv.ravel()):
            win = _offsets(spec, x, yy, reach)
            if win is None:
                continue
            rr, cc, ddx, ddy = win
            vals = comp.radial(np.sqrt(ddy[:, None] ** 2 + ddx[None, :] ** 2)) * q
            sub = best[rr, cc]
            np.maximum(sub, vals, out=sub)
        b += weight * best
    b /= mu_Y
    return CorrectionField(GridField(spec, b, meta={"mu_Y": mu_Y}), mu_Y, y, K)


def epanechnikov(r2) -> np.ndarray:
    """2-D Epanechnikov kernel as a function of the squared norm."""
    r2 = np.asarray(r2, dtype=float)
    return np.where(r2 < 1.0, EPANECHNIKOV_2D * (1.0 - r2), 0.0)


def kernel_intensity(pattern: PointPattern, D: Rect, cfg: KernelConfig, spec: GridSpec) -> GridField:
    """Edge-corrected Epanechnikov estimate of the pattern's intensity on ``D``.

    Values are computed on the nodes of ``spec``.  Edge weights ``c_D(t)`` use
    the same clipped-cell quadrature as :func:`integrate`, so the estimate
    integrates over ``D`` to exactly the number of points used.
    """
    pts = pattern.points[D.contains(pattern.points)]
    h = cfg.bandwidth if cfg.bandwidth is not None else default_bandwidth(D, len(pts), cfg.bandwidth_factor)
    meta = {"bandwidth": h, "points": int(len(pts)), "dropped": 0}
    if h < 2 * max(spec.dx, spec.dy):
        warnings.warn(f"bandwidth {h:.4g} under-resolved on spacing {max(spec.dx, spec.dy):.4g}",
                      UnderResolvedWarning, stacklevel=2)
        meta["under_resolved"] = True
    w = spec.cell_weights(D)
    out = np.zeros(spec.shape)
    dropped = 0
    for x, y in pts:
        win = _offsets(spec, x, y, h)
        if win is None:
            dropped += 1
            continue
        rr, cc, ddx, ddy = win
        k = epanechnikov((ddy[:, None] ** 2 + ddx[None, :] ** 2) / h**2) / h**2
        if cfg.edge == "ripley":
            c = float((k * w[rr, cc]).sum())
            if c <= 0:
                dropped += 1
                continue
            k = k / c
        out[rr, cc] += k
    meta["dropped"] = dropped
    meta["points"] -= dropped
    return GridField(spec, out, meta=meta)


def _restriction_mask(spec: GridSpec, K: Rect, cfg: KernelConfig, shape) -> np.ndarray:
    x, y = np.meshgrid(spec.xs, spec.ys)
    if cfg.restriction == "K":
        return K.contains(np.column_stack([x.ravel(), y.ravel()]), tol=1e-9).reshape(spec.shape)
    radius = cfg.stability_radius if cfg.stability_radius is not None else default_stability_radius(shape)
    return K.distance(x, y) <= radius + 1e-9


def corrected_intensity(psi_y_hat: GridField, corr: CorrectionField, cfg: KernelConfig, shape) -> GridField:
    """``psi_hat = psi_y_hat / b`` on the restricted domain, masked where ``b`` is tiny.

    Masked nodes carry value 0 and ``mask = False``; ``meta`` reports the
    domain size and the number of nodes masked by the floor.
    """
    if psi_y_hat.spec != corr.b.spec:
        raise DomainError("kernel estimate and correcting factor must share one grid")
    domain = _restriction_mask(psi_y_hat.spec, corr.K, cfg, shape)
    b = corr.b.values
    ok = domain & (b >= cfg.b_floor)
    vals = np.zeros_like(b)
    vals[ok] = psi_y_hat.values[ok] / b[ok]
    meta = {"n_domain": int(domain.sum()), "n_masked": int((domain & ~ok).sum()), "b_floor": cfg.b_floor}
    return GridField(psi_y_hat.spec, vals, mask=ok, meta=meta)


@dataclass
class AsymptoticEstimate:
    n: int
    bandwidth: float
    field: GridField
    points: int = 0
    meta: dict = field(default_factory=dict)


def asymptotic_kernel_estimator(patterns: list, spec: GridSpec, ns=None, bandwidth=None) -> list[AsymptoticEstimate]:
    """Pooled kernel density estimates from the first ``n`` patterns, for each ``n`` in ``ns``.

    Each estimate integrates to one (no edge correction), so it targets the
    normalized intensity ``psi_K^y / c`` with ``c = int psi_K^y``.
    ``bandwidth`` maps ``n`` to ``h_n`` (default ``n^(-1/6)``).
    """
    if not patterns:
        raise DomainError("no patterns to pool")
    ns = [len(patterns)] if ns is None else list(ns)
    bandwidth = bandwidth or (lambda n: n ** (-1.0 / 6.0))
    out = []
    for n in ns:
        if not 1 <= n <= len(patterns):
            raise ParameterError(f"n={n} outside 1..{len(patterns)}")
        pool = np.vstack([p.points for p in patterns[:n]])
        if len(pool) == 0:
            raise DomainError(f"pooled pattern for n={n} is empty")
        h = float(bandwidth(n))
        window = patterns[0].window
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderResolvedWarning)
            est = kernel_intensity(PointPattern(pool, window), window, KernelConfig(bandwidth=h, edge="none"), spec)
        out.append(AsymptoticEstimate(n, h, GridField(spec, est.values / len(pool)), int(len(pool))))
    return out
