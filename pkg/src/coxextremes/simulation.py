"""Exact simulation of Cox extremal fields and mixed moving maxima fields.

Storms arrive in decreasing order of severity ``u_i = nu / (mu_Y Gamma_i)``
with centres drawn from ``psi`` on the sampling box around ``D``.  The loop
stops at the first ``n`` for which the next storm, even at its bound ``C``,
cannot exceed the running minimum of the field on the grid nodes of ``D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SimulationRunaway
from .gaussian_field import GaussianFieldSampler, IntensityMeanPolicy
from .grid import GridField, GridSpec, Rect
from .points import CellSampler, PointPattern
from .storm import components

DEFAULT_MAX_EVENTS = 10**6
TIE_RTOL = 1e-12
_BATCH = 256


@dataclass(frozen=True)
class StormEvent:
    index: int
    centre: tuple[float, float]
    level: float
    shape_id: int
    contributes: bool


@dataclass
class SimulationResult:
    """Simulated field on the nodes of ``D`` together with the storms that built it.

    Arrays ``centres``, ``levels`` and ``shape_ids`` hold the ``T`` storms of the
    stopping rule followed by ``n_extra`` storms applied beyond it (zero unless
    requested).  ``contributes`` flags storms attaining the field somewhere on ``D``.
    """

    field: GridField
    centres: np.ndarray
    levels: np.ndarray
    shape_ids: np.ndarray
    contributes: np.ndarray
    T: int
    nu: float
    psi: GridField
    D: Rect
    region: Rect
    mu_Y: float
    next_level: float
    shape: object
    n_extra: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def events(self) -> list[StormEvent]:
        return [
            StormEvent(i + 1, (float(c[0]), float(c[1])), float(u), int(k), bool(f))
            for i, (c, u, k, f) in enumerate(zip(self.centres, self.levels, self.shape_ids, self.contributes))
        ]

    def storm_values(self, i: int, spec: GridSpec | None = None):
        """Values of storm ``i`` (0-based) on the nodes of ``spec`` within its support.

        Returns ``(rows, cols, values)`` for the covering index window.
        """
        spec = spec or self.field.spec
        comp = components(self.shape)[int(self.shape_ids[i])][0]
        return _patch(spec, comp, self.centres[i, 0], self.centres[i, 1], self.levels[i])


def _patch(spec: GridSpec, comp, sx: float, sy: float, level: float):
    R = comp.R
    i0 = max(math.ceil((sx - R - spec.x0) / spec.dx), 0)
    i1 = min(math.floor((sx + R - spec.x0) / spec.dx), spec.nx - 1)
    j0 = max(math.ceil((sy - R - spec.y0) / spec.dy), 0)
    j1 = min(math.floor((sy + R - spec.y0) / spec.dy), spec.ny - 1)
    if i1 < i0 or j1 < j0:
        return slice(0, 0), slice(0, 0), np.empty((0, 0))
    ddx = spec.x0 + spec.dx * np.arange(i0, i1 + 1) - sx
    ddy = spec.y0 + spec.dy * np.arange(j0, j1 + 1) - sy
    r = np.sqrt(ddy[:, None] ** 2 + ddx[None, :] ** 2)
    return slice(j0, j1 + 1), slice(i0, i1 + 1), level * comp.radial(r)


class _StormStream:
    """Batched source of (Gamma increments, centres, shape ids)."""

    def __init__(self, rng, sampler: CellSampler, cum_weights: np.ndarray):
        self.rng = rng
        self.sampler = sampler
        self.cum = cum_weights
        self._fill()

    def _fill(self):
        rng = self.rng
        self.xi = rng.standard_exponential(_BATCH)
        self.locs = self.sampler.locations(rng, _BATCH)
        if self.cum.size > 1:
            ids = np.searchsorted(self.cum, rng.random(_BATCH), side="right")
            self.ids = np.minimum(ids, self.cum.size - 1)
        else:
            self.ids = np.zeros(_BATCH, dtype=int)
        self.k = 0

    def next(self):
        if self.k == _BATCH:
            self._fill()
        k = self.k
        self.k += 1
        return self.xi[k], self.locs[k], int(self.ids[k])


def simulate_extremal(psi: GridField, shape, mu_Y: float, D: Rect, seed=None,
                      max_events: int = DEFAULT_MAX_EVENTS, extra_events: int = 0) -> SimulationResult:
    """Draw the Cox extremal field given ``psi`` on the grid nodes of ``D``.

    ``psi`` must be strictly positive and its cells must cover the box
    ``D (+) [-R, R]^2``.  Storm centres are drawn from that box; centres
    farther than ``R`` from ``D`` never touch the field, so the law on ``D``
    is unchanged.
    """
    rng = np.random.default_rng(seed)
    if not mu_Y > 0:
        raise DomainError("mu_Y must be positive")
    R, C = shape.R, shape.C
    region = D.expand(R)
    box = psi.spec.cell_box
    tol = 1e-9 * max(psi.spec.dx, psi.spec.dy)
    if (region.xmin < box.xmin - tol or region.xmax > box.xmax + tol
            or region.ymin < box.ymin - tol or region.ymax > box.ymax + tol):
        raise DomainError(f"psi grid {box} does not cover the sampling region {region}")
    w = psi.spec.cell_weights(region)
    if np.any(psi.values[w > 0] <= 0):
        raise DomainError("psi must be strictly positive")
    d_spec, _ = psi.spec.subgrid(D)

    sampler = CellSampler(psi, region)
    nu = sampler.total
    scale = nu / mu_Y
    comps = [c for c, _ in components(shape)]
    cum = np.cumsum([wt for _, wt in components(shape)])
    stream = _StormStream(rng, sampler, cum)

    Y = np.zeros(d_spec.shape)
    flat = Y.ravel()
    ymin, amin = 0.0, 0
    centres, levels, ids = [], [], []
    gamma = 0.0
    n = 0
    T = None
    next_level = math.nan
    while True:
        xi, loc, cid = stream.next()
        gamma += xi
        level = scale / gamma
        if T is None:
            if level * C <= ymin:
                T = n
                next_level = level
                if extra_events == 0:
                    break
            elif n >= max_events:
                raise SimulationRunaway(
                    f"no stop after {max_events} storms: field minimum {ymin:.6g} vs threshold {level * C:.6g}")
        elif n >= T + extra_events:
            break
        rows, cols, vals = _patch(d_spec, comps[cid], loc[0], loc[1], level)
        if vals.size:
            sub = Y[rows, cols]
            np.maximum(sub, vals, out=sub)
            if flat[amin] > ymin:
                amin = int(flat.argmin())
                ymin = flat[amin]
        centres.append(loc)
        levels.append(level)
        ids.append(cid)
        n += 1

    result = SimulationResult(
        field=GridField(d_spec, Y),
        centres=np.array(centres).reshape(-1, 2),
        levels=np.array(levels),
        shape_ids=np.array(ids, dtype=int),
        contributes=np.zeros(n, dtype=bool),
        T=T,
        nu=nu,
        psi=psi,
        D=D,
        region=region,
        mu_Y=mu_Y,
        next_level=next_level,
        shape=shape,
        n_extra=n - T,
    )
    result.contributes = _contributing_mask(result, D)
    return result


def _contributing_mask(result: SimulationResult, K: Rect) -> np.ndarray:
    return contributing_mask(result.field, result.centres, result.levels, result.shape_ids, result.shape, K)


def contributing_mask(y: GridField, centres, levels, shape_ids, shape, K: Rect) -> np.ndarray:
    """Flags of the storms ``(centre, level, shape id)`` that attain ``y`` at a grid node of ``K``."""
    k_spec, (rows, cols) = y.spec.subgrid(K)
    yk = y.values[rows, cols]
    kmin = yk.min()
    comps = [c for c, _ in components(shape)]
    mask = np.zeros(len(levels), dtype=bool)
    for i, (c, u, cid) in enumerate(zip(centres, levels, shape_ids)):
        comp = comps[int(cid)]
        # a storm below the minimum of y on K cannot attain it anywhere
        if u * comp.C < kmin * (1 - TIE_RTOL):
            continue
        if K.distance(c[0], c[1]) > comp.R:
            continue
        rr, cc, vals = _patch(k_spec, comp, c[0], c[1], u)
        if vals.size:
            target = yk[rr, cc]
            mask[i] = bool(np.any((vals > 0) & (vals >= target * (1 - TIE_RTOL))))
    return mask


def extract_contributing(result: SimulationResult, K: Rect) -> PointPattern:
    """Centres of the storms that attain the field at some grid node of ``K``.

    The returned window is the bounding box of ``K (+) B_R``.
    """
    mask = _contributing_mask(result, K)
    window = K.expand(result.shape.R)
    return PointPattern(result.centres[mask], window, {"n_storms": int(len(mask))})


def simulate_storms(psi: GridField, shape, mu_Y: float, region: Rect, threshold: float, seed=None,
                    max_events: int = DEFAULT_MAX_EVENTS):
    """All storms with bound ``u * C`` at least ``threshold``, centres drawn from ``psi`` on ``region``.

    Levels follow the same normalization as :func:`simulate_extremal` with
    ``nu`` taken over ``region``.  Returns ``(centres, levels, shape_ids, nu)``.
    """
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    rng = np.random.default_rng(seed)
    sampler = CellSampler(psi, region)
    cum = np.cumsum([wt for _, wt in components(shape)])
    stream = _StormStream(rng, sampler, cum)
    scale = sampler.total / mu_Y
    gamma = 0.0
    centres, levels, ids = [], [], []
    while True:
        xi, loc, cid = stream.next()
        gamma += xi
        level = scale / gamma
        if level * shape.C < threshold:
            break
        if len(levels) >= max_events:
            raise SimulationRunaway(f"more than {max_events} storms above threshold {threshold:.6g}")
        centres.append(loc)
        levels.append(level)
        ids.append(cid)
    return np.array(centres).reshape(-1, 2), np.array(levels), np.array(ids, dtype=int), sampler.total


def psi_grid_for(d_spec: GridSpec, R: float) -> GridSpec:
    """Grid on the lattice of ``d_spec`` whose cells cover ``D (+) [-R, R]^2``."""
    mx, my = d_spec.margin_for(R)
    return d_spec.expanded(mx, my)


def simulate_mmm(shape, mu_Z: float, d_spec: GridSpec, seed=None, **kw) -> SimulationResult:
    """Mixed moving maxima field ``Z``: the Cox extremal field with ``psi = 1``."""
    psi = GridField.constant(psi_grid_for(d_spec, shape.R), 1.0)
    return simulate_extremal(psi, shape, mu_Z, d_spec.node_box, seed, **kw)


@dataclass
class MDAConfig:
    """Inputs of the block-maxima experiment."""

    model: object
    shape: object
    d_spec: GridSpec
    probes: list
    policy: IntensityMeanPolicy = field(default_factory=IntensityMeanPolicy.unit)
    n_reps: int = 200
    method: str = "auto"


@dataclass
class MDAResult:
    field: GridField
    samples: np.ndarray
    probes: list
    n_blocks: int


def block_maxima_mda(n_blocks: int, config: MDAConfig, seed=None, with_field: bool = True) -> MDAResult:
    """Rescaled maxima ``n^-1 max_i Y_i`` over independent Cox extremal fields.

    Each block uses a fresh intensity realization.  ``field`` is one realization
    of the rescaled maximum on the whole grid (``None`` unless ``with_field``);
    ``samples[r, p]`` are independent replicates of its marginal at probe
    ``p``.  Probes are simulated as one-node domains, which is exact for
    marginals.
    """
    rng = np.random.default_rng(seed)
    cfg = config
    c_psi = cfg.policy.c_psi(cfg.model)
    mu_y = c_psi * cfg.shape.integral
    psi_spec = psi_grid_for(cfg.d_spec, cfg.shape.R)
    mean = cfg.policy.gaussian_mean(cfg.model)

    if with_field:
        sampler = GaussianFieldSampler(cfg.model, psi_spec, cfg.method)
        M = np.zeros(cfg.d_spec.shape)
        for w in np.exp(mean + sampler.sample(rng, size=n_blocks)):
            res = simulate_extremal(GridField(psi_spec, w), cfg.shape, mu_y, cfg.d_spec.node_box, rng)
            np.maximum(M, res.field.values, out=M)
        fld = GridField(cfg.d_spec, M / n_blocks, meta={"c_psi": c_psi, "n_blocks": n_blocks})
    else:
        fld = None

    # a probe's marginal only depends on psi within R of it, so each probe
    # gets its own small grid on the same spacing
    probes = [tuple(map(float, p)) for p in cfg.probes]
    local = []
    for px, py in probes:
        spec = psi_grid_for(GridSpec(px, py, cfg.d_spec.dx, cfg.d_spec.dy, 1, 1), cfg.shape.R)
        local.append((spec, GaussianFieldSampler(cfg.model, spec, cfg.method), Rect(px, px, py, py)))
    samples = np.zeros((cfg.n_reps, len(probes)))
    for p, (spec, smp, site) in enumerate(local):
        for r in range(cfg.n_reps):
            best = 0.0
            for w in np.exp(mean + smp.sample(rng, size=n_blocks)):
                res = simulate_extremal(GridField(spec, w), cfg.shape, mu_y, site, rng)
                best = max(best, res.field.values[0, 0])
            samples[r, p] = best / n_blocks
    return MDAResult(fld, samples, probes, n_blocks)
