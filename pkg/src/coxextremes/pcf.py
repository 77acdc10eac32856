"""Pair correlation estimation and minimum contrast fitting for log-Gaussian Cox processes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .covariance import CovarianceModel, Family, matern, powered_exponential
from .errors import DomainError, ParameterError
from .grid import Rect
from .points import PointPattern

ANGULAR_SAMPLES = 4096
_PAIR_CHUNK = 512
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class PCFEstimate:
    radii: np.ndarray
    values: np.ndarray
    bandwidth: float
    window: Rect
    n_points: int
    n_pairs: int = 0
    n_dropped: int = 0

    def to_csv(self) -> str:
        lines = ["r,ghat"] + [f"{r:.17g},{g:.17g}" for r, g in zip(self.radii, self.values)]
        return "\n".join(lines) + "\n"


def stoyan_bandwidth(n: int, window: Rect, c: float = 0.15) -> float:
    """``c / sqrt(lambda_hat)``, the usual rule of thumb for pair-correlation kernels."""
    return c / math.sqrt(max(n, 1) / window.area)


def epanechnikov_1d(x, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < h, 0.75 / h * (1.0 - (x / h) ** 2), 0.0)


def circle_weights(centres: np.ndarray, radii: np.ndarray, K: Rect,
                   samples: int = ANGULAR_SAMPLES) -> np.ndarray:
    """``2 pi / gamma`` where ``gamma`` is the arc of the circle lying in ``K``.

    Arcs are measured on ``samples`` equally spaced angles (offset by half a
    step).  Circles entirely inside ``K`` get exactly 1; circles without any
    sampled angle inside get ``inf``.
    """
    centres = np.asarray(centres, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float)
    out = np.ones(len(radii))
    edge = np.minimum.reduce([centres[:, 0] - K.xmin, K.xmax - centres[:, 0],
                              centres[:, 1] - K.ymin, K.ymax - centres[:, 1]])
    todo = np.flatnonzero(radii > edge)
    theta = 2.0 * np.pi * (np.arange(samples) + 0.5) / samples
    ct, st = np.cos(theta), np.sin(theta)
    for lo in range(0, len(todo), _PAIR_CHUNK):
        idx = todo[lo:lo + _PAIR_CHUNK]
        x = centres[idx, 0, None] + radii[idx, None] * ct
        y = centres[idx, 1, None] + radii[idx, None] * st
        inside = ((x >= K.xmin) & (x <= K.xmax) & (y >= K.ymin) & (y <= K.ymax)).sum(axis=1)
        with np.errstate(divide="ignore"):
            out[idx] = np.where(inside > 0, samples / np.maximum(inside, 1), np.inf)
    return out


def estimate_pcf(pattern: PointPattern, K: Rect, radii, h_g: float | None = None) -> PCFEstimate:
    """Kernel estimate of the pair correlation function on ``K`` with circle edge weights.

    Normalization uses ``n^2`` (not ``n(n-1)``), and only points inside ``K``
    take part.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0):
        raise DomainError("radii must be a non-empty vector of positive values")
    pts = pattern.points[K.contains(pattern.points)]
    n = len(pts)
    if h_g is None:
        h_g = stoyan_bandwidth(n, K)
    if n < 2:
        return PCFEstimate(radii, np.zeros_like(radii), h_g, K, n)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(radii.max() + h_g, output_type="ndarray")
    if len(pairs) == 0:
        return PCFEstimate(radii, np.zeros_like(radii), h_g, K, n)
    # ordered pairs (i, j) and (j, i)
    i = np.concatenate([pairs[:, 0], pairs[:, 1]])
    j = np.concatenate([pairs[:, 1], pairs[:, 0]])
    d = np.hypot(*(pts[i] - pts[j]).T)
    b = circle_weights(pts[i], d, K)
    keep = np.isfinite(b)
    d, b = d[keep], b[keep]
    g = np.zeros_like(radii)
    order = np.argsort(d)
    d, b = d[order], b[order]
    for k, r in enumerate(radii):
        lo, hi = np.searchsorted(d, [r - h_g, r + h_g])
        g[k] = (epanechnikov_1d(r - d[lo:hi], h_g) * b[lo:hi]).sum()
    g *= K.area / (2.0 * np.pi * n**2 * radii)
    return PCFEstimate(radii, g, h_g, K, n, int(len(d) // 2), int((~keep).sum()))


def lgcp_pcf(model: CovarianceModel, r) -> np.ndarray | float:
    """Pair correlation ``exp(sigma^2 C(r))`` of the log-Gaussian Cox process driven by ``model``."""
    out = np.exp(model(np.asarray(r, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CorrelationFamily:
    """One-parameter family ``beta -> C_beta`` with unit variance."""

    family: Family
    nu: float | None = None
    alpha: float | None = None

    def model(self, beta: float) -> CovarianceModel:
        if self.family == Family.WHITTLE_MATERN:
            return matern(self.nu, 1.0, beta)
        return powered_exponential(self.alpha, 1.0, beta)

    def __call__(self, beta: float, r) -> np.ndarray:
        return self.model(beta).correlation(np.asarray(r, dtype=float))


def matern_family(nu: float) -> CorrelationFamily:
    return CorrelationFamily(Family.WHITTLE_MATERN, nu=nu)


@dataclass(frozen=True)
class ContrastConfig:
    epsilon: float = 0.0
    r0: float = 1.0
    alpha: float = 1.0
    beta_lo: float = 0.05
    beta_hi: float = 10.0
    n_scan: int = 61
    tol: float = 1e-10

    def __post_init__(self):
        if not (0 <= self.epsilon < self.r0):
            raise ParameterError("need 0 <= epsilon < r0")
        if not self.alpha > 0:
            raise ParameterError("alpha must be positive")
        if not (0 < self.beta_lo < self.beta_hi):
            raise ParameterError("need 0 < beta_lo < beta_hi")
        if self.n_scan < 3:
            raise ParameterError("n_scan must be at least 3")


def default_contrast_config(pcf: PCFEstimate, **kw) -> ContrastConfig:
    """``epsilon = h_g`` and ``r0`` a quarter of the shorter side of the window."""
    w = pcf.window
    return ContrastConfig(epsilon=pcf.bandwidth, r0=0.25 * min(w.width, w.height), **kw)


@dataclass
class ContrastResult:
    sigma2_hat: float
    beta_hat: float
    contrast: float
    n_used_pairs: int
    ok: bool = True
    reason: str = ""
    meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"sigma2_hat": self.sigma2_hat, "beta_hat": self.beta_hat, "contrast": self.contrast,
                "n_used_pairs": self.n_used_pairs, "ok": self.ok, "reason": self.reason}


def _trapezoid(y, x) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _failure(reason: str, n_pairs: int, beta=math.nan) -> ContrastResult:
    return ContrastResult(math.nan, beta, math.nan, n_pairs, ok=False, reason=reason)


def minimum_contrast(pcf: PCFEstimate, family, cfg: ContrastConfig | None = None) -> ContrastResult:
    """Fit ``(sigma^2, beta)`` by matching ``sigma^2 C_beta`` to ``log g_hat`` on ``[epsilon, r0]``.

    ``family(beta, r)`` returns the unit-variance correlation.  ``beta`` maximizes
    ``A^2 / B`` (coarse log-spaced scan, then golden-section refinement in the
    bracket around the best scan point; ties go to the smaller value) and
    ``sigma^2 = (A / B)^(1 / alpha)``.  Failures are returned, not raised.
    """
    cfg = cfg or default_contrast_config(pcf)
    r = pcf.radii
    sel = (r >= cfg.epsilon - 1e-12) & (r <= cfg.r0 + 1e-12)
    r, g = r[sel], pcf.values[sel]
    if r.size < 2:
        return _failure("fewer than two radii in [epsilon, r0]", pcf.n_pairs)
    if np.any(g <= 0):
        return _failure("log g_hat undefined (g_hat <= 0 in range)", pcf.n_pairs)
    t_hat = np.log(g)
    a = cfg.alpha

    def AB(beta):
        c = family(beta, r)
        with np.errstate(invalid="ignore"):
            A = _trapezoid((t_hat * c) ** a, r)
        B = _trapezoid(c ** (2 * a), r)
        return A, B

    def objective(beta):
        A, B = AB(beta)
        if not (np.isfinite(A) and B > 0):
            return -math.inf
        return A * A / B

    grid = np.geomspace(cfg.beta_lo, cfg.beta_hi, cfg.n_scan)
    vals = np.array([objective(b) for b in grid])
    k = int(np.argmax(vals))  # first maximum, i.e. smallest beta among ties
    if not np.isfinite(vals[k]):
        return _failure("contrast undefined on the whole beta range", pcf.n_pairs)
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while hi - lo > cfg.tol * max(1.0, lo):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = objective(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = objective(x2)
    beta = 0.5 * (lo + hi)
    if objective(beta) < vals[k]:
        beta = grid[k]
    A, B = AB(beta)
    if not (A > 0):
        return _failure("A(beta_hat) <= 0", pcf.n_pairs, beta)
    s = A / B
    with np.errstate(invalid="ignore"):
        contrast = _trapezoid((s * family(beta, r) ** a - t_hat ** a) ** 2, r)
    at_edge = k == 0 or k == grid.size - 1
    return ContrastResult(s ** (1.0 / a), float(beta), float(contrast), pcf.n_pairs,
                          meta={"A": A, "B": B, "at_range_edge": bool(at_edge)})


def fit_lgcp(pattern: PointPattern, K: Rect, family, n_radii: int = 32, h_g: float | None = None,
             beta_range: tuple[float, float] = (0.05, 10.0)) -> tuple[PCFEstimate | None, ContrastResult]:
    """Estimate the pair correlation on ``K`` and fit it by minimum contrast with default tuning."""
    n = int(pattern.count_in(K))
    if n < 2:
        return None, _failure("fewer than two points in K", 0)
    h = h_g if h_g is not None else stoyan_bandwidth(n, K)
    r0 = 0.25 * min(K.width, K.height)
    if h >= r0:
        return None, _failure("bandwidth exceeds r0", 0)
    radii = np.linspace(h, r0, n_radii)
    est = estimate_pcf(pattern, K, radii, h)
    cfg = ContrastConfig(epsilon=h, r0=r0, beta_lo=beta_range[0], beta_hi=beta_range[1])
    return est, minimum_contrast(est, family, cfg)
