"""Benchmark study: recover intensities and covariance parameters from simulated
Cox extremal fields and compare against estimators fed with direct samples.

Each replicate draws one intensity realization ``psi``.  The same ``psi``
drives the extremal field (pipeline estimators) and a direct Poisson sample
(benchmark estimators), so the two are coupled replicate by replicate.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from .covariance import matern
from .errors import NumericalError
from .gaussian_field import GaussianFieldSampler, IntensityMeanPolicy
from .grid import GridField, GridSpec, Rect
from .intensity import (KernelConfig, UnderResolvedWarning, correcting_factor, corrected_intensity,
                        kernel_intensity)
from .pcf import fit_lgcp, matern_family
from .points import repair_to_base, sample_poisson
from .simulation import extract_contributing, psi_grid_for, simulate_extremal
from .storm import GaussianStorm

log = logging.getLogger(__name__)

TABLE_COLUMNS = ["cell", "nu", "beta", "sigma2", "metric", "value", "se", "n_ok"]
NONPARAMETRIC_METRICS = ["mrv_psi_hat", "mrv_psi_hat0", "relative_mrv"]
PARAMETRIC_METRICS = ["mse_beta_hat", "mse_beta_hat0", "mse_sigma2_hat", "mse_sigma2_hat0",
                      "median_beta_hat", "median_beta_hat0", "median_sigma2_hat", "median_sigma2_hat0"]


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n_ok: int
    n_failed: int = 0


def mrv(estimates, truths, masks=None) -> Estimate:
    """Mean relative variance of ``c_i * est_i / psi_i`` around one.

    ``c_i`` normalizes each replicate's mean ratio to one, so the measure
    ignores global scale.  Masked nodes are dropped from both sums; replicates
    without a usable node (or with a zero mean ratio) are counted as failed.
    """
    terms, failed = [], 0
    masks = masks if masks is not None else [None] * len(estimates)
    for est, psi, m in zip(estimates, truths, masks):
        est = np.asarray(getattr(est, "values", est), dtype=float)
        psi = np.asarray(getattr(psi, "values", psi), dtype=float)
        ok = psi > 0 if m is None else (np.asarray(m, dtype=bool) & (psi > 0))
        if not ok.any():
            failed += 1
            continue
        ratio = est[ok] / psi[ok]
        mean = ratio.mean()
        if not mean > 0:
            failed += 1
            continue
        terms.append(np.mean((ratio / mean - 1.0) ** 2))
    return _mean_se(terms, failed)


def _mean_se(terms, failed=0) -> Estimate:
    t = np.asarray(terms, dtype=float)
    if t.size == 0:
        return Estimate(math.nan, math.nan, 0, failed)
    se = float(t.std(ddof=1) / math.sqrt(t.size)) if t.size > 1 else math.nan
    return Estimate(float(t.mean()), se, int(t.size), failed)


def mse(estimates, theta: float) -> Estimate:
    """Empirical mean squared error; non-finite estimates are excluded and counted."""
    e = np.asarray(estimates, dtype=float)
    ok = np.isfinite(e)
    return _mean_se((e[ok] - theta) ** 2, int((~ok).sum()))


def _median(estimates) -> Estimate:
    e = np.asarray(estimates, dtype=float)
    ok = np.isfinite(e)
    if not ok.any():
        return Estimate(math.nan, math.nan, 0, int((~ok).sum()))
    x = e[ok]
    # normal-approximation standard error of the median
    se = float(1.2533 * x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
    return Estimate(float(np.median(x)), se, int(x.size), int((~ok).sum()))


def ratio_estimate(num, den) -> Estimate:
    """Ratio of the means of paired per-replicate terms with a delta-method standard error."""
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    n = a.size
    if n == 0 or b.mean() <= 0:
        return Estimate(math.nan, math.nan, 0, int((~ok).sum()))
    ma, mb = a.mean(), b.mean()
    r = ma / mb
    if n > 1:
        cov = np.cov(a, b)
        var = (cov[0, 0] / ma**2 + cov[1, 1] / mb**2 - 2 * cov[0, 1] / (ma * mb)) * r**2 / n
        se = float(math.sqrt(max(var, 0.0)))
    else:
        se = math.nan
    return Estimate(float(r), se, int(n), int((~ok).sum()))


@dataclass(frozen=True)
class StudyCell:
    index: int
    nu: float
    beta: float
    sigma2: float

    @property
    def model(self):
        return matern(self.nu, self.sigma2, self.beta)


@dataclass
class StudyConfig:
    """Study layout.  The defaults are the desk-scale study."""

    nus: tuple = (1.0, math.inf)
    variances: tuple = (1.0,)
    scales: tuple = (1.0, 2.0)
    domain: Rect = Rect(-5.0, 5.0, -5.0, 5.0)
    n_grid: int = 51
    n_reps: int = 200
    seed: int = 20240601
    shape: object = field(default_factory=GaussianStorm.from_epsilon)
    policy: IntensityMeanPolicy = field(default_factory=IntensityMeanPolicy.unit)
    kernel: KernelConfig = field(default_factory=lambda: KernelConfig(restriction="K"))
    benchmark_bandwidth: str = "match"
    parametric: bool = True
    workers: int = 1

    @classmethod
    def full(cls, **kw) -> "StudyConfig":
        base = dict(nus=(0.5, 1.0, 2.0, math.inf), variances=(1.0, 2.0), scales=(1.0, 2.0),
                    n_grid=101, n_reps=1000)
        base.update(kw)
        return cls(**base)

    def cells(self) -> list[StudyCell]:
        combos = product(self.nus, self.scales, self.variances)
        return [StudyCell(i, nu, beta, s2) for i, (nu, beta, s2) in enumerate(combos)]

    @property
    def d_spec(self) -> GridSpec:
        return GridSpec.over(self.domain, self.n_grid, self.n_grid)


@dataclass
class StudyRow:
    cell: StudyCell
    metrics: dict

    @property
    def relative_mrv(self) -> float:
        return self.metrics["relative_mrv"].value


def replicate_seed(master: int, cell_index: int, i: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(cell_index), int(i)])


class _CellContext:
    """Per-cell objects shared across replicates (geometry, factorized sampler)."""

    def __init__(self, cell: StudyCell, cfg: StudyConfig):
        self.cell = cell
        self.cfg = cfg
        shape = cfg.shape
        self.D = cfg.domain
        self.psi_spec = psi_grid_for(cfg.d_spec, shape.R)
        self.sampler = GaussianFieldSampler(cell.model, self.psi_spec)
        self.mean = cfg.policy.gaussian_mean(cell.model)
        self.mu_Y = cfg.policy.c_psi(cell.model) * shape.integral
        self.K = self.D.erode(shape.R)
        self.family = matern_family(cell.nu)


def run_replicate(ctx: _CellContext, i: int) -> dict:
    cfg, shape = ctx.cfg, ctx.cfg.shape
    rng = np.random.default_rng(replicate_seed(cfg.seed, ctx.cell.index, i))
    psi = GridField(ctx.psi_spec, np.exp(ctx.mean + ctx.sampler.sample(rng)))
    res = simulate_extremal(psi, shape, ctx.mu_Y, ctx.D, rng)
    pattern = extract_contributing(res, ctx.K)
    corr = correcting_factor(res.field, shape, ctx.mu_Y, ctx.K)
    spec = corr.b.spec
    window = pattern.window
    psi_b = GridField(spec, psi.window_on(spec))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderResolvedWarning)
        ky = kernel_intensity(pattern, window, cfg.kernel, spec)
        psi_hat = corrected_intensity(ky, corr, cfg.kernel, shape)
        direct = sample_poisson(psi_b, window, rng)
        kcfg0 = replace(cfg.kernel, bandwidth=ky.meta["bandwidth"]) if cfg.benchmark_bandwidth == "match" else cfg.kernel
        psi_hat0 = kernel_intensity(direct, window, kcfg0, spec)
    out = {
        "mrv": mrv([psi_hat], [psi_b], [psi_hat.mask]),
        "mrv0": mrv([psi_hat0], [psi_b], [psi_hat.mask]),
        "n_contributing": pattern.n,
        "n_direct": direct.n,
    }
    if cfg.parametric:
        repaired = repair_to_base(pattern, corr.b, psi_hat, ctx.K, rng)
        _, fit = fit_lgcp(repaired, ctx.K, ctx.family)
        _, fit0 = fit_lgcp(direct.restrict(ctx.K), ctx.K, ctx.family)
        out.update(beta=fit.beta_hat if fit.ok else math.nan, sigma2=fit.sigma2_hat,
                   beta0=fit0.beta_hat if fit0.ok else math.nan, sigma20=fit0.sigma2_hat)
    return out


def _run_chunk(args):
    cell, cfg, indices = args
    ctx = _CellContext(cell, cfg)
    results = []
    for i in indices:
        try:
            results.append(run_replicate(ctx, i))
        except NumericalError as exc:
            log.warning("cell %d replicate %d failed: %s", cell.index, i, exc)
            results.append(None)
    return results


def summarize(cell: StudyCell, reps: list) -> StudyRow:
    ok = [r for r in reps if r is not None]
    lost = len(reps) - len(ok)
    a = [r["mrv"].value if r["mrv"].n_ok else math.nan for r in ok]
    b = [r["mrv0"].value if r["mrv0"].n_ok else math.nan for r in ok]
    m = {
        "mrv_psi_hat": _mean_se([x for x in a if np.isfinite(x)], lost + sum(not np.isfinite(x) for x in a)),
        "mrv_psi_hat0": _mean_se([x for x in b if np.isfinite(x)], lost + sum(not np.isfinite(x) for x in b)),
        "relative_mrv": ratio_estimate(a, b),
    }
    if ok and "beta" in ok[0]:
        get = lambda key: [r[key] for r in ok]  # noqa: E731
        m.update(
            mse_beta_hat=mse(get("beta"), cell.beta), mse_beta_hat0=mse(get("beta0"), cell.beta),
            mse_sigma2_hat=mse(get("sigma2"), cell.sigma2), mse_sigma2_hat0=mse(get("sigma20"), cell.sigma2),
            median_beta_hat=_median(get("beta")), median_beta_hat0=_median(get("beta0")),
            median_sigma2_hat=_median(get("sigma2")), median_sigma2_hat0=_median(get("sigma20")),
        )
    m["mean_contributing"] = _mean_se([r["n_contributing"] for r in ok], lost)
    m["mean_direct"] = _mean_se([r["n_direct"] for r in ok], lost)
    return StudyRow(cell, m)


def run_benchmark_cell(cell: StudyCell, cfg: StudyConfig) -> StudyRow:
    return summarize(cell, _run_chunk((cell, cfg, range(cfg.n_reps))))


def run_study(cfg: StudyConfig) -> list[StudyRow]:
    """All cells of the study.  Results are reduced in (cell, replicate) order."""
    cells = cfg.cells()
    if cfg.workers <= 1:
        return [run_benchmark_cell(c, cfg) for c in cells]
    chunk = max(1, cfg.n_reps // (2 * cfg.workers))
    jobs = [(c, cfg, range(lo, min(lo + chunk, cfg.n_reps))) for c in cells for lo in range(0, cfg.n_reps, chunk)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    rows, k = [], 0
    for c in cells:
        reps = []
        while k < len(jobs) and jobs[k][0] is c:
            reps.extend(parts[k])
            k += 1
        rows.append(summarize(c, reps))
    return rows


def _fmt(x) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def table_csv(rows: list[StudyRow], metrics: list[str], header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row in rows:
        c = row.cell
        for name in metrics:
            if name not in row.metrics:
                continue
            e = row.metrics[name]
            w.writerow([c.index, _fmt(c.nu), _fmt(c.beta), _fmt(c.sigma2), name, _fmt(e.value), _fmt(e.se), e.n_ok])
    return buf.getvalue()


def write_tables(rows: list[StudyRow], out_dir, header_lines=()) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "table_nonparametric.csv", out / "table_parametric.csv"]
    nonpar = NONPARAMETRIC_METRICS + ["mean_contributing", "mean_direct"]
    paths[0].write_text(table_csv(rows, nonpar, header_lines))
    paths[1].write_text(table_csv(rows, PARAMETRIC_METRICS, header_lines))
    return paths
