"""End-to-end acceptance checks; each records one PASS/FAIL line for the summary."""

import math
import time

import numpy as np
import pytest
from scipy import stats

from coxextremes.cli import main
from coxextremes.covariance import matern
from coxextremes.gaussian_field import IntensityMeanPolicy, simulate_log_gaussian
from coxextremes.grid import GridField, GridSpec, Rect, integrate
from coxextremes.intensity import KernelConfig, correcting_factor, kernel_intensity
from coxextremes.pcf import ContrastConfig, PCFEstimate, estimate_pcf, lgcp_pcf, matern_family, minimum_contrast
from coxextremes.points import PointPattern, repair_to_base, sample_poisson
from coxextremes.simulation import (MDAConfig, block_maxima_mda, contributing_mask, psi_grid_for,
                                    simulate_extremal, simulate_mmm, simulate_storms)
from coxextremes.storm import DiskStorm, GaussianStorm
from coxextremes.study import StudyConfig, run_study

RESULTS = {}
SMITH = GaussianStorm.from_epsilon(1e-4)


def record(n, title, ok, detail, t0):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail} ({time.perf_counter() - t0:.1f}s)"
    RESULTS[n] = line
    print(line)
    assert ok, line


def frechet_cdf(scale=1.0):
    return lambda z: np.exp(-scale / np.asarray(z))


def site(x=0.0, y=0.0, nx=1, dx=0.25):
    return GridSpec(x, y, dx, dx, nx, 1)


def test_c01_frechet_margins():
    t0 = time.perf_counter()
    z = np.array([simulate_mmm(SMITH, SMITH.integral, site(), seed=s).field.values[0, 0] for s in range(10_000)])
    ks = stats.kstest(z, frechet_cdf())
    record(1, "Frechet margins of Z", ks.statistic < 0.02 and ks.pvalue > 1e-3,
           f"KS={ks.statistic:.4f} p={ks.pvalue:.3f}", t0)


def test_c02_one_storm_closed_form():
    t0 = time.perf_counter()
    disk = DiskStorm(1.5, 2.0)
    mu_y = 1.3
    d = site()
    psi = GridField.constant(psi_grid_for(d, disk.R), 1.0)
    y = np.array([simulate_extremal(psi, disk, mu_y, d.node_box, seed=s).field.values[0, 0]
                  for s in range(10_000)])
    # psi-mass of the disk of centres able to reach the site
    scale = math.pi * disk.radius**2 * disk.C / mu_y
    ks = stats.kstest(y, frechet_cdf(scale))
    record(2, "single disk storm closed form", ks.pvalue > 1e-3,
           f"scale={scale:.4f} KS={ks.statistic:.4f} p={ks.pvalue:.3f}", t0)


def test_c03_max_stability():
    t0 = time.perf_counter()
    sites = site(-2.0, 0.0, nx=3, dx=2.0)
    seeds = np.random.SeedSequence(303).spawn(2)
    ra, rb = np.random.default_rng(seeds[0]), np.random.default_rng(seeds[1])
    n = 5000
    z = np.array([simulate_mmm(SMITH, SMITH.integral, sites, ra).field.values[0] for _ in range(n)])
    m = np.array([np.max([simulate_mmm(SMITH, SMITH.integral, sites, rb).field.values[0] for _ in range(10)], axis=0)
                  for _ in range(n)]) / 10.0
    ps = [stats.ks_2samp(z[:, k], m[:, k]).pvalue for k in range(3)]
    record(3, "max-stability at 3 sites", min(ps) > 1e-3, "p=" + ", ".join(f"{p:.3f}" for p in ps), t0)


def test_c04_mda_convergence():
    t0 = time.perf_counter()
    cfg = MDAConfig(matern(1.0, 1.0, 2.0), SMITH, GridSpec.over(Rect(-5, 5, -5, 5), 33, 33), [(0.0, 0.0)],
                    IntensityMeanPolicy.unit(), n_reps=2000)
    med = {}
    for n in (1, 5, 50):
        d = [stats.kstest(block_maxima_mda(n, cfg, seed=1000 * n + r, with_field=False).samples[:, 0],
                          frechet_cdf()).statistic for r in range(3)]
        med[n] = float(np.median(d))
    ok = med[1] > med[5] > med[50]
    record(4, "max-domain of attraction", ok, ", ".join(f"n={n}: KS={v:.4f}" for n, v in med.items()), t0)


@pytest.fixture(scope="module")
def fixed_observation():
    """One intensity, one observed field and the exact mean count of its contributing centres."""
    d_spec = GridSpec.over(Rect(-5, 5, -5, 5), 51, 51)
    model = matern(1.0, 1.0, 2.0)
    psi = simulate_log_gaussian(model, psi_grid_for(d_spec, SMITH.R), seed=11)
    mu_y = SMITH.integral
    res = simulate_extremal(psi, SMITH, mu_y, d_spec.node_box, seed=12)
    y = res.field
    K = d_spec.node_box.erode(SMITH.R)
    region = K.expand(SMITH.R)
    # b is continuous while psi is cellwise constant: integrate on a 4x finer lattice
    f = 4
    s = psi.spec
    fine = GridSpec(s.x0 - s.dx / 2 + s.dx / (2 * f), s.y0 - s.dy / 2 + s.dy / (2 * f), s.dx / f, s.dy / f,
                    s.nx * f, s.ny * f)
    corr = correcting_factor(y, SMITH, mu_y, K, spec=fine)
    psi_fine = np.repeat(np.repeat(psi.values, f, axis=0), f, axis=1)
    expected = float((corr.b.values * psi_fine * fine.cell_weights(region)).sum())
    ks_, (rows, cols) = y.spec.subgrid(K)
    threshold = float(y.values[rows, cols].min()) * (1 - 1e-9)
    return dict(psi=psi, y=y, K=K, region=region, mu_y=mu_y, expected=expected, threshold=threshold,
                b_spec=correcting_factor(y, SMITH, mu_y, K).b.spec)


def contributing_centres(obs, seed):
    c, u, ids, _ = simulate_storms(obs["psi"], SMITH, obs["mu_y"], obs["region"], obs["threshold"], seed)
    return c[contributing_mask(obs["y"], c, u, ids, SMITH, obs["K"])]


def test_c05_contributing_centre_law(fixed_observation):
    t0 = time.perf_counter()
    obs = fixed_observation
    counts = np.array([len(contributing_centres(obs, s)) for s in range(5000)])
    mean, se = counts.mean(), counts.std(ddof=1) / math.sqrt(counts.size)
    disp = counts.var(ddof=1) / mean
    ok = abs(mean - obs["expected"]) < 3 * se and 0.9 <= disp <= 1.1
    record(5, "contributing centres are Poisson(b psi)", ok,
           f"mean={mean:.4f} int(b psi)={obs['expected']:.4f} SE={se:.4f} dispersion={disp:.3f}", t0)


def test_c06_kernel_unbiasedness(fixed_observation):
    t0 = time.perf_counter()
    obs = fixed_observation
    spec, W = obs["b_spec"], obs["K"].expand(SMITH.R)
    worst, ints, counts = 0.0, [], []
    for s in range(2000):
        pts = contributing_centres(obs, 50_000 + s)
        est = kernel_intensity(PointPattern(pts, W), W, KernelConfig(bandwidth=1.0), spec)
        total = integrate(est, W)
        worst = max(worst, abs(total - len(pts)))
        ints.append(total)
        counts.append(len(pts))
    ints = np.array(ints)
    se = ints.std(ddof=1) / math.sqrt(ints.size)
    ok = worst < 1e-3 and abs(ints.mean() - np.mean(counts)) < 3 * se and abs(ints.mean() - obs["expected"]) < 3 * se
    record(6, "kernel estimate unbiased", ok,
           f"max|int-N|={worst:.2e} mean int={ints.mean():.4f} mean N={np.mean(counts):.4f} "
           f"int(b psi)={obs['expected']:.4f} SE={se:.4f}", t0)


def chi2_pvalue(observed, probs):
    expected = probs * observed.sum()
    return stats.chisquare(observed, expected).pvalue


def test_c07_repair_to_base():
    t0 = time.perf_counter()
    K = Rect(0, 1, 0, 1)
    spec = GridSpec.over(K, 40, 40)
    x, _ = np.meshgrid(spec.xs, spec.ys)
    psi = GridField(spec, 20.0 * (0.5 + x))
    mass = spec.cell_weights(K) * psi.values
    lam = float(mass.sum())
    # 8 equal-probability-ish count bins from the Poisson quantiles
    edges = np.unique(stats.poisson(lam).ppf(np.linspace(0, 1, 9)[1:-1])).astype(int)
    cdf = stats.poisson(lam).cdf(edges)
    pbins = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    # 8 spatial strips in x; exact masses of the cellwise-constant intensity
    strips = np.linspace(0, 1, 9)
    pstrip = np.array([(spec.cell_weights(Rect(a, b, 0, 1)) * psi.values).sum()
                       for a, b in zip(strips[:-1], strips[1:])]) / lam
    details, ok = [], True
    for fval in (0.5, 1.0, 2.0):
        f = GridField.constant(spec, fval)
        fpsi = GridField(spec, fval * psi.values)
        rng = np.random.default_rng(int(fval * 1000))
        n_out, xs = [], []
        for _ in range(10_000):
            out = repair_to_base(sample_poisson(fpsi, K, rng), f, psi, K, rng)
            n_out.append(out.n)
            xs.append(out.points[:, 0])
        n_out = np.array(n_out)
        hist = np.bincount(np.searchsorted(edges, n_out, side="left"), minlength=len(pbins))
        p_count = chi2_pvalue(hist, pbins)
        p_space = chi2_pvalue(np.histogram(np.concatenate(xs), strips)[0], pstrip)
        ok &= p_count > 1e-3 and p_space > 1e-3
        details.append(f"f={fval}: p_count={p_count:.3f} p_space={p_space:.3f}")
    record(7, "repair to the base Cox process", ok, "; ".join(details), t0)


def test_c08_pcf_sanity():
    t0 = time.perf_counter()
    K = Rect(0, 10, 0, 10)
    spec = GridSpec.over(K, 51, 51)
    rng = np.random.default_rng(8)
    r = np.linspace(0.2, 1.0, 17)
    one = GridField.constant(spec, 1.0)
    g = np.mean([estimate_pcf(sample_poisson(one, K, rng), K, r).values for _ in range(200)], axis=0)
    dev_p = float(np.max(np.abs(g - 1.0)))
    # LGCP on a window large enough for the n^2 normalization to be harmless
    W = Rect(0, 40, 0, 40)
    wspec = GridSpec.over(W, 201, 201)
    model = matern(1.0, 1.0, 1.0)
    r2 = np.linspace(0.2, 1.5, 14)
    gl = []
    for s in range(50):
        psi = simulate_log_gaussian(model, wspec, seed=rng.integers(2**63))
        gl.append(estimate_pcf(sample_poisson(psi, W, rng), W, r2).values)
    dev_l = float(np.max(np.abs(np.mean(gl, axis=0) - lgcp_pcf(model, r2))))
    record(8, "pair correlation sanity", dev_p <= 0.05 and dev_l <= 0.15,
           f"Poisson max|g-1|={dev_p:.4f}; LGCP max|g-exp(C)|={dev_l:.4f}", t0)


def test_c09_minimum_contrast_self_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    K = Rect(0, 10, 0, 10)
    worst = 0.0
    for _ in range(20):
        nu = float(rng.choice([0.5, 1.0, 1.5, 2.5, math.inf]))
        sigma2, beta = rng.uniform(0.3, 3.0), rng.uniform(0.3, 4.0)
        fam = matern_family(nu)
        radii = np.linspace(0.1, 2.5, 32)
        pcf = PCFEstimate(radii, np.exp(sigma2 * fam(beta, radii)), 0.1, K, 0)
        res = minimum_contrast(pcf, fam, ContrastConfig(epsilon=0.1, r0=2.5))
        worst = max(worst, abs(res.sigma2_hat / sigma2 - 1), abs(res.beta_hat / beta - 1))
    record(9, "minimum contrast recovers exact parameters", worst < 0.01, f"max rel err={worst:.2e}", t0)


def test_c10_study_coherence():
    t0 = time.perf_counter()
    cfg = StudyConfig(n_reps=200)
    rows = run_study(cfg)
    rel = {(r.cell.nu, r.cell.beta): r.metrics["relative_mrv"].value for r in rows}
    a = {(r.cell.nu, r.cell.beta): r.metrics["mrv_psi_hat"].value for r in rows}
    b = {(r.cell.nu, r.cell.beta): r.metrics["mrv_psi_hat0"].value for r in rows}
    in_band = all(0.9 <= v <= 2.0 for v in rel.values())
    ordered = all(m[(nu, 2.0)] < m[(nu, 1.0)] for nu in cfg.nus for m in (a, b))
    detail = "; ".join(f"nu={nu} beta={be}: rel={rel[(nu, be)]:.3f} mrv={a[(nu, be)]:.4f} mrv0={b[(nu, be)]:.4f}"
                       for nu, be in sorted(rel))
    record(10, "study coherence", in_band and ordered, detail, t0)


DET_CFG = """\
covariance.family = whittle_matern
covariance.nu = 1
covariance.variance = 1
covariance.scale = 2
shape.kind = gaussian
shape.epsilon = 1e-4
grid.nx = 31
mda.probes = 0:0, 2:2
mda.reps = 30
study.nus = 1, inf
study.scales = 2
study.n_reps = 3
"""


def run_all_commands(cfg, out):
    out.mkdir()
    c = ["--config", str(cfg), "--seed", "17"]
    codes = [
        main(["simulate", *c, "--out", str(out / "sim")]),
        main(["estimate-intensity", *c, "--out", str(out / "est"), "--y", str(out / "sim" / "y.gf1"),
              "--events", str(out / "sim" / "events.csv")]),
        main(["estimate-params", *c, "--out", str(out / "par"), "--points", str(out / "est" / "repaired.pp1")]),
        main(["study", *c, "--out", str(out / "study")]),
        main(["mda-check", *c, "--out", str(out / "mda"), "--blocks", "3"]),
    ]
    return codes, {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_c11_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "det.cfg"
    cfg.write_text(DET_CFG)
    codes_a, a = run_all_commands(cfg, tmp_path / "a")
    codes_b, b = run_all_commands(cfg, tmp_path / "b")
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    differing = [str(k) for k in a if k in b and a[k] != b[k]]
    ok = codes_a == codes_b == [0] * 5 and same and len(a) >= 12
    record(11, "CLI determinism", ok, f"{len(a)} files, exit codes {codes_a}, differing={differing or 'none'}", t0)
