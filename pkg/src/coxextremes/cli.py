"""Command line interface: ``coxextremes <command> --config FILE --seed N --out DIR``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .config import Config, config_hash, covariance_from, domain_from, load_config, policy_from, shape_from
from .errors import CoxExtremesError, NumericalError
from .gaussian_field import simulate_log_gaussian
from .grid import GridField, GridSpec, read_gf1, write_gf1
from .intensity import KernelConfig, correcting_factor, corrected_intensity, kernel_intensity
from .pcf import fit_lgcp, matern_family
from .points import PointPattern, read_pp1, repair_to_base, write_pp1
from .simulation import MDAConfig, block_maxima_mda, contributing_mask, psi_grid_for, simulate_extremal, simulate_mmm
from .storm import StormMixture
from .study import StudyConfig, run_study, write_tables

log = logging.getLogger("coxextremes")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _header(cfg: Config, seed, command: str) -> dict:
    return {"command": command, "config_hash": config_hash(cfg), "seed": seed, "version": __version__}


def _load(args) -> Config:
    return load_config(args.config) if args.config else Config()


def _seed(args, cfg: Config) -> int:
    return args.seed if args.seed is not None else cfg.int("seed", 0)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _csv_text(header: dict, columns, rows) -> str:
    buf = io.StringIO()
    for k in sorted(header):
        buf.write(f"# {k}={header[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _kernel_config(cfg: Config) -> KernelConfig:
    bw = cfg.get("kernel.bandwidth")
    sr = cfg.get("kernel.stability_radius")
    return KernelConfig(
        bandwidth=float(bw) if bw else None,
        edge=cfg.str("kernel.edge", "ripley"),
        stability_radius=float(sr) if sr else None,
        restriction=cfg.str("kernel.restriction", "radius"),
        b_floor=cfg.float("kernel.b_floor", 1e-8),
        bandwidth_factor=cfg.float("kernel.bandwidth_factor", 0.7),
    )


def cmd_simulate(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg)
    rng = np.random.default_rng(seed)
    model, policy, shape = covariance_from(cfg), policy_from(cfg), shape_from(cfg)
    D, d_spec = domain_from(cfg)
    psi_spec = psi_grid_for(d_spec, shape.R)
    if cfg.str("intensity.kind", "lgcp") == "constant":
        psi = GridField.constant(psi_spec, 1.0)
        c_psi = 1.0
    else:
        psi = simulate_log_gaussian(model, psi_spec, policy, rng)
        c_psi = policy.c_psi(model)
    res = simulate_extremal(psi, shape, c_psi * shape.integral, D, rng)
    head = _header(cfg, seed, "simulate")
    out = _out(args)
    write_gf1(out / "psi.gf1", psi, {**head, "c_psi": repr(c_psi)})
    write_gf1(out / "y.gf1", res.field, {**head, "T": res.T, "nu": repr(res.nu), "mu_Y": repr(res.mu_Y)})
    mixture = isinstance(shape, StormMixture)
    cols = ["i", "sx", "sy", "u", "contributes"] + (["shape_id"] if mixture else [])
    rows = []
    for e in res.events:
        row = [e.index, repr(e.centre[0]), repr(e.centre[1]), repr(e.level), int(e.contributes)]
        rows.append(row + ([e.shape_id] if mixture else []))
    (out / "events.csv").write_text(_csv_text(head, cols, rows))
    log.info("simulated T=%d storms, %d contributing", res.T, int(res.contributes.sum()))
    return 0


def read_events(path):
    """Centres, levels and shape ids from an events CSV."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    centres, levels, ids = [], [], []
    for row in reader:
        centres.append((float(row["sx"]), float(row["sy"])))
        levels.append(float(row["u"]))
        ids.append(int(row.get("shape_id") or 0))
    return np.array(centres).reshape(-1, 2), np.array(levels), np.array(ids, dtype=int)


def cmd_estimate_intensity(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg)
    rng = np.random.default_rng(seed)
    shape = shape_from(cfg)
    model, policy = covariance_from(cfg), policy_from(cfg)
    mu_y = cfg.float("intensity.mu_Y", policy.c_psi(model) * shape.integral)
    y = read_gf1(args.y)
    centres, levels, ids = read_events(args.events)
    D = y.spec.node_box
    K = D.erode(shape.R)
    flags = contributing_mask(y, centres, levels, ids, shape, K)
    pattern = PointPattern(centres[flags], K.expand(shape.R))
    kcfg = _kernel_config(cfg)
    corr = correcting_factor(y, shape, mu_y, K)
    ky = kernel_intensity(pattern, pattern.window, kcfg, corr.b.spec)
    psi_hat = corrected_intensity(ky, corr, kcfg, shape)
    repaired = repair_to_base(pattern, corr.b, psi_hat, K, rng)
    head = _header(cfg, seed, "estimate-intensity")
    out = _out(args)
    write_gf1(out / "psi_hat.gf1", psi_hat, {**head, "bandwidth": repr(ky.meta["bandwidth"]),
                                              "n_masked": psi_hat.meta["n_masked"]})
    write_gf1(out / "psi_hat_mask.gf1", GridField(psi_hat.spec, psi_hat.mask.astype(float)), head)
    write_gf1(out / "b.gf1", corr.b, {**head, "mu_Y": repr(mu_y)})
    write_pp1(out / "repaired.pp1", repaired, {**head, **repaired.meta})
    return 0


def cmd_estimate_params(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg)
    pattern = read_pp1(args.points)
    K = pattern.window
    nu = cfg.float("covariance.nu", 1.0)
    est, fit = fit_lgcp(pattern, K, matern_family(nu), n_radii=cfg.int("pcf.n_radii", 32),
                        beta_range=(cfg.float("contrast.beta_lo", 0.05), cfg.float("contrast.beta_hi", 10.0)))
    head = _header(cfg, seed, "estimate-params")
    out = _out(args)
    rows = [] if est is None else [[repr(r), repr(g)] for r, g in zip(est.radii, est.values)]
    (out / "pcf.csv").write_text(_csv_text(head, ["r", "ghat"], rows))
    rec = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in fit.to_record().items()}
    rec["meta"] = head
    (out / "contrast.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return 0


def study_config_from(cfg: Config, full: bool) -> StudyConfig:
    base = StudyConfig.full() if full else StudyConfig()
    kw = {}
    for key, attr in (("study.nus", "nus"), ("study.variances", "variances"), ("study.scales", "scales")):
        if key in cfg:
            kw[attr] = tuple(cfg.floats(key))
    if "study.n_reps" in cfg:
        kw["n_reps"] = cfg.int("study.n_reps")
    if "grid.nx" in cfg:
        kw["n_grid"] = cfg.int("grid.nx")
    if "grid.xmin" in cfg:
        kw["domain"] = domain_from(cfg)[0]
    if any(k.startswith("shape.") for k in cfg):
        kw["shape"] = shape_from(cfg)
    if "intensity.mean_policy" in cfg:
        kw["policy"] = policy_from(cfg)
    if any(k.startswith("kernel.") for k in cfg):
        k = dict(cfg)
        k.setdefault("kernel.restriction", base.kernel.restriction)
        kw["kernel"] = _kernel_config(Config(k))
    kw["benchmark_bandwidth"] = cfg.str("study.benchmark_bandwidth", base.benchmark_bandwidth)
    kw["parametric"] = cfg.bool("study.parametric", "true")
    kw["workers"] = cfg.int("study.workers", 1)
    for key, value in kw.items():
        setattr(base, key, value)
    return base


def cmd_study(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg) if (args.seed is not None or "seed" in cfg) else None
    scfg = study_config_from(cfg, args.full)
    if seed is not None:
        scfg.seed = seed
    if args.workers is not None:
        scfg.workers = args.workers
    rows = run_study(scfg)
    head = _header(cfg, scfg.seed, "study")
    lines = [f"{k}={head[k]}" for k in sorted(head)] + [f"n_reps={scfg.n_reps}", f"n_grid={scfg.n_grid}"]
    write_tables(rows, _out(args), lines)
    return 0


def _parse_probes(text: str) -> list[tuple[float, float]]:
    probes = []
    for item in text.split(","):
        x, _, y = item.strip().partition(":")
        probes.append((float(x), float(y)))
    return probes


def cmd_mda_check(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg)
    model, policy, shape = covariance_from(cfg), policy_from(cfg), shape_from(cfg)
    _, d_spec = domain_from(cfg)
    probes = _parse_probes(cfg.str("mda.probes", "0:0"))
    n_reps = args.reps if args.reps is not None else cfg.int("mda.reps", 200)
    mcfg = MDAConfig(model, shape, d_spec, probes, policy, n_reps)
    ss = np.random.SeedSequence(seed)
    s_mda, s_z = ss.spawn(2)
    res = block_maxima_mda(args.blocks, mcfg, np.random.default_rng(s_mda))
    rng_z = np.random.default_rng(s_z)
    head = _header(cfg, seed, "mda-check")
    rows = []
    for p, (px, py) in enumerate(res.probes):
        x = res.samples[:, p]
        ks = stats.kstest(x, lambda z: np.exp(-1.0 / z))
        z = np.array([simulate_mmm(shape, shape.integral, GridSpec(px, py, d_spec.dx, d_spec.dy, 1, 1), rng_z)
                      .field.values[0, 0] for _ in range(n_reps)])
        ks2 = stats.ks_2samp(x, z)
        rows.append([p, repr(px), repr(py), args.blocks, n_reps, repr(float(ks.statistic)), repr(float(ks.pvalue)),
                     repr(float(ks2.statistic)), repr(float(ks2.pvalue))])
    out = _out(args)
    cols = ["site", "x", "y", "n_blocks", "n_reps", "ks_frechet", "p_frechet", "ks_z", "p_z"]
    (out / "mda_ks.csv").write_text(_csv_text(head, cols, rows))
    write_gf1(out / "mda_field.gf1", res.field, head)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coxextremes", description="Cox extremal process simulation and inference")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, out_default="."):
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default=out_default, help="output directory")

    sp = sub.add_parser("simulate", help="simulate an intensity and a Cox extremal field")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate-intensity", help="estimate the intensity from a field and its storms")
    common(sp)
    sp.add_argument("--y", required=True, help="observed field (GF1)")
    sp.add_argument("--events", required=True, help="storm events CSV")
    sp.set_defaults(func=cmd_estimate_intensity)

    sp = sub.add_parser("estimate-params", help="pair correlation and minimum contrast fit")
    common(sp)
    sp.add_argument("--points", required=True, help="point pattern (PP1)")
    sp.set_defaults(func=cmd_estimate_params)

    sp = sub.add_parser("study", help="run the benchmark study")
    common(sp)
    sp.add_argument("--full", action="store_true", help="full-size study layout instead of desk scale")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("mda-check", help="block maxima convergence check")
    common(sp)
    sp.add_argument("--blocks", type=int, required=True)
    sp.add_argument("--reps", type=int)
    sp.set_defaults(func=cmd_mda_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (CoxExtremesError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
