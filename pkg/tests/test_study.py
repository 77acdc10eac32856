import math

import numpy as np
import pytest

from coxextremes.study import (Estimate, StudyConfig, StudyRow, mrv, mse, ratio_estimate, replicate_seed,
                               run_benchmark_cell, run_study, table_csv, write_tables)


def test_mrv_ignores_global_scale():
    rng = np.random.default_rng(0)
    psi = rng.uniform(0.5, 2, (10, 10))
    assert mrv([3.0 * psi], [psi]).value == pytest.approx(0.0, abs=1e-24)
    noisy = psi * rng.uniform(0.5, 1.5, psi.shape)
    assert mrv([noisy], [psi]).value == pytest.approx(mrv([7 * noisy], [psi]).value)


def test_mrv_masks_and_failures():
    psi = np.ones((2, 2))
    est = np.array([[1.0, 3.0], [100.0, 100.0]])
    mask = np.array([[True, True], [False, False]])
    assert mrv([est], [psi], [mask]).value == pytest.approx(0.25)
    out = mrv([est, est], [psi, psi], [mask, np.zeros((2, 2), bool)])
    assert out.n_ok == 1 and out.n_failed == 1


def test_mse_and_ratio():
    assert mse([1.0, 3.0, math.nan], 2.0) == Estimate(1.0, 0.0, 2, 1)
    r = ratio_estimate([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert r.value == pytest.approx(2.0) and r.se == pytest.approx(0.0, abs=1e-12)


def test_replicate_seeds_are_distinct_and_stable():
    a = np.random.default_rng(replicate_seed(1, 0, 5)).random()
    assert a == np.random.default_rng(replicate_seed(1, 0, 5)).random()
    assert a != np.random.default_rng(replicate_seed(1, 1, 5)).random()
    assert a != np.random.default_rng(replicate_seed(1, 0, 6)).random()


def test_cells_and_full_layout():
    cfg = StudyConfig()
    cells = cfg.cells()
    assert len(cells) == 4 and {c.nu for c in cells} == {1.0, math.inf}
    full = StudyConfig.full()
    assert len(full.cells()) == 16 and full.n_grid == 101 and full.n_reps == 1000


@pytest.fixture(scope="module")
def tiny_rows():
    cfg = StudyConfig(nus=(1.0,), scales=(2.0,), n_grid=31, n_reps=4, seed=3)
    return cfg, run_study(cfg)


def test_small_study_runs_and_is_deterministic(tiny_rows):
    cfg, rows = tiny_rows
    again = run_benchmark_cell(cfg.cells()[0], cfg)
    m = rows[0].metrics
    assert m["mrv_psi_hat"].n_ok + m["mrv_psi_hat"].n_failed == 4
    assert again.metrics["mrv_psi_hat"] == m["mrv_psi_hat"]
    assert m["mean_direct"].value > m["mean_contributing"].value > 0


def test_tables(tiny_rows, tmp_path):
    _, rows = tiny_rows
    text = table_csv(rows, ["relative_mrv"], ["seed=3"])
    lines = text.splitlines()
    assert lines[0] == "# seed=3"
    assert lines[1] == "cell,nu,beta,sigma2,metric,value,se,n_ok"
    assert lines[2].startswith("0,1.0,2.0,1.0,relative_mrv,")
    paths = write_tables(rows, tmp_path)
    assert [p.name for p in paths] == ["table_nonparametric.csv", "table_parametric.csv"]
    assert "mse_beta_hat" in paths[1].read_text()


def test_infinite_smoothness_is_written_as_inf():
    from coxextremes.study import StudyCell
    row = StudyRow(StudyCell(0, math.inf, 1.0, 1.0), {"relative_mrv": Estimate(1.0, 0.1, 3)})
    assert ",inf," in table_csv([row], ["relative_mrv"])
