import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from coxextremes.errors import DomainError
from coxextremes.grid import GridField, GridSpec, Rect
from coxextremes.points import (CellSampler, PointPattern, read_pp1, repair_to_base, sample_poisson, thin,
                                write_pp1)

W = Rect(0, 10, 0, 10)
SPEC = GridSpec.over(W, 21, 21)


def test_poisson_count_mean_and_variance():
    f = GridField.constant(SPEC, 1.0)
    counts = np.array([sample_poisson(f, W, seed=s).n for s in range(2000)])
    assert abs(counts.mean() - 100) < 1.5
    assert abs(counts.var() / counts.mean() - 1) < 0.1


def test_locations_follow_intensity():
    x, _ = np.meshgrid(SPEC.xs, SPEC.ys)
    f = GridField(SPEC, np.where(x < 5, 1.0, 3.0))
    pts = np.vstack([sample_poisson(f, W, seed=s).points for s in range(200)])
    assert np.all(W.contains(pts))
    # the cell at x=5 straddles the split; clipped-cell masses decide the ratio
    left = (pts[:, 0] < 4.75).mean()
    mass = CellSampler(f, W)
    w = SPEC.cell_weights(W) * f.values
    expected = w[:, SPEC.xs < 4.75].sum() / w.sum()
    assert abs(left - expected) < 0.01
    assert mass.total == pytest.approx(w.sum())


@given(st.floats(0.2, 9), st.floats(0.2, 9))
def test_clipped_window_keeps_points_inside(a, b):
    win = Rect(min(a, b), max(a, b) + 0.5, 1.0, 2.3)
    p = sample_poisson(GridField.constant(SPEC, 5.0), win, seed=0)
    assert np.all(win.contains(p.points))


def test_thinning_rate():
    p = sample_poisson(GridField.constant(SPEC, 30.0), W, seed=3)
    kept = thin(p, 0.25, seed=4)
    assert abs(kept.n / p.n - 0.25) < 0.02


def test_pp1_round_trip(tmp_path):
    p = PointPattern(np.array([[0.1, 0.2], [3.0, 4.5]]), W, {"seed": "7"})
    path = tmp_path / "p.pp1"
    write_pp1(path, p, {"seed": 7})
    back = read_pp1(path)
    assert np.array_equal(back.points, p.points) and back.window == W and back.meta["seed"] == "7"


def test_restrict_and_union():
    p = PointPattern(np.array([[1.0, 1.0], [6.0, 6.0]]), W)
    assert p.restrict(Rect(0, 5, 0, 5)).n == 1
    assert p.union(p).n == 4
    assert p.count_in(Rect(5, 10, 5, 10)) == 1


@pytest.mark.parametrize("fval", [0.5, 1.0, 2.0])
def test_repair_targets_base_intensity(fval):
    psi = GridField.constant(SPEC, 2.0)
    f = GridField.constant(SPEC, fval)
    fpsi = GridField(SPEC, f.values * psi.values)
    counts = []
    for s in range(600):
        pf = sample_poisson(fpsi, W, seed=s)
        counts.append(repair_to_base(pf, f, psi, W, seed=10_000 + s).n)
    counts = np.array(counts)
    assert abs(counts.mean() - 200) < 2.5
    # Poisson: dispersion close to one
    assert abs(counts.var() / counts.mean() - 1) < 0.2
    assert stats.poisson(200).sf(counts.max()) > 1e-6


def test_repair_rejects_mismatched_grids():
    other = GridSpec.over(W, 11, 11)
    with pytest.raises(DomainError):
        repair_to_base(PointPattern(np.empty((0, 2)), W), GridField.constant(SPEC, 1.0),
                       GridField.constant(other, 1.0), W)
