import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coxextremes.errors import DomainError
from coxextremes.grid import GridField, GridSpec, Rect, integrate, read_gf1, write_gf1


def unit_grid(n):
    return GridSpec.over(Rect(0, 1, 0, 1), n, n)


def test_unit_integrand():
    # cells centred on nodes; [0,1]^2 with spacing 0.01
    spec = GridSpec(0.0, 0.0, 0.01, 0.01, 101, 101)
    assert integrate(GridField.constant(spec, 1.0), Rect(0, 1, 0, 1)) == pytest.approx(1.0, abs=0.02)
    assert integrate(GridField.constant(spec, 2.0), Rect(0, 1, 0, 1)) == pytest.approx(2.0, abs=0.04)


def test_exponential_integrand():
    spec = GridSpec(0.0, 0.0, 0.005, 0.005, 201, 201)
    x, _ = np.meshgrid(spec.xs, spec.ys)
    assert integrate(GridField(spec, np.exp(x)), Rect(0, 1, 0, 1)) == pytest.approx(math.e - 1, abs=1e-3)


def test_empty_intersection_warns():
    f = GridField.constant(unit_grid(11), 1.0)
    with pytest.warns(RuntimeWarning):
        assert integrate(f, Rect(5, 6, 5, 6)) == 0.0


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 2), st.floats(0.05, 2))
def test_cell_weights_sum_to_covered_area(x0, y0, w, h):
    spec = GridSpec(-4.0, -4.0, 0.1, 0.1, 81, 81)
    region = Rect(x0, x0 + w, y0, y0 + h)
    inside = region.intersect(spec.cell_box)
    assert spec.cell_weights(region).sum() == pytest.approx(inside.area, rel=1e-9)


def test_nonfinite_values_rejected():
    with pytest.raises(DomainError):
        GridField(unit_grid(3), np.array([np.nan] * 9))


def test_subgrid_and_restrict():
    spec = GridSpec.over(Rect(-5, 5, -5, 5), 51, 51)
    sub, (rows, cols) = spec.subgrid(Rect(-1, 1, -1, 1))
    assert sub.nx == 11 and sub.ny == 11
    assert sub.x0 == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        spec.subgrid(Rect(9, 10, 9, 10))


def test_interpolation_is_exact_for_bilinear(rng):
    spec = GridSpec(0.0, 0.0, 0.5, 0.25, 9, 13)
    x, y = np.meshgrid(spec.xs, spec.ys)
    f = GridField(spec, 1 + 2 * x - 3 * y + 0.5 * x * y)
    pts = rng.uniform([0, 0], [4, 3], (50, 2))
    expected = 1 + 2 * pts[:, 0] - 3 * pts[:, 1] + 0.5 * pts[:, 0] * pts[:, 1]
    assert np.allclose(f.interpolate(pts), expected)


def test_gf1_round_trip(tmp_path, rng):
    spec = GridSpec(-1.5, 2.0, 0.3, 0.7, 7, 4)
    f = GridField(spec, rng.normal(size=spec.shape))
    path = tmp_path / "f.gf1"
    write_gf1(path, f, {"seed": 3})
    back = read_gf1(path)
    assert back.spec == spec
    assert np.array_equal(back.values, f.values)
    assert back.meta["seed"] == "3"
    assert path.read_text().startswith("GF1 7 4 ")


def test_rect_geometry():
    r = Rect(0, 2, 0, 1)
    assert r.expand(1).area == pytest.approx(4 * 3)
    assert r.erode(0.25) == Rect(0.25, 1.75, 0.25, 0.75)
    assert r.distance(3.0, 2.0) == pytest.approx(math.sqrt(2))
    assert r.distance(1.0, 0.5) == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert r.intersect(Rect(5, 6, 5, 6)) is None
