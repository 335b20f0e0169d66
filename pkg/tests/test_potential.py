import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toruswalk.potential import SRW_CONSTANT, kernel_grid, potential_kernel
from toruswalk.steps import build_lazy_srw, build_poisson_jump, build_srw

SRW = build_srw()
# classical closed forms for the SRW potential kernel
EXACT = {(1, 0): 1.0, (1, 1): 4 / math.pi, (2, 0): 4 - 8 / math.pi}

_GRID = {}


def cached_grid(dist, radius):
    key = (dist.name, radius)
    if key not in _GRID:
        _GRID[key] = kernel_grid(dist, radius)
    return _GRID[key]


@pytest.fixture(scope="module")
def grid():
    return cached_grid(SRW, 40)


def test_partial_sums_closed_forms():
    tab = potential_kernel(SRW, list(EXACT) + [(0, 0)], tolerance=1e-7)
    assert tab.converged
    assert tab.value((0, 0)) == 0.0
    for p, v in EXACT.items():
        assert tab.value(p) == pytest.approx(v, abs=1e-5)


def test_grid_closed_forms(grid):
    for p, v in EXACT.items():
        assert grid(p) == pytest.approx(v, abs=1e-9)
    assert grid((0, 0)) == 0.0


def test_two_routes_agree(grid):
    pts = [(3, 1), (2, -2), (0, 3)]
    tab = potential_kernel(SRW, pts, tolerance=1e-5)
    for p in pts:
        assert tab.value(p) == pytest.approx(float(grid(p)), abs=5e-5)


def test_srw_asymptotics(grid):
    # a(x) - (2/pi) log|x| -> constant, with an O(|x|^-2) correction
    for x in (10, 20, 30, 40):
        dev = float(grid((x, 0))) - (2 / math.pi * math.log(x) + SRW_CONSTANT)
        assert abs(dev) <= 1 / (5 * x * x)


@settings(max_examples=50, deadline=None)
@given(st.integers(-40, 40), st.integers(-40, 40))
def test_grid_dihedral_symmetry(x, y):
    g = cached_grid(SRW, 40)
    v = float(g((x, y)))
    for q in ((-x, -y), (y, x), (-y, x), (x, -y)):
        assert float(g(q)) == pytest.approx(v, abs=1e-10)


def test_grid_window_guard(grid):
    with pytest.raises(ValueError):
        grid((41, 0))


@pytest.mark.parametrize("dist,radius,tol", [(build_lazy_srw(0.5), 40, 1e-6),
                                             (build_poisson_jump(0.3, 3), 100, 5e-5)])
def test_other_walks_harmonic_off_origin(dist, radius, tol):
    # a is harmonic away from 0 and sum_y p(y) a(y) = a(0) + 1 = 1 at the origin;
    # jumps leaving the window carry mass below 1e-5 for the Poisson walk
    g = cached_grid(dist, radius)
    for x in [(0, 0), (2, 1), (5, 5)]:
        mean = sum(p * float(g((x[0] + o[0], x[1] + o[1]))) for o, p in dist.entries
                   if max(abs(x[0] + o[0]), abs(x[1] + o[1])) <= radius)
        expect = float(g(x)) + (1.0 if x == (0, 0) else 0.0)
        assert mean == pytest.approx(expect, abs=tol)
