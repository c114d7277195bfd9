import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modaldisp.fibermodes import (
    FiberModeError,
    eval_field,
    fiber_fields,
    pmn,
    solve_lp_modes,
    write_fiber_modes_csv,
)
from modaldisp.profile import STEP_INDEX, RadialFiberSpec


@pytest.mark.parametrize("m,n,expected", [(0, 0, 1), (1, 1, 4), (4, 9, 23)])
def test_pmn(m, n, expected):
    assert pmn(m, n) == expected


@pytest.mark.parametrize("m,n", [(-1, 0), (0, -1)])
def test_pmn_rejects_negative(m, n):
    with pytest.raises(ValueError):
        pmn(m, n)


def test_single_mode_fiber_has_one_mode():
    spec = RadialFiberSpec(a=4.1, na=0.12, alpha=STEP_INDEX)
    assert spec.v_number(1.55) < 2.405
    fms = solve_lp_modes(spec, 1.55)
    assert len(fms) == 1
    md = fms[0]
    assert (md.m, md.n, md.orientation, md.pmn) == (0, 0, "cos", 1)


def test_step_index_matches_graded_limit():
    # a huge grading exponent approaches the step profile; the two solvers share no code
    step = solve_lp_modes(RadialFiberSpec(alpha=STEP_INDEX), 0.85)
    graded = solve_lp_modes(RadialFiberSpec(alpha=1000.0), 0.85, radial_step=0.02)
    assert len(step) == len(graded)
    assert np.max(np.abs(step.n_eff[:20] - graded.n_eff[:20])) < 5e-6


def test_step_index_lp11_cutoff():
    spec = RadialFiberSpec(a=4.1, na=0.12, alpha=STEP_INDEX)
    wl_cut = 2 * math.pi * 4.1 * 0.12 / 2.405
    assert len(solve_lp_modes(spec, wl_cut * 1.01)) == 1
    assert len(solve_lp_modes(spec, wl_cut * 0.99)) == 3


class TestMMFSet:
    def test_invariants(self, mmf_modes):
        n1 = mmf_modes.spec.n_core
        assert np.all((mmf_modes.n_eff > 1.45) & (mmf_modes.n_eff < n1))
        assert mmf_modes.max_pmn == max(md.pmn for md in mmf_modes)
        keys = [(md.pmn, md.m, md.orientation != "cos") for md in mmf_modes]
        assert keys == sorted(keys)

    def test_orientation_pairs_degenerate(self, mmf_modes):
        by_mn = {}
        for md in mmf_modes:
            by_mn.setdefault((md.m, md.n), []).append(md)
        for (m, _), group in by_mn.items():
            assert len(group) == (1 if m == 0 else 2)
            assert group[0].orientation == "cos"
            if m:
                assert group[1].orientation == "sin"
                assert abs(group[0].n_eff - group[1].n_eff) <= 1e-12

    def test_principal_groups_near_degenerate(self, mmf_modes):
        for g in set(mmf_modes.pmns):
            ne = mmf_modes.n_eff[mmf_modes.pmns == g]
            assert ne.max() - ne.min() < 1e-4

    def test_radial_zero_crossings(self, mmf_modes):
        for md in mmf_modes:
            R = md.radial[np.abs(md.radial) > 1e-6 * np.abs(md.radial).max()]
            crossings = int(np.sum(np.sign(R[:-1]) != np.sign(R[1:])))
            assert crossings == md.n

    def test_fundamental_monotone(self, mmf_modes):
        R = mmf_modes[0].radial
        assert np.all(np.diff(R) <= 1e-15)

    def test_radial_normalisation(self, mmf_modes):
        for md in mmf_modes:
            h = md.r[1] - md.r[0]
            ang = 2 * math.pi if md.m == 0 else math.pi
            assert ang * np.sum(md.radial**2 * md.r) * h == pytest.approx(1.0, abs=1e-9)


@pytest.fixture(scope="module")
def grid():
    x = np.arange(-60, 60.0001, 0.2)
    return np.meshgrid(x, x)


class TestFields:
    def test_plane_normalisation(self, mmf_modes, grid):
        X, Y = grid
        for i in (0, 1, 2, 30, len(mmf_modes) - 1):
            E = eval_field(mmf_modes[i], X, Y)
            assert np.sum(E**2) * 0.04 == pytest.approx(1.0, abs=1e-3)

    def test_angular_orthogonality(self, mmf_modes, grid):
        X, Y = grid
        a = next(md for md in mmf_modes if md.m == 0 and md.n == 1)
        b = next(md for md in mmf_modes if md.m == 2 and md.n == 0 and md.orientation == "cos")
        c = next(md for md in mmf_modes if md.m == 2 and md.n == 0 and md.orientation == "sin")
        for u, v in ((a, b), (b, c), (a, c)):
            assert abs(np.sum(eval_field(u, X, Y) * eval_field(v, X, Y)) * 0.04) < 1e-6

    def test_nodal_line(self, mmf_modes):
        md = next(md for md in mmf_modes if md.m == 1 and md.orientation == "cos")
        y = np.linspace(-30, 30, 61)
        assert np.all(eval_field(md, np.full_like(y, 3.0), y, offset=(3.0, -1.0)) == 0.0)

    def test_offset_translates(self, mmf_modes):
        md = mmf_modes[5]
        x, y = np.array([1.3, -4.0]), np.array([2.2, 7.5])
        assert np.allclose(eval_field(md, x + 5, y - 2, (5, -2)), eval_field(md, x, y), rtol=1e-12, atol=0)

    def test_batch_matches_single(self, mmf_modes):
        x = np.linspace(-30, 30, 17)
        X, Y = np.meshgrid(x, x)
        batch = fiber_fields(mmf_modes, X, Y, (1.0, 2.0))
        for i in (0, 7, 100, len(mmf_modes) - 1):
            assert np.array_equal(batch[i], eval_field(mmf_modes[i], X, Y, (1.0, 2.0)))


@given(st.floats(0.05, 0.3), st.floats(0.05, 0.3))
def test_mode_count_grows_with_v(na_a, na_b):
    lo, hi = sorted((na_a, na_b))
    n_lo = len(solve_lp_modes(RadialFiberSpec(a=10.0, na=lo), 0.85))
    n_hi = len(solve_lp_modes(RadialFiberSpec(a=10.0, na=hi), 0.85))
    assert n_lo <= n_hi


def test_nonpositive_wavelength():
    with pytest.raises(FiberModeError):
        solve_lp_modes(RadialFiberSpec(), -1.0)


def test_csv(tmp_path, mmf_modes):
    write_fiber_modes_csv(mmf_modes, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "m,n,orientation,pmn,n_eff"
    assert len(lines) == len(mmf_modes) + 1
    assert lines[1].startswith("0,0,cos,1,")
