import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modaldisp.modesolver import (
    ModeMatchError,
    WaveguideModeSet,
    WindowClippingError,
    group_indices,
    helmholtz_operator,
    match_modes,
    overlap_matrix,
    solve_lowest,
    solve_modes,
    write_modes_csv,
)
from modaldisp.profile import IndexProfile, load_profile, parabolic_profile, slab_profile

from oracles import slab_neff, slab_ngroup

SLAB = dict(core=10.0, n_core=1.52, n_clad=1.51)


@pytest.fixture(scope="module")
def slab_modes():
    p = slab_profile(**SLAB, step=0.25)
    return group_indices(p, 0.85, 1e-3, solve_modes(p, 0.85))


class TestSlabOracle:
    def test_neff_matches_characteristic_equation(self, slab_modes):
        ref = slab_neff(10.0, 1.52, 1.51, 0.85)
        assert len(slab_modes) == len(ref) == 5
        assert np.max(np.abs(slab_modes.n_eff - ref)) < 1e-4

    def test_group_index_matches_analytic_derivative(self):
        # the near-cutoff mode decays over ~7 um and needs a fine step; error falls as h^2
        ref = slab_ngroup(10.0, 1.52, 1.51, 0.85)
        errors = []
        for h in (0.25, 0.125, 0.0625):
            p = slab_profile(**SLAB, step=h, margin=40.0)
            ms = group_indices(p, 0.85, 1e-3, solve_modes(p, 0.85))
            errors.append(np.abs(ms.n_group - ref))
        assert np.max(errors[-1]) < 1e-4
        assert np.max(errors[0][:4]) < 1e-4
        ratio = errors[0] / errors[1]
        assert np.all((ratio > 3.5) & (ratio < 4.5))

    def test_grid_refinement(self, slab_modes):
        fine = solve_modes(slab_profile(**SLAB, step=0.125), 0.85)
        assert np.max(np.abs(fine.n_eff - slab_modes.n_eff)) < 5e-5

    def test_group_index_step_convergence(self, slab_modes):
        p = slab_modes.profile
        coarse = group_indices(p, 0.85, 2e-3, slab_modes)
        assert np.max(np.abs(coarse.n_group - slab_modes.n_group)) < 1e-5

    def test_wide_core_has_bulk_group_index(self):
        p = slab_profile(200.0, 1.52, 1.51, step=0.25)
        ms = solve_modes(p, 0.85, max_modes=1)
        ms = group_indices(p, 0.85, 1e-3, ms)
        assert abs(ms.n_group[0] - 1.52) < 1e-4


class TestModeSetInvariants:
    def test_normalisation_orthogonality_residual(self, coarse_scenario):
        ms = coarse_scenario.modeset
        p = ms.profile
        gram = overlap_matrix(ms, ms)
        assert np.max(np.abs(np.diag(gram) - 1)) < 1e-9
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-6
        assert max(md.residual for md in ms) < 1e-8
        assert np.all(np.diff(ms.n_eff) <= 0)
        assert np.all(ms.n_eff > p.n_clad) and np.all(ms.n_eff <= p.n_max)
        assert [md.index for md in ms] == list(range(len(ms)))

    def test_residual_recomputed_independently(self, coarse_scenario):
        ms = coarse_scenario.modeset
        A = helmholtz_operator(ms.profile, ms.wavelength)
        k0 = 2 * math.pi / ms.wavelength
        for md in ms.modes[:: max(1, len(ms) // 5)]:
            e = md.field.ravel()
            b2 = (k0 * md.n_eff) ** 2
            assert np.linalg.norm(A @ e - b2 * e) / np.linalg.norm(b2 * e) < 1e-8

    def test_uniform_profile_has_no_modes(self):
        p = IndexProfile(-20, -20, 0.5, 0.5, np.full((81, 81), 1.51))
        assert len(solve_modes(p, 0.85)) == 0

    def test_mode_count_non_increasing_with_wavelength(self, coarse_profile):
        counts = [len(solve_modes(coarse_profile, wl)) for wl in (0.78, 0.85, 1.0, 1.3)]
        assert counts == sorted(counts, reverse=True)

    def test_window_clipping(self):
        p = slab_profile(10.0, 1.52, 1.51, margin=0.5, step=0.25)
        with pytest.raises(WindowClippingError, match="window clipping"):
            solve_modes(p, 0.85)

    def test_max_modes_caps(self, coarse_profile):
        assert len(solve_modes(coarse_profile, 0.85, max_modes=3)) == 3

    def test_nonpositive_wavelength(self, coarse_profile):
        with pytest.raises(ValueError):
            solve_modes(coarse_profile, 0.0)

    def test_deterministic(self, coarse_profile, coarse_scenario):
        again = solve_modes(coarse_profile, 0.85)
        ref = coarse_scenario.modeset
        assert np.array_equal(again.n_eff, ref.n_eff)
        assert all(np.array_equal(a.field, b.field) for a, b in zip(again, ref))


def test_parabolic_levels_equally_spaced():
    p = parabolic_profile(1.52, 0.2, 25.0, 30.0, 0.5)
    ms = solve_lowest(p, 0.85, 15)  # the five lowest degenerate levels
    k0 = 2 * math.pi / 0.85
    b2 = (k0 * ms.n_eff) ** 2
    gaps = -np.diff(b2)
    split = gaps > 0.3 * gaps.max()
    levels = np.split(b2, np.flatnonzero(split) + 1)
    assert [len(lv) for lv in levels] == [1, 2, 3, 4, 5]
    spacing = -np.diff([lv.mean() for lv in levels])
    assert spacing.max() / spacing.min() - 1 < 0.01
    # harmonic-oscillator spacing 2 k0 NA / scale
    assert spacing.mean() == pytest.approx(2 * k0 * 0.2 / 25.0, rel=0.01)


class TestMatchModes:
    def test_identity(self, slab_modes):
        assert np.array_equal(match_modes(slab_modes, slab_modes), np.arange(len(slab_modes)))

    @given(st.permutations(range(5)))
    def test_permutation_recovered(self, slab_modes, perm):
        perm = np.array(perm)
        shuffled = WaveguideModeSet(tuple(slab_modes.modes[i] for i in perm), 0.85, slab_modes.profile)
        pairing = match_modes(slab_modes, shuffled)
        assert np.array_equal(perm[pairing], np.arange(5))

    def test_orthogonal_sets_unmatched(self, slab_modes):
        a = WaveguideModeSet(slab_modes.modes[:1], 0.85, slab_modes.profile)
        b = WaveguideModeSet(slab_modes.modes[1:2], 0.85, slab_modes.profile)
        with pytest.raises(ModeMatchError, match="unmatched") as info:
            match_modes(a, b)
        assert info.value.unmatched == [0]

    def test_sign_flip_still_matches(self, slab_modes):
        from dataclasses import replace

        flipped = WaveguideModeSet(tuple(replace(m, field=-m.field) for m in slab_modes), 0.85,
                                   slab_modes.profile)
        assert np.array_equal(match_modes(slab_modes, flipped), np.arange(len(slab_modes)))


def test_group_index_rejects_nonpositive_step(slab_modes):
    with pytest.raises(ValueError):
        group_indices(slab_modes.profile, 0.85, 0.0, slab_modes)


def test_material_slope_shifts_group_index(slab_modes):
    slope = -0.02  # dn/dlambda in 1/um
    shifted = group_indices(slab_modes.profile, 0.85, 1e-3, slab_modes, material_slope=slope)
    # uniform material dispersion adds about -lambda * dn/dlambda to every group index
    assert np.allclose(shifted.n_group - slab_modes.n_group, -0.85 * slope, atol=2e-4)


def test_mode_export(tmp_path, slab_modes):
    write_modes_csv(slab_modes, tmp_path / "m.csv", tmp_path / "fields")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "mode_index,n_eff,n_group"
    assert len(lines) == len(slab_modes) + 1
    assert float(lines[1].split(",")[1]) == slab_modes.n_eff[0]
    dumped = sorted((tmp_path / "fields").iterdir())
    assert len(dumped) == len(slab_modes)
    head = dumped[0].read_text().splitlines()[0]
    assert head.startswith("# ")
