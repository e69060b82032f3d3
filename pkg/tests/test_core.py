"""Tests for domain types, basis conversions, and grid states."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesoncollapse import (DensityBlocks, FlavorVector, Grid,
                           GridResolutionError, GridState, ModelParams,
                           ParameterError, flavor_to_mass,
                           make_gaussian_state)

INV_SQ2 = 1.0 / np.sqrt(2.0)


class TestModelParams:

    def test_defaults_valid(self):
        p = ModelParams()
        assert p.dm == pytest.approx(1.0)

    @pytest.mark.parametrize("kwargs", [
        {"m0": 0.0},
        {"mH": 0.5, "mL": 0.5},
        {"mH": 0.2, "mL": 0.5},
        {"lam": -1.0},
        {"gamma": -0.5},
        {"rC": 0.0},
        {"alpha": -2.0},
        {"dim": 2},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ParameterError):
            ModelParams(**kwargs)

    def test_dm_derived(self):
        p = ModelParams(mH=2.25, mL=1.0)
        assert p.dm == pytest.approx(1.25)


class TestGrid:

    def test_centered_covers_symmetric_interval(self):
        g = Grid.centered(8, 4.0)
        assert g.spacing == pytest.approx(0.5)
        assert g.points[0] == pytest.approx(-1.75)
        assert g.points[-1] == pytest.approx(1.75)
        assert g.extent == pytest.approx(4.0)

    def test_too_few_points_rejected(self):
        with pytest.raises(ParameterError):
            Grid(n_points=1, spacing=0.1)

    def test_nonpositive_spacing_rejected(self):
        with pytest.raises(ParameterError):
            Grid(n_points=10, spacing=0.0)


class TestFlavorConversion:

    def test_m0_components(self):
        v = flavor_to_mass("M0")
        assert v.cH == pytest.approx(INV_SQ2)
        assert v.cL == pytest.approx(INV_SQ2)

    def test_m0bar_components(self):
        v = flavor_to_mass("M0bar")
        assert v.cH == pytest.approx(INV_SQ2)
        assert v.cL == pytest.approx(-INV_SQ2)

    def test_flavor_states_orthogonal(self):
        v, w = flavor_to_mass("M0"), flavor_to_mass("M0bar")
        assert abs(v.inner(w)) < 1e-15

    def test_mass_labels_are_basis_vectors(self):
        assert flavor_to_mass("H") == FlavorVector(1.0, 0.0)
        assert flavor_to_mass("L") == FlavorVector(0.0, 1.0)

    def test_unknown_label_rejected(self):
        with pytest.raises(ParameterError):
            flavor_to_mass("tau")

    @given(st.complex_numbers(max_magnitude=10, allow_nan=False,
                              allow_infinity=False),
           st.complex_numbers(max_magnitude=10, allow_nan=False,
                              allow_infinity=False))
    def test_isometry(self, a, b):
        """The flavor<->mass rotation preserves norms and inner products."""
        v0, vbar = flavor_to_mass("M0"), flavor_to_mass("M0bar")
        mass = FlavorVector(a * v0.cH + b * vbar.cH, a * v0.cL + b * vbar.cL)
        flavor_norm2 = abs(a) ** 2 + abs(b) ** 2
        assert mass.norm() ** 2 == pytest.approx(flavor_norm2, abs=1e-9)


class TestGaussianState:

    def setup_method(self):
        self.params = ModelParams(alpha=1.0)
        self.grid = Grid.centered(128, 16.0)

    def test_norm_is_one(self):
        state = make_gaussian_state(self.params, self.grid, "M0")
        assert state.norm() == pytest.approx(1.0, abs=1e-12)

    def test_position_moments(self):
        """<x> = 0 and Var(x) = alpha/2 for the amplitude exp(-x^2/2a)."""
        state = make_gaussian_state(self.params, self.grid, "M0")
        x = self.grid.points
        density = np.sum(np.abs(state.amplitudes) ** 2, axis=1)
        mean = np.sum(x * density) * self.grid.spacing
        var = np.sum(x ** 2 * density) * self.grid.spacing - mean ** 2
        assert abs(mean) < 1e-12
        assert var == pytest.approx(self.params.alpha / 2.0, rel=1e-2)

    def test_mass_populations_equal_for_m0(self):
        state = make_gaussian_state(self.params, self.grid, "M0")
        ph, pl = state.mass_populations()
        assert ph == pytest.approx(0.5, abs=1e-12)
        assert pl == pytest.approx(0.5, abs=1e-12)

    def test_flavor_probability_of_initial_state(self):
        state = make_gaussian_state(self.params, self.grid, "M0")
        assert state.flavor_probability("M0") == pytest.approx(1.0, abs=1e-12)
        assert state.flavor_probability("M0bar") == pytest.approx(0.0, abs=1e-12)

    def test_refinement_leaves_norm(self):
        """Doubling n_points at fixed extent barely changes the norm."""
        coarse = make_gaussian_state(self.params, Grid.centered(128, 16.0))
        fine = make_gaussian_state(self.params, Grid.centered(256, 16.0))
        assert abs(coarse.norm() - fine.norm()) < 1e-8

    def test_short_grid_rejected(self):
        with pytest.raises(GridResolutionError):
            make_gaussian_state(self.params, Grid.centered(64, 4.0))

    def test_coarse_grid_rejected(self):
        with pytest.raises(GridResolutionError):
            make_gaussian_state(self.params, Grid.centered(16, 16.0))


class TestDensityBlocks:

    def test_projector_of_pure_state(self):
        params = ModelParams()
        grid = Grid.centered(64, 16.0)
        state = make_gaussian_state(params, grid, "M0")
        rho = DensityBlocks.from_state(state)
        assert rho.trace() == pytest.approx(1.0, abs=1e-12)
        assert rho.hermiticity_defect() < 1e-15
        rho.validate()

    def test_shape_mismatch_rejected(self):
        grid = Grid.centered(8, 16.0)
        from mesoncollapse import InvariantViolationError
        with pytest.raises(InvariantViolationError):
            DensityBlocks(np.zeros((2, 2, 4, 4)), grid)

    def test_amplitudes_read_only(self):
        state = make_gaussian_state(ModelParams(), Grid.centered(64, 16.0))
        with pytest.raises(ValueError):
            state.amplitudes[0, 0] = 1.0
