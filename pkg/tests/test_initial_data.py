import numpy as np
import pytest
from hypothesis import given, strategies as st

from dragflow.diagnostics import hs_norm, l1_norm, physical_l2
from dragflow.initial_data import (DataSpec, generic_gaussian, lower_bound_profiles, make_state,
                                   single_mode, smooth_indicator, upsample)
from dragflow.radial import radial_channels
from dragflow.spectral import ConfigurationError, build_grid, hermitian_defect, to_physical


@pytest.fixture(scope="module")
def grid():
    return build_grid(16, 8 * np.pi)


class TestDataSpec:
    @pytest.mark.parametrize("kw,key", [({"amplitude": 0.2}, "amplitude"), ({"kind": "rough"}, "kind"),
                                        ({"width": 0.0}, "width"), ({"c": -1.0}, "c")])
    def test_rejects(self, kw, key):
        with pytest.raises(ConfigurationError, match=key):
            DataSpec(**kw)


class TestGenericGaussian:
    def test_norm_and_structure(self, grid):
        s = generic_gaussian(DataSpec(amplitude=0.05, width=2.0), grid)
        assert hs_norm(s, 3) == pytest.approx(0.05, rel=1e-2)
        assert s.divergence_defect() <= 1e-13
        assert hermitian_defect(s.stacked()) < 1e-16

    def test_zero_amplitude(self, grid):
        s = make_state(DataSpec(amplitude=0.0), grid)
        assert not np.any(s.stacked())

    @given(st.integers(0, 10**6))
    def test_seeds_give_distinct_states_of_equal_norm(self, seed):
        g = build_grid(8, 8 * np.pi)
        a = generic_gaussian(DataSpec(amplitude=0.01, width=3.0, seed=seed), g)
        b = generic_gaussian(DataSpec(amplitude=0.01, width=3.0, seed=seed + 1), g)
        assert hs_norm(a, 3) == pytest.approx(hs_norm(b, 3), rel=1e-2)
        assert np.max(np.abs(a.stacked() - b.stacked())) > 1e-6

    def test_deterministic(self, grid):
        spec = DataSpec(amplitude=0.01, width=2.0, seed=7)
        assert np.array_equal(generic_gaussian(spec, grid).stacked(), generic_gaussian(spec, grid).stacked())

    def test_l1_proxy_matches_fine_quadrature(self, grid):
        s = generic_gaussian(DataSpec(amplitude=0.01, width=2.0), grid)
        fine = l1_norm(s, refine=3)
        assert s.meta["I0"] == pytest.approx(fine, rel=0.02)

    def test_upsample_preserves_field(self, grid):
        s = generic_gaussian(DataSpec(amplitude=0.01, width=2.0), grid)
        up = upsample(s.phi, 32)
        g2 = build_grid(32, grid.box_length)
        assert physical_l2(g2, to_physical(up)) == pytest.approx(physical_l2(grid, to_physical(s.phi)), rel=1e-12)


class TestLowerBoundProfiles:
    def test_density_plateau_and_support(self):
        p = lower_bound_profiles(c0=0.7, r0=0.4)
        r = np.linspace(0, 0.2, 50)
        assert np.allclose(np.abs(p.density(r)), 0.7, rtol=0, atol=1e-15)
        assert np.all(p.density(np.array([0.4, 0.5])) == 0)
        vals = np.abs(p.density(np.linspace(0, 0.4, 200)))
        assert np.all(np.diff(vals) <= 1e-15)

    def test_acoustic_sector_has_no_solenoidal_u(self):
        p = lower_bound_profiles()
        assert p.solenoidal_u is None
        ch = radial_channels(p, 0.0, 1.0)
        # u is entirely the curl-free part r * g(r)
        only_cf = radial_channels(type(p)(curl_free=p.curl_free, xi_max=p.xi_max), 0.0, 1.0)
        assert ch[("u", 0)] == pytest.approx(only_cf[("u", 0)], rel=1e-14)

    def test_curl_free_amplitude_is_gradient_symbol(self):
        p = lower_bound_profiles(c0=1.0, r0=0.25)
        r = np.linspace(0.01, 0.25, 30)
        assert np.allclose(p.curl_free(r), r * smooth_indicator(0.25, 1.0)(r))

    @pytest.mark.parametrize("kw", [{"c0": 0.0}, {"r0": -1.0}, {"cone_half_angle": 2.0}])
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            lower_bound_profiles(**kw)


class TestSingleMode:
    def test_zero_amplitude(self, grid):
        assert not np.any(single_mode(grid, "u", (1, 2, 0), 0.0).stacked())

    def test_parallel_v_polarisation_rejected(self, grid):
        with pytest.raises(ConfigurationError, match="solenoidal"):
            single_mode(grid, "v", (0, 0, 2), 1.0, polarization=(0, 0, 1))

    def test_phi_mode_parseval(self):
        g = build_grid(8, 2 * np.pi)
        s = single_mode(g, "phi", (1, 0, 0), 0.5)
        assert physical_l2(g, to_physical(s.phi)) == pytest.approx(0.5 * np.sqrt(g.volume / 2), rel=1e-14)
        assert np.allclose(to_physical(s.phi), 0.5 * np.cos(g.x[0]), atol=1e-15)

    def test_v_mode_is_solenoidal_and_real(self, grid):
        s = single_mode(grid, "v", (1, 1, 0), 1.0, polarization=(1, 0, 0))
        assert s.divergence_defect() < 1e-16 and hermitian_defect(s.v) == 0

    @pytest.mark.parametrize("k", [(8, 0, 0), (0, -8, 0), (1, 2)])
    def test_off_lattice_rejected(self, grid, k):
        with pytest.raises(ConfigurationError):
            single_mode(grid, "phi", k, 1.0)
