import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonfluid import diagnostics as dg
from photonfluid.solver import FieldState, Grid, RunSpec, init_seeded_mode, init_two_stream


def vortex_state(grid, centers=((0.0, 0.0, 1),), core=1.0):
    """Product of tanh-core vortices ``(x0, y0, charge)``."""
    X, Y = grid.mesh()
    psi = np.ones(grid.shape, complex)
    for x0, y0, q in centers:
        r = np.hypot(X - x0, Y - y0)
        psi *= np.tanh(r / core) * np.exp(1j * q * np.arctan2(Y - y0, X - x0))
    return FieldState(psi, 0.0, grid)


def history_from(z, amp, level=None):
    h = dg.ModeHistory((0.5, 0.0))
    for i, (zi, a) in enumerate(zip(z, amp)):
        h.append(zi, a, None if level is None else level[i])
    return h


# -- Madelung and spectra -----------------------------------------------------------

def test_madelung_plane_wave_velocity():
    g = Grid(32, 32, 2 * np.pi, 2 * np.pi)
    X, Y = g.mesh()
    hydro = dg.madelung(FieldState(2.0 * np.exp(1j * (3 * X + Y)), 0.0, g))
    np.testing.assert_allclose(hydro.density, 4.0)
    np.testing.assert_allclose(hydro.velocity[0], 3.0, atol=1e-12)
    np.testing.assert_allclose(hydro.velocity[1], 1.0, atol=1e-12)


def test_madelung_vortex_velocity_is_one_over_r():
    # (x + i y) times a flat-topped envelope is smooth and periodic to roundoff
    g = Grid(128, 128, 40.0, 40.0)
    X, Y = g.mesh()
    r = np.hypot(X, Y)
    psi = (X + 1j * Y) * np.exp(-((r / 14.0) ** 8))
    hydro = dg.madelung(FieldState(psi, 0.0, g))
    ring = (r > 2) & (r < 7)
    v_theta = (-Y * hydro.velocity[0] + X * hydro.velocity[1]) / r
    v_r = (X * hydro.velocity[0] + Y * hydro.velocity[1]) / r
    np.testing.assert_allclose(v_theta[ring], 1 / r[ring], rtol=1e-6)
    assert np.max(np.abs(v_r[ring])) < 1e-6


def test_madelung_masks_low_density():
    g = Grid(16, 16, 1.0, 1.0)
    psi = np.ones(g.shape, complex)
    psi[4, 4] = 0.0
    hydro = dg.madelung(FieldState(psi, 0.0, g), density_floor=0.5)
    assert not hydro.mask[4, 4]
    assert np.isnan(hydro.velocity[:, 4, 4]).all()
    assert np.isfinite(hydro.velocity[:, 0, 0]).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_far_field_parseval(seed):
    g = Grid(32, 16, 7.0, 3.0)
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    s = FieldState(psi, 0.0, g)
    norm = np.sum(np.abs(psi) ** 2) * g.dA
    assert dg.far_field(s).sum() == pytest.approx(norm, rel=1e-10)


def test_far_field_centered_peak():
    g = Grid(32, 32, 2 * np.pi, 2 * np.pi)
    X, _ = g.mesh()
    ff = dg.far_field(FieldState(np.exp(2j * X), 0.0, g))
    kx, ky = dg.far_field_axes(g)
    ix, iy = np.unravel_index(np.argmax(ff), ff.shape)
    assert (kx[ix], ky[iy]) == (2.0, 0.0)


def test_density_spectrum_sum_and_diff():
    g = Grid(16, 16, 10.0, 10.0)
    s = init_two_stream(g, RunSpec(v0=0.0, noise_amplitude=0.0))
    assert dg.density_spectrum(s)[0, 0] == pytest.approx(2.0)
    assert dg.density_spectrum(s, dg.DIFF)[0, 0] == pytest.approx(0.0)
    with pytest.raises(ValueError):
        dg.density_spectrum(FieldState(s.psi[:1], 0.0, g), dg.DIFF)
    with pytest.raises(ValueError):
        dg.density_spectrum(s, "product")


def test_band_power_picks_seeded_mode():
    g = Grid(32, 8, 8 * np.pi, 8 * np.pi)
    s = init_seeded_mode(g, q=(0.5, 0.0), epsilon=1e-3)
    inside = dg.band_power(s, c_s=1.0, q_lo=0.4, q_hi=0.6)
    assert inside == pytest.approx(2 * (1e-3) ** 2, rel=1e-2)  # +q and -q
    assert dg.band_power(s, 1.0, 0.8, 2.0) < 1e-12


# -- mode histories and fits ---------------------------------------------------------

def test_mode_history_requires_increasing_z():
    h = dg.ModeHistory((0.1, 0.0))
    h.append(0.0, 1.0)
    with pytest.raises(ValueError):
        h.append(0.0, 2.0)


def test_mode_tracker_records_level_and_background():
    g = Grid(32, 8, 8 * np.pi, 8 * np.pi)
    tracker = dg.ModeTracker([(0.5, 0.0), (0.25, 0.0)])
    tracker(init_seeded_mode(g, rho0=3.0, q=(0.5, 0.0), epsilon=1e-3))
    h_seed, h_other = tracker.histories
    assert h_seed.background == pytest.approx(3.0 * (1 + 0.5e-6))
    assert h_seed.relative[0] == pytest.approx(1e-3, rel=1e-3)
    assert h_other.relative[0] < 1e-14
    assert h_seed.global_level[0] == pytest.approx(h_seed.relative[0])


def test_growth_fit_exact_on_synthetic_exponential():
    z = np.linspace(0, 40, 81)
    h = history_from(z, 1e-6 * np.exp(0.3 * z) * np.exp(1j * 0.7 * z))
    fit = dg.fit_growth_rate(h, window=(1e-7, 1e-2))
    assert fit.ok
    assert fit.gamma == pytest.approx(0.3, abs=1e-6)
    assert fit.z_range[1] < 40  # stopped at the upper bound


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(1e-9, 1e-6))
def test_growth_fit_recovers_any_rate(gamma, amp0):
    z = np.linspace(0, 200, 401)
    h = history_from(z, amp0 * np.exp(gamma * z))
    fit = dg.fit_growth_rate(h, window=(1e-10, 1e-2))
    assert fit.ok
    assert fit.gamma == pytest.approx(gamma, abs=1e-6)


def test_growth_fit_reports_too_few_samples():
    z = np.linspace(0, 1, 4)
    fit = dg.fit_growth_rate(history_from(z, 1e-4 * np.exp(z)))
    assert not fit.ok
    assert fit.gamma is None
    assert "need 5" in fit.message


def test_linear_window_global_and_harmonic_guards():
    z = np.arange(10.0)
    amp = np.full(10, 1e-4)
    level = np.array([1e-4] * 5 + [1e-2] * 5)
    h = history_from(z, amp, level)
    assert dg.linear_window(h, (1e-5, 1e-2)).tolist() == list(range(10))
    assert dg.linear_window(h, (1e-5, 1e-2), global_hi=1e-3).tolist() == list(range(5))
    # 30 * (1e-2)^2 = 3e-3 > 1e-4, so the late samples are harmonic-dominated
    assert dg.linear_window(h, (1e-5, 1e-2), harmonic_margin=30).tolist() == list(range(5))


def test_oscillation_frequency_fit():
    z = np.arange(0, 30, 0.05)
    h = history_from(z, 1e-3 * np.cos(1.118 * z + 0.3) + 2e-5)
    w, err = dg.fit_oscillation_frequency(h)
    assert w == pytest.approx(1.118, rel=1e-8)
    assert err < 1e-6


# -- vortices and holograms ---------------------------------------------------------

@pytest.mark.parametrize("charge", [1, -1])
def test_vortex_detector_single_charge(charge):
    g = Grid(64, 64, 20.0, 20.0)
    s = vortex_state(g, ((0.3, -0.2, charge),))
    found = dg.detect_vortices(s, periodic=False)
    assert [v.charge for v in found] == [charge]
    ix, iy = found[0].position
    # the core lies inside the reported plaquette
    assert g.x[int(ix)] <= 0.3 <= g.x[int(ix) + 1]
    assert g.y[int(iy)] <= -0.2 <= g.y[int(iy) + 1]


def test_vortex_detector_pair():
    g = Grid(64, 64, 20.0, 20.0)
    s = vortex_state(g, ((-4.1, 0.2, 1), (3.9, -0.3, -1)))
    found = sorted(dg.detect_vortices(s, periodic=False), key=lambda v: v.position[0])
    assert [v.charge for v in found] == [1, -1]


def test_vortex_detector_respects_density_floor():
    g = Grid(32, 32, 10.0, 10.0)
    s = vortex_state(g, ((0.1, 0.1, 1),))
    assert dg.detect_vortices(s, density_floor=2.0, periodic=False) == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_periodic_net_winding_is_zero(seed):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    assert dg.winding_field(psi, periodic=True).sum() == 0


def test_wrap_range():
    w = dg._wrap(np.array([-3 * np.pi, -np.pi, 0.0, np.pi, 2.5 * np.pi]))
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    np.testing.assert_allclose(np.cos(w), np.cos([-3 * np.pi, -np.pi, 0.0, np.pi, 2.5 * np.pi]),
                               atol=1e-15)


def test_hologram_fork_marks_vortex():
    g = Grid(256, 256, 40.0, 40.0)
    k_ref = (2 * np.pi * 8 / 40.0, 0.0)
    plain = dg.hologram(FieldState(np.ones(g.shape, complex), 0.0, g), 1.0, k_ref)
    holo = dg.hologram(vortex_state(g), 1.0, k_ref)
    below, above = 64, 192  # cuts at y = -10 and y = +10
    assert dg.count_fringes(plain[:, below]) == dg.count_fringes(plain[:, above])
    # one extra fringe on one side of the core
    assert abs(dg.count_fringes(holo[:, above]) - dg.count_fringes(holo[:, below])) == 1


def test_hologram_needs_lattice_reference():
    g = Grid(16, 16, 10.0, 10.0)
    with pytest.raises(ValueError):
        dg.hologram(vortex_state(g), 1.0, (0.1, 0.0))


# -- worked examples ------------------------------------------------------------------

def test_real_field_has_no_flow():
    g = Grid(32, 32, 10.0, 10.0)
    X, Y = g.mesh()
    hydro = dg.madelung(FieldState((1.5 + 0.3 * np.cos(2 * np.pi * X / 10)).astype(complex), 0.0, g))
    np.testing.assert_allclose(hydro.velocity, 0.0, atol=1e-12)


def test_far_field_of_streams():
    lx = 40.0
    g = Grid(64, 16, lx, lx)
    kx, _ = dg.far_field_axes(g)
    uniform = dg.far_field(FieldState(np.ones(g.shape, complex), 0.0, g))
    assert np.count_nonzero(uniform > 1e-12 * uniform.max()) == 1
    v0 = 2 * np.pi * 8 / lx
    ff = dg.far_field(init_two_stream(g, RunSpec(v0=v0, noise_amplitude=0.0)))
    peaks = np.argwhere(ff > 1e-12 * ff.max())
    assert sorted(kx[ix] for ix, _ in peaks) == pytest.approx([0.0, v0])


def test_plane_wave_has_no_vortices():
    g = Grid(32, 32, 10.0, 10.0)
    X, Y = g.mesh()
    s = FieldState(np.exp(1j * 2 * np.pi * (2 * X + Y) / 10), 0.0, g)
    assert dg.detect_vortices(s) == []


def test_vortex_pair_positions():
    g = Grid(64, 64, 20.0, 20.0)
    s = vortex_state(g, ((-4.1, 0.2, 1), (3.9, -0.3, -1)))
    found = sorted(dg.detect_vortices(s, periodic=False), key=lambda v: v.position[0])
    for rec, (x0, y0) in zip(found, [(-4.1, 0.2), (3.9, -0.3)]):
        ix, iy = rec.position
        assert abs(np.interp(ix, np.arange(g.nx), g.x) - x0) <= g.dx
        assert abs(np.interp(iy, np.arange(g.ny), g.y) - y0) <= g.dy


def test_hologram_limits():
    g = Grid(64, 64, 20.0, 20.0)
    k_ref = (2 * np.pi * 3 / 20.0, 0.0)
    np.testing.assert_allclose(dg.hologram(FieldState(np.zeros(g.shape, complex), 0.0, g),
                                           1.5, k_ref), 2.25)
    X, _ = g.mesh()
    k1 = 2 * np.pi * 7 / 20.0
    holo = dg.hologram(FieldState(np.exp(1j * k1 * X), 0.0, g), 1.0, k_ref)
    spectrum = np.abs(np.fft.fft2(holo - holo.mean()))
    kx = 2 * np.pi * np.fft.fftfreq(g.nx, g.dx)
    ix, iy = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    assert abs(kx[ix]) == pytest.approx(k1 - k_ref[0]) and iy == 0


def test_stable_mode_fit_consistent_with_zero():
    z = np.linspace(0, 80, 161)
    h = history_from(z, 1e-6 * (1 + 0.5 * np.cos(1.3 * z)))
    fit = dg.fit_growth_rate(h, window=(1e-7, 1e-2))
    assert fit.ok
    assert abs(fit.gamma) < 3 * fit.uncertainty
