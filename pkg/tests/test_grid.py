import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cvgkp.exceptions import GridResolutionError, InvalidParameterError, InvalidStateError
from cvgkp.gkp import SQRT_PI
from cvgkp.grid import (
    GridWavefunction,
    apply_cubic_phase,
    apply_momentum_kick,
    apply_shear,
    breed_step,
    breeding_round,
    check_resolution,
    count_peaks,
    cubic_phase_teleport,
    db_to_var,
    dumps_wavefunction,
    gaussian_amplitudes,
    gaussian_wavefunction,
    gkp_amplitudes,
    gkp_overlap,
    gkp_wavefunction,
    grid_axis,
    loads_wavefunction,
    squeezed_cat,
)


def test_grid_axis_defaults():
    x0, n = grid_axis()
    assert (x0, n) == (-12.0, 481)


def test_wavefunction_validation():
    with pytest.raises(InvalidStateError):
        GridWavefunction(0.0, 0.1, np.ones(5))
    with pytest.raises(InvalidStateError):
        GridWavefunction.normalized(0.0, 0.1, np.zeros(10))
    with pytest.raises(InvalidStateError):
        GridWavefunction.normalized(0.0, 0.1, np.ones((3, 4)))
    with pytest.raises(InvalidParameterError):
        GridWavefunction(0.0, 0.0, np.ones(10))
    wf = GridWavefunction.normalized(0.0, 0.1, np.ones((4, 4)))
    assert wf.n_modes == 2
    assert not wf.amps.flags.writeable


def test_gaussian_moments():
    wf = gaussian_wavefunction(0.8, mean_q=1.2, mean_p=-0.7)
    mq, mp, vq, vp = wf.moments()
    assert (mq, mp, vq) == pytest.approx((1.2, -0.7, 0.8), abs=1e-9)
    # pure Gaussian saturates var_q var_p = 1/4
    assert vp == pytest.approx(0.25 / 0.8, rel=1e-6)


@pytest.mark.parametrize("modes", [1, 2])
def test_text_round_trip(modes):
    rng = np.random.default_rng(modes)
    shape = (7,) * modes
    wf = GridWavefunction.normalized(-0.3, 0.1, rng.normal(size=shape) + 1j * rng.normal(size=shape))
    back = loads_wavefunction(dumps_wavefunction(wf))
    assert back.x0 == wf.x0 and back.dx == wf.dx
    np.testing.assert_array_equal(back.amps, wf.amps)


@pytest.mark.parametrize(
    "text",
    ["", "x0=0 dx=0.1\n1 0\n", "x0=0 dx=0.1 n=2\n1 0\n", "x0=0 dx=0.1 n=1\nfoo bar\n", "x0=0 dx=1 n=1\n2 0\n"],
)
def test_text_errors(text):
    with pytest.raises(InvalidStateError):
        loads_wavefunction(text)


@settings(deadline=None)
@given(st.floats(-2, 2), st.floats(-3, 3), st.floats(-3, 3))
def test_position_unitaries_preserve_norm(gamma, eta, s):
    wf = gaussian_wavefunction(0.3, mean_q=0.5)
    for out in (apply_cubic_phase(wf, gamma), apply_shear(wf, eta), apply_momentum_kick(wf, s)):
        assert abs(np.sum(out.probability()) * out.dx - 1) < 1e-9


def test_shear_and_kick_move_momentum():
    wf = gaussian_wavefunction(0.5, mean_q=1.0)
    assert apply_momentum_kick(wf, 0.4).moments()[1] == pytest.approx(0.4, abs=1e-9)
    assert apply_shear(wf, 0.5).moments()[1] == pytest.approx(0.5, abs=1e-9)
    # p -> p + gamma q^2 with <q^2> = 1 + 0.5
    assert apply_cubic_phase(wf, 0.1).moments()[1] == pytest.approx(0.15, abs=1e-6)


def test_resolution_checks():
    check_resolution(gaussian_wavefunction())
    with pytest.raises(GridResolutionError):
        check_resolution(gaussian_wavefunction(0.5, mean_p=60))
    with pytest.raises(GridResolutionError):
        check_resolution(gaussian_wavefunction(20.0))


def test_db_to_var():
    assert db_to_var(0) == 0.5
    assert db_to_var(10) == pytest.approx(0.05)


def _teleport_oracle_fidelity(psi, gamma, db, m):
    # output is psi(x) V(gamma) times the real envelope g(x + m)
    x = psi.x
    g = gaussian_amplitudes(x + m, 0.5 * 10 ** (db / 10)).real
    rho = psi.probability()
    return np.sum(rho * g) ** 2 / (np.sum(rho) * np.sum(rho * g * g))


def test_teleport_identity_at_zero_gamma():
    res = cubic_phase_teleport(gaussian_wavefunction(), 0.0, 15, outcome=0.0)
    assert res.outcome == 0.0
    assert res.fidelity >= 0.999


def test_teleport_fidelity_at_20db():
    res = cubic_phase_teleport(gaussian_wavefunction(), 0.1, 20, rng=3)
    assert res.mean_fidelity >= 0.99
    assert np.sum(res.outcome_density) * (res.outcomes[1] - res.outcomes[0]) == pytest.approx(1.0)


@pytest.mark.parametrize("m", [-6.0, 0.0, 2.5, 9.0])
def test_teleport_fidelity_matches_envelope_oracle(m):
    psi = gaussian_wavefunction(0.7, mean_q=0.4, mean_p=-0.3)
    res = cubic_phase_teleport(psi, 0.1, 12, outcome=m)
    assert res.fidelity == pytest.approx(_teleport_oracle_fidelity(psi, 0.1, 12, res.outcome), abs=1e-9)


def test_teleport_output_state_matches_target_up_to_envelope():
    psi = gaussian_wavefunction(0.5, mean_q=0.5)
    res = cubic_phase_teleport(psi, 0.2, 18, outcome=1.0)
    g = gaussian_amplitudes(psi.x + res.outcome, 0.5 * 10**1.8).real
    expected = GridWavefunction.normalized(psi.x0, psi.dx, apply_cubic_phase(psi, 0.2).amps * g)
    assert expected.fidelity(res.output) == pytest.approx(1.0, abs=1e-12)


def test_teleport_momentum_map():
    psi = gaussian_wavefunction(0.5, mean_q=1.0)
    res = cubic_phase_teleport(psi, 0.1, 20, outcome=0.0)
    assert res.output.moments()[1] == pytest.approx(0.1 * 1.5, abs=1e-2)


def test_teleport_fidelity_monotone_in_squeezing():
    psi = gaussian_wavefunction()
    fids = [cubic_phase_teleport(psi, 0.1, db, outcome=0.0).mean_fidelity for db in (5, 10, 15, 20, 25)]
    assert np.all(np.diff(fids) >= 0)


def test_teleport_sampling_is_seeded():
    psi = gaussian_wavefunction()
    a = cubic_phase_teleport(psi, 0.1, 10, rng=7)
    b = cubic_phase_teleport(psi, 0.1, 10, rng=7)
    assert a.outcome == b.outcome


def test_teleport_errors():
    with pytest.raises(GridResolutionError):
        cubic_phase_teleport(gaussian_wavefunction(), 10.0, 20)
    with pytest.raises(InvalidParameterError):
        cubic_phase_teleport(GridWavefunction.normalized(0.0, 0.1, np.ones((5, 5))), 0.1, 20)
    shifted = GridWavefunction.normalized(-12.01, 0.05, gaussian_amplitudes(-12.01 + 0.05 * np.arange(481), 0.5))
    with pytest.raises(InvalidParameterError):
        cubic_phase_teleport(shifted, 0.1, 20)


def test_gkp_amplitude_peaks():
    x = np.linspace(-8, 8, 16001)
    for logical in (0, 1):
        a = gkp_amplitudes(x, 0.01, 0.02, logical)
        peaks = x[1:-1][(a[1:-1] > a[:-2]) & (a[1:-1] > a[2:]) & (a[1:-1] > 1e-3)]
        expected = np.arange(-8, 9)[np.abs((np.arange(-8, 9) * 2 + logical) * SQRT_PI) < 8]
        np.testing.assert_allclose(peaks, (2 * expected + logical) * SQRT_PI, atol=1e-3)
    with pytest.raises(InvalidParameterError):
        gkp_amplitudes(x, 0.01, 0.02, 2)


def test_gkp_self_overlap():
    wf = gkp_wavefunction(0.1, 0.1, 0, extent=20)
    assert gkp_overlap(wf, 0.05, 0) == pytest.approx(1.0, abs=1e-9)


def test_gkp_logical_states_near_orthogonal():
    wf1 = gkp_wavefunction(0.1, 0.1, 1, extent=20)
    assert gkp_overlap(wf1, 0.05, 0) < 1e-3


def _gaussian_gkp_overlap_oracle(v, sigma2):
    # closed-form Gaussian integrals; amplitude of the state is exp(-x^2/(4v))
    k2 = d2 = 2 * sigma2
    m = np.arange(-30, 31)
    c = 2 * m * SQRT_PI
    w = np.exp(-k2 * c * c / 2)
    a = 1 / (4 * v) + 1 / (2 * d2)
    cross = np.sum(w * np.sqrt(np.pi / a) * np.exp(-(c * c) / (2 * d2) + (c / (2 * d2)) ** 2 / a))
    state_norm = np.sqrt(2 * np.pi * v)
    comb_norm = np.sum(np.outer(w, w) * np.sqrt(np.pi * d2) * np.exp(-np.subtract.outer(c, c) ** 2 / (4 * d2)))
    return cross**2 / (state_norm * comb_norm)


@pytest.mark.parametrize("v", [0.5, 2.0, 8.0])
def test_squeezed_vacuum_overlap(v):
    f = gkp_overlap(gaussian_wavefunction(v, extent=40), 0.05, 0)
    assert 0 < f < 1
    assert f == pytest.approx(_gaussian_gkp_overlap_oracle(v, 0.05), rel=1e-9)


def test_gkp_overlap_errors():
    with pytest.raises(GridResolutionError):
        gkp_overlap(gaussian_wavefunction(), 0.05)
    with pytest.raises(GridResolutionError):
        gkp_overlap(gaussian_wavefunction(extent=60, dx=0.5), 0.01)
    with pytest.raises(InvalidParameterError):
        gkp_overlap(gaussian_wavefunction(), 0.0)


def test_squeezed_cat_peaks():
    cat = squeezed_cat(2.0, 1.0)
    x, rho = cat.x, cat.probability()
    assert count_peaks(cat) == 2
    assert abs(x[np.argmax(rho)]) == pytest.approx(np.sqrt(2) * 2 * np.exp(-1), abs=cat.dx)
    with pytest.raises(InvalidParameterError):
        squeezed_cat(0.0, 1.0)


def test_breeding_zero_rounds_returns_cat():
    res = breeding_round(2.0, 1.0, 0)
    assert res.state.fidelity(squeezed_cat(2.0, 1.0)) == pytest.approx(1.0, abs=1e-12)
    assert res.acceptance == [] and len(res.fidelity) == 1


def test_breeding_one_round_three_peaks():
    res = breeding_round(2.0, 1.0, 1)
    assert count_peaks(res.state) == 3
    assert len(res.acceptance) == 1 and 0 < res.acceptance[0] < 1


def _peak_sum(x, peaks, var):
    return sum(gaussian_amplitudes(x - c, var) for c in peaks)


def test_breed_step_matches_peak_oracle():
    # the p = 0 branch of two Gaussian combs with peaks a, b is a comb with
    # peaks (a + b)/sqrt2 and unchanged width
    alpha, r = 2.0, 1.0
    c, var = np.sqrt(2) * alpha * np.exp(-r), 0.5 * np.exp(-2 * r)
    cat = squeezed_cat(alpha, r)
    out, acc = breed_step(cat, 0.05)
    peaks = [(a + b) / np.sqrt(2) for a in (-c, c) for b in (-c, c)]
    ref = GridWavefunction.normalized(cat.x0, cat.dx, _peak_sum(cat.x, peaks, var))
    assert ref.fidelity(out) == pytest.approx(1.0, abs=1e-10)

    # acceptance: integrate the exact outcome density over the window
    norm2 = np.sum(np.abs(_peak_sum(cat.x, [-c, c], var)) ** 2) * cat.dx

    def density(p):
        ghat = (2 * np.pi * var) ** -0.25 * np.sqrt(4 * np.pi * var) * np.exp(-var * p * p)
        amp = sum(
            gaussian_amplitudes(cat.x - (a + b) / np.sqrt(2), var) * np.exp(-1j * p * (b - a) / np.sqrt(2))
            for a in (-c, c)
            for b in (-c, c)
        )
        return np.sum(np.abs(amp * ghat) ** 2) * cat.dx / (2 * np.pi * norm2**2)

    assert acc == pytest.approx(quad(density, -0.05, 0.05, epsabs=1e-14)[0], rel=1e-5)


def test_breeding_spacing_shrinks_by_sqrt2():
    cat = squeezed_cat(4.0, 1.5, extent=16)
    once, _ = breed_step(cat, 0.05)
    twice, _ = breed_step(once, 0.05)

    def spacing(wf):
        rho = wf.probability()
        i = np.flatnonzero((rho[1:-1] > rho[:-2]) & (rho[1:-1] >= rho[2:]) & (rho[1:-1] > 0.05 * rho.max())) + 1
        return np.min(np.diff(wf.x[i]))

    c = np.sqrt(2) * 4.0 * np.exp(-1.5)
    assert spacing(once) == pytest.approx(np.sqrt(2) * c, abs=2 * cat.dx)
    assert spacing(twice) == pytest.approx(c, abs=2 * cat.dx)


def test_breeding_first_round_approaches_gkp():
    res = breeding_round(2.5, 1.0, 1)
    assert res.fidelity[1] > res.fidelity[0]


def test_breeding_window_validation():
    with pytest.raises(InvalidParameterError):
        breeding_round(2.0, 1.0, 1, epsilon=0.0)
    with pytest.raises(InvalidParameterError):
        breed_step(squeezed_cat(2.0, 1.0), -0.1)


def test_count_peaks_threshold():
    # the threshold applies to |psi|^2, so the small peak has relative height 0.25
    wf = GridWavefunction.from_function(
        lambda x: gaussian_amplitudes(x - 2, 0.1) + 0.5 * gaussian_amplitudes(x + 2, 0.1)
    )
    assert count_peaks(wf) == 2
    assert count_peaks(wf, threshold=0.3) == 1
