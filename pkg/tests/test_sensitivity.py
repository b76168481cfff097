import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulseorigin.constants import K_EFF, OMEGA0, TAU_BS
from pulseorigin.errors import OpenInterferometerError
from pulseorigin.sequence import (interferometer_phase, mach_zehnder, perfect_mirror,
                                  rectangular_sequence)
from pulseorigin.sensitivity import (dead_time, is_closed, pulse_origins,
                                     rectangular_scale_factor, scale_factor_exact,
                                     scale_factor_open, scale_factor_report,
                                     scale_factor_trapezoidal, scale_factor_triangular,
                                     sensitivity_function)

from conftest import phase_waveform, random_waveform


def test_g_is_plus_minus_one_in_dark_periods():
    seq = rectangular_sequence(1e-3)
    prof = sensitivity_function(seq)
    (_, e1), (s2, e2), (s3, _) = seq.windows
    first = (prof.times > e1) & (prof.times < s2)
    second = (prof.times > e2) & (prof.times < s3)
    assert np.allclose(prof.g[first], -1, atol=1e-9)
    assert np.allclose(prof.g[second], 1, atol=1e-9)


def test_h_vanishes_outside_a_closed_sequence():
    seq = rectangular_sequence(1e-3)
    prof = sensitivity_function(seq)
    assert abs(prof.h[0]) < 1e-12 and abs(prof.h[-1]) < 1e-12
    assert is_closed(seq)


def test_finite_phase_step_matches_analytic_g():
    seq = mach_zehnder(random_waveform(2, 20, 0.9), 2e-4)
    t = np.linspace(seq.t_i, seq.t_end, 57)
    a = sensitivity_function(seq, grid=t).g
    f = sensitivity_function(seq, grid=t, phase_step=1e-4).g
    assert np.allclose(a, f, atol=1e-6)


@given(st.floats(0.5e-3, 100e-3))
def test_rectangular_closed_form(T):
    seq = rectangular_sequence(T)
    S = scale_factor_exact(seq)
    assert S == pytest.approx(rectangular_scale_factor(OMEGA0, TAU_BS, T), rel=1e-9)


@given(st.floats(0.5e-3, 100e-3))
def test_trapezoid_is_exact_for_rectangular_mirror(T):
    rep = scale_factor_report(rectangular_sequence(T))
    assert abs(rep.trapezoidal / rep.exact - 1) < 1e-9
    assert abs(rep.ppm_triangular_origins) < abs(rep.ppm_triangular_midpoints)


def test_perfect_mirror_has_no_dead_time():
    seq = rectangular_sequence(5e-3, mirror="perfect")
    assert dead_time(seq) == 0.0
    assert scale_factor_trapezoidal(seq) == scale_factor_triangular(seq)
    # what is left is the beamsplitters' second-order shape term
    assert scale_factor_triangular(seq) == pytest.approx(scale_factor_exact(seq), rel=1e-6)


def test_origins_replace_midpoints():
    seq = rectangular_sequence(5e-3)
    o1, o2, o3 = pulse_origins(seq)
    assert o1 == pytest.approx(TAU_BS - 1 / OMEGA0)
    assert o2 == pytest.approx(TAU_BS)
    assert o3 == pytest.approx(1 / OMEGA0)


def test_open_sequence_needs_open_formula():
    seq = rectangular_sequence(5e-3).with_eps(eps3=-0.05)
    assert not is_closed(seq)
    with pytest.raises(OpenInterferometerError):
        scale_factor_exact(seq)
    S, cv = scale_factor_open(seq, seq.t_i)
    assert cv != 0
    t0 = seq.windows[1][0] + pulse_origins(seq)[1]
    assert scale_factor_report(seq).exact == pytest.approx(scale_factor_open(seq, t0)[0])
    with pytest.raises(ValueError):
        scale_factor_open(seq, seq.t_end + 1)


@given(st.floats(-0.3, 0.3), st.floats(0.2e-3, 2e-3))
def test_spin_echo_closure(d_rel, T):
    """A balanced sequence cancels any constant detuning."""
    seq = rectangular_sequence(T)
    assert abs(interferometer_phase(seq, d_rel * OMEGA0)) < 1e-9


@given(st.integers(0, 1000))
def test_flip_reverse_sequences_cancel_constant_detuning(seed):
    seq = mach_zehnder(phase_waveform(seed, 20, 0.9), 1e-3, mirror=perfect_mirror())
    assert abs(interferometer_phase(seq, 0.2 * OMEGA0)) < 1e-9


def test_profile_csv_and_h_tilde(tmp_path):
    seq = rectangular_sequence(1e-4)
    prof = sensitivity_function(seq)
    t0 = 0.5 * (seq.t_i + seq.t_end)
    ht = prof.h_tilde(t0)
    assert ht.shape == prof.h.shape
    prof.write_csv(tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[0].startswith("t_s")


def test_scale_factor_units():
    # k T^2 dominates for T >> tau
    S = scale_factor_exact(rectangular_sequence(20e-3))
    assert S == pytest.approx(K_EFF * 20e-3 ** 2, rel=5e-3)
