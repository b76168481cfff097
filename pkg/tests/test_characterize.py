import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulseorigin.characterize import (Role, characterize, dispersion_gradient,
                                      origin_from_gradient, rectangular_origin_analytic,
                                      superposition_phase, temporal_origin,
                                      transfer_probability)
from pulseorigin.constants import OMEGA0, SLICE_DT, TAU_BS
from pulseorigin.dynamics import Waveform, rectangular, rectangular_area
from pulseorigin.errors import SingularityError, UndefinedPhaseError
from pulseorigin.optimize import flip_reverse
from pulseorigin.sequence import mach_zehnder
from pulseorigin.sensitivity import sensitivity_function

from conftest import phase_waveform, random_waveform


def test_rectangular_origin_matches_closed_form():
    w = rectangular_area(np.pi / 2, OMEGA0, SLICE_DT)
    assert temporal_origin(w) == pytest.approx(TAU_BS - 1 / OMEGA0, rel=1e-8)
    assert temporal_origin(w) == pytest.approx(3.6338e-6, abs=1e-9)


@given(st.floats(0.5, 1.5))
def test_rectangular_origin_over_amplitude(scale):
    w = rectangular(OMEGA0, TAU_BS)
    num = temporal_origin(w, eps=scale - 1)
    assert num == pytest.approx(rectangular_origin_analytic(scale * OMEGA0, TAU_BS), abs=1e-12)


def test_origin_shift_over_ten_percent():
    w = rectangular(OMEGA0, TAU_BS)
    shift = temporal_origin(w, eps=-0.1) - temporal_origin(w, eps=0.1)
    assert shift == pytest.approx(735e-9, rel=5e-3)


def test_analytic_origin_pole():
    with pytest.raises(SingularityError):
        rectangular_origin_analytic(OMEGA0, np.pi / OMEGA0)


def test_superposition_phase_of_rectangular_pulse():
    w = rectangular(OMEGA0, TAU_BS)
    assert superposition_phase(w, 0.0) == 0.0
    d = 0.01 * OMEGA0
    slope = (superposition_phase(w, d) - superposition_phase(w, -d)) / (2 * d)
    assert slope == pytest.approx(dispersion_gradient(w), rel=1e-4)


def test_undefined_phase_at_pole():
    w = rectangular_area(np.pi, OMEGA0)
    with pytest.raises(UndefinedPhaseError):
        superposition_phase(w, 0.0)


def test_role_conventions():
    w = random_waveform(5, 30, 0.8)
    m = dispersion_gradient(w)
    assert origin_from_gradient(m, w.duration, Role.BEAMSPLITTER_1) == pytest.approx(w.duration + m)
    assert origin_from_gradient(m, w.duration, Role.BEAMSPLITTER_3) == pytest.approx(m)
    assert origin_from_gradient(m, w.duration, Role.MIRROR) == pytest.approx((w.duration - m) / 2)
    mirror = rectangular_area(np.pi, OMEGA0, SLICE_DT)
    assert temporal_origin(mirror, Role.MIRROR) == pytest.approx(mirror.duration / 2, abs=1e-12)


@given(st.integers(0, 5000))
def test_flip_reverse_negates_gradient(seed):
    w = phase_waveform(seed, 25, 0.9)
    m1 = dispersion_gradient(w)
    m3 = dispersion_gradient(flip_reverse(w), role=Role.BEAMSPLITTER_3)
    assert abs(m3 + m1) < 1e-9


@given(st.integers(0, 5000), st.floats(-1.5, 1.5))
def test_flip_reverse_transfer_at_mirrored_detuning(seed, d):
    w = random_waveform(seed, 25)
    assert transfer_probability(flip_reverse(w), -d * OMEGA0) == pytest.approx(
        transfer_probability(w, d * OMEGA0), abs=1e-12)


@given(st.integers(0, 5000), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
def test_gradient_equals_g_area(seed, e1, e3):
    """m of each pulse is the area under g during that pulse."""
    w = phase_waveform(seed, 25, 0.9, e1)
    seq = mach_zehnder(w, 1e-3, eps=(e1, 0.0, e3))
    prof = sensitivity_function(seq, grid=np.array([seq.t_i]))
    m1 = dispersion_gradient(w, e1)
    m3 = dispersion_gradient(seq.pulse3, e3, Role.BEAMSPLITTER_3)
    a1, a2, a3 = prof.pulse_areas
    assert a1 == pytest.approx(m1, rel=1e-3)
    assert a3 == pytest.approx(m3, rel=1e-3)
    assert abs(a2) < 1e-3 * abs(m1)
    assert prof.h_start == pytest.approx(a1 + a2 + a3, rel=1e-3, abs=1e-12)


def test_characterize_report(tmp_path):
    w = rectangular_area(np.pi / 2, OMEGA0, SLICE_DT)
    rep = characterize(w)
    assert rep.tau_origin == pytest.approx(temporal_origin(w))
    assert rep.deltas.size == 301
    assert np.all(rep.transfer <= 1 + 1e-12)
    rep.write_json(tmp_path / "c.json")
    rep.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().startswith("delta_rad_s,phi_rad,p_e")
    assert rep.to_dict()["m_s"] == rep.m


def test_characterize_keeps_nan_for_poles():
    w = rectangular(OMEGA0, TAU_BS)
    # generalised Rabi frequency 4 omega0 brings the state back to |g>
    rep = characterize(w, deltas=np.array([0.0, 0.1 * OMEGA0, np.sqrt(15) * OMEGA0]))
    assert np.isnan(rep.dispersion[2])
    assert np.all(np.isfinite(rep.dispersion[:2]))
