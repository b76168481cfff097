import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from pulseorigin.constants import OMEGA0, SLICE_DT
from pulseorigin.dynamics import (FieldVector, TwoLevelState, Waveform, bloch_coords,
                                  evolve_free, phase_kick_su2, rectangular,
                                  rectangular_area, rotation_su2, slice_propagator,
                                  su2_matrix, su2_mul, transfer_from_su2,
                                  waveform_propagator, waveform_su2)
from pulseorigin.errors import InvalidInputError

from conftest import random_waveform

SX = np.array([[0, 1], [1, 0]], complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0 + 0j, -1.0])

freq = st.floats(-3 * OMEGA0, 3 * OMEGA0, allow_nan=False)
dts = st.floats(1e-9, 50e-6)


@given(freq, freq, freq, dts)
def test_rotation_is_unitary(x, y, z, dt):
    al, be = rotation_su2(x, y, z, dt)
    assert abs(abs(al) ** 2 + abs(be) ** 2 - 1) < 1e-12


@given(freq, freq, freq, dts)
def test_rotation_matches_matrix_exponential(x, y, z, dt):
    ref = expm(-0.5j * dt * (x * SX + y * SY + z * SZ))
    assert np.allclose(su2_matrix(rotation_su2(x, y, z, dt)), ref, atol=1e-10)


@given(freq, freq, dts, dts)
def test_rotations_compose_over_time(x, z, t1, t2):
    joint = su2_matrix(rotation_su2(x, 0.0, z, t1 + t2))
    split = su2_matrix(su2_mul(rotation_su2(x, 0.0, z, t2), rotation_su2(x, 0.0, z, t1)))
    assert np.allclose(joint, split, atol=1e-12)


@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-0.3, 0.3))
def test_waveform_propagator_unitary(seed, d, e):
    u = waveform_propagator(random_waveform(seed, 30), d * OMEGA0, e)
    assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-12)


@given(st.floats(0.2, 2.0), st.floats(-2, 2), st.floats(0.1e-6, 40e-6))
def test_rabi_formula(omega_rel, d_rel, t):
    omega, delta = omega_rel * OMEGA0, d_rel * OMEGA0
    w = rectangular(omega, t, n_slices=3)
    gen = np.hypot(omega, delta)
    expected = (omega / gen) ** 2 * np.sin(gen * t / 2) ** 2
    assert abs(float(transfer_from_su2(waveform_su2(w, delta))) - expected) < 1e-12


def test_broadcast_matches_scalar_calls():
    w = random_waveform(1)
    d = np.linspace(-OMEGA0, OMEGA0, 5)
    al, be = waveform_su2(w, d[:, None], np.array([-0.1, 0.0, 0.1])[None, :])
    for i, di in enumerate(d):
        a1, b1 = waveform_su2(w, di, 0.1)
        assert np.isclose(al[i, 2], a1) and np.isclose(be[i, 2], b1)


def test_free_evolution_phase_advances_by_minus_delta_t():
    s = TwoLevelState.superposition(0.3)
    out = evolve_free(s, 2e3, 1e-4)
    assert out.relative_phase == pytest.approx(0.3 - 0.2)
    assert out.norm == pytest.approx(1.0)


def test_phase_kick_equals_free_evolution():
    s = TwoLevelState.superposition(0.0)
    u = su2_matrix(phase_kick_su2(0.7))
    assert s.evolve(u).relative_phase == pytest.approx(-0.7)


def test_resonant_pi_over_2_writes_minus_half_pi():
    w = rectangular_area(np.pi / 2, OMEGA0)
    state = TwoLevelState.ground().evolve(waveform_propagator(w))
    assert state.relative_phase == pytest.approx(-np.pi / 2)
    assert bloch_coords(TwoLevelState.ground()) == pytest.approx((0, 0, 1))


def test_slice_propagator_uses_field_vector():
    f = FieldVector.from_control(OMEGA0, delta=0.5 * OMEGA0, phase=0.4)
    ref = expm(-0.5j * 1e-6 * (f.x * SX + f.y * SY + f.z * SZ))
    assert np.allclose(slice_propagator(f, 1e-6), ref)
    with pytest.raises(InvalidInputError):
        slice_propagator(f, 0.0)
    with pytest.raises(InvalidInputError):
        FieldVector(np.nan)


def test_waveform_validation():
    with pytest.raises(InvalidInputError):
        Waveform([1.0, np.inf], 1e-6, OMEGA0)
    with pytest.raises(InvalidInputError):
        Waveform([1.0], 0.0, OMEGA0)
    with pytest.raises(InvalidInputError):
        Waveform([1.0], 1e-6, -1.0)
    with pytest.raises(InvalidInputError):
        waveform_su2(Waveform([], 1e-6, OMEGA0))
    with pytest.raises(InvalidInputError):
        rectangular_area(np.pi / 2, OMEGA0, dt=3e-7)


def test_waveform_properties():
    w = rectangular_area(np.pi / 2, OMEGA0, SLICE_DT)
    assert len(w) == 25
    assert w.duration == pytest.approx(10e-6)
    assert w.area == pytest.approx(np.pi / 2)
    assert w.within_peak_limit
    assert not w.scaled(1.01).within_peak_limit
    assert len(w + w) == 50


@given(seed=st.integers(0, 10_000))
def test_json_round_trip_is_exact(tmp_path_factory, seed):
    w = random_waveform(seed, 17)
    path = tmp_path_factory.mktemp("wf") / "w.json"
    w.save(path)
    back = Waveform.load(path)
    assert back == w
    assert np.array_equal(back.slices, w.slices)


def test_malformed_json_raises(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InvalidInputError):
        Waveform.load(p)
    p.write_text(json.dumps({"dt_s": 1e-6}))
    with pytest.raises(InvalidInputError):
        Waveform.load(p)
