import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from pulseorigin.characterize import Role, dispersion_gradient, temporal_origin
from pulseorigin.constants import OMEGA0, SLICE_DT, TAU_BS
from pulseorigin.dynamics import Waveform, rectangular, rectangular_area
from pulseorigin.errors import InvalidInputError
from pulseorigin.optimize import (OptimizationConfig, batch_sweep, ensemble_fidelity,
                                  fidelity, fidelity_gradient, fidelity_map, flip_reverse,
                                  initial_amplitudes, objective, optimize_beamsplitter,
                                  penalty, resonant_gradient, sweep_configs,
                                  write_sweep_csv)
from pulseorigin.sequence import closure_defect, mach_zehnder

from conftest import phase_waveform, random_waveform

SX = np.array([[0, 1], [1, 0]], complex)
SZ = np.diag([1.0 + 0j, -1.0])


def _brute_fidelity(w, delta, eps, m):
    psi = np.array([1, 0], complex)
    for a in w.slices:
        psi = expm(-0.5j * w.dt * ((1 + eps) * a * SX - delta * SZ)) @ psi
    theta = -np.pi / 2 + m * delta
    chi = np.array([1, np.exp(1j * theta)]) / np.sqrt(2)
    return abs(np.vdot(chi, psi)) ** 2


def test_ideal_pulse_and_identity():
    w = rectangular(OMEGA0, TAU_BS)
    for m in (0.0, -3e-6, 1e-5):
        assert fidelity(w, 0.0, 0.0, m) == pytest.approx(1.0)
    idle = Waveform([0.0], 1e-6, OMEGA0)
    assert fidelity(idle, 0.0) == pytest.approx(0.5)


@given(st.integers(0, 1000), st.floats(-1.5, 1.5), st.floats(-0.1, 0.1))
def test_fidelity_matches_state_propagation(seed, d, e):
    w = random_waveform(seed, 12)
    m = dispersion_gradient(rectangular(OMEGA0, TAU_BS))
    assert fidelity(w, d * OMEGA0, e, m) == pytest.approx(
        _brute_fidelity(w, d * OMEGA0, e, m), abs=1e-12)


def test_single_point_ensemble_equals_fidelity():
    w = random_waveform(4, 50)
    cfg = OptimizationConfig(duration_tpi=1.0, n_delta=1, n_eps=1)
    assert ensemble_fidelity(w, cfg) == pytest.approx(fidelity(w, 0.0, 0.0, cfg.target_m))


def test_ensemble_over_amplitude_error_closed_form():
    # one short resonant slice: F(eps) = (1 + cos(pi eps / 2)) / 2
    cfg = OptimizationConfig(duration_tpi=0.5, slices_per_tpi=2, n_delta=1, n_eps=11)
    w = Waveform([OMEGA0], TAU_BS, OMEGA0)
    eps = cfg.epsilons()
    assert ensemble_fidelity(w, cfg) == pytest.approx(np.mean((1 + np.cos(np.pi * eps / 2)) / 2))
    assert fidelity_map(w, cfg).shape == (cfg.n_delta, cfg.n_eps)


@given(st.integers(0, 10_000))
def test_gradient_matches_finite_differences(seed):
    cfg = OptimizationConfig(duration_tpi=0.4, n_delta=5, n_eps=3)
    w = random_waveform(seed, cfg.n_slices)
    w = Waveform(w.slices, cfg.dt, OMEGA0)
    g = fidelity_gradient(w, cfg)
    h = 1e-3 * OMEGA0 * 1e-3
    fd = np.empty_like(g)
    for n in range(len(w)):
        up, down = w.slices.copy(), w.slices.copy()
        up[n] += h
        down[n] -= h
        fd[n] = (ensemble_fidelity(w.with_slices(up), cfg)
                 - ensemble_fidelity(w.with_slices(down), cfg)) / (2 * h)
    assert np.max(np.abs(fd - g)) / np.max(np.abs(g)) < 1e-6


def test_zero_waveform_gradient_is_uniform_on_resonance():
    cfg = OptimizationConfig(duration_tpi=0.5, n_delta=1, n_eps=3)
    w = Waveform(np.zeros(cfg.n_slices), cfg.dt, OMEGA0)
    g = fidelity_gradient(w, cfg)
    assert np.allclose(g, g[0], rtol=1e-12)


@given(st.integers(0, 1000))
def test_penalty_gradient(seed):
    cfg = OptimizationConfig(duration_tpi=0.5, origin_weight=1e3, headroom=0.0)
    u = np.random.default_rng(seed).uniform(-1.3, 1.3, cfg.n_slices)
    v, g = penalty(u, cfg)
    h = 1e-6
    fd = np.array([(penalty(u + h * e, cfg)[0] - penalty(u - h * e, cfg)[0]) / (2 * h)
                   for e in np.eye(u.size)])
    assert np.max(np.abs(fd - g)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_penalty_forms():
    cfg = OptimizationConfig(duration_tpi=0.5)
    u = np.zeros(cfg.n_slices)
    u[3] = 1.5
    v, _ = penalty(u, cfg)
    assert v == pytest.approx(cfg.smoothness_weight * 2 * 1.5 ** 2 + cfg.peak_weight * 0.25)


@given(st.integers(0, 1000), st.floats(-0.1, 0.1))
def test_resonant_gradient_matches_characterization(seed, e):
    w = phase_waveform(seed, 30, 0.9, e)
    ref = dispersion_gradient(w, e)
    m, _ = resonant_gradient(w.slices / OMEGA0, w.dt, OMEGA0, e)
    assert m == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_config_validation_and_round_trip():
    cfg = OptimizationConfig(duration_tpi=1.5, rng_seed=3)
    assert cfg.n_slices == 75 and cfg.dt == pytest.approx(SLICE_DT)
    assert OptimizationConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(InvalidInputError):
        OptimizationConfig.from_dict({"durations": 2})
    with pytest.raises(InvalidInputError):
        OptimizationConfig(duration_tpi=1.01)
    with pytest.raises(InvalidInputError):
        OptimizationConfig(origin_fraction=None, m_target=None)
    with pytest.raises(InvalidInputError):
        OptimizationConfig(eps_range=-0.1)
    pp = OptimizationConfig(origin_fraction=1.0)
    assert pp.target_m == 0.0 and pp.target_origin == pytest.approx(pp.duration)
    assert OptimizationConfig(origin_fraction=None, m_target=-1e-6).target_m == -1e-6


def test_initial_amplitudes_are_seeded_and_smoothed():
    cfg = OptimizationConfig()
    a, b = initial_amplitudes(cfg), initial_amplitudes(cfg)
    assert np.array_equal(a, b)
    assert np.max(np.abs(a)) <= cfg.init_scale
    assert not np.array_equal(a, initial_amplitudes(cfg, seed=1))


def test_zero_iterations_echo_initial_waveform():
    cfg = OptimizationConfig(duration_tpi=1.0, max_iterations=0)
    res = optimize_beamsplitter(cfg)
    assert np.array_equal(res.waveform.slices, initial_amplitudes(cfg) * OMEGA0)
    assert res.terminal_infidelity == pytest.approx(1 - ensemble_fidelity(res.waveform, cfg))
    assert not res.converged


def test_initial_waveform_must_match_grid():
    cfg = OptimizationConfig(duration_tpi=1.0, max_iterations=1)
    with pytest.raises(InvalidInputError):
        optimize_beamsplitter(cfg, initial=random_waveform(0, 7))


@pytest.fixture(scope="module")
def short_run():
    cfg = OptimizationConfig(duration_tpi=2.0, max_iterations=400)
    return cfg, optimize_beamsplitter(cfg)


def test_optimizer_is_deterministic(short_run):
    cfg, res = short_run
    again = optimize_beamsplitter(cfg)
    assert np.array_equal(again.waveform.slices, res.waveform.slices)


def test_optimizer_beats_rectangular_pulse(short_run):
    cfg, res = short_run
    rect = rectangular_area(np.pi / 2, OMEGA0, SLICE_DT)
    rect_cfg = replace(cfg, duration_tpi=0.5, origin_fraction=None,
                       m_target=dispersion_gradient(rect))
    assert res.terminal_infidelity < 1 - ensemble_fidelity(rect, rect_cfg)


def test_objective_history_is_monotone(short_run):
    _, res = short_run
    h = np.array(res.objective_history)
    assert np.all(np.diff(h) <= 1e-15)


def test_peak_constraint_holds(short_run):
    _, res = short_run
    assert res.waveform.peak <= OMEGA0 * (1 + 1e-3)


def test_origin_targeting(short_run):
    cfg, res = short_run
    assert temporal_origin(res.waveform) == pytest.approx(cfg.target_origin, rel=0.02)


def test_result_serialises(short_run, tmp_path):
    _, res = short_run
    res.write_json(tmp_path / "r.json")
    d = res.to_dict()
    assert d["iterations_used"] == res.iterations_used
    assert len(d["waveform"]["slices_rad_s"]) == len(res.waveform)


def test_non_finite_objective_aborts(monkeypatch):
    import pulseorigin.optimize as opt
    cfg = OptimizationConfig(duration_tpi=0.5, max_iterations=5)
    monkeypatch.setattr(opt, "objective", lambda u, c: (np.nan, np.zeros_like(u)))
    with pytest.raises(FloatingPointError):
        opt.optimize_beamsplitter(cfg)


def test_flip_reverse_of_rectangle():
    w = rectangular_area(np.pi / 2, OMEGA0, SLICE_DT)
    fr = flip_reverse(w)
    assert np.array_equal(fr.slices, -w.slices)
    assert flip_reverse(fr) == w


@given(st.integers(0, 1000), st.floats(-0.1, 0.1))
def test_flip_reverse_closure_contract(seed, e):
    w = phase_waveform(seed, 20, 0.9, e)
    assert abs(closure_defect(mach_zehnder(w, 1e-3, eps=(e, 0.0, e)))) < 1e-9
    m3 = dispersion_gradient(flip_reverse(w), e, Role.BEAMSPLITTER_3)
    assert abs(m3 + dispersion_gradient(w, e)) < 1e-9


def test_sweep_layout(tmp_path):
    assert batch_sweep([], [0.4], 3) == []
    cfgs = sweep_configs([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0],
                         [1.0, 0.2, 0.4, 0.6, 0.8], 7)
    assert len({c.duration_tpi for c in cfgs}) == 14
    assert len(cfgs) == 14 * 5 * 7
    base = OptimizationConfig(max_iterations=3)
    rows = batch_sweep([0.5], [1.0, 0.4], 2, base, with_contrast=True)
    assert [(r["origin_fraction"], r["seed"]) for r in rows] == [(1.0, 0), (1.0, 1), (0.4, 0), (0.4, 1)]
    assert all(0 <= r["contrast"] <= 1 for r in rows)
    write_sweep_csv(rows, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0].startswith("duration_tpi")
