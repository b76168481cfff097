"""GRAPE design of beamsplitters with a chosen temporal origin.

The control is one signed real amplitude per slice (laser phase 0 or pi).
The target after the pulse is the equal superposition whose phase is linear
in detuning with slope ``m_target``::

    (|g> + exp(i theta)|e>) / sqrt(2),   theta = -pi/2 + m_target * delta

The ``-pi/2`` is the phase a resonant x-rotation writes onto ``|g>`` in this
package's frame, so the ideal pi/2 pulse has unit fidelity for any target.
Fidelities are averaged with uniform weights over a detuning by amplitude
error grid and maximised with L-BFGS-B using exact gradients.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .constants import OMEGA0, T_PI
from .dynamics import Waveform, rotation_su2, waveform_su2
from .errors import InvalidInputError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizationConfig:
    """Settings for one beamsplitter optimization.

    Give the target either as ``origin_fraction`` (``tau_o / tau``) or as
    ``m_target`` in seconds; the fraction wins when both are set.
    """

    duration_tpi: float = 2.0
    slices_per_tpi: int = 50
    omega0: float = OMEGA0
    origin_fraction: float | None = 0.4
    m_target: float | None = None
    delta_range: float = 1.5      # in units of omega0
    eps_range: float = 0.10
    n_delta: int = 15
    n_eps: int = 11
    max_iterations: int = 400
    smoothness_weight: float = 1e-3
    peak_weight: float = 1e2
    origin_weight: float = 0.0    # spread of the resonant origin over eps
    headroom: float = 0.0
    memory: int = 20
    gtol: float = 1e-8
    rng_seed: int = 0
    init_scale: float = 0.5       # random start drawn from +-init_scale

    def __post_init__(self):
        if not self.omega0 > 0:
            raise InvalidInputError("omega0 must be positive")
        if not self.duration_tpi > 0 or self.slices_per_tpi < 1:
            raise InvalidInputError("duration and slice count must be positive")
        n = self.duration_tpi * self.slices_per_tpi
        if abs(n - round(n)) > 1e-9:
            raise InvalidInputError("duration is not a whole number of slices")
        if self.n_delta < 1 or self.n_eps < 1 or self.max_iterations < 0:
            raise InvalidInputError("bad ensemble size or iteration count")
        if self.delta_range < 0 or self.eps_range < 0:
            raise InvalidInputError("ensemble ranges are half-widths and must be >= 0")
        if self.origin_fraction is None and self.m_target is None:
            raise InvalidInputError("set origin_fraction or m_target")

    @property
    def t_pi(self) -> float:
        return np.pi / self.omega0

    @property
    def n_slices(self) -> int:
        return int(round(self.duration_tpi * self.slices_per_tpi))

    @property
    def dt(self) -> float:
        return self.t_pi / self.slices_per_tpi

    @property
    def duration(self) -> float:
        return self.n_slices * self.dt

    @property
    def target_m(self) -> float:
        """Dispersion gradient of the target, ``tau_o - tau``."""
        if self.origin_fraction is not None:
            return (self.origin_fraction - 1.0) * self.duration
        return float(self.m_target)

    @property
    def target_origin(self) -> float:
        return self.duration + self.target_m

    def deltas(self) -> np.ndarray:
        return _grid(self.delta_range * self.omega0, self.n_delta)

    def epsilons(self) -> np.ndarray:
        return _grid(self.eps_range, self.n_eps)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise InvalidInputError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)


def _grid(half_width: float, n: int) -> np.ndarray:
    return np.zeros(1) if n == 1 else np.linspace(-half_width, half_width, n)


# --- fidelity and its gradient ---------------------------------------------

def _target_row(delta, m_target):
    """Row vector ``<chi|`` of the target superposition."""
    theta = -0.5 * np.pi + m_target * delta
    s = 1 / np.sqrt(2)
    return np.full(np.shape(theta), s, dtype=complex), s * np.exp(-1j * theta)


def fidelity(w: Waveform, delta=0.0, eps=0.0, m_target: float = 0.0):
    """State-to-state fidelity against the linear-dispersion target."""
    al, be = waveform_su2(w, delta, eps)
    r0, r1 = _target_row(np.asarray(delta, float), m_target)
    a = r0 * al + r1 * (-np.conj(be))
    return np.abs(a) ** 2


def _ensemble(cfg: OptimizationConfig):
    d, e = np.meshgrid(cfg.deltas(), cfg.epsilons(), indexing="ij")
    return d.ravel(), e.ravel()


def _c_series(phi):
    """``(cos phi - sin phi / phi) / phi^2`` without cancellation near 0."""
    small = np.abs(phi) < 1e-2
    p = np.where(small, 1.0, phi)
    exact = (np.cos(p) - np.sin(p) / p) / (p * p)
    p2 = phi * phi
    series = -1 / 3 + p2 / 30 - p2 * p2 / 840
    return np.where(small, series, exact)


def _fidelity_and_grad(amps, dt, deltas, eps, m_target):
    """Fidelity per ensemble member and ``dF/dOmega_n`` (rad/s)^-1.

    ``amps`` has shape (M,), ensemble arrays shape (E,). Returns (E,) and
    (M, E).
    """
    M = amps.size
    scale = 1.0 + eps
    x = amps[:, None] * scale[None, :]
    z = np.broadcast_to(-deltas[None, :], x.shape)
    al, be = rotation_su2(x, 0.0, z, dt)
    norm = np.sqrt(x * x + z * z)
    phi = 0.5 * norm * dt
    q = 0.5 * dt * np.sinc(phi / np.pi)
    r = (0.5 * dt) ** 3 * _c_series(phi)
    d_al = -0.5 * dt * q * x - 1j * z * x * r
    d_be = -1j * (q + x * x * r)
    # forward states psi_n, n = 0..M
    cg = np.empty((M + 1, deltas.size), complex)
    ce = np.empty_like(cg)
    cg[0], ce[0] = 1.0, 0.0
    for n in range(M):
        cg[n + 1] = al[n] * cg[n] + be[n] * ce[n]
        ce[n + 1] = -np.conj(be[n]) * cg[n] + np.conj(al[n]) * ce[n]
    r0, r1 = _target_row(deltas, m_target)
    a = r0 * cg[M] + r1 * ce[M]
    grad = np.empty((M, deltas.size))
    # backward costate rows, lambda_n = <chi| U_M ... U_{n+1}
    l0, l1 = r0, r1
    for n in range(M - 1, -1, -1):
        da = (l0 * (d_al[n] * cg[n] + d_be[n] * ce[n])
              + l1 * (-np.conj(d_be[n]) * cg[n] + np.conj(d_al[n]) * ce[n]))
        grad[n] = 2.0 * np.real(np.conj(a) * da) * scale
        l0, l1 = l0 * al[n] - l1 * np.conj(be[n]), l0 * be[n] + l1 * np.conj(al[n])
    return np.abs(a) ** 2, grad


def ensemble_fidelity(w: Waveform, cfg: OptimizationConfig) -> float:
    """Uniform mean of the fidelity over the config's (delta, eps) grid."""
    d, e = _ensemble(cfg)
    return float(np.mean(fidelity(w, d, e, cfg.target_m)))


def fidelity_map(w: Waveform, cfg: OptimizationConfig) -> np.ndarray:
    """Fidelity on the ensemble grid, shape ``(n_delta, n_eps)``."""
    d, e = _ensemble(cfg)
    return fidelity(w, d, e, cfg.target_m).reshape(cfg.n_delta, cfg.n_eps)


def fidelity_gradient(w: Waveform, cfg: OptimizationConfig) -> np.ndarray:
    """Exact gradient of the ensemble fidelity w.r.t. each slice amplitude."""
    d, e = _ensemble(cfg)
    _, g = _fidelity_and_grad(np.asarray(w.slices, float), w.dt, d, e, cfg.target_m)
    return g.mean(axis=1)


def resonant_gradient(u: np.ndarray, dt: float, omega0: float, eps=0.0):
    """Resonant dispersion gradient ``m`` of a signed x-only waveform.

    With a real control the state stays on one great circle; to first order
    in detuning ``m = -int sin(Theta(t)) dt / sin(Theta(tau))`` with
    ``Theta`` the accumulated signed rotation angle. Returns ``m`` (s) and
    ``dm/du`` for normalised amplitudes ``u``.
    """
    u = np.asarray(u, float)
    c = omega0 * (1.0 + eps) * dt
    theta = np.concatenate([[0.0], np.cumsum(u * c)])
    s, d = 0.5 * (theta[1:] + theta[:-1]), 0.5 * (theta[1:] - theta[:-1])
    sinc = np.sinc(d / np.pi)
    dsinc = d * _c_series(d)
    integral = dt * np.sum(np.sin(s) * sinc)
    # d(integral)/d(theta_j) at every node
    da = 0.5 * dt * (np.cos(s) * sinc - np.sin(s) * dsinc)
    db = 0.5 * dt * (np.cos(s) * sinc + np.sin(s) * dsinc)
    dnode = np.zeros_like(theta)
    dnode[:-1] += da
    dnode[1:] += db
    end = np.sin(theta[-1])
    m = -integral / end
    dm_node = -dnode / end
    dm_node[-1] += integral * np.cos(theta[-1]) / end**2
    # theta_j depends on u_k for j > k
    dm_du = c * np.cumsum(dm_node[::-1])[::-1][1:]
    return float(m), dm_du


def penalty(u: np.ndarray, cfg: OptimizationConfig) -> tuple[float, np.ndarray]:
    """Smoothness, peak and origin-spread penalties on normalised amplitudes.

    The origin term is ``origin_weight * mean_eps ((m_eps - m_target)/tau)^2``
    over the amplitude-error grid, evaluated on resonance. Returns the value
    and its gradient with respect to ``u``.
    """
    u = np.asarray(u, float)
    du = np.diff(u)
    val = cfg.smoothness_weight * np.sum(du * du)
    grad = np.zeros_like(u)
    grad[:-1] -= 2 * cfg.smoothness_weight * du
    grad[1:] += 2 * cfg.smoothness_weight * du
    over = np.maximum(np.abs(u) - (1.0 + cfg.headroom), 0.0)
    val += cfg.peak_weight * np.sum(over * over)
    grad += 2 * cfg.peak_weight * over * np.sign(u)
    if cfg.origin_weight:
        eps = cfg.epsilons()
        scale = cfg.origin_weight / (eps.size * cfg.duration**2)
        for e in eps:
            m, dm = resonant_gradient(u, cfg.dt, cfg.omega0, e)
            r = m - cfg.target_m
            val += scale * r * r
            grad += 2 * scale * r * dm
    return float(val), grad


def objective(u: np.ndarray, cfg: OptimizationConfig) -> tuple[float, np.ndarray]:
    """Penalised infidelity to minimise, with its gradient in ``u``."""
    d, e = _ensemble(cfg)
    f, g = _fidelity_and_grad(u * cfg.omega0, cfg.dt, d, e, cfg.target_m)
    pv, pg = penalty(u, cfg)
    return 1.0 - float(f.mean()) + pv, -g.mean(axis=1) * cfg.omega0 + pg


# --- optimization -----------------------------------------------------------

@dataclass
class OptimizationResult:
    waveform: Waveform
    terminal_infidelity: float
    fidelity_map: np.ndarray
    pulse_area: float
    iterations_used: int
    converged: bool
    config: OptimizationConfig
    objective_history: list[float] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "terminal_infidelity": self.terminal_infidelity,
            "pulse_area_rad": self.pulse_area,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "message": self.message,
            "config": self.config.to_dict(),
            "fidelity_map": self.fidelity_map.tolist(),
            "objective_history": list(self.objective_history),
            "waveform": self.waveform.to_dict(),
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def initial_amplitudes(cfg: OptimizationConfig, seed: int | None = None) -> np.ndarray:
    """Seeded random start: uniform in +-init_scale, one 3-slice average."""
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    u = rng.uniform(-cfg.init_scale, cfg.init_scale, cfg.n_slices)
    if u.size >= 3:
        padded = np.pad(u, 1, mode="edge")
        u = (padded[:-2] + padded[1:-1] + padded[2:]) / 3
    return u


def optimize_beamsplitter(cfg: OptimizationConfig,
                          initial: Waveform | None = None) -> OptimizationResult:
    """Minimise the penalised ensemble infidelity with L-BFGS-B."""
    if initial is None:
        u0 = initial_amplitudes(cfg)
    else:
        if len(initial) != cfg.n_slices or not np.isclose(initial.dt, cfg.dt):
            raise InvalidInputError("initial waveform does not match the config grid")
        u0 = np.asarray(initial.slices, float) / cfg.omega0
    history: list[float] = []

    def fun(u):
        val, grad = objective(u, cfg)
        if not np.isfinite(val) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite objective at |u|max={np.max(np.abs(u)):.3g}")
        return val, grad

    if cfg.max_iterations == 0:
        u, nit, converged, msg = u0, 0, False, "no iterations requested"
        history.append(fun(u0)[0])
    else:
        res = minimize(fun, u0, jac=True, method="L-BFGS-B",
                       callback=lambda xk: history.append(fun(xk)[0]),
                       options=dict(maxiter=cfg.max_iterations, maxcor=cfg.memory,
                                    gtol=cfg.gtol, ftol=1e-15, maxfun=20 * cfg.max_iterations))
        u, nit = res.x, int(res.nit)
        converged = bool(res.success) and nit < cfg.max_iterations
        msg = str(res.message)
    w = Waveform(u * cfg.omega0, cfg.dt, cfg.omega0,
                 label=_label(cfg), headroom=cfg.headroom)
    fmap = fidelity_map(w, cfg)
    log.debug("optimized %s: infidelity %.3e after %d iterations", w.label,
              1 - fmap.mean(), nit)
    return OptimizationResult(
        waveform=w, terminal_infidelity=float(1.0 - fmap.mean()), fidelity_map=fmap,
        pulse_area=w.area, iterations_used=nit, converged=converged,
        config=cfg, objective_history=history, message=msg)


def _label(cfg: OptimizationConfig) -> str:
    frac = cfg.target_origin / cfg.duration
    return f"grape-{cfg.duration_tpi:g}tpi-origin{frac:.3g}-seed{cfg.rng_seed}"


def flip_reverse(w: Waveform) -> Waveform:
    """Recombiner built from a first beamsplitter: reversed slice order, negated.

    Negation flips the pulse phase by pi; in this frame that makes the
    recombiner's dispersion gradient ``m3 = -m1``.
    """
    return w.with_slices(-w.slices[::-1], label=f"{w.label}-fr")


# --- sweeps -----------------------------------------------------------------

SWEEP_COLUMNS = ["duration_tpi", "origin_fraction", "seed", "terminal_infidelity",
                 "pulse_area_rad", "contrast", "iterations", "converged", "error"]


def _sweep_cell(args):
    cfg, with_contrast = args
    row = dict(duration_tpi=cfg.duration_tpi, origin_fraction=cfg.origin_fraction,
               seed=cfg.rng_seed, terminal_infidelity=np.nan, pulse_area_rad=np.nan,
               contrast=np.nan, iterations=0, converged=False, error="")
    try:
        res = optimize_beamsplitter(cfg)
        row.update(terminal_infidelity=res.terminal_infidelity,
                   pulse_area_rad=res.pulse_area, iterations=res.iterations_used,
                   converged=res.converged)
        if with_contrast:
            from .sequence import contrast_with_perfect_mirror
            row["contrast"] = contrast_with_perfect_mirror(res.waveform)
    except Exception as exc:  # recorded, the sweep carries on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_configs(durations, origin_fractions, seeds_per_cell: int,
                  base: OptimizationConfig | None = None, seed0: int = 0):
    """Cell configs in a fixed order; ``origin_fraction=1`` is point-to-point."""
    base = base or OptimizationConfig()
    out = []
    for d in durations:
        for f in origin_fractions:
            for s in range(seeds_per_cell):
                out.append(replace(base, duration_tpi=float(d), origin_fraction=float(f),
                                   m_target=None, rng_seed=seed0 + s))
    return out


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("PULSEORIGIN_THREADS", "1"))
    return max(1, int(threads))


def batch_sweep(durations, origin_fractions, seeds_per_cell: int,
                base: OptimizationConfig | None = None, threads: int | None = None,
                with_contrast: bool = True, seed0: int = 0) -> list[dict]:
    """Optimise every (duration, origin, seed) cell; rows keep input order."""
    cfgs = sweep_configs(durations, origin_fractions, seeds_per_cell, base, seed0)
    jobs = [(c, with_contrast) for c in cfgs]
    n = worker_count(threads)
    if n == 1 or len(jobs) <= 1:
        return [_sweep_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_sweep_cell, jobs))


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SWEEP_COLUMNS)
        for r in rows:
            out.writerow([f"{r[c]:.17g}" if isinstance(r[c], float) else r[c]
                          for c in SWEEP_COLUMNS])
