"""Mach-Zehnder sequences: phase, contrast, velocity bias and stability.

Atoms with different velocities see different detunings ``delta = k v``;
averages over the cloud are taken over the complex fringe amplitude, so the
reported contrast and phase are those of the summed fringe.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .characterize import Role, dispersion_gradient, temporal_origin
from .constants import G_STANDARD, K_EFF, OMEGA0, SLICE_DT, T_DEFAULT, T_PI
from .dynamics import Waveform, rectangular_area
from .errors import DegenerateSequenceError, InvalidInputError
from .sensitivity import pulse_origins, scale_factor_report, sensitivity_function
from .timeline import PerfectMirror, SequenceSpec, fringe_amplitude

__all__ = [
    "SequenceSpec", "PerfectMirror", "MomentumDistribution", "BiasReport",
    "perfect_mirror", "mach_zehnder", "rectangular_sequence", "interferometer_phase",
    "phase_from_sensitivity", "fringe_contrast", "velocity_bias",
    "near_resonance_sensitivity", "velocity_sensitivity", "fractional_scale_error",
    "closure_defect", "origin_shifts", "scale_factor_errors",
]

#: momentum width whose Doppler width is half the nominal Rabi frequency
REFERENCE_MOMENTUM_WIDTH = 0.4


def perfect_mirror(duration: float = T_PI) -> PerfectMirror:
    """Detuning-free pi pulse lasting ``duration`` (default a rectangular pi)."""
    return PerfectMirror(duration)


def rectangular_sequence(T: float = T_DEFAULT, omega: float = OMEGA0,
                         dt: float | None = SLICE_DT, mirror: str = "rect",
                         eps=(0.0, 0.0, 0.0)) -> SequenceSpec:
    """pi/2 - pi - pi/2 rectangular sequence at Rabi frequency ``omega``."""
    bs = rectangular_area(np.pi / 2, omega, dt)
    if mirror == "perfect":
        mir = perfect_mirror(np.pi / omega)
    elif mirror == "rect":
        mir = rectangular_area(np.pi, omega, dt)
    else:
        raise InvalidInputError(f"unknown mirror kind {mirror!r}")
    return SequenceSpec(bs, mir, bs, T, eps=tuple(eps))


def mach_zehnder(beamsplitter: Waveform, T: float = T_DEFAULT, mirror="rect",
                 recombiner="flip-reverse", eps=(0.0, 0.0, 0.0)) -> SequenceSpec:
    """Sequence built around a first beamsplitter.

    ``mirror`` is ``"rect"``, ``"perfect"`` or a waveform; ``recombiner`` is
    ``"flip-reverse"``, ``"same"`` or a waveform.
    """
    from .optimize import flip_reverse

    omega0 = beamsplitter.omega0
    if isinstance(mirror, str):
        if mirror == "rect":
            mirror = rectangular_area(np.pi, omega0, beamsplitter.dt)
        elif mirror == "perfect":
            mirror = perfect_mirror(np.pi / omega0)
        else:
            raise InvalidInputError(f"unknown mirror kind {mirror!r}")
    if isinstance(recombiner, str):
        if recombiner == "flip-reverse":
            recombiner = flip_reverse(beamsplitter)
        elif recombiner == "same":
            recombiner = beamsplitter
        else:
            raise InvalidInputError(f"unknown recombiner kind {recombiner!r}")
    return SequenceSpec(beamsplitter, mirror, recombiner, T, eps=tuple(eps))


# --- single-atom phase ------------------------------------------------------

def _reference(seq: SequenceSpec) -> complex:
    z = complex(fringe_amplitude(seq, 0.0))
    if abs(z) < 1e-9:
        raise DegenerateSequenceError("no fringe on resonance")
    return z


def interferometer_phase(seq: SequenceSpec, delta=0.0) -> np.ndarray | float:
    """Fringe phase of an atom at detuning ``delta``, zero on resonance."""
    z = fringe_amplitude(seq, delta)
    if np.any(np.abs(z) < 1e-9):
        raise DegenerateSequenceError("fringe amplitude vanishes")
    phi = np.angle(z * np.conj(_reference(seq)))
    return float(phi) if np.ndim(phi) == 0 else phi


def phase_from_sensitivity(seq: SequenceSpec, delta: float) -> float:
    """First-order phase ``delta * int g dt`` for a constant detuning."""
    prof = sensitivity_function(seq, grid=np.array([seq.t_i]))
    return float(delta * prof.h_start)


# --- velocity distributions -------------------------------------------------

@dataclass(frozen=True)
class MomentumDistribution:
    """Gaussian spread of Doppler detunings ``k v`` around ``k mean_v``."""

    sigma_delta: float
    mean_v: float = 0.0
    n_samples: int = 64
    quadrature: str = "gauss-hermite"
    k: float = K_EFF

    def __post_init__(self):
        if not self.sigma_delta > 0:
            raise InvalidInputError("sigma_delta must be positive")
        if self.n_samples < 1:
            raise InvalidInputError("need at least one sample")
        if self.quadrature not in ("gauss-hermite", "uniform-grid"):
            raise InvalidInputError(f"unknown quadrature {self.quadrature!r}")

    @classmethod
    def from_momentum_width(cls, sigma_p_hbar_k: float, omega0: float = OMEGA0,
                            mean_v: float = 0.0, **kw) -> "MomentumDistribution":
        """Width given in units of the two-photon recoil momentum.

        Scaled so that ``0.4 hbar k`` maps to a detuning width of
        ``omega0 / 2``.
        """
        return cls(sigma_p_hbar_k / REFERENCE_MOMENTUM_WIDTH * omega0 / 2, mean_v, **kw)

    def shifted(self, mean_v: float) -> "MomentumDistribution":
        return MomentumDistribution(self.sigma_delta, mean_v, self.n_samples,
                                    self.quadrature, self.k)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Detunings and normalised weights."""
        if self.quadrature == "gauss-hermite":
            x, w = np.polynomial.hermite_e.hermegauss(self.n_samples)
        else:
            x = np.linspace(-6, 6, self.n_samples)
            w = np.exp(-0.5 * x * x)
        return self.k * self.mean_v + self.sigma_delta * x, w / w.sum()


def mean_amplitude(seq: SequenceSpec, dist: MomentumDistribution) -> complex:
    d, w = dist.nodes()
    return complex(np.sum(w * fringe_amplitude(seq, d)))


def fringe_contrast(seq: SequenceSpec, dist: MomentumDistribution) -> tuple[float, float]:
    """Contrast ``2|<Z>|`` and mean phase of the cloud-averaged fringe."""
    z = mean_amplitude(seq, dist)
    return 2 * abs(z), float(np.angle(z * np.conj(_reference(seq))))


def contrast_with_perfect_mirror(beamsplitter: Waveform, T: float = T_DEFAULT,
                                 sigma_p_hbar_k: float = 0.4) -> float:
    """Contrast of a flip-reverse pair around a perfect mirror."""
    seq = mach_zehnder(beamsplitter, T, mirror="perfect")
    dist = MomentumDistribution.from_momentum_width(sigma_p_hbar_k, beamsplitter.omega0)
    return fringe_contrast(seq, dist)[0]


# --- velocity bias ----------------------------------------------------------

@dataclass(frozen=True)
class BiasReport:
    phase_bias: float            # rad
    accel_bias: float            # in units of 9.80665 m/s^2
    velocity_sensitivity: float  # rad per (m/s), local slope at the offset
    contrast: float
    scale_factor: float          # rad per (m/s^2)

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def _imbalanced(seq: SequenceSpec, imbalance: float) -> SequenceSpec:
    return seq.with_eps(eps3=seq.eps[0] - imbalance)


def _cloud_phase(seq, dist, v, z_ref):
    z = mean_amplitude(seq, dist.shifted(v))
    return float(np.angle(z * np.conj(z_ref))), 2 * abs(z)


def velocity_bias(seq: SequenceSpec, dist: MomentumDistribution, v_offset: float,
                  imbalance: float = 0.01, dv: float = 1e-4) -> BiasReport:
    """Cloud-averaged phase at mean velocity ``v_offset`` as an acceleration bias.

    The recombiner runs ``imbalance`` weaker than the first pulse.
    """
    s = _imbalanced(seq, imbalance)
    z_ref = _reference(s)
    phase, contrast = _cloud_phase(s, dist, v_offset, z_ref)
    up, _ = _cloud_phase(s, dist, v_offset + dv, z_ref)
    down, _ = _cloud_phase(s, dist, v_offset - dv, z_ref)
    S = scale_factor_report(s, dist.k).exact
    return BiasReport(phase_bias=phase, accel_bias=phase / (S * G_STANDARD),
                      velocity_sensitivity=(up - down) / (2 * dv),
                      contrast=contrast, scale_factor=S)


def near_resonance_sensitivity(seq: SequenceSpec, dist: MomentumDistribution,
                               imbalance: float = 0.01, v_span: float = 2e-3,
                               n: int = 9) -> float:
    """Least-squares slope of the cloud phase over ``|v| <= v_span``."""
    s = _imbalanced(seq, imbalance)
    z_ref = _reference(s)
    v = np.linspace(-v_span, v_span, n)
    phi = np.array([_cloud_phase(s, dist, vi, z_ref)[0] for vi in v])
    return float(np.polyfit(v, phi, 1)[0])


# --- closed forms from origin shifts ----------------------------------------

def velocity_sensitivity(d_tau1: float, d_tau2: float, d_tau3: float,
                         k: float = K_EFF) -> float:
    """``k (d1 + d3 - 2 d2)`` in rad per (m/s)."""
    return k * (d_tau1 + d_tau3 - 2 * d_tau2)


def fractional_scale_error(d_tau1: float, d_tau3: float, T: float) -> float:
    if not T > 0:
        raise InvalidInputError("T must be positive")
    return (d_tau3 - d_tau1) / T


def origin_shifts(nominal: SequenceSpec, perturbed: SequenceSpec) -> tuple[float, float, float]:
    """Change of each pulse origin between two sequences."""
    a = pulse_origins(nominal)
    b = pulse_origins(perturbed)
    return tuple(y - x for x, y in zip(a, b))


def closure_defect(seq: SequenceSpec) -> float:
    """``m1 + m2 + m3``; zero for a closed interferometer."""
    p1, p2, p3 = seq.pulses
    e1, e2, e3 = seq.eps
    m2 = 0.0 if isinstance(p2, PerfectMirror) else dispersion_gradient(p2, e2, Role.MIRROR)
    return (dispersion_gradient(p1, e1, Role.BEAMSPLITTER_1) + m2
            + dispersion_gradient(p3, e3, Role.BEAMSPLITTER_3))


def scale_factor_errors(seq: SequenceSpec, eps_values, mode: str = "all",
                        k: float = K_EFF) -> np.ndarray:
    """Fractional scale-factor change versus amplitude error.

    ``mode="all"`` scales every pulse by ``1 + eps``; ``mode="final"`` only
    the recombiner (the sequence is then open and the open-interferometer
    value with ``v0`` at the mirror origin is used).
    """
    nominal = scale_factor_report(seq, k).exact
    out = []
    for e in np.atleast_1d(eps_values):
        if mode == "all":
            s = seq.with_eps(*(x + e for x in seq.eps))
        elif mode == "final":
            s = seq.with_eps(eps3=seq.eps[2] + e)
        else:
            raise InvalidInputError(f"unknown mode {mode!r}")
        out.append(scale_factor_report(s, k).exact / nominal - 1)
    return np.array(out)


def origin_variation(w: Waveform, eps_values, role=Role.BEAMSPLITTER_1) -> np.ndarray:
    """Temporal origin of ``w`` at each amplitude error."""
    return np.array([temporal_origin(w, role, e) for e in np.atleast_1d(eps_values)])
