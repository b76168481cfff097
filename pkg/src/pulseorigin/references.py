"""Pinned reference beamsplitters and the figures of merit used to compare them.

Each family is defined by an optimizer config; the waveform is regenerated on
demand (optimization is deterministic for a fixed seed) and cached per process.
The configs were chosen with ``scripts/search_reference_pulses.py``: among
candidates whose ensemble infidelity is at most twice the best found for the
same origin fraction, the one with the smallest origin spread over the
amplitude-error range.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from functools import lru_cache

import numpy as np

from .characterize import Role, dispersion_gradient
from .constants import K_EFF, OMEGA0, SLICE_DT, T_DEFAULT
from .doppler import SchemeKind, compensation_bias_sweep
from .dynamics import Waveform, rectangular_area
from .errors import InvalidInputError
from .optimize import OptimizationConfig, ensemble_fidelity, optimize_beamsplitter
from .sequence import (MomentumDistribution, mach_zehnder, near_resonance_sensitivity,
                       origin_variation, scale_factor_errors, velocity_bias)

__all__ = ["REFERENCE_CONFIGS", "reference_pulse", "family_pulse", "FamilyMetrics",
           "evaluate_family", "origin_spread", "ensemble_infidelity"]

REFERENCE_CONFIGS: dict[str, OptimizationConfig] = {
    "point-to-point": OptimizationConfig(duration_tpi=4.0, origin_fraction=1.0,
                                         origin_weight=1e5, max_iterations=400, rng_seed=0),
    "optimized-origin": OptimizationConfig(duration_tpi=3.0, origin_fraction=0.4,
                                           origin_weight=1e5, max_iterations=400, rng_seed=1),
}

FAMILIES = ("rectangular", "point-to-point", "optimized-origin")


@lru_cache(maxsize=None)
def reference_pulse(name: str) -> Waveform:
    """Optimized reference beamsplitter for a named family."""
    try:
        cfg = REFERENCE_CONFIGS[name]
    except KeyError:
        raise InvalidInputError(f"unknown reference pulse {name!r}") from None
    return optimize_beamsplitter(cfg).waveform


def family_pulse(name: str) -> Waveform:
    """First beamsplitter of a family, including the rectangular pi/2."""
    if name == "rectangular":
        return rectangular_area(np.pi / 2, OMEGA0, SLICE_DT)
    return reference_pulse(name)


def origin_spread(w: Waveform, eps_range: float = 0.1, n: int = 21) -> float:
    """Peak-to-peak temporal origin (s) over ``|eps| <= eps_range``."""
    return float(np.ptp(origin_variation(w, np.linspace(-eps_range, eps_range, n),
                                         Role.BEAMSPLITTER_1)))


@dataclass(frozen=True)
class FamilyMetrics:
    name: str
    pulse_area_pi: float
    ensemble_infidelity: float
    origin_spread_ns: float
    scale_error_ppm_5ms: float       # every pulse scaled by 1 + eps
    scale_error_ppm_20ms: float
    scale_error_final_ppm_5ms: float  # recombiner only
    velocity_bias_ng: float
    sensitivity_broad: float          # mrad/(mm/s), sigma_p = 0.4 hbar k
    sensitivity_narrow: float         # mrad/(mm/s), sigma_p = 0.05 hbar k
    doppler_bias_ug: float

    def to_dict(self) -> dict:
        return asdict(self)


def ensemble_infidelity(name: str, w: Waveform) -> float:
    """Design-ensemble infidelity against the family's dispersion target.

    Optimized families target their configured origin fraction of the
    pulse's own duration; others use the measured resonant gradient.
    """
    cfg = REFERENCE_CONFIGS.get(name)
    m = ((cfg.origin_fraction - 1.0) * w.duration if cfg is not None
         else dispersion_gradient(w))
    per_tpi = int(round(np.pi / w.omega0 / w.dt))
    base = cfg if cfg is not None else OptimizationConfig()
    cfg = replace(base, duration_tpi=len(w) / per_tpi, slices_per_tpi=per_tpi,
                  omega0=w.omega0, origin_fraction=None, m_target=m)
    return 1.0 - ensemble_fidelity(w, cfg)


def _max_ppm(seq, mode, n=11):
    return float(1e6 * np.max(np.abs(scale_factor_errors(seq, np.linspace(-0.1, 0.1, n), mode))))


def evaluate_family(name: str, w: Waveform | None = None, k: float = K_EFF) -> FamilyMetrics:
    """Every comparison figure for one beamsplitter around a rectangular mirror."""
    w = family_pulse(name) if w is None else w
    seq5 = mach_zehnder(w, T_DEFAULT)
    seq20 = mach_zehnder(w, 20e-3)
    broad = MomentumDistribution.from_momentum_width(0.4, w.omega0, k=k)
    narrow = MomentumDistribution.from_momentum_width(0.05, w.omega0, k=k)
    bias = velocity_bias(seq5, broad, 10e-3)
    doppler = compensation_bias_sweep({name: seq5}, [T_DEFAULT], 0.01,
                                      SchemeKind.PHASE_DISCONTINUOUS, k=k)[0]
    return FamilyMetrics(
        name=name,
        pulse_area_pi=w.area / np.pi,
        ensemble_infidelity=ensemble_infidelity(name, w),
        origin_spread_ns=1e9 * origin_spread(w),
        scale_error_ppm_5ms=_max_ppm(seq5, "all"),
        scale_error_ppm_20ms=_max_ppm(seq20, "all"),
        scale_error_final_ppm_5ms=_max_ppm(seq5, "final"),
        velocity_bias_ng=1e9 * bias.accel_bias,
        sensitivity_broad=near_resonance_sensitivity(seq5, broad),
        sensitivity_narrow=near_resonance_sensitivity(seq5, narrow),
        doppler_bias_ug=doppler["bias_ug"],
    )
