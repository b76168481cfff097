"""Doppler compensation by laser chirps or frequency jumps.

The atom sees ``delta(t) = delta_L(t) + k v(t)`` with ``v(t) = v0 + a (t - t0)``
and ``t0`` the mirror origin. A laser phase reset that removes the running
phase ``phi`` acts on the fringe like a laser phase step of ``-phi``.

Jump timing follows the usual convention: jumps sit ``t_j`` before the
start of pulse 1, the middle of pulse 2 and the end of pulse 3, the outer two
shifted by ``-dt_j`` and ``+dt_j``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from .characterize import PulseCharacterization, Role, dispersion_gradient
from .constants import G_STANDARD, K_EFF
from .dynamics import Waveform
from .errors import InvalidInputError, UnsupportedTimingError
from .sensitivity import _Integrator, pulse_origins
from .timeline import (DetuningProfile, PerfectMirror, SequenceSpec,
                       fringe_amplitude)


class SchemeKind(str, Enum):
    CONTINUOUS_CHIRP = "continuous-chirp"
    PHASE_CONTINUOUS = "phase-continuous-jumps"
    PHASE_DISCONTINUOUS = "phase-discontinuous-jumps"


@dataclass(frozen=True)
class DopplerScheme:
    """Laser detuning programme ``delta_L = omega_eg - omega_laser``.

    For jump schemes ``delta_L`` holds ``delta_L[i]`` around pulse ``i``; for
    the chirp it is ``delta_L[1] - chirp_rate (t - t0)``.
    """

    kind: SchemeKind
    delta_L: tuple[float, float, float] = (0.0, 0.0, 0.0)
    chirp_rate: float = 0.0
    t_j: float = 0.0
    dt_j: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if len(self.delta_L) != 3:
            raise InvalidInputError("need one laser detuning per pulse")
        object.__setattr__(self, "delta_L", tuple(float(d) for d in self.delta_L))

    def jump_times(self, seq: SequenceSpec) -> tuple[float, float, float]:
        """Times of the jumps into pulse 1, 2 and 3.

        The shift ``dt_j`` only applies to phase-discontinuous jumps.
        """
        (s1, _), (s2, e2), (_, e3) = seq.windows
        shift = self.dt_j if self.kind is SchemeKind.PHASE_DISCONTINUOUS else 0.0
        return (s1 - (self.t_j - shift), 0.5 * (s2 + e2) - self.t_j,
                e3 - (self.t_j + shift))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def mirror_origin_time(seq: SequenceSpec) -> float:
    return seq.windows[1][0] + pulse_origins(seq)[1]


def default_jump_time(seq: SequenceSpec) -> float:
    """``t_j`` placing the 1->2 jump in the middle of the first dark period."""
    return 0.5 * (seq.T + seq.durations[1])


def tracking_scheme(seq: SequenceSpec, a: float, kind=SchemeKind.PHASE_DISCONTINUOUS,
                    dt_j: float = 0.0, t_j: float | None = None, v0: float = 0.0,
                    k: float = K_EFF) -> DopplerScheme:
    """Scheme that follows the Doppler shift of a constant acceleration ``a``.

    The mirror is on resonance for an atom with velocity ``v0`` at the
    mirror origin; the steps between pulses are ``-k a (T + tau + tau2/2)``.
    """
    kind = SchemeKind(kind)
    d2 = -k * v0
    step = -k * a * (seq.T + seq.durations[0] + seq.durations[1] / 2)
    return DopplerScheme(kind=kind, delta_L=(d2 - step, d2, d2 + step),
                         chirp_rate=k * a if kind is SchemeKind.CONTINUOUS_CHIRP else 0.0,
                         t_j=default_jump_time(seq) if t_j is None else t_j, dt_j=dt_j)


# --- laser detuning and resets ----------------------------------------------

def _check_jumps(seq: SequenceSpec, scheme: DopplerScheme):
    _, j2, j3 = scheme.jump_times(seq)
    (_, e1), (s2, e2), (s3, _) = seq.windows
    if not (e1 <= j2 <= s2 and e2 <= j3 <= s3):
        raise UnsupportedTimingError(
            "frequency jumps must fall between pulses "
            f"(got {j2:.6g} s and {j3:.6g} s)")


def resets(seq: SequenceSpec, scheme: DopplerScheme) -> list[tuple[float, float]]:
    """Laser phase steps ``(time, step)`` produced by phase resets."""
    if scheme.kind is not SchemeKind.PHASE_DISCONTINUOUS:
        return []
    j1, j2, j3 = scheme.jump_times(seq)
    d1, d2, _ = scheme.delta_L
    return [(j2, -d1 * (j2 - j1)), (j3, -d2 * (j3 - j2))]


def reset_phases(seq: SequenceSpec, scheme: DopplerScheme) -> tuple[float, float]:
    """Running phases removed at the two jumps, ``(phi_12, phi_23)``."""
    r = resets(seq, scheme)
    return (-r[0][1], -r[1][1]) if r else (0.0, 0.0)


class DopplerDetuning(DetuningProfile):
    """Total atom detuning under a scheme and constant acceleration."""

    def __init__(self, seq: SequenceSpec, scheme: DopplerScheme, a: float = 0.0,
                 v0: float = 0.0, k: float = K_EFF, laser_only: bool = False):
        self.scheme = scheme
        self.t0 = mirror_origin_time(seq)
        self.k, self.a, self.v0 = k, a, v0
        self.laser_only = laser_only
        if scheme.kind is SchemeKind.CONTINUOUS_CHIRP:
            self.edges = np.array([])
            self.levels = np.array([scheme.delta_L[1]])
        else:
            _, j2, j3 = scheme.jump_times(seq)
            self.edges = np.array([j2, j3])
            self.levels = np.array(scheme.delta_L)

    def _laser(self, t):
        t = np.asarray(t, float)
        lvl = self.levels[np.searchsorted(self.edges, t, side="right")]
        return lvl - self.scheme.chirp_rate * (t - self.t0)

    def _laser_integral(self, t0, t1):
        pts = np.concatenate([[t0], self.edges[(self.edges > t0) & (self.edges < t1)], [t1]])
        mids = 0.5 * (pts[1:] + pts[:-1])
        lvl = self.levels[np.searchsorted(self.edges, mids, side="right")]
        chirp = 0.5 * self.scheme.chirp_rate * ((t1 - self.t0) ** 2 - (t0 - self.t0) ** 2)
        return float(np.sum(lvl * np.diff(pts)) - chirp)

    def value(self, t):
        out = self._laser(t)
        if not self.laser_only:
            out = out + self.k * (self.v0 + self.a * (np.asarray(t, float) - self.t0))
        return out

    def integral(self, t0, t1):
        out = self._laser_integral(t0, t1)
        if not self.laser_only:
            out += self.k * (self.v0 * (t1 - t0)
                             + 0.5 * self.a * ((t1 - self.t0) ** 2 - (t0 - self.t0) ** 2))
        return out


# --- phases -----------------------------------------------------------------

def _g_integrals(integ: _Integrator, t0: float):
    """``int g`` and ``int g (t - t0)`` over the whole sequence."""
    seq = integ.seq
    return integ.h_start, integ.h_area + (seq.t_i - t0) * integ.h_start


def laser_phase(seq: SequenceSpec, scheme: DopplerScheme, integ: _Integrator | None = None) -> float:
    """``int g delta_L dt`` plus the effect of any phase resets."""
    if scheme.kind is not SchemeKind.CONTINUOUS_CHIRP:
        _check_jumps(seq, scheme)
    integ = integ or _Integrator(seq)
    t0 = mirror_origin_time(seq)
    if scheme.kind is SchemeKind.CONTINUOUS_CHIRP:
        area, moment = _g_integrals(integ, t0)
        return float(scheme.delta_L[1] * area - scheme.chirp_rate * moment)
    _, j2, j3 = scheme.jump_times(seq)
    bounds = [seq.t_i, j2, j3, seq.t_end]
    hb = integ.h(np.array(bounds))
    seg = hb[:-1] - hb[1:]
    phase = float(np.dot(scheme.delta_L, seg))
    for t, step in resets(seq, scheme):
        phase += float(integ.g(t)[0]) * step
    return phase


def inertial_phase(seq: SequenceSpec, a: float, v0: float = 0.0, k: float = K_EFF,
                   integ: _Integrator | None = None) -> float:
    """``int g k v(t) dt`` with ``v0`` defined at the mirror origin."""
    integ = integ or _Integrator(seq)
    area, moment = _g_integrals(integ, mirror_origin_time(seq))
    return float(k * (v0 * area + a * moment))


def direct_phase(seq: SequenceSpec, scheme: DopplerScheme, a: float, v0: float = 0.0,
                 k: float = K_EFF) -> float:
    """Fringe phase from full propagation with the time-dependent detuning."""
    if scheme.kind is not SchemeKind.CONTINUOUS_CHIRP:
        _check_jumps(seq, scheme)
    prof = DopplerDetuning(seq, scheme, a, v0, k)
    z = fringe_amplitude(seq, prof, kicks=resets(seq, scheme))
    z_ref = fringe_amplitude(seq, 0.0)
    return float(np.angle(z * np.conj(z_ref)))


# --- first-order closed forms -----------------------------------------------

def _ms(seq: SequenceSpec):
    p1, p2, p3 = seq.pulses
    e1, e2, e3 = seq.eps
    m2 = 0.0 if isinstance(p2, PerfectMirror) else dispersion_gradient(p2, e2, Role.MIRROR)
    return (dispersion_gradient(p1, e1, Role.BEAMSPLITTER_1), m2,
            dispersion_gradient(p3, e3, Role.BEAMSPLITTER_3))


def first_order_laser_phase(seq: SequenceSpec, scheme: DopplerScheme, a: float,
                            k: float = K_EFF) -> float:
    """Leading-order laser phase of the jump schemes (second order in pulse length dropped)."""
    m1, _, m3 = _ms(seq)
    tau2 = seq.durations[1]
    tau = seq.durations[0]
    T = seq.T
    d1, d2, _ = scheme.delta_L
    if scheme.kind is SchemeKind.PHASE_CONTINUOUS:
        return d1 * (m1 + m3) - a * k * (T * T + T * tau2 + 2 * m3 * T)
    if scheme.kind is SchemeKind.PHASE_DISCONTINUOUS:
        return (m1 + m3) * d2 - a * k * T * (m3 - m1 + 2 * scheme.dt_j - 2 * tau)
    raise InvalidInputError("no first-order form for the continuous chirp")


def first_order_inertial_phase(seq: SequenceSpec, a: float, v0: float = 0.0,
                               k: float = K_EFF) -> float:
    m1, _, m3 = _ms(seq)
    T, tau2 = seq.T, seq.durations[1]
    return k * v0 * (m1 + m3) + a * k * (T * T + T * tau2 - m1 * T + m3 * T)


def first_order_total_continuous(seq: SequenceSpec, scheme: DopplerScheme, a: float,
                                 v0: float = 0.0, k: float = K_EFF) -> float:
    """Total phase for phase-continuous jumps under exact tracking."""
    m1, _, m3 = _ms(seq)
    return (k * v0 + scheme.delta_L[0] - a * k * seq.T) * (m1 + m3)


# --- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class LaserPhaseReport:
    laser_phase: float
    inertial_phase: float
    total: float
    direct_total: float
    scale_factor: float
    residual_bias: float  # g units

    def to_dict(self) -> dict:
        return asdict(self)


def total_phase(seq: SequenceSpec, scheme: DopplerScheme, a: float, v0: float = 0.0,
                k: float = K_EFF) -> LaserPhaseReport:
    """Laser and inertial phases, their sum and a direct-propagation check.

    ``residual_bias`` is the phase the scheme should not produce, over
    ``S g``: the whole total for chirps and phase-continuous jumps, the laser
    phase alone for phase-discontinuous jumps.
    """
    integ = _Integrator(seq)
    pl = laser_phase(seq, scheme, integ)
    pi = inertial_phase(seq, a, v0, k, integ)
    S = k * (integ.h_area + (seq.t_i - mirror_origin_time(seq)) * integ.h_start)
    error = pl if scheme.kind is SchemeKind.PHASE_DISCONTINUOUS else pl + pi
    return LaserPhaseReport(laser_phase=pl, inertial_phase=pi, total=pl + pi,
                            direct_total=direct_phase(seq, scheme, a, v0, k),
                            scale_factor=S, residual_bias=error / (S * G_STANDARD))


def optimal_jump_shift(pulse3, tau: float | None = None, eps: float = 0.0) -> float:
    """``tau - m3`` for a recombiner.

    ``pulse3`` is a characterization, a waveform, or ``m3`` in seconds (then
    ``tau`` is required).
    """
    if isinstance(pulse3, PulseCharacterization):
        if pulse3.role is not Role.BEAMSPLITTER_3:
            raise InvalidInputError("need a beamsplitter-3 characterization")
        return pulse3.duration - pulse3.m
    if isinstance(pulse3, Waveform):
        return pulse3.duration - dispersion_gradient(pulse3, eps, Role.BEAMSPLITTER_3)
    if tau is None:
        raise InvalidInputError("tau is needed with a bare gradient")
    return tau - float(pulse3)


BIAS_COLUMNS = ["T_s", "bias_ug", "scheme", "pulse_family"]


def compensation_bias_sweep(families: dict[str, SequenceSpec], T_list, imbalance: float = 0.01,
                            kind=SchemeKind.PHASE_DISCONTINUOUS, a: float = G_STANDARD,
                            k: float = K_EFF) -> list[dict]:
    """Residual bias versus ``T`` with the jump shift fixed at its balanced value.

    ``families`` maps a name to a balanced template sequence; the recombiner
    is then weakened by ``imbalance``.
    """
    kind = SchemeKind(kind)
    rows = []
    for name, template in families.items():
        dt_j = optimal_jump_shift(template.pulse3, eps=template.eps[2])
        for T in T_list:
            seq = replace(template, T=float(T))
            seq = seq.with_eps(eps3=seq.eps[0] - imbalance)
            scheme = tracking_scheme(seq, a, kind, dt_j=dt_j, k=k)
            integ = _Integrator(seq)
            pl = laser_phase(seq, scheme, integ)
            S = k * (integ.h_area + (seq.t_i - mirror_origin_time(seq)) * integ.h_start)
            if kind is not SchemeKind.PHASE_DISCONTINUOUS:
                pl += inertial_phase(seq, a, 0.0, k, integ)
            rows.append(dict(T_s=float(T), bias_ug=1e6 * pl / (S * G_STANDARD),
                             scheme=kind.value, pulse_family=name))
    return rows


def write_bias_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(BIAS_COLUMNS)
        for r in rows:
            out.writerow([f"{r['T_s']:.17g}", f"{r['bias_ug']:.17g}", r["scheme"],
                          r["pulse_family"]])
