"""Sensitivity function, response function and scale factors.

Sign convention: ``g = -1`` in the first free-evolution period and ``+1`` in
the second, so ``h(t) = int_t^end g`` is a positive, roughly triangular
response and ``S = k int h dt`` is positive.

Within one slice ``g`` is a sinusoid of the slice rotation angle, so each
slice is integrated with a 16-node Gauss-Legendre rule; the result is exact
to rounding for rotation angles up to 2 pi per slice. On resonance ``g`` is
constant during free evolution.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .characterize import Role, temporal_origin
from .constants import K_EFF
from .dynamics import Waveform
from .errors import DeadTimeUndefinedError, OpenInterferometerError
from .timeline import FREE, SLICE, GFunction, PerfectMirror, SequenceSpec

GL_NODES = 16
SAMPLES_PER_SLICE = 10
CLOSURE_TOL = 1e-9  # relative to the sequence span

_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_NODES)


def _gl(a, b):
    """Nodes and weights of the Gauss-Legendre rule on [a, b] (broadcast)."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (_gl_x + 1.0), half * _gl_w


@dataclass(frozen=True, eq=False)
class SensitivityProfile:
    times: np.ndarray
    g: np.ndarray
    h: np.ndarray
    t_i: float
    t_end: float
    #: h(t_i), the total area under g (zero for a closed interferometer)
    h_start: float
    #: int_{t_i}^{end} h dt, equal to int g(t) (t - t_i) dt
    h_area: float
    #: area under g during each pulse
    pulse_areas: tuple[float, float, float]

    def h_tilde(self, t0: float) -> np.ndarray:
        """Response shifted down by ``h(t_i)`` before ``t0``."""
        return np.where((self.times >= self.t_i) & (self.times < t0),
                        self.h - self.h_start, self.h)

    def write_csv(self, path, t0: float | None = None) -> None:
        ht = self.h_tilde(t0) if t0 is not None else self.h
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["t_s", "g", "h", "h_tilde"])
            for row in zip(self.times, self.g, self.h, ht):
                out.writerow([f"{v:.17g}" for v in row])


class _Integrator:
    """Exact element-wise integrals of g for one sequence."""

    def __init__(self, seq: SequenceSpec, phase_step=None):
        self.seq = seq
        self.G = GFunction(seq)
        self.phase_step = phase_step
        el = self.G.el
        self.el = el
        n = el.kind.size
        area = np.zeros(n)
        moment = np.zeros(n)
        self.g_free = np.zeros(n)
        sl = np.flatnonzero(el.kind == SLICE)
        if sl.size:
            x, w = _gl(el.start[sl], el.stop[sl])
            gx = self.G(x.ravel(), phase_step).reshape(x.shape)
            area[sl] = np.sum(w * gx, axis=1)
            moment[sl] = np.sum(w * gx * (x - seq.t_i), axis=1)
        fr = np.flatnonzero((el.kind == FREE) & (el.length > 0))
        if fr.size:
            mid = el.start[fr] + 0.5 * el.length[fr]
            gm = self.G(mid, phase_step)
            self.g_free[fr] = gm
            area[fr] = gm * el.length[fr]
            moment[fr] = gm * el.length[fr] * (mid - seq.t_i)
        self.area = area
        self.moment = moment
        # h at element stops: sum of areas of later elements
        tail = np.cumsum(area[::-1])[::-1]
        self.h_stop = np.append(tail[1:], 0.0)
        self.h_start = float(tail[0])
        self.h_area = float(np.sum(moment))
        self.pulse_areas = tuple(float(np.sum(area[el.pulse == j])) for j in (1, 2, 3))

    def g(self, t):
        return self.G(t, self.phase_step)

    def h(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        el = self.el
        out = np.zeros(t.shape)
        out[t < self.seq.t_i] = self.h_start
        inside = (t >= self.seq.t_i) & (t <= self.seq.t_end)
        if not np.any(inside):
            return out
        ts = t[inside]
        idx = np.clip(np.searchsorted(el.start, ts, side="right") - 1, 0, el.kind.size - 1)
        stop = el.stop[idx]
        res = self.h_stop[idx].copy()
        is_slice = el.kind[idx] == SLICE
        if np.any(is_slice):
            x, w = _gl(ts[is_slice], stop[is_slice])
            gx = self.g(x.ravel()).reshape(x.shape)
            res[is_slice] += np.sum(w * gx, axis=1)
        is_free = el.kind[idx] == FREE
        res[is_free] += self.g_free[idx[is_free]] * (stop[is_free] - ts[is_free])
        out[inside] = res
        return out

    def default_grid(self):
        el = self.el
        pts = [np.array([self.seq.t_i - 0.0, self.seq.t_end])]
        sl = el.kind == SLICE
        if np.any(sl):
            frac = np.linspace(0, 1, SAMPLES_PER_SLICE + 1)
            pts.append((el.start[sl][:, None] + el.length[sl][:, None] * frac).ravel())
        pts.append(el.start)
        pts.append(el.stop)
        return np.unique(np.concatenate(pts))


def sensitivity_function(seq: SequenceSpec, grid=None,
                         phase_step: float | None = None) -> SensitivityProfile:
    """Sample ``g`` and ``h`` and integrate them exactly.

    ``phase_step=None`` takes the analytic limit of the phase-step response;
    a float uses a finite central step of that size, checked for linearity by
    halving. ``grid`` defaults to 10 samples per slice plus element edges.
    """
    integ = _Integrator(seq, phase_step)
    times = integ.default_grid() if grid is None else np.asarray(grid, dtype=float)
    return SensitivityProfile(
        times=times, g=integ.g(times), h=integ.h(times),
        t_i=seq.t_i, t_end=seq.t_end, h_start=integ.h_start,
        h_area=integ.h_area, pulse_areas=integ.pulse_areas)


def response_function(seq: SequenceSpec, grid=None) -> SensitivityProfile:
    """Same profile as :func:`sensitivity_function`; ``h`` is the payload."""
    return sensitivity_function(seq, grid)


def _profile(seq, profile):
    return sensitivity_function(seq, grid=np.array([seq.t_i])) if profile is None else profile


def is_closed(seq: SequenceSpec, profile=None, tol=CLOSURE_TOL) -> bool:
    prof = _profile(seq, profile)
    return abs(prof.h_start) <= tol * seq.span


def scale_factor_exact(seq: SequenceSpec, k: float = K_EFF, profile=None,
                       tol: float = CLOSURE_TOL) -> float:
    """``S = k int h dt`` in rad per (m/s^2) for a closed interferometer."""
    prof = _profile(seq, profile)
    if abs(prof.h_start) > tol * seq.span:
        raise OpenInterferometerError(
            f"h(t_i) = {prof.h_start:.3e} s; use scale_factor_open")
    return k * prof.h_area


def scale_factor_open(seq: SequenceSpec, t0: float, k: float = K_EFF,
                      profile=None) -> tuple[float, float]:
    """Scale factor and velocity coefficient with ``v0`` defined at ``t0``.

    Returns ``(S, c_v)`` such that the phase is ``c_v * v0 + S * a``.
    """
    if not seq.t_i <= t0 <= seq.t_end:
        raise ValueError("t0 must lie within the sequence")
    prof = _profile(seq, profile)
    return (k * (prof.h_area + (seq.t_i - t0) * prof.h_start), k * prof.h_start)


def pulse_origins(seq: SequenceSpec) -> tuple[float, float, float]:
    """Temporal origins of the three pulses, each from its own start."""
    p1, p2, p3 = seq.pulses
    e1, e2, e3 = seq.eps
    o2 = (p2.duration / 2 if isinstance(p2, PerfectMirror)
          else temporal_origin(p2, Role.MIRROR, e2))
    return (temporal_origin(p1, Role.BEAMSPLITTER_1, e1), o2,
            temporal_origin(p3, Role.BEAMSPLITTER_3, e3))


def triangle_area(seq: SequenceSpec, origins) -> float:
    """Area under the triangle with vertices at the given pulse origins."""
    t1, t2, _ = seq.durations
    o1, o2, o3 = origins
    T = seq.T
    return 0.5 * ((T + (t1 - o1) + o2) ** 2 + (T + (t2 - o2) + o3) ** 2)


def scale_factor_triangular(seq: SequenceSpec, vertex_mode: str = "origins",
                            k: float = K_EFF) -> float:
    if vertex_mode == "origins":
        origins = pulse_origins(seq)
    elif vertex_mode == "midpoints":
        origins = tuple(d / 2 for d in seq.durations)
    else:
        raise ValueError(f"unknown vertex mode {vertex_mode!r}")
    return k * triangle_area(seq, origins)


def _rectangular_amplitude(p) -> float | None:
    if isinstance(p, Waveform) and len(p) and np.all(p.slices == p.slices[0]) and p.slices[0] != 0:
        return abs(float(p.slices[0]))
    return None


def dead_time(seq: SequenceSpec, k: float = K_EFF, profile=None) -> float:
    """Mirror dead-time ``tau_d``.

    Closed form ``2 tau - (2/Omega) tan(Omega tau / 2)`` (``tau`` half the
    mirror) for a rectangular mirror, ``4 int (h_tri - h) = tau_d^2``
    otherwise.
    """
    mirror = seq.pulse2
    if isinstance(mirror, PerfectMirror):
        return 0.0
    omega = _rectangular_amplitude(mirror)
    if omega is not None:
        omega *= 1 + seq.eps[1]
        half = mirror.duration / 2
        return 2 * half - (2 / omega) * np.tan(omega * half / 2)
    excess = triangle_area(seq, pulse_origins(seq)) - _profile(seq, profile).h_area
    if excess < 0:
        raise DeadTimeUndefinedError(
            "triangular response under-estimates the scale factor")
    return float(np.sqrt(4 * excess))


def scale_factor_trapezoidal(seq: SequenceSpec, k: float = K_EFF, profile=None) -> float:
    td = dead_time(seq, k, profile)
    return k * (triangle_area(seq, pulse_origins(seq)) - td ** 2 / 4)


def rectangular_scale_factor(omega: float, tau: float, T: float, k: float = K_EFF) -> float:
    """Closed-form scale factor of an equal-Rabi rectangular sequence.

    Beamsplitters of length ``tau``, mirror of length ``2 tau``.
    """
    return k * (T + 2 * tau) * (T + (2 / omega) * np.tan(omega * tau / 2))


@dataclass(frozen=True)
class ScaleFactorReport:
    exact: float
    triangular_origins: float
    triangular_midpoints: float
    trapezoidal: float | None
    dead_time: float | None
    closed: bool
    velocity_coefficient: float = 0.0

    @property
    def ppm_triangular_origins(self) -> float:
        return 1e6 * (self.triangular_origins / self.exact - 1)

    @property
    def ppm_triangular_midpoints(self) -> float:
        return 1e6 * (self.triangular_midpoints / self.exact - 1)

    @property
    def ppm_trapezoidal(self) -> float | None:
        return None if self.trapezoidal is None else 1e6 * (self.trapezoidal / self.exact - 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(ppm_triangular_origins=self.ppm_triangular_origins,
                 ppm_triangular_midpoints=self.ppm_triangular_midpoints,
                 ppm_trapezoidal=self.ppm_trapezoidal)
        return d

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def scale_factor_report(seq: SequenceSpec, k: float = K_EFF) -> ScaleFactorReport:
    """All scale-factor estimates for one sequence.

    Open sequences report the open-interferometer value with ``v0`` defined
    at the mirror origin.
    """
    prof = sensitivity_function(seq, grid=np.array([seq.t_i]))
    closed = is_closed(seq, prof)
    if closed:
        exact, cv = scale_factor_exact(seq, k, prof), 0.0
    else:
        t0 = seq.windows[1][0] + pulse_origins(seq)[1]
        exact, cv = scale_factor_open(seq, t0, k, prof)
    try:
        td = dead_time(seq, k, prof)
        trap = scale_factor_trapezoidal(seq, k, prof)
    except DeadTimeUndefinedError:
        td = trap = None
    return ScaleFactorReport(
        exact=exact,
        triangular_origins=scale_factor_triangular(seq, "origins", k),
        triangular_midpoints=scale_factor_triangular(seq, "midpoints", k),
        trapezoidal=trap, dead_time=td, closed=closed, velocity_coefficient=cv)
