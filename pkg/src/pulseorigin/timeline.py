"""Mach-Zehnder timeline: sequence description and fringe evaluation.

The fringe of a three-pulse sequence is read the way an experiment reads
it, by scanning the laser phase ``phi3`` of the recombiner::

    P_e(phi3) = P0 + Re(Z exp(i phi3))

``Z`` is the complex interference amplitude, the contrast is ``2|Z|`` and the
interferometer phase is ``arg Z`` measured from its value for the same
sequence on resonance. A laser phase step at time ``t`` acts on the fringe
exactly like a z-rotation of the state at ``t``; this is what the
sensitivity function differentiates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .dynamics import (SU2, Waveform, flip_su2, phase_kick_su2, rotation_su2,
                       su2_dag, su2_identity, su2_mul)
from .errors import DegenerateSequenceError, InvalidInputError

SLICE, FREE, FLIP, KICK = 0, 1, 2, 3


@dataclass(frozen=True)
class PerfectMirror:
    """Detuning-independent pi pulse occupying ``duration`` in the timeline.

    Acts as an instantaneous ``-i sx`` flip at its centre, so its origin is
    the centre and its dispersion gradient is zero for any detuning.
    """

    duration: float
    label: str = "perfect"

    @property
    def area(self) -> float:
        return float(np.pi)


Pulse = Waveform | PerfectMirror


@dataclass(frozen=True, eq=False)
class SequenceSpec:
    """Three pulses separated by two equal free-evolution periods ``T``."""

    pulse1: Waveform
    pulse2: Pulse
    pulse3: Waveform
    T: float
    t_i: float = 0.0
    eps: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidInputError(f"free-evolution time must be positive, got {self.T}")
        eps = tuple(float(e) for e in self.eps)
        if len(eps) != 3:
            raise InvalidInputError("need one amplitude error per pulse")
        object.__setattr__(self, "eps", eps)
        for p in (self.pulse1, self.pulse3):
            if not isinstance(p, Waveform) or len(p) == 0:
                raise InvalidInputError("beamsplitters must be non-empty waveforms")

    @property
    def pulses(self) -> tuple[Pulse, Pulse, Pulse]:
        return self.pulse1, self.pulse2, self.pulse3

    @property
    def durations(self) -> tuple[float, float, float]:
        return tuple(p.duration for p in self.pulses)

    @property
    def windows(self) -> list[tuple[float, float]]:
        t1, t2, t3 = self.durations
        s1 = self.t_i
        s2 = s1 + t1 + self.T
        s3 = s2 + t2 + self.T
        return [(s1, s1 + t1), (s2, s2 + t2), (s3, s3 + t3)]

    @property
    def t_end(self) -> float:
        return self.windows[2][1]

    @property
    def span(self) -> float:
        return self.t_end - self.t_i

    def with_eps(self, eps1=None, eps2=None, eps3=None) -> "SequenceSpec":
        e = list(self.eps)
        for i, v in enumerate((eps1, eps2, eps3)):
            if v is not None:
                e[i] = v
        return replace(self, eps=tuple(e))

    def with_common_eps(self, eps: float) -> "SequenceSpec":
        return replace(self, eps=(eps, eps, eps))

    def with_T(self, T: float) -> "SequenceSpec":
        return replace(self, T=T)


class DetuningProfile:
    """Time-dependent detuning with an exact running integral.

    ``value(t)`` is sampled at slice midpoints; ``integral(t0, t1)`` gives the
    exact free-evolution phase.
    """

    def value(self, t):  # pragma: no cover - interface
        raise NotImplementedError

    def integral(self, t0: float, t1: float) -> float:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantDetuning(DetuningProfile):
    delta: float

    def value(self, t):
        return np.full(np.shape(t), self.delta, dtype=float)

    def integral(self, t0, t1):
        return self.delta * (t1 - t0)


@dataclass
class _Elements:
    kind: np.ndarray
    start: np.ndarray
    length: np.ndarray
    amp: np.ndarray
    pulse: np.ndarray  # 1, 2, 3 inside pulses; 0 in free evolution
    phase: np.ndarray  # kick phase for KICK elements

    @property
    def stop(self):
        return self.start + self.length


def build_elements(seq: SequenceSpec, kicks: Sequence[tuple[float, float]] = ()) -> _Elements:
    """Flatten a sequence into slices, free intervals, flips and phase kicks.

    ``kicks`` are ``(time, phase)`` pairs; a kick is a laser phase step of
    ``phase`` at ``time`` and must fall in free evolution.
    """
    rows = []  # kind, start, length, amp, pulse, phase
    t = seq.t_i
    for j, (pulse, eps) in enumerate(zip(seq.pulses, seq.eps), start=1):
        if isinstance(pulse, PerfectMirror):
            half = pulse.duration / 2
            rows.append((FREE, t, half, 0.0, j, 0.0))
            rows.append((FLIP, t + half, 0.0, 0.0, j, 0.0))
            rows.append((FREE, t + half, half, 0.0, j, 0.0))
        else:
            amps = pulse.slices * (1.0 + eps)
            for n, a in enumerate(amps):
                rows.append((SLICE, t + n * pulse.dt, pulse.dt, a, j, 0.0))
        t += pulse.duration
        if j < 3:
            rows.append((FREE, t, seq.T, 0.0, 0, 0.0))
            t += seq.T
    for tk, ph in sorted(kicks):
        for i, r in enumerate(rows):
            if r[0] != FREE or r[4] != 0:
                continue
            if r[1] <= tk <= r[1] + r[2]:
                first = (FREE, r[1], tk - r[1], 0.0, 0, 0.0)
                kick = (KICK, tk, 0.0, 0.0, 0, ph)
                second = (FREE, tk, r[1] + r[2] - tk, 0.0, 0, 0.0)
                rows[i:i + 1] = [first, kick, second]
                break
        else:
            from .errors import UnsupportedTimingError
            raise UnsupportedTimingError(
                f"phase step at t={tk:.9g} s is not inside a free-evolution period")
    arr = np.array(rows, dtype=float)
    return _Elements(arr[:, 0].astype(int), arr[:, 1], arr[:, 2], arr[:, 3],
                     arr[:, 4].astype(int), arr[:, 5])


def element_su2(el: _Elements, detuning) -> list[SU2]:
    """Per-element propagators.

    ``detuning`` is a scalar/array (broadcast over a batch of atoms) or a
    ``DetuningProfile``.
    """
    out = []
    if isinstance(detuning, DetuningProfile):
        mids = el.start + 0.5 * el.length
        dvals = detuning.value(mids)
        for k in range(el.kind.size):
            kind = el.kind[k]
            if kind == SLICE:
                out.append(rotation_su2(el.amp[k], 0.0, -dvals[k], el.length[k]))
            elif kind == FREE:
                out.append(phase_kick_su2(detuning.integral(el.start[k], el.stop[k])))
            elif kind == FLIP:
                out.append(flip_su2())
            else:
                out.append(phase_kick_su2(el.phase[k]))
        return out
    delta = np.asarray(detuning, dtype=float)
    for k in range(el.kind.size):
        kind = el.kind[k]
        if kind == SLICE:
            out.append(rotation_su2(el.amp[k], 0.0, -delta, el.length[k]))
        elif kind == FREE:
            out.append(phase_kick_su2(delta * el.length[k]))
        elif kind == FLIP:
            out.append(flip_su2())
        else:
            out.append(phase_kick_su2(np.full(delta.shape, el.phase[k])))
    return out


def _arm_fringe(pre2: SU2, u2: SU2, mid: SU2, u3: SU2):
    """``Z`` from the two closed Mach-Zehnder arms.

    ``pre2`` propagates up to the mirror, ``mid`` is the (diagonal) free
    evolution between mirror and recombiner. Only the mirror's off-diagonal
    elements are kept: the arms it fails to swap leave the interferometer.
    """
    p, q = pre2[0], -np.conj(pre2[1])       # state entering the mirror
    x = u2[1] * q * mid[0]                  # arm arriving in |g>
    y = -np.conj(u2[1]) * p * np.conj(mid[0])  # arm arriving in |e>
    u_eg = -np.conj(u3[1])
    u_ee = np.conj(u3[0])
    return 2.0 * u_eg * x * np.conj(u_ee * y)


def _region_products(el: _Elements, ops: list[SU2], shape=()):
    pre2, u2, mid, u3 = (su2_identity(shape) for _ in range(4))
    seen_mirror = False
    for k, op in enumerate(ops):
        j = el.pulse[k]
        if j == 2:
            u2 = su2_mul(op, u2)
            seen_mirror = True
        elif j == 3:
            u3 = su2_mul(op, u3)
        elif seen_mirror:
            mid = su2_mul(op, mid)
        else:
            pre2 = su2_mul(op, pre2)
    return pre2, u2, mid, u3


def fringe_amplitude(seq: SequenceSpec, detuning=0.0, kicks=()) -> np.ndarray:
    """Complex interference amplitude ``Z`` (contrast ``2|Z|``).

    ``detuning`` is a scalar, an array of atom detunings, or a
    ``DetuningProfile``; ``kicks`` are laser phase steps ``(time, phase)``.
    """
    el = build_elements(seq, kicks)
    ops = element_su2(el, detuning)
    shape = np.shape(detuning) if not isinstance(detuning, DetuningProfile) else ()
    return _arm_fringe(*_region_products(el, ops, shape))


def reference_amplitude(seq: SequenceSpec) -> complex:
    z = complex(fringe_amplitude(seq, 0.0))
    if abs(z) < 1e-9:
        raise DegenerateSequenceError("sequence has no fringe on resonance")
    return z


def fringe_phase(z, z_ref: complex) -> np.ndarray:
    return np.angle(z * np.conj(z_ref))


# --- sensitivity ------------------------------------------------------------

def _m(u: SU2):
    """Matrix entries (m00, m01, m10, m11) of an SU(2) pair."""
    al, be = u
    return al, be, -np.conj(be), np.conj(al)


class GFunction:
    """Resonant sensitivity function ``g(t)`` of a sequence, evaluable anywhere.

    A laser phase step ``kappa`` at ``t`` is the diagonal operator
    ``diag(e^{i kappa/2}, e^{-i kappa/2})`` inserted into the evolution at
    ``t``. ``Z = 2 L1 conj(L2)`` with ``L1``, ``L2`` linear in that operator,
    which gives both the exact derivative and finite steps cheaply.
    """

    def __init__(self, seq: SequenceSpec):
        self.seq = seq
        self.el = build_elements(seq)
        ops = element_su2(self.el, 0.0)
        n = len(ops)
        al = np.empty(n + 1, complex)
        be = np.empty(n + 1, complex)
        p = su2_identity()
        al[0], be[0] = p
        for k, op in enumerate(ops):
            p = su2_mul(op, p)
            al[k + 1], be[k + 1] = p
        self.prefix_al, self.prefix_be = al, be
        pulse = self.el.pulse
        self.k2 = int(np.argmax(pulse == 2))
        self.k2_end = int(n - np.argmax(pulse[::-1] == 2))
        self.k3 = int(np.argmax(pulse == 3))
        self.P2 = self._prefix(self.k2)
        self.P2e = self._prefix(self.k2_end)
        self.P3 = self._prefix(self.k3)
        self.Pend = self._prefix(n)
        self.pre2, self.u2, self.mid, self.u3 = _region_products(self.el, ops)
        self.z_ref = complex(_arm_fringe(self.pre2, self.u2, self.mid, self.u3))
        if abs(self.z_ref) < 1e-9:
            raise DegenerateSequenceError("sequence has no fringe on resonance")

    def _prefix(self, k):
        return self.prefix_al[k], self.prefix_be[k]

    def _prefix_at(self, t):
        el = self.el
        idx = np.clip(np.searchsorted(el.start, t, side="right") - 1, 0, el.kind.size - 1)
        local = np.clip(t - el.start[idx], 0, None)
        amp = np.where(el.kind[idx] == SLICE, el.amp[idx], 0.0)
        partial = rotation_su2(amp, 0.0, 0.0, local)
        return su2_mul(partial, (self.prefix_al[idx], self.prefix_be[idx])), idx

    def _parts(self, t):
        """Closures giving (L1, L2) for an inserted diagonal (dg, de)."""
        p_t, idx = self._prefix_at(t)
        el = self.el
        region = np.select(
            [idx < self.k2, el.pulse[idx] == 2, idx < self.k3],
            [1, 2, 3], 4)
        psi_g, psi_e = p_t[0], -np.conj(p_t[1])
        W = _m(su2_mul(self.P2, su2_dag(p_t)))
        A2 = _m(su2_mul(p_t, su2_dag(self.P2)))
        B2 = _m(su2_mul(self.P2e, su2_dag(p_t)))
        A3 = _m(su2_mul(p_t, su2_dag(self.P3)))
        B3 = _m(su2_mul(self.Pend, su2_dag(p_t)))
        p0, q0 = self.pre2[0], -np.conj(self.pre2[1])
        b2 = self.u2[1]
        mg, me = self.mid[0], np.conj(self.mid[0])
        u_eg0, u_ee0 = -np.conj(self.u3[1]), np.conj(self.u3[0])

        def parts(dg, de):
            # region 1: before the mirror
            p = W[0] * dg * psi_g + W[1] * de * psi_e
            q = W[2] * dg * psi_g + W[3] * de * psi_e
            l1_1 = u_eg0 * b2 * q * mg
            l2_1 = u_ee0 * (-np.conj(b2)) * p * me
            # region 2: inside the mirror, M = B D A
            m_ge = B2[0] * dg * A2[1] + B2[1] * de * A2[3]
            m_eg = B2[2] * dg * A2[0] + B2[3] * de * A2[2]
            l1_2 = u_eg0 * m_ge * q0 * mg
            l2_2 = u_ee0 * m_eg * p0 * me
            # region 3: between mirror and recombiner
            l1_3 = u_eg0 * b2 * q0 * mg * dg
            l2_3 = u_ee0 * (-np.conj(b2)) * p0 * me * de
            # region 4: inside the recombiner, U3 = B D A
            u_eg = B3[2] * dg * A3[0] + B3[3] * de * A3[2]
            u_ee = B3[2] * dg * A3[1] + B3[3] * de * A3[3]
            l1_4 = u_eg * b2 * q0 * mg
            l2_4 = u_ee * (-np.conj(b2)) * p0 * me
            l1 = np.choose(region - 1, [l1_1, l1_2, l1_3, l1_4])
            l2 = np.choose(region - 1, [l2_1, l2_2, l2_3, l2_4])
            return l1, l2

        return parts

    def __call__(self, t, phase_step: float | None = None) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = np.zeros(t.shape)
        inside = (t >= self.seq.t_i) & (t <= self.seq.t_end)
        if not np.any(inside):
            return g
        parts = self._parts(t[inside])
        one = np.ones(int(np.count_nonzero(inside)), complex)
        if phase_step is None:
            l1, l2 = parts(one, one)
            d1, d2 = parts(0.5j * one, -0.5j * one)
            z = l1 * np.conj(l2)
            dz = d1 * np.conj(l2) + l1 * np.conj(d2)
            g[inside] = np.imag(dz / z)
            return g

        def estimate(h):
            kp = np.exp(0.5j * h) * one
            km = np.exp(-0.5j * h) * one
            a1, a2 = parts(kp, np.conj(kp))
            b1, b2 = parts(km, np.conj(km))
            return np.angle((a1 * np.conj(a2)) * np.conj(b1 * np.conj(b2))) / (2 * h)

        g1 = estimate(phase_step)
        g2 = estimate(phase_step / 2)
        if np.any(np.abs(g1 - g2) > 1e-4 * np.maximum(np.abs(g1), 1.0)):
            raise ArithmeticError("phase response not linear at this phase step")
        g[inside] = g2
        return g
