"""Phase dispersion, dispersion gradient and temporal origin of one pulse.

The dispersion gradient ``m`` of a pulse is the slope, at resonance, of the
phase it writes onto the interferometer. What that phase is depends on the
pulse's job in a Mach-Zehnder sequence:

``beamsplitter-1``
    superposition phase ``arg(c_e conj(c_g))`` of ``U|g>``;
``mirror``
    ``2 arg(U_ge)``, the phase a pi rotation adds to the sum of its input
    and output superposition phases (with opposite sign);
``beamsplitter-3``
    superposition phase of ``U^dagger |g>``, the input state the
    recombiner maps onto ``|g>``.

With these choices ``m`` equals the area under the sensitivity function
during the pulse, and the origins follow as ``tau + m``, ``(tau - m)/2`` and
``m`` for the three roles.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dynamics import Waveform, su2_dag, waveform_su2
from .errors import SingularityError, UndefinedPhaseError

POLE_TOLERANCE = 1e-6
FD_STEP = 1e-4  # in units of omega0


class Role(str, Enum):
    BEAMSPLITTER_1 = "beamsplitter-1"
    MIRROR = "mirror"
    BEAMSPLITTER_3 = "beamsplitter-3"


def _role(role) -> Role:
    return Role(role.value if isinstance(role, Role) else role)


def _raw_phase(w: Waveform, delta, eps, role: Role) -> np.ndarray:
    u = waveform_su2(w, delta, eps)
    if role is Role.MIRROR:
        beta = u[1]
        if np.any(np.abs(beta) ** 2 < POLE_TOLERANCE):
            raise UndefinedPhaseError("mirror transfers no population; phase undefined")
        return 2.0 * np.angle(beta)
    if role is Role.BEAMSPLITTER_3:
        u = su2_dag(u)
    # U|g> = (alpha, -conj(beta))
    c_g, c_e = u[0], -np.conj(u[1])
    pop_e = np.abs(c_e) ** 2
    if np.any((pop_e < POLE_TOLERANCE) | (pop_e > 1 - POLE_TOLERANCE)):
        raise UndefinedPhaseError("state at a Bloch-sphere pole; phase undefined")
    return np.angle(c_e * np.conj(c_g))


def _wrap(phi):
    return np.angle(np.exp(1j * phi))


def superposition_phase(w: Waveform, delta, eps=0.0, role=Role.BEAMSPLITTER_1):
    """Phase dispersion relative to resonance, unwrapped along ``delta``.

    ``delta`` may be a scalar or a 1-D grid. The branch is fixed by the grid
    point nearest resonance, then followed outwards by nearest-branch
    selection.
    """
    role = _role(role)
    delta = np.asarray(delta, dtype=float)
    ref = _raw_phase(w, 0.0, eps, role)
    rel = _wrap(_raw_phase(w, delta, eps, role) - ref)
    if rel.ndim == 0:
        return float(rel)
    anchor = int(np.argmin(np.abs(delta)))
    out = rel.copy()
    for step in (1, -1):
        idx = range(anchor + step, rel.size if step > 0 else -1, step)
        prev = out[anchor]
        for i in idx:
            out[i] = prev + _wrap(rel[i] - prev)
            prev = out[i]
    return out


def dispersion_gradient(w: Waveform, eps=0.0, role=Role.BEAMSPLITTER_1,
                        step: float | None = None) -> float:
    """``m = dPhi/d(delta)`` at resonance, in seconds.

    Central differences at ``h`` and ``h/2`` combined by Richardson
    extrapolation; ``h`` defaults to ``1e-4 * omega0``.
    """
    role = _role(role)
    h = FD_STEP * w.omega0 if step is None else step

    def central(hh):
        up, down = _raw_phase(w, np.array([hh, -hh]), eps, role)
        return _wrap(up - down) / (2 * hh)

    return float((4 * central(h / 2) - central(h)) / 3)


def origin_from_gradient(m: float, duration: float, role) -> float:
    role = _role(role)
    if role is Role.BEAMSPLITTER_1:
        return duration + m
    if role is Role.MIRROR:
        return (duration - m) / 2
    return m


def temporal_origin(w: Waveform, role=Role.BEAMSPLITTER_1, eps=0.0) -> float:
    """Temporal origin in seconds from the start of the pulse."""
    return origin_from_gradient(dispersion_gradient(w, eps, role), w.duration, role)


def rectangular_origin_analytic(omega: float, tau: float) -> float:
    """``tau - tan(omega tau / 2) / omega`` for a rectangular beamsplitter."""
    half = omega * tau / 2
    if abs(abs(np.mod(half + np.pi / 2, np.pi) - np.pi / 2) - np.pi / 2) < 1e-9:
        raise SingularityError(f"tangent pole at omega*tau/2 = {half}")
    if half == 0:
        return 0.0
    return float(tau - np.tan(half) / omega)


def transfer_probability(w: Waveform, delta=0.0, eps=0.0):
    p = np.abs(waveform_su2(w, delta, eps)[1]) ** 2
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True, eq=False)
class PulseCharacterization:
    role: Role
    deltas: np.ndarray
    dispersion: np.ndarray
    transfer: np.ndarray
    m: float
    tau_origin: float
    duration: float
    area: float
    eps: float = 0.0

    def to_dict(self) -> dict:
        return {
            "role": self.role.value, "eps": self.eps,
            "m_s": self.m, "tau_origin_s": self.tau_origin,
            "duration_s": self.duration, "area_rad": self.area,
            "grid": [{"delta_rad_s": float(d), "phi_rad": float(p), "p_e": float(q)}
                     for d, p, q in zip(self.deltas, self.dispersion, self.transfer)],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["delta_rad_s", "phi_rad", "p_e"])
            for row in zip(self.deltas, self.dispersion, self.transfer):
                out.writerow([f"{v:.17g}" for v in row])


def characterize(w: Waveform, role=Role.BEAMSPLITTER_1, eps: float = 0.0,
                 deltas=None) -> PulseCharacterization:
    """Full report: dispersion and transfer over a detuning grid plus origin.

    The default grid spans +-1.5 omega0 in steps of 0.01 omega0.
    """
    role = _role(role)
    if deltas is None:
        deltas = np.linspace(-1.5, 1.5, 301) * w.omega0
    deltas = np.asarray(deltas, dtype=float)
    m = dispersion_gradient(w, eps, role)
    try:
        disp = superposition_phase(w, deltas, eps, role)
    except UndefinedPhaseError:
        # far-detuned points can reach a pole; report them as NaN
        disp = np.full(deltas.shape, np.nan)
        ok = []
        for i, d in enumerate(deltas):
            try:
                _raw_phase(w, d, eps, role)
                ok.append(i)
            except UndefinedPhaseError:
                pass
        if ok:
            disp[ok] = superposition_phase(w, deltas[ok], eps, role)
    return PulseCharacterization(
        role=role, deltas=deltas, dispersion=np.asarray(disp),
        transfer=np.atleast_1d(transfer_probability(w, deltas, eps)),
        m=m, tau_origin=origin_from_gradient(m, w.duration, role),
        duration=w.duration, area=w.area, eps=eps)
