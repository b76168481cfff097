"""Two-level propagation for piecewise-constant waveforms.

Conventions used everywhere in the package:

* rotating-frame Hamiltonian ``H = (x*sx + y*sy + z*sz) / 2`` with field
  vector ``(x, y, z) = (Omega cos(phi), Omega sin(phi), -delta)``;
* state vectors are ``(c_g, c_e)`` and ``|g>`` sits at the +z pole;
* a free-evolving superposition phase ``arg(c_e * conj(c_g))`` advances
  by ``-delta * t``.

Every SU(2) operator is stored as the pair ``(alpha, beta)`` of the matrix
``[[alpha, beta], [-conj(beta), conj(alpha)]]``. The pair form keeps
products exactly unitary and broadcasts over detuning and amplitude grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

SU2 = tuple[np.ndarray, np.ndarray]


# --- SU(2) pair algebra -----------------------------------------------------

def su2_identity(shape=()) -> SU2:
    return np.ones(shape, dtype=complex), np.zeros(shape, dtype=complex)


def su2_mul(a: SU2, b: SU2) -> SU2:
    """Matrix product ``a @ b``."""
    a_al, a_be = a
    b_al, b_be = b
    return (a_al * b_al - a_be * np.conj(b_be),
            a_al * b_be + a_be * np.conj(b_al))


def su2_dag(u: SU2) -> SU2:
    return np.conj(u[0]), -u[1]


def su2_apply(u: SU2, c_g, c_e):
    al, be = u
    return al * c_g + be * c_e, -np.conj(be) * c_g + np.conj(al) * c_e


def su2_matrix(u: SU2) -> np.ndarray:
    al, be = np.broadcast_arrays(*u)
    out = np.empty(al.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = al
    out[..., 0, 1] = be
    out[..., 1, 0] = -np.conj(be)
    out[..., 1, 1] = np.conj(al)
    return out


def rotation_su2(x, y, z, dt) -> SU2:
    """``exp(-i (x sx + y sy + z sz) dt / 2)`` in axis-angle form."""
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                  np.asarray(z, float))
    norm = np.sqrt(x * x + y * y + z * z)
    half = 0.5 * norm * dt
    # sin(half)/norm without the 0/0 at zero field
    q = 0.5 * dt * np.sinc(half / np.pi)
    return np.cos(half) - 1j * q * z, -q * y - 1j * q * x


def phase_kick_su2(phi) -> SU2:
    """z-rotation equivalent to free evolution with ``delta * t = phi``."""
    phi = np.asarray(phi, dtype=float)
    return np.exp(0.5j * phi), np.zeros(phi.shape, dtype=complex)


def flip_su2() -> SU2:
    """Detuning-independent pi rotation about x, ``-i sx``."""
    return np.array(0j), np.array(-1j)


# --- domain types -----------------------------------------------------------

@dataclass(frozen=True)
class FieldVector:
    """Rotating-frame field vector in rad/s."""

    x: float
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise InvalidInputError(f"non-finite field vector {self}")

    @classmethod
    def from_control(cls, omega: float, delta: float = 0.0, phase: float = 0.0):
        return cls(omega * np.cos(phase), omega * np.sin(phase), -delta)

    @property
    def magnitude(self) -> float:
        return float(np.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2))


@dataclass(frozen=True)
class TwoLevelState:
    c_g: complex
    c_e: complex

    @classmethod
    def ground(cls):
        return cls(1.0 + 0j, 0j)

    @classmethod
    def superposition(cls, phase: float = 0.0):
        return cls(1 / np.sqrt(2) + 0j, np.exp(1j * phase) / np.sqrt(2))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c_g, self.c_e], dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.sqrt(abs(self.c_g) ** 2 + abs(self.c_e) ** 2))

    @property
    def relative_phase(self) -> float:
        return float(np.angle(self.c_e * np.conj(self.c_g)))

    def evolve(self, propagator: np.ndarray) -> "TwoLevelState":
        c_g, c_e = np.asarray(propagator) @ self.vector
        return TwoLevelState(complex(c_g), complex(c_e))


@dataclass(frozen=True, eq=False)
class Waveform:
    """Piecewise-constant signed Rabi frequency, one value per slice.

    ``slices`` holds ``Omega^n cos(phi^n)`` in rad/s with the laser phase
    restricted to 0 or pi. ``omega0`` is the nominal peak Rabi frequency.
    """

    slices: np.ndarray
    dt: float
    omega0: float
    label: str = ""
    headroom: float = field(default=0.0, repr=False)

    def __post_init__(self):
        arr = np.array(self.slices, dtype=float).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "slices", arr)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("waveform slices must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"slice duration must be positive, got {self.dt}")
        if not (np.isfinite(self.omega0) and self.omega0 > 0):
            raise InvalidInputError(f"omega0 must be positive, got {self.omega0}")

    def __len__(self):
        return self.slices.size

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (self.dt == other.dt and self.omega0 == other.omega0
                and np.array_equal(self.slices, other.slices))

    __hash__ = None

    @property
    def duration(self) -> float:
        return len(self) * self.dt

    @property
    def area(self) -> float:
        """Pulse area ``sum |Omega~^n| dt`` in rad."""
        return float(np.sum(np.abs(self.slices)) * self.dt)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.slices))) if len(self) else 0.0

    @property
    def within_peak_limit(self) -> bool:
        return self.peak <= self.omega0 * (1 + self.headroom)

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.slices * factor, self.dt, self.omega0, self.label)

    def with_slices(self, slices, label=None) -> "Waveform":
        return Waveform(slices, self.dt, self.omega0,
                        self.label if label is None else label)

    def __add__(self, other: "Waveform") -> "Waveform":
        if not np.isclose(self.dt, other.dt, rtol=1e-12, atol=0):
            raise InvalidInputError("cannot concatenate waveforms with different dt")
        return Waveform(np.concatenate([self.slices, other.slices]), self.dt,
                        self.omega0, self.label)

    # JSON: {"dt_s", "omega0_rad_s", "slices_rad_s", "label"}
    def to_dict(self) -> dict:
        return {"dt_s": float(self.dt), "omega0_rad_s": float(self.omega0),
                "slices_rad_s": [float(v) for v in self.slices],
                "label": self.label}

    @classmethod
    def from_dict(cls, data: dict) -> "Waveform":
        try:
            return cls(np.asarray(data["slices_rad_s"], dtype=float),
                       float(data["dt_s"]), float(data["omega0_rad_s"]),
                       str(data.get("label", "")))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed waveform record: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Waveform":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


def rectangular(omega: float, duration: float, n_slices: int = 1,
                omega0: float | None = None, label: str = "rect") -> Waveform:
    """Constant-amplitude pulse split into ``n_slices`` equal slices."""
    if n_slices < 1:
        raise InvalidInputError("need at least one slice")
    return Waveform(np.full(n_slices, float(omega)), duration / n_slices,
                    abs(omega) if omega0 is None else omega0, label)


def rectangular_area(area: float, omega0: float, dt: float | None = None,
                     label: str = "rect") -> Waveform:
    """Rectangular pulse of given area at peak ``omega0``.

    With ``dt`` given the pulse is cut into slices of that length; the area
    must then be an integer number of slices (within 1e-9).
    """
    duration = area / omega0
    if dt is None:
        return rectangular(omega0, duration, 1, omega0, label)
    n = duration / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise InvalidInputError(f"area {area} is not a whole number of slices")
    return rectangular(omega0, duration, int(round(n)), omega0, label)


# --- operations -------------------------------------------------------------

def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("non-finite input")


def slice_propagator(field: FieldVector, dt: float) -> np.ndarray:
    """``exp(-i Omega.sigma dt / 2)`` as a 2x2 matrix."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    return su2_matrix(rotation_su2(field.x, field.y, field.z, dt))


def waveform_su2(w: Waveform, delta=0.0, eps=0.0) -> SU2:
    """Time-ordered product ``U_M ... U_1`` broadcast over delta and eps."""
    if len(w) == 0:
        raise InvalidInputError("empty waveform")
    delta = np.asarray(delta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    _check_finite(delta, eps)
    shape = np.broadcast_shapes(delta.shape, eps.shape)
    z = np.broadcast_to(-delta, shape)
    scale = np.broadcast_to(1.0 + eps, shape)
    zero = np.zeros(shape)
    # Runs of equal slices collapse into one rotation.
    u = su2_identity(shape)
    values = w.slices
    start = 0
    n = len(values)
    while start < n:
        stop = start + 1
        while stop < n and values[stop] == values[start]:
            stop += 1
        step = rotation_su2(scale * values[start], zero, z, (stop - start) * w.dt)
        u = su2_mul(step, u)
        start = stop
    return u


def waveform_propagator(w: Waveform, delta=0.0, eps=0.0) -> np.ndarray:
    """Pulse propagator with amplitude scaled by ``1 + eps``.

    Returns a 2x2 matrix, or an array of them when ``delta``/``eps`` are
    arrays.
    """
    return su2_matrix(waveform_su2(w, delta, eps))


def evolve_free(state: TwoLevelState, delta: float, t: float) -> TwoLevelState:
    if t < 0:
        raise InvalidInputError("free-evolution time must be non-negative")
    _check_finite(delta, t)
    c_g, c_e = su2_apply(phase_kick_su2(delta * t), state.c_g, state.c_e)
    return TwoLevelState(complex(c_g), complex(c_e))


def bloch_coords(state: TwoLevelState) -> tuple[float, float, float]:
    """``<psi|sigma|psi>``; ``|g>`` maps to (0, 0, +1)."""
    coh = np.conj(state.c_g) * state.c_e
    return (float(2 * coh.real), float(2 * coh.imag),
            float(abs(state.c_g) ** 2 - abs(state.c_e) ** 2))


def transfer_from_su2(u: SU2) -> np.ndarray:
    """Excited-state population after acting on ``|g>``."""
    return np.abs(u[1]) ** 2
