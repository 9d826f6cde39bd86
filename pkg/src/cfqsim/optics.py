"""Exact single-photon amplitude algebra over labeled optical modes.

A mode is a (path, polarization, time_bin) triple.  States hold a sparse
complex amplitude per occupied mode plus a ledger of probability absorbed
into named sinks, so that total probability is conserved exactly through
any sequence of linear elements and absorbers.

Conventions (fixed here, since they are not physically observable through
the probabilities this package reports):

* a beam splitter of reflectivity cos^2(theta) is the two-mode rotation
  ``(a, b) -> (cos(theta) a - sin(theta) b, sin(theta) a + cos(theta) b)``
* ``hwp(theta)  = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]``
* ``qwp(theta)  = R(theta) diag(1, i) R(-theta)`` with R the standard
  2x2 rotation matrix
* a mirror reflection flips the sign of the V component.
"""
from __future__ import annotations

import cmath
import math
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    InvalidElementError,
    InvalidWiringError,
    NumericalIntegrityError,
    RangeError,
)

H = "H"
V = "V"

NORM_TOL = 1e-9
UNITARY_TOL = 1e-12


class ModeId(NamedTuple):
    path: str
    pol: str
    time_bin: int


class ModeState:
    """Sparse complex amplitude vector plus absorbed-probability sinks."""

    __slots__ = ("amplitudes", "sinks")

    def __init__(
        self,
        amplitudes: Mapping[ModeId, complex] | None = None,
        sinks: Mapping[str, float] | None = None,
    ):
        self.amplitudes: dict[ModeId, complex] = dict(amplitudes or {})
        self.sinks: dict[str, float] = dict(sinks or {})

    def copy(self) -> "ModeState":
        return ModeState(self.amplitudes, self.sinks)

    def amplitude(self, mode: ModeId) -> complex:
        return self.amplitudes.get(mode, 0j)

    def probability(self, mode: ModeId) -> float:
        return abs(self.amplitudes.get(mode, 0j)) ** 2

    def total_norm(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values()) + sum(
            self.sinks.values()
        )

    def check_norm(self, tol: float = NORM_TOL) -> None:
        norm = self.total_norm()
        if abs(norm - 1.0) > tol:
            raise NumericalIntegrityError(
                f"total probability drifted to {norm!r} (tolerance {tol})"
            )

    def _set(self, mode: ModeId, value: complex) -> None:
        if value == 0:
            self.amplitudes.pop(mode, None)
        else:
            self.amplitudes[mode] = value

    def __repr__(self) -> str:
        return f"ModeState(amplitudes={self.amplitudes!r}, sinks={self.sinks!r})"


def new_single_photon(mode: ModeId) -> ModeState:
    """State with unit amplitude in `mode` and empty sinks."""
    return ModeState({mode: 1.0 + 0j})


def apply_rotation(state: ModeState, a: ModeId, b: ModeId, theta: float) -> ModeState:
    """Two-mode rotation; a beam splitter of reflectivity cos^2(theta).

    Absent modes are treated as amplitude zero.
    """
    if a == b:
        raise InvalidWiringError(f"rotation requires two distinct modes, got {a}")
    c, s = math.cos(theta), math.sin(theta)
    out = state.copy()
    aa, ab = out.amplitude(a), out.amplitude(b)
    out._set(a, c * aa - s * ab)
    out._set(b, s * aa + c * ab)
    return out


def apply_phase(state: ModeState, mode: ModeId, phi: float) -> ModeState:
    """Multiply the amplitude of one mode by exp(i phi)."""
    out = state.copy()
    out._set(mode, out.amplitude(mode) * cmath.exp(1j * phi))
    return out


def rotator(theta: float) -> np.ndarray:
    """Plain polarization rotation matrix R(theta)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hwp(theta: float) -> np.ndarray:
    """Half-wave plate with fast axis at `theta`."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(theta: float) -> np.ndarray:
    """Quarter-wave plate with fast axis at `theta`."""
    r = rotator(theta)
    return r @ np.diag([1.0, 1.0j]) @ rotator(-theta)


def mirror() -> np.ndarray:
    """Reflection: sign flip of the V component."""
    return np.diag([1.0, -1.0]).astype(complex)


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)


def apply_jones(state: ModeState, path: str, m: np.ndarray, time_bin: int = 0) -> ModeState:
    """Apply a 2x2 unitary to the (H, V) amplitudes of one path."""
    if not is_unitary(m):
        raise InvalidElementError("polarization matrix is not unitary to 1e-12")
    mh, mv = ModeId(path, H, time_bin), ModeId(path, V, time_bin)
    out = state.copy()
    ah, av = out.amplitude(mh), out.amplitude(mv)
    out._set(mh, m[0, 0] * ah + m[0, 1] * av)
    out._set(mv, m[1, 0] * ah + m[1, 1] * av)
    return out


def apply_pbs(
    state: ModeState,
    in_path: str,
    h_path: str,
    v_path: str,
    time_bin: int | None = None,
) -> ModeState:
    """Polarizing splitter: H of `in_path` moves to `h_path`, V to `v_path`.

    With time_bin=None every occupied bin of `in_path` is routed.
    """
    if h_path == v_path:
        raise InvalidWiringError("PBS output paths must be distinct")
    out = state.copy()
    moves = [
        m
        for m in list(out.amplitudes)
        if m.path == in_path and (time_bin is None or m.time_bin == time_bin)
    ]
    for m in moves:
        dest_path = h_path if m.pol == H else v_path
        dest = ModeId(dest_path, m.pol, m.time_bin)
        if dest == m:
            continue
        if dest in out.amplitudes:
            raise InvalidWiringError(f"PBS output mode {dest} already occupied")
        out._set(dest, out.amplitude(m))
        out._set(m, 0j)
    return out


def absorb(state: ModeState, mode: ModeId, sink: str, fraction: float) -> ModeState:
    """Move `fraction` of the mode's probability into a named sink."""
    if not 0.0 <= fraction <= 1.0:
        raise RangeError(f"absorb fraction must be in [0, 1], got {fraction}")
    out = state.copy()
    amp = out.amplitude(mode)
    if amp == 0 or fraction == 0.0:
        return out
    taken = (abs(amp) ** 2) * fraction
    out.sinks[sink] = out.sinks.get(sink, 0.0) + taken
    out._set(mode, amp * math.sqrt(1.0 - fraction))
    return out


def detect(
    state: ModeState, ports: Mapping[str, Iterable[ModeId]]
) -> dict[str, float]:
    """Probability routed to each detector; ports must not share modes."""
    seen: set[ModeId] = set()
    port_sets: dict[str, set[ModeId]] = {}
    for name, modes in ports.items():
        mode_set = set(modes)
        if mode_set & seen:
            raise InvalidWiringError(f"detector {name!r} shares modes with another port")
        seen |= mode_set
        port_sets[name] = mode_set
    probs = {
        name: sum(state.probability(m) for m in modes)
        for name, modes in port_sets.items()
    }
    total = sum(probs.values()) + sum(state.sinks.values())
    # residual: amplitude that never reached a port; bookkeeping only
    residual = state.total_norm() - total
    if total - 1.0 > NORM_TOL or residual < -NORM_TOL:
        raise NumericalIntegrityError("detection probabilities exceed unity")
    return probs
