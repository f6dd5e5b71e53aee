"""Spin Hamiltonians, free evolution and r.f. pulse propagators.

Offsets and couplings are in Hz; Hamiltonians are returned in rad/s,

    H = pi sum_i nu_i Z_i + (pi/2) sum_{i<j} J_ij Z_i Z_j

with strongly coupled pairs contributing ``(pi/2) J (XX + YY + ZZ)`` instead.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .. import qops
from ..qops import OperatorError
from .molecule import Molecule


def _pair_op(n: int, i: int, j: int, letter: str) -> np.ndarray:
    label = ["I"] * n
    label[i] = label[j] = letter
    return qops.pauli("".join(label))


@lru_cache(maxsize=256)
def _hamiltonian(m: Molecule) -> np.ndarray:
    n = m.n
    h = np.zeros((2**n, 2**n), dtype=complex)
    for k, s in enumerate(m.spins):
        h += np.pi * s.offset_hz * qops.embed(qops.Z, k, n)
    for c in m.couplings:
        coupling = _pair_op(n, c.i, c.j, "Z")
        if c.model == "strong":
            coupling = coupling + _pair_op(n, c.i, c.j, "X") + _pair_op(n, c.i, c.j, "Y")
        h += 0.5 * np.pi * c.j_hz * coupling
    h.setflags(write=False)
    return h


def hamiltonian(m: Molecule) -> np.ndarray:
    return _hamiltonian(m).copy()


@lru_cache(maxsize=256)
def _eig(m: Molecule):
    return np.linalg.eigh(_hamiltonian(m))


def free_evolution(m: Molecule, t: float) -> np.ndarray:
    """``exp(-i H t)`` in the carrier frame."""
    if t < 0:
        raise OperatorError("evolution time must be non-negative")
    h = _hamiltonian(m)
    if all(c.model == "ising" for c in m.couplings):
        return np.diag(np.exp(-1j * np.diag(h).real * t))
    w, v = _eig(m)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def frame_rotation(angles: Sequence[float]) -> np.ndarray:
    """Diagonal of ``prod_k Rz_k(angles[k])``."""
    return qops.diag_zphase(len(angles), angles)


def collective_rz(n: int, spins: Sequence[int], angle: float) -> np.ndarray:
    a = np.zeros(n)
    a[list(spins)] = angle
    return frame_rotation(a)


def transverse(n: int, spins: Sequence[int], phase: float) -> np.ndarray:
    """``sum_k (cos(phase) X_k + sin(phase) Y_k)`` over ``spins``."""
    op = np.zeros((2**n, 2**n), dtype=complex)
    for k in spins:
        op += np.cos(phase) * qops.embed(qops.X, k, n) + np.sin(phase) * qops.embed(qops.Y, k, n)
    return op


def hard_pulse_lab(m: Molecule, targets: Sequence[int], angle: float, phase: float, duration: float) -> np.ndarray:
    """Square pulse at the carrier: constant nutation on ``targets`` plus free evolution."""
    n = m.n
    if duration == 0:
        out = np.eye(1, dtype=complex)
        for k in range(n):
            out = np.kron(out, qops.rotation(angle, phase) if k in targets else qops.I2)
        return out
    h = _hamiltonian(m) + 0.5 * (angle / duration) * transverse(n, targets, phase)
    return qops.expm_hermitian(h, duration)


def gaussian_shape(angle: float, duration: float, n_samples: int = 128, truncation: float = 3.0) -> np.ndarray:
    """Gaussian amplitude samples (Hz) truncated at ``+-truncation`` sigma.

    Normalised so that ``2 pi sum(amp) dt`` equals ``angle``.
    """
    if duration <= 0:
        raise OperatorError("pulse duration must be positive")
    t = (np.arange(n_samples) + 0.5) / n_samples * 2 - 1
    env = np.exp(-0.5 * (truncation * t) ** 2)
    dt = duration / n_samples
    return env * angle / (2 * np.pi * env.sum() * dt)


def shape_angle(shape: Sequence[float], duration: float) -> float:
    shape = np.asarray(shape, dtype=float)
    return float(2 * np.pi * shape.sum() * duration / len(shape))


@lru_cache(maxsize=512)
def _soft_core(m: Molecule, target: int, shape: tuple[float, ...], duration: float) -> np.ndarray:
    """Propagator at phase 0 in the frame rotating collectively at the target's offset."""
    n = m.n
    nu = m.spins[target].offset_hz
    h_static = _hamiltonian(m) - np.pi * nu * sum(qops.embed(qops.Z, k, n) for k in range(n))
    rf = transverse(n, m.same_species(target), 0.0)
    dt = duration / len(shape)
    u = np.eye(2**n, dtype=complex)
    for amp in shape:
        u = qops.expm_hermitian(h_static + np.pi * amp * rf, dt) @ u
    u.setflags(write=False)
    return u


def soft_pulse_lab(
    m: Molecule, target: int, shape: Sequence[float], duration: float, lab_phase: float
) -> np.ndarray:
    """Carrier-frame propagator of a shaped pulse on resonance with ``target``.

    ``lab_phase`` is the r.f. phase at the start of the pulse in the carrier
    frame. Every spin of the target's species feels the field.
    """
    n = m.n
    core = _soft_core(m, target, tuple(float(a) for a in shape), float(duration))
    everyone = range(n)
    rot = collective_rz(n, everyone, lab_phase)
    g = collective_rz(n, everyone, 2 * np.pi * m.spins[target].offset_hz * duration)
    return (g * rot)[:, None] * core * rot.conj()[None, :]


def soft_pulse(
    m: Molecule,
    target: int,
    shape: Sequence[float] | None = None,
    duration: float | None = None,
    phase: float = 0.0,
    nominal_angle: float = np.pi / 2,
    tol: float = 1e-6,
) -> np.ndarray:
    """Shaped selective pulse in every spin's own rotating frame.

    Piecewise-constant integration of the full register Hamiltonian with the
    r.f. field applied to all spins of the target's species. The returned
    propagator excludes chemical-shift evolution (each spin is referred to
    its own frame), so an ideal result is ``R_phase(nominal_angle)`` on the
    target times coupling evolution.
    """
    duration = m.spins[target].soft_pulse if duration is None else duration
    if duration <= 0:
        raise OperatorError("pulse duration must be positive")
    if shape is None:
        shape = gaussian_shape(nominal_angle, duration)
    shape = np.asarray(shape, dtype=float)
    if len(shape) < 64:
        raise OperatorError("pulse shape needs at least 64 samples")
    got = shape_angle(shape, duration)
    if abs(got - nominal_angle) > tol * max(1.0, abs(nominal_angle)):
        raise OperatorError(f"shape integrates to {got:.6g} rad, nominal angle is {nominal_angle:.6g}")
    u = soft_pulse_lab(m, target, shape, duration, phase)
    back = frame_rotation([2 * np.pi * nu * duration for nu in m.offsets]).conj()
    return back[:, None] * u
