"""Hard-pulse control of a strongly coupled carbon pair (the TCE scheme).

Both carbons share one carrier, set on resonance with the first carbon.
Hard pulses rotate them together; selectivity comes from letting the
carrier-frame chemical shift difference rotate the second carbon about z
between two collective pulses,

    R_{phi-pi/2}(pi/2) . Rz(-theta) . R_{phi+pi/2}(pi/2) = R_phi(theta)

on the precessing carbon and the identity on the other. During the delay
the carbon-carbon coupling keeps evolving; that residual cannot be
refocused with collective pulses. The hydrogen has its own carrier and is
refocused with hard pi pulses.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import qops
from ..qops import OperatorError
from . import pulses
from .compiler import circuit_unitary, walk_step_gates
from .molecule import Molecule
from .schedule import PulseEvent, PulseSchedule, delay, frame_z, hard_pulse, simulate_schedule

TWO_PI = 2 * np.pi


def carbon_pair(m: Molecule) -> tuple[int, int]:
    """First two spins of the same species: (reference carbon, precessing carbon)."""
    for a in range(m.n):
        same = m.same_species(a)
        if len(same) >= 2:
            return same[0], same[1]
    raise OperatorError(f"molecule {m.name!r} has no homonuclear pair")


def shift_difference(m: Molecule) -> float:
    a, b = carbon_pair(m)
    return m.spins[b].offset_hz - m.spins[a].offset_hz


def relative_z_phase(m: Molecule, t: float) -> float:
    """Carrier-frame z angle of the second carbon relative to the first after ``t``, wrapped to (-pi, pi]."""
    x = TWO_PI * shift_difference(m) * t
    return float(np.pi - (np.pi - x) % TWO_PI)


def _others(m: Molecule, pair: Sequence[int]) -> list[int]:
    return [k for k in range(m.n) if k not in pair]


def composite_delay(m: Molecule, angle: float) -> float:
    """Shortest delay after which the precessing carbon has turned by ``-angle`` relative to the reference."""
    dnu = shift_difference(m)
    if dnu == 0:
        raise OperatorError("carbons are degenerate: no shift difference to select with")
    cycles = (-angle / TWO_PI) % 1.0 if dnu > 0 else (angle / TWO_PI) % 1.0
    return float(cycles / abs(dnu))


def _refocused_delay(m: Molecule, t: float, tag: str) -> list[PulseEvent]:
    """Delay with the non-carbon spins flipped twice so their couplings to the carbons cancel."""
    others = _others(m, carbon_pair(m))
    if not others:
        return [delay(t, tag)]
    return [
        delay(t / 4, tag),
        hard_pulse(others, np.pi, 0.0, tag=tag + ":refocus"),
        delay(t / 2, tag),
        hard_pulse(others, np.pi, 0.0, tag=tag + ":refocus"),
        delay(t / 4, tag),
    ]


def tce_selective_events(
    m: Molecule, target: int | str, phase: float = 0.0, angle: float = np.pi / 2, refocus: bool = True
) -> list[PulseEvent]:
    """Hard-pulse composite for a selective ``R_phase(angle)`` on one carbon.

    The reference carbon is handled by rotating both carbons and then
    undoing the rotation on the precessing one, so both variants use the
    same short delay.
    """
    target = m.index(target)
    a, b = carbon_pair(m)
    if target not in (a, b):
        raise OperatorError(f"target {target} is not one of the carbons {a, b}")
    carbons = (a, b)
    tag = f"sel{m.spins[target].name}"
    out = []
    if target == a:
        out.append(hard_pulse(carbons, angle, phase, tag=tag))
        phase += np.pi
    tau = composite_delay(m, angle)
    out.append(hard_pulse(carbons, np.pi / 2, phase + np.pi / 2, tag=tag))
    out += _refocused_delay(m, tau, tag) if refocus else [delay(tau, tag)]
    # undo the reference carbon's own precession (nothing when the carrier sits on it)
    if m.spins[a].offset_hz:
        out.append(frame_z(carbons, -TWO_PI * m.spins[a].offset_hz * tau, tag=tag))
    out.append(hard_pulse(carbons, np.pi / 2, phase - np.pi / 2, tag=tag))
    return out


def tce_selective(
    m: Molecule, target: int | str, phase: float = 0.0, angle: float = np.pi / 2, refocus: bool = True
) -> PulseSchedule:
    """Selective rotation of one carbon from two collective hard pulses and a delay."""
    return PulseSchedule(m, tce_selective_events(m, target, phase, angle, refocus), frame="carrier")


def selective_ideal(m: Molecule, target: int | str, phase: float = 0.0, angle: float = np.pi / 2) -> np.ndarray:
    target = m.index(target)
    ops = [qops.rotation(angle, phase) if k == target else qops.I2 for k in range(m.n)]
    return qops.tensor(*ops)


def residual_coupling_angle(m: Molecule, angle: float = np.pi / 2) -> float:
    """Unrefocused carbon-carbon ZZ angle (rad) accumulated during one composite delay."""
    a, b = carbon_pair(m)
    return float(np.pi * m.j(a, b) * composite_delay(m, angle))


def residual_model_infidelity(m: Molecule, angle: float = np.pi / 2) -> float:
    """``1 - cos(theta/2)``: gate infidelity of an unrefocused ZZ rotation by the residual angle."""
    return float(1 - np.cos(residual_coupling_angle(m, angle) / 2))


def selective_infidelity(m: Molecule, target: int | str = 1, phase: float = 0.0, angle: float = np.pi / 2) -> float:
    u = simulate_schedule(tce_selective(m, target, phase, angle))
    return 1.0 - qops.gate_fidelity(u, selective_ideal(m, target, phase, angle))


def coupling_model_distance(ratio: float, j_hz: float = 100.0, t: float | None = None) -> float:
    """phase_distance between strong and ising evolution of a two-spin pair over ``1/(2J)``."""
    from .molecule import Coupling, Spin

    t = 1 / (2 * j_hz) if t is None else t
    spins = (Spin("A", 0.0), Spin("B", ratio * j_hz))
    strong = Molecule("pair", spins, (Coupling(0, 1, j_hz, "strong"),))
    return qops.phase_distance(pulses.free_evolution(strong, t), pulses.free_evolution(strong.with_model("ising"), t))


def tce_walk_step_events(m: Molecule) -> list[PulseEvent]:
    """One hand-written walk step for the (C1 coin, C2, H) register.

    The step is rewritten as ``X_c . V D' V^dag . Ry_c(pi/2)`` with
    ``D' = Rz_2(-pi/2) Rz_3(-pi/2) ZZ_c2(pi/2) ZZ_c3(-pi/2)``, so the z
    rotation the second carbon needs is exactly the one it picks up during
    the ``1/(2J)`` carbon coupling delay when the shift difference is
    ``-10.5 J``. The coin-hydrogen coupling is scaled to ``-pi/2`` by
    flipping the hydrogen for three quarters of that delay.
    """
    c, q2 = carbon_pair(m)
    (q3,) = _others(m, (c, q2))
    t = 1 / (2 * m.j(c, q2))
    hy = [q3]
    ev: list[PulseEvent] = []
    ev += tce_selective_events(m, c, np.pi / 2, np.pi / 2)
    ev += tce_selective_events(m, q2, -np.pi / 2, np.pi / 2)
    ev.append(hard_pulse(hy, np.pi / 2, -np.pi / 2, tag="V"))
    ev += [
        delay(t / 8, "zz"),
        hard_pulse(hy, np.pi, 0.0, tag="zz:refocus"),
        delay(3 * t / 4, "zz"),
        hard_pulse(hy, np.pi, 0.0, tag="zz:refocus"),
        delay(t / 8, "zz"),
    ]
    ev.append(frame_z(hy, -np.pi / 2, tag="zz"))
    ev += tce_selective_events(m, q2, np.pi / 2, np.pi / 2)
    ev.append(hard_pulse(hy, np.pi / 2, np.pi / 2, tag="V"))
    ev += tce_selective_events(m, c, 0.0, np.pi)
    return ev


def tce_walk_step(m: Molecule) -> PulseSchedule:
    return PulseSchedule(m, tce_walk_step_events(m), frame="carrier")


def tce_walk_unitary(m: Molecule) -> np.ndarray:
    """Ideal walk step on the (C1 coin, C2, H) register."""
    c, q2 = carbon_pair(m)
    (q3,) = _others(m, (c, q2))
    return circuit_unitary(walk_step_gates(c, q2, q3), m.n)
