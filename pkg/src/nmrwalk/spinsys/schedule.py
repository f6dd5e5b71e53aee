"""Pulse schedules and their simulation.

A schedule is a time-ordered list of events on one molecule. Two frame
conventions are supported:

``rotating``
    every spin is tracked in its own rotating frame. Delays advance each
    spin's frame accumulator by ``2 pi nu t``; selective pulse phases are
    interpreted in the target's frame, and the simulated result is referred
    back to the per-spin frames at the end.
``carrier``
    all spins of a species share the carrier frame, so chemical-shift
    evolution during delays is real z rotation (the TCE control scheme).

In both conventions ``frame_z`` is a software phase change: it shifts the
accumulators and therefore every later pulse phase and the final frame.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .. import channels, qops
from ..qops import OperatorError
from . import pulses
from .molecule import Molecule

EVENT_KINDS = ("ideal_rotation", "hard_pulse", "soft_pulse", "delay", "gradient", "frame_z")
PULSE_KINDS = ("ideal_rotation", "hard_pulse", "soft_pulse")
FRAMES = ("rotating", "carrier")


@dataclass(frozen=True)
class PulseEvent:
    kind: str
    targets: tuple[int, ...] = ()
    angle: float = 0.0
    phase: float = 0.0
    duration: float = 0.0
    shape: Optional[tuple[float, ...]] = None
    gradient: Optional[channels.GradientParams] = None
    gradient_mode: str = "independent"
    tag: str = ""

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise OperatorError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.shape is not None:
            object.__setattr__(self, "shape", tuple(float(a) for a in self.shape))
        if self.duration < 0:
            raise OperatorError("event duration must be non-negative")
        if self.kind in ("ideal_rotation", "frame_z") and self.duration != 0:
            raise OperatorError(f"{self.kind} events are instantaneous")
        if self.kind == "soft_pulse" and (len(self.targets) != 1 or self.duration <= 0):
            raise OperatorError("soft pulses need one target and a positive duration")
        if self.kind == "gradient" and self.gradient is None:
            raise OperatorError("gradient events need GradientParams")

    @property
    def is_pulse(self) -> bool:
        return self.kind in PULSE_KINDS

    def to_dict(self) -> dict[str, Any]:
        d = {k: v for k, v in asdict(self).items() if v not in (None, (), "")}
        d["targets"] = list(self.targets)
        if self.shape is not None:
            d["shape"] = list(self.shape)
        if self.gradient is not None:
            g = self.gradient
            d["gradient"] = {
                "alpha_prime": g.alpha_prime,
                "t": g.t,
                "a": g.a,
                "gamma_per_spin": list(g.gamma_per_spin),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PulseEvent":
        d = dict(d)
        if "gradient" in d:
            d["gradient"] = channels.GradientParams(**d["gradient"])
        if "shape" in d:
            d["shape"] = tuple(d["shape"])
        d["targets"] = tuple(d.get("targets", ()))
        return cls(**d)


def delay(t: float, tag: str = "") -> PulseEvent:
    return PulseEvent("delay", duration=float(t), tag=tag)


def frame_z(targets: Sequence[int], angle: float, tag: str = "") -> PulseEvent:
    return PulseEvent("frame_z", targets=tuple(targets), angle=float(angle), tag=tag)


def ideal_rotation(targets: Sequence[int], angle: float, phase: float = 0.0, tag: str = "") -> PulseEvent:
    return PulseEvent("ideal_rotation", targets=tuple(targets), angle=float(angle), phase=float(phase), tag=tag)


def hard_pulse(
    targets: Sequence[int], angle: float, phase: float = 0.0, duration: float = 0.0, tag: str = ""
) -> PulseEvent:
    return PulseEvent(
        "hard_pulse", targets=tuple(targets), angle=float(angle), phase=float(phase), duration=duration, tag=tag
    )


def soft(m: Molecule, target: int, angle: float, phase: float = 0.0, tag: str = "") -> PulseEvent:
    """Default gaussian selective pulse on ``target`` (length from the molecule)."""
    duration = m.spins[target].soft_pulse
    shape = pulses.gaussian_shape(angle, duration)
    return PulseEvent(
        "soft_pulse", targets=(target,), angle=float(angle), phase=float(phase), duration=duration, shape=shape, tag=tag
    )


@dataclass
class PulseSchedule:
    molecule: Molecule
    events: list[PulseEvent] = field(default_factory=list)
    frame: str = "rotating"
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise OperatorError(f"frame must be one of {FRAMES}")

    def __len__(self) -> int:
        return len(self.events)

    def append(self, *events: PulseEvent) -> "PulseSchedule":
        self.events.extend(events)
        return self

    def extend(self, other: "PulseSchedule") -> "PulseSchedule":
        self.events.extend(other.events)
        return self

    @property
    def pulse_count(self) -> int:
        return sum(e.is_pulse for e in self.events)

    @property
    def duration(self) -> float:
        return float(sum(e.duration for e in self.events))

    @property
    def has_gradient(self) -> bool:
        return any(e.kind == "gradient" for e in self.events)

    def copy(self) -> "PulseSchedule":
        return replace(self, events=list(self.events), info=dict(self.info))

    def to_dict(self) -> dict[str, Any]:
        return {
            "molecule": self.molecule.to_dict(),
            "frame": self.frame,
            "events": [e.to_dict() for e in self.events],
            "info": {k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool))},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PulseSchedule":
        return cls(
            molecule=Molecule.from_dict(d["molecule"]),
            events=[PulseEvent.from_dict(e) for e in d["events"]],
            frame=d.get("frame", "rotating"),
            info=dict(d.get("info", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "PulseSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


NoiseHook = Callable[[np.ndarray, PulseEvent], np.ndarray]


def _event_lab(s: PulseSchedule, e: PulseEvent, acc: np.ndarray) -> Optional[np.ndarray]:
    """Carrier-frame propagator of one event (``None`` for pure frame changes)."""
    m = s.molecule
    n = m.n
    if e.kind == "delay":
        return pulses.free_evolution(m, e.duration)
    if e.kind == "ideal_rotation":
        out = np.eye(1, dtype=complex)
        for k in range(n):
            out = np.kron(out, qops.rotation(e.angle, e.phase + acc[k]) if k in e.targets else qops.I2)
        return out
    if e.kind == "hard_pulse":
        ref = acc[e.targets[0]] if e.targets else 0.0
        return pulses.hard_pulse_lab(m, e.targets, e.angle, e.phase + ref, e.duration)
    if e.kind == "soft_pulse":
        (t,) = e.targets
        shape = e.shape if e.shape is not None else tuple(pulses.gaussian_shape(e.angle, e.duration))
        return pulses.soft_pulse_lab(m, t, shape, e.duration, e.phase + acc[t])
    if e.kind == "gradient":
        return pulses.free_evolution(m, e.duration)
    return None


def _advance(s: PulseSchedule, e: PulseEvent, acc: np.ndarray) -> None:
    if e.kind == "frame_z":
        acc[list(e.targets)] -= e.angle
    elif s.frame == "rotating" and e.duration:
        acc += 2 * np.pi * np.asarray(s.molecule.offsets) * e.duration


def _to_frame(op: np.ndarray, acc: np.ndarray, state: bool) -> np.ndarray:
    f = pulses.frame_rotation(acc)
    if state:
        return f.conj()[:, None] * op * f[None, :]
    return f.conj()[:, None] * op


def event_propagators(s: PulseSchedule) -> list[np.ndarray]:
    """Per-event propagators in the schedule frame; their ordered product is the schedule's unitary.

    Each pulse is referred to the frame accumulators it actually sees, so
    the list is exact for this timing but not for a re-timed schedule.
    """
    if s.has_gradient:
        raise OperatorError("gradient events have no propagator")
    n = s.molecule.n
    acc = np.zeros(n)
    out = []
    for e in s.events:
        before = pulses.frame_rotation(acc)
        p = _event_lab(s, e, acc)
        _advance(s, e, acc)
        after = pulses.frame_rotation(acc).conj()
        if p is None:
            out.append(np.diag(after * before))
        else:
            out.append(after[:, None] * p * before[None, :])
    return out


def simulate_schedule(
    s: PulseSchedule,
    rho0: Optional[np.ndarray] = None,
    noise: Optional[NoiseHook] = None,
    trajectory: bool = False,
):
    """Run a schedule.

    Without ``rho0`` the schedule must be gradient free and the propagator
    (in the schedule's frame) is returned. With ``rho0`` the state is
    propagated, gradients are applied as ensemble dephasing after their free
    evolution, and ``noise(rho, event)`` runs after every event. Returns the
    final state, or the list of states after each event when ``trajectory``.
    """
    n = s.molecule.n
    acc = np.zeros(n)
    if rho0 is None:
        if s.has_gradient:
            raise OperatorError("gradient events need density-matrix simulation (pass rho0)")
        if noise is not None:
            raise OperatorError("noise hooks need density-matrix simulation (pass rho0)")
        u = np.eye(2**n, dtype=complex)
        for e in s.events:
            p = _event_lab(s, e, acc)
            if p is not None:
                u = p @ u
            _advance(s, e, acc)
        return _to_frame(u, acc, state=False)

    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (2**n, 2**n):
        raise OperatorError(f"initial state shape {rho.shape} does not match {n} spins")
    traj = []
    for e in s.events:
        p = _event_lab(s, e, acc)
        if p is not None:
            rho = p @ rho @ p.conj().T
        if e.kind == "gradient":
            rho = channels.gradient_pulse(rho, e.gradient, e.gradient_mode)
        _advance(s, e, acc)
        if noise is not None:
            rho = noise(rho, e)
        if trajectory:
            traj.append(_to_frame(rho, acc, state=True))
    return traj if trajectory else _to_frame(rho, acc, state=True)
