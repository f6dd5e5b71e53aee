"""Compile gate lists into pulse schedules.

A gate list is a time-ordered sequence of single-spin transverse rotations,
z rotations and ZZ couplings. Compilation works in layers:

* z rotations become ``frame_z`` events (free, no pulse);
* transverse rotations become selective pulses. Each pulse is fitted once
  with :func:`error_decompose`; its z errors are cancelled by frame changes
  on either side and half of its coupling error is charged to the coupling
  block before it, half to the block after;
* between pulses, wanted ZZ angles and charged pulse errors are realised by
  a coupling block: delays separated by pi pulses, i.e. a sequence of spin
  sign patterns whose durations solve a linear program;
* finally the delays are refined against the full simulation and a per-spin
  frame correction is appended. The achieved fidelity is stored in
  ``schedule.info["fidelity"]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from .. import qops
from ..walk import walk_step
from . import pulses
from .decompose import error_decompose
from .molecule import Molecule
from .optimize import simplex_minimize
from .schedule import (
    PulseEvent,
    PulseSchedule,
    delay,
    _advance,
    _event_lab,
    frame_z,
    ideal_rotation,
    simulate_schedule,
)

PULSE_MODES = ("soft", "ideal")
TWO_PI = 2 * np.pi
# Coupling angles below this are left uncorrected rather than paying for a block.
DEFAULT_ZZ_TOL = 4e-3


class CompileError(ValueError):
    """The gate list cannot be realised on the molecule."""


@dataclass(frozen=True)
class Rotation:
    """``R_phase(angle)`` on one spin."""

    spin: int
    angle: float
    phase: float = 0.0


@dataclass(frozen=True)
class ZRotation:
    spin: int
    angle: float


@dataclass(frozen=True)
class ZZ:
    """``exp(-i angle Z_i Z_j / 2)``."""

    i: int
    j: int
    angle: float

    def __post_init__(self):
        if self.i == self.j:
            raise CompileError("ZZ needs two distinct spins")
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)


Gate = Union[Rotation, ZRotation, ZZ]


def gate_spins(g: Gate) -> tuple[int, ...]:
    return (g.i, g.j) if isinstance(g, ZZ) else (g.spin,)


def gate_unitary(g: Gate, n: int) -> np.ndarray:
    if isinstance(g, Rotation):
        return qops.embed(qops.rotation(g.angle, g.phase), g.spin, n)
    if isinstance(g, ZRotation):
        return qops.embed(qops.rz(g.angle), g.spin, n)
    return np.diag(qops.diag_zphase(n, zz_angles={g.pair: g.angle}))


def circuit_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    """Product of a time-ordered gate list (first gate acts first)."""
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        u = gate_unitary(g, n) @ u
    return u


def _wrap(a: float, period: float = TWO_PI) -> float:
    """Angle in ``(-period/2, period/2]``."""
    return float(-((-a + period / 2) % period - period / 2))


def _normalize(g: Gate) -> Optional[Gate]:
    """Canonical form, or ``None`` for an identity (up to global phase)."""
    if isinstance(g, Rotation):
        angle, phase = _wrap(g.angle, 2 * TWO_PI), g.phase
        if angle < 0:
            angle, phase = -angle, phase + np.pi
        if abs(_wrap(angle)) < 1e-12:
            return None
        return Rotation(g.spin, angle, phase % TWO_PI)
    if isinstance(g, ZRotation):
        angle = _wrap(g.angle, 2 * TWO_PI)
        return None if abs(_wrap(angle)) < 1e-12 else ZRotation(g.spin, angle)
    angle = _wrap(g.angle, 2 * TWO_PI)
    return None if abs(_wrap(angle)) < 1e-12 else ZZ(g.i, g.j, angle)


def _commute(a: Gate, b: Gate) -> bool:
    if not set(gate_spins(a)) & set(gate_spins(b)):
        return True
    return not isinstance(a, Rotation) and not isinstance(b, Rotation)


_NO_MERGE = object()


def _merge(a: Gate, b: Gate):
    """``b after a`` as one gate, ``None`` if they cancel, or ``_NO_MERGE``."""
    if type(a) is not type(b) or gate_spins(a) != gate_spins(b):
        return _NO_MERGE
    if isinstance(a, Rotation):
        d = _wrap(b.phase - a.phase)
        if abs(d) < 1e-12:
            return _normalize(Rotation(a.spin, a.angle + b.angle, a.phase))
        if abs(abs(d) - np.pi) < 1e-12:
            return _normalize(Rotation(a.spin, a.angle - b.angle, a.phase))
        return _NO_MERGE
    if isinstance(a, ZRotation):
        return _normalize(ZRotation(a.spin, a.angle + b.angle))
    return _normalize(ZZ(a.i, a.j, a.angle + b.angle))


def simplify(gates: Sequence[Gate]) -> list[Gate]:
    """Peephole cancellation: merge gates on the same axis through commuting neighbours."""
    out: list[Gate] = []
    for g in gates:
        g = _normalize(g)
        if g is None:
            continue
        k = len(out) - 1
        while k >= 0:
            merged = _merge(out[k], g)
            if merged is not _NO_MERGE:
                del out[k]
                if merged is not None:
                    out.insert(k, merged)
                break
            if not _commute(out[k], g):
                k = -1
                break
            k -= 1
        if k < 0:
            out.append(g)
    return out


def walk_step_gates(coin: int = 0, q2: int = 1, q3: int = 2) -> list[Gate]:
    """One square-walk step as rotations and couplings.

    The shift is conjugated into a diagonal gate by ``R_y(pi/2)`` on both
    position spins, ``X = R_y Z R_y^dag``, and then
    ``P_H Z_2 + P_T Z_3 ~ Rz_2(pi/2) Rz_3(pi/2) ZZ_12(pi/2) ZZ_13(-pi/2)``;
    the Hadamard coin is ``R_y(pi/2) Rz(pi)`` up to phase.
    """
    half = np.pi / 2
    return [
        Rotation(q2, half, -half),
        Rotation(q3, half, -half),
        ZRotation(coin, np.pi),
        Rotation(coin, half, half),
        ZRotation(q2, half),
        ZRotation(q3, half),
        ZZ(coin, q2, half),
        ZZ(coin, q3, -half),
        Rotation(q2, half, half),
        Rotation(q3, half, half),
    ]


def walk_gates(steps: int, coin: int = 0, q2: int = 1, q3: int = 2) -> list[Gate]:
    return [g for _ in range(steps) for g in walk_step_gates(coin, q2, q3)]


def register_unitary(u3: np.ndarray, n: int, register: Sequence[int]) -> np.ndarray:
    """Embed a unitary on ``register`` (in its own spin order) into ``n`` spins."""
    k = len(register)
    rest = [s for s in range(n) if s not in register]
    full = np.kron(u3, np.eye(2 ** (n - k)))
    # factor order of ``full`` is register + rest; undo it
    order = list(register) + rest
    inverse = [order.index(s) for s in range(n)]
    return qops.permute_spins(full, inverse)


def walk_unitary(steps: int, n: int, register: Sequence[int]) -> np.ndarray:
    return register_unitary(np.linalg.matrix_power(walk_step(), steps), n, register)


# ---------------------------------------------------------------- pulse models


@dataclass(frozen=True)
class PulseModel:
    """Fitted errors of one selective pulse (phase independent)."""

    duration: float
    pre: tuple[float, ...]
    post: tuple[float, ...]
    zz: tuple[float, ...]  # full error angle per pair, ordered as ``_pairs(n)``
    residual: float


@lru_cache(maxsize=None)
def _pairs(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(n), 2))


@lru_cache(maxsize=256)
def pulse_model(m: Molecule, target: int, angle: float, mode: str = "soft") -> PulseModel:
    n = m.n
    if mode == "ideal":
        return PulseModel(0.0, (0.0,) * n, (0.0,) * n, (0.0,) * len(_pairs(n)), 0.0)
    u = pulses.soft_pulse(m, target, nominal_angle=angle)
    d = error_decompose(u, qops.embed(qops.rotation(angle), target, n), tol=1e-12, max_evals=4000, restarts=2)
    return PulseModel(
        m.spins[target].soft_pulse,
        d.pre_z,
        d.post_z,
        tuple(d.zz_error[p] for p in _pairs(n)),
        d.residual_infidelity,
    )


def _pulse_events(m: Molecule, target: int, angle: float, phase: float, mode: str, tag: str) -> list[PulseEvent]:
    model = pulse_model(m, target, angle, mode)
    events = [frame_z([k], -a, tag="pre") for k, a in enumerate(model.pre) if abs(a) > 1e-12]
    if mode == "ideal":
        events.append(ideal_rotation([target], angle, phase, tag=tag))
    else:
        shape = tuple(pulses.gaussian_shape(angle, model.duration))
        events.append(
            PulseEvent("soft_pulse", (target,), angle, phase, model.duration, shape=shape, tag=tag)
        )
    events += [frame_z([k], -a, tag="post") for k, a in enumerate(model.post) if abs(a) > 1e-12]
    return events


# ------------------------------------------------------------- coupling blocks


@lru_cache(maxsize=64)
def _orderings(n: int, weights: tuple[float, ...]) -> list[tuple[float, tuple[int, ...]]]:
    """Cheapest visiting order for every set of sign classes.

    Sign vectors are bit masks (bit ``k`` set = spin ``k`` inverted). A class
    is a pattern up to global inversion; its representative keeps spin 0
    upright. Each entry is ``(pi-pulse cost, masks visited)`` for a walk that
    starts and ends upright and visits each class of the set once, picking
    whichever representative is cheaper to reach.
    """
    full = (1 << n) - 1
    classes = list(range(1, 1 << (n - 1)))
    w = np.asarray(weights)

    def cost(a: int, b: int) -> float:
        x = a ^ b
        return float(sum(w[k] for k in range(n) if x >> (n - 1 - k) & 1))

    out = [(0.0, ())]
    for size in range(1, len(classes) + 1):
        for subset in itertools.combinations(classes, size):
            reps = [(c, full ^ c) for c in subset]
            # Held-Karp over (visited mask, last class, representative)
            best = {}
            for i, pair in enumerate(reps):
                for r in (0, 1):
                    best[(1 << i, i, r)] = (cost(0, pair[r]), (pair[r],))
            for mask in range(1, 1 << size):
                for i in range(size):
                    for r in (0, 1):
                        key = (mask, i, r)
                        if key not in best:
                            continue
                        c0, path = best[key]
                        for j in range(size):
                            if mask >> j & 1:
                                continue
                            for s in (0, 1):
                                nk = (mask | 1 << j, j, s)
                                c = c0 + cost(reps[i][r], reps[j][s])
                                if nk not in best or c < best[nk][0]:
                                    best[nk] = (c, path + (reps[j][s],))
            done = (1 << size) - 1
            total = min(
                (best[(done, i, r)][0] + cost(reps[i][r], 0), best[(done, i, r)][1])
                for i in range(size)
                for r in (0, 1)
            )
            out.append(total)
    out.sort(key=lambda t: (t[0], len(t[1])))
    return out


def _signs(mask: int, n: int) -> np.ndarray:
    return np.array([-1.0 if mask >> (n - 1 - k) & 1 else 1.0 for k in range(n)])


@dataclass(frozen=True)
class BlockPlan:
    masks: tuple[int, ...]  # sign pattern of each segment, first is upright
    durations: tuple[float, ...]
    cost: float
    realised: tuple[float, ...]  # coupling angle the block produces on every pair

    @property
    def duration(self) -> float:
        return float(sum(self.durations))


# Weight (seconds per radian) of leftover angle on pairs a block is not required to fix.
CARRY_PENALTY = 0.01


def _refocus_offsets(n: int, masks: Sequence[int], refocus: dict[int, PulseModel]) -> np.ndarray:
    """Coupling angle picked up during the pi pulses of a sign walk."""
    pairs = _pairs(n)
    offsets = np.zeros(len(pairs))
    walk = list(masks) + [0]
    for a, b in zip(walk[:-1], walk[1:]):
        state = a
        for k in range(n):
            if (a ^ b) >> (n - 1 - k) & 1:
                s = _signs(state, n)
                for p, (i, j) in enumerate(pairs):
                    if k not in (i, j):
                        offsets[p] += s[i] * s[j] * refocus[k].zz[p]
                state ^= 1 << (n - 1 - k)
    return offsets


def _block_lp(
    m: Molecule,
    targets: np.ndarray,
    masks: Sequence[int],
    refocus: dict[int, PulseModel],
    required: np.ndarray,
    slack: float = 0.0,
):
    """Segment durations for a fixed sign walk, or ``None`` if infeasible.

    Required pairs must hit their target to within ``slack``; the others are
    pulled towards it with an L1 penalty. Returns ``(durations, realised)``.
    """
    n = m.n
    pairs = _pairs(n)
    offsets = _refocus_offsets(n, masks, refocus)
    k = len(masks)
    a = np.zeros((len(pairs), k))
    for p, (i, j) in enumerate(pairs):
        for col, mask in enumerate(masks):
            s = _signs(mask, n)
            a[p, col] = np.pi * m.j(i, j) * s[i] * s[j]
    b = np.asarray(targets) - offsets
    req = [p for p in range(len(pairs)) if required[p]]
    free = [p for p in range(len(pairs)) if not required[p] and m.j(*pairs[p]) != 0]
    nf = len(free)
    cost = np.concatenate([np.ones(k), CARRY_PENALTY * np.ones(nf)])
    rows, rhs = [], []
    for p in req:
        rows += [np.concatenate([a[p], np.zeros(nf)]), np.concatenate([-a[p], np.zeros(nf)])]
        rhs += [b[p] + slack, slack - b[p]]
    for col, p in enumerate(free):
        e = np.zeros(nf)
        e[col] = -1.0
        rows += [np.concatenate([a[p], e]), np.concatenate([-a[p], e])]
        rhs += [b[p], -b[p]]
    if not rows:
        return (0.0,) * k, tuple(offsets)
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    d = np.clip(res.x[:k], 0, None)
    if req and np.max(np.abs(a[req] @ d - b[req])) > slack + 1e-9:
        return None
    return tuple(float(x) for x in d), tuple(a @ d + offsets)


def plan_block(
    m: Molecule,
    targets: Sequence[float],
    refocus: dict[int, PulseModel],
    slack: float = 0.0,
    required: Optional[Sequence[bool]] = None,
) -> BlockPlan:
    """Cheapest refocusing pattern (fewest weighted pi pulses, then shortest).

    ``required`` marks the pairs that must reach their target (default all);
    each may miss it by ``slack`` radians.
    """
    n = m.n
    pairs = _pairs(n)
    targets = np.asarray(targets, dtype=float)
    required = np.ones(len(pairs), bool) if required is None else np.asarray(required, bool)
    for p, (i, j) in enumerate(pairs):
        if required[p] and m.j(i, j) == 0 and abs(_wrap(targets[p])) > max(slack, 1e-12):
            raise CompileError(f"pair ({i}, {j}) has no coupling but needs angle {targets[p]:.4g}")
    weights = tuple(refocus[k].residual + 1e-6 for k in range(n))
    best: Optional[BlockPlan] = None
    best_score = np.inf
    for cost, walk in _orderings(n, weights):
        if best is not None and cost > best.cost + 1e-12:
            break
        masks = (0,) + walk
        sol = _block_lp(m, targets, masks, refocus, required, slack)
        if sol is None:
            continue
        d, realised = sol
        miss = sum(abs(realised[p] - targets[p]) for p in range(len(pairs)) if not required[p])
        score = sum(d) + CARRY_PENALTY * miss
        if score < best_score:
            best, best_score = BlockPlan(masks, d, cost, realised), score
    if best is None:
        bad = [pairs[p] for p in range(len(pairs)) if required[p] and abs(targets[p]) > 1e-12]
        raise CompileError(f"infeasible coupling targets for pairs {bad}: sign system has no non-negative solution")
    return best


# ---------------------------------------------------------------- compilation


class _Builder:
    def __init__(self, m: Molecule, mode: str, zz_tol: float):
        self.m = m
        self.mode = mode
        self.zz_tol = zz_tol
        # ideal pulses can hit every target exactly; shaped ones leave fit residue anyway
        self.slack = 0.0 if mode == "ideal" else 0.5 * zz_tol
        self.pairs = _pairs(m.n)
        self.pending = np.zeros(len(self.pairs))  # realised minus wanted coupling angle
        self.wanted = False  # pending includes requested (not just error) coupling
        self.events: list[PulseEvent] = []
        self.dropped = 0.0
        self.blocks = 0
        self.refocus = {k: pulse_model(m, k, np.pi, mode) for k in range(m.n)}

    def rotation(self, g: Rotation) -> None:
        model = pulse_model(self.m, g.spin, g.angle, self.mode)
        half = 0.5 * np.asarray(model.zz)
        self.pending += half
        touched = np.array([g.spin in pr for pr in self.pairs])
        if np.any(np.abs(self.pending[touched]) > self.zz_tol):
            self.flush(None if self.wanted else touched)
        for p in np.flatnonzero(touched):
            self.dropped += self.pending[p] ** 2 / 4
            self.pending[p] = 0.0
        self.events += _pulse_events(self.m, g.spin, g.angle, g.phase, self.mode, tag="gate")
        self.pending += half

    def zz(self, g: ZZ) -> None:
        self.pending[self.pairs.index(g.pair)] -= g.angle
        self.wanted = True

    def z(self, g: ZRotation) -> None:
        self.events.append(frame_z([g.spin], g.angle, tag="gate"))

    def flush(self, required: Optional[np.ndarray] = None) -> None:
        """Emit a coupling block cancelling ``pending`` (on the required pairs)."""
        targets = np.array([_wrap(t) for t in -self.pending])
        plan = plan_block(self.m, targets, self.refocus, self.slack, required)
        n = self.m.n
        walk = list(plan.masks) + [0]
        self.blocks += 1
        for idx, (mask, d) in enumerate(zip(plan.masks, plan.durations)):
            if d > 0:
                self.events.append(delay(d, tag="block"))
            nxt = walk[idx + 1]
            for k in range(n):
                if (mask ^ nxt) >> (n - 1 - k) & 1:
                    self.events += _pulse_events(self.m, k, np.pi, 0.0, self.mode, tag="refocus")
        self.pending = np.array([_wrap(x) for x in self.pending + np.asarray(plan.realised)])
        if required is None or np.all(required):
            self.wanted = False


def _frame_fit(u_sim: np.ndarray, u_ideal: np.ndarray) -> np.ndarray:
    """Per-spin z angles ``z`` with ``U_sim ~ prod Rz(z) U_ideal`` (least squares on phases)."""
    n = qops.n_spins(u_sim)
    diag = np.diag(u_sim @ qops.dagger(u_ideal))
    s = qops.z_signs(n).astype(float)
    ref = diag[0] / abs(diag[0]) if abs(diag[0]) > 1e-12 else 1.0
    phase = np.angle(diag * np.conj(ref))
    a = np.hstack([-0.5 * s, np.ones((2**n, 1))])
    w = np.abs(diag)
    x, *_ = np.linalg.lstsq(a * w[:, None], phase * w, rcond=None)
    return x[:n]


def _with_frame(s: PulseSchedule, u_ideal: np.ndarray, events: list[PulseEvent]) -> tuple[list[PulseEvent], float]:
    trial = PulseSchedule(s.molecule, events, s.frame)
    u = simulate_schedule(trial)
    z = _frame_fit(u, u_ideal)
    fixed = [frame_z([k], -a, tag="final") for k, a in enumerate(z) if abs(a) > 1e-12]
    corr = qops.diag_zphase(s.molecule.n, -z)
    return events + fixed, qops.gate_fidelity(corr[:, None] * u, u_ideal)


def _coupling_generator(m: Molecule) -> np.ndarray:
    """Rotating-frame Hamiltonian during a delay (couplings only)."""
    return pulses.hamiltonian(replace(m, spins=tuple(replace(sp, offset_hz=0.0) for sp in m.spins)))


class _Retimer:
    """Fast exact unitary of a rotating-frame schedule as a function of its delay lengths.

    A pulse on target ``t`` seen from the per-spin frames is ``E Q E^dag``
    with ``Q`` fixed and ``E = prod_k Rz_k(acc_t - acc_k)`` diagonal, so
    re-timing only changes cheap diagonal factors.
    """

    def __init__(self, s: PulseSchedule, slots: Sequence[int]):
        if s.frame != "rotating":
            raise CompileError("re-timing needs a rotating-frame schedule")
        m = s.molecule
        n = m.n
        self.n = n
        self.signs = qops.z_signs(n).astype(float)
        self.nu = 2 * np.pi * np.asarray(m.offsets)
        h = _coupling_generator(m)
        self.diagonal = np.allclose(h, np.diag(np.diag(h)))
        self.hd = np.diag(h).real
        self.w, self.v = np.linalg.eigh(h)
        slot_index = {k: j for j, k in enumerate(slots)}
        self.x0 = np.array([s.events[k].duration for k in slots])
        acc = np.zeros(n)
        zero = np.zeros(n)
        self.items = []
        for k, e in enumerate(s.events):
            if k in slot_index:
                self.items.append(("delay", slot_index[k]))
            elif e.kind in ("soft_pulse", "hard_pulse"):
                t = e.targets[0]
                lab = _event_lab(s, e, zero)
                q = pulses.frame_rotation(self.nu * e.duration).conj()[:, None] * lab
                self.items.append(("pulse", q, acc[t] - acc, self.nu[t] - self.nu, len([j for j in slots if j < k])))
            else:
                before = pulses.frame_rotation(acc)
                p = _event_lab(s, e, acc.copy())
                after = pulses.frame_rotation(acc + (self.nu * e.duration if e.duration else 0.0)).conj()
                if e.kind == "frame_z":
                    after = pulses.frame_rotation(acc - _frame_shift(e, n)).conj()
                op = np.diag(after * before) if p is None else after[:, None] * p * before[None, :]
                if self.items and self.items[-1][0] == "fixed":
                    op = op @ self.items.pop()[1]
                self.items.append(("fixed", op))
            _advance(s, e, acc)

    def unitary(self, x: np.ndarray) -> np.ndarray:
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        shift = np.concatenate([[0.0], np.cumsum(x - self.x0)])
        u = np.eye(2**self.n, dtype=complex)
        for item in self.items:
            kind = item[0]
            if kind == "delay":
                t = x[item[1]]
                if self.diagonal:
                    u = np.exp(-1j * self.hd * t)[:, None] * u
                else:
                    u = (self.v * np.exp(-1j * self.w * t)) @ self.v.conj().T @ u
            elif kind == "pulse":
                _, q, delta0, rate, before = item
                e = np.exp(-0.5j * (self.signs @ (delta0 + rate * shift[before])))
                u = e[:, None] * (q @ (e.conj()[:, None] * u))
            else:
                u = item[1] @ u
        return u


def _frame_shift(e: PulseEvent, n: int) -> np.ndarray:
    a = np.zeros(n)
    a[list(e.targets)] = e.angle
    return a


def refine(s: PulseSchedule, u_ideal: np.ndarray, max_evals: int = 4000, fatol: float = 1e-9) -> PulseSchedule:
    """Tune block delays by simplex search; final frame corrections are refitted each time."""
    base = [e for e in s.events if e.tag != "final"]
    slots = [k for k, e in enumerate(base) if e.kind == "delay"]
    x0 = np.array([base[k].duration for k in slots])

    def build(x):
        ev = list(base)
        for k, t in zip(slots, x):
            ev[k] = delay(max(float(t), 0.0), tag=base[k].tag)
        return ev

    start = 1.0 - _with_frame(s, u_ideal, base)[1]
    x = x0
    if slots and start > fatol:
        timer = _Retimer(PulseSchedule(s.molecule, base, s.frame), slots)

        def infidelity(x):
            u = timer.unitary(x)
            z = _frame_fit(u, u_ideal)
            corr = qops.diag_zphase(s.molecule.n, -z)
            return 1.0 - qops.gate_fidelity(corr[:, None] * u, u_ideal)

        step = np.maximum(0.01 * x0, 2e-5)
        x, _, _ = simplex_minimize(
            infidelity, x0, step=step, bounds=[(0.0, None)] * len(x0), fatol=fatol, max_evals=max_evals, restarts=3
        )
    events, fid = _with_frame(s, u_ideal, build(x))
    if 1.0 - fid > start:
        events, fid = _with_frame(s, u_ideal, base)
    out = PulseSchedule(s.molecule, events, s.frame, dict(s.info))
    out.info["fidelity"] = fid
    out.info["fidelity_unrefined"] = 1.0 - start
    return out


def compile_gates(
    gates: Sequence[Gate],
    m: Molecule,
    pulse: str = "soft",
    cancel: bool = True,
    refine_evals: int = 4000,
    zz_tol: float = DEFAULT_ZZ_TOL,
) -> PulseSchedule:
    """Pulse schedule realising ``gates`` on ``m`` (rotating frame, ising-model design).

    ``pulse`` selects shaped selective pulses (``"soft"``) or instantaneous
    ideal rotations. With ``cancel`` the gate list is first simplified so
    adjacent inverse rotations (for example between chained walk steps)
    disappear. ``refine_evals=0`` skips the numerical refinement. Results are
    memoised; the returned schedule is a private copy.
    """
    return _compile_cached(tuple(gates), m, pulse, cancel, refine_evals, zz_tol).copy()


@lru_cache(maxsize=64)
def _compile_cached(
    gates: tuple[Gate, ...], m: Molecule, pulse: str, cancel: bool, refine_evals: int, zz_tol: float
) -> PulseSchedule:
    if pulse not in PULSE_MODES:
        raise CompileError(f"pulse must be one of {PULSE_MODES}")
    n = m.n
    for g in gates:
        if any(not 0 <= k < n for k in gate_spins(g)):
            raise CompileError(f"gate {g} addresses a spin outside the {n}-spin molecule")
    u_ideal = circuit_unitary(gates, n)
    work = simplify(gates) if cancel else [g for g in (_normalize(g) for g in gates) if g is not None]
    sched = PulseSchedule(m, frame="rotating")
    if not work:
        sched.info.update(fidelity=1.0, pulse=pulse)
        return sched
    b = _Builder(m, pulse, zz_tol)
    for g in work:
        if isinstance(g, Rotation):
            b.rotation(g)
        elif isinstance(g, ZZ):
            b.zz(g)
        else:
            b.z(g)
    if np.any(np.abs(b.pending) > b.zz_tol):
        b.flush()
    b.dropped += float(np.sum(b.pending**2)) / 4
    sched.events = b.events
    sched.info.update(pulse=pulse, blocks=int(b.blocks), cancel=cancel, dropped_zz=float(b.dropped))
    if refine_evals > 0:
        sched = refine(sched, u_ideal, max_evals=refine_evals)
    else:
        events, fid = _with_frame(sched, u_ideal, sched.events)
        sched.events = events
        sched.info["fidelity"] = fid
    return sched


def schedule_fidelity(s: PulseSchedule, u_ideal: np.ndarray) -> float:
    """Gate fidelity of the simulated schedule against ``u_ideal``."""
    return qops.gate_fidelity(simulate_schedule(s), u_ideal)


def zz_gate(m: Molecule, pair: Sequence[int], angle: float, pulse: str = "ideal") -> PulseSchedule:
    """Delays and refocusing pulses realising ``exp(-i angle Z_i Z_j / 2)``, all other couplings refocused."""
    i, j = sorted(int(k) for k in pair)
    if m.j(i, j) == 0:
        raise CompileError(f"spins {i} and {j} are not coupled")
    if abs(_wrap(angle)) < 1e-12:
        return PulseSchedule(m, frame="rotating", info={"fidelity": 1.0})
    return compile_gates([ZZ(i, j, angle)], m, pulse=pulse, refine_evals=0)


def register_for(m: Molecule) -> tuple[int, int, int]:
    """(coin, q2, q3) spin indices: the molecule's coin spin and the two spins coupled to it."""
    names = [s.name for s in m.spins]
    if {"C2", "C3", "C4"} <= set(names):
        return (m.index("C3"), m.index("C2"), m.index("C4"))
    if m.n == 3:
        return (0, 1, 2)
    raise CompileError(f"no walk register known for molecule {m.name!r}")
