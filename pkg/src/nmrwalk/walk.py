"""Coined discrete-time quantum walk on a cycle and on the square.

The square register is three spins: the coin (``|H> = |0>``, ``|T> = |1>``)
followed by two position bits. Corners are Gray coded so that a heads move
flips the first position bit (horizontal edge) and a tails move flips the
second one (vertical edge)::

    corner 0 = 00, corner 1 = 10, corner 2 = 11, corner 3 = 01
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import qops
from .qops import HADAMARD, I2, X, OperatorError

CORNER_BITS = ("00", "10", "11", "01")
PROB_TOL = 1e-10

Channel = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class WalkSpec:
    n_nodes: int = 4
    coin: np.ndarray = field(default_factory=lambda: HADAMARD.copy())
    encoding: str = "square-two-qubit"

    def __post_init__(self):
        if self.n_nodes < 2:
            raise OperatorError("a cycle needs at least two nodes")
        qops.check_unitary(np.asarray(self.coin))
        if self.coin.shape != (2, 2):
            raise OperatorError("coin must be a 2x2 unitary")
        if self.encoding not in ("square-two-qubit", "cycle-register"):
            raise OperatorError(f"unknown encoding {self.encoding!r}")
        if self.encoding == "square-two-qubit" and self.n_nodes != 4:
            raise OperatorError("square encoding requires n_nodes = 4")


def cycle_shift(n: int) -> np.ndarray:
    """Conditional shift on ``coin (x) node`` of dimension ``2n``.

    Heads moves ``i -> i - 1`` and tails moves ``i -> i + 1`` (mod n).
    Basis index is ``coin * n + node``.
    """
    if n < 2:
        raise OperatorError("a cycle needs at least two nodes")
    s = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(n):
        s[(i - 1) % n, i] = 1
        s[n + (i + 1) % n, n + i] = 1
    return s


def square_shift() -> np.ndarray:
    """Direction-vector shift ``P_H X_2 + P_T X_3`` on the three-spin register."""
    p_h, p_t = qops.projector("0"), qops.projector("1")
    return qops.tensor(p_h, X, I2) + qops.tensor(p_t, I2, X)


def square_shift_from_cnots() -> np.ndarray:
    """Same operator built as ``(X_1 CNOT_12 X_1) CNOT_13``."""
    p_h, p_t = qops.projector("0"), qops.projector("1")
    cnot12 = qops.tensor(p_h, I2, I2) + qops.tensor(p_t, X, I2)
    cnot13 = qops.tensor(p_h, I2, I2) + qops.tensor(p_t, I2, X)
    x1 = qops.embed(X, 0, 3)
    return x1 @ cnot12 @ x1 @ cnot13


def walk_step(spec: WalkSpec | None = None) -> np.ndarray:
    """One step ``S (C (x) 1)``."""
    spec = spec or WalkSpec()
    if spec.encoding == "square-two-qubit":
        return square_shift() @ qops.tensor(spec.coin, I2, I2)
    return cycle_shift(spec.n_nodes) @ np.kron(spec.coin, np.eye(spec.n_nodes))


def initial_state(coin: str = "H", corner: int = 0) -> np.ndarray:
    """Pure square-walk state ``|coin, corner><coin, corner|``."""
    if coin not in ("H", "T"):
        raise OperatorError(f"coin must be 'H' or 'T', got {coin!r}")
    check_corner(corner)
    return qops.projector(("0" if coin == "H" else "1") + CORNER_BITS[corner])


def check_corner(corner: int) -> int:
    if corner not in range(4):
        raise OperatorError(f"corner must be 0..3, got {corner!r}")
    return corner


def corner_probabilities(rho: np.ndarray) -> np.ndarray:
    """``p_c = Tr[(1_coin (x) |c><c|) rho]`` for c = 0..3 (sums to ``Tr rho``)."""
    if rho.shape != (8, 8):
        raise OperatorError("corner probabilities need the three-spin square register")
    diag = np.real(np.diag(rho)).reshape(2, 4).sum(axis=0)
    return np.array([diag[int(bits, 2)] for bits in CORNER_BITS])


def check_distribution(p: np.ndarray, total: float = 1.0, tol: float = PROB_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or np.any(p < -tol) or np.any(p > 1 + tol) or abs(p.sum() - total) > tol:
        raise OperatorError(f"invalid corner distribution {p}")
    return p


def run_quantum_walk(
    steps: int,
    initial: Optional[np.ndarray] = None,
    per_step_channel: Optional[Channel] = None,
    spec: WalkSpec | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """States and corner distributions after 0..steps applications of the step.

    ``per_step_channel`` acts after every unitary step.
    """
    if steps < 0:
        raise OperatorError("steps must be non-negative")
    rho = initial_state() if initial is None else np.asarray(initial, dtype=complex)
    w = walk_step(spec)
    out = [(rho, corner_probabilities(rho))]
    for _ in range(steps):
        rho = w @ rho @ w.conj().T
        if per_step_channel is not None:
            before = np.trace(rho)
            rho = per_step_channel(rho)
            if abs(np.trace(rho) - before) > PROB_TOL:
                raise OperatorError("per-step channel is not trace preserving")
        out.append((rho, corner_probabilities(rho)))
    return out


def classical_transition(exact: bool = False) -> np.ndarray:
    """8x8 column-stochastic matrix on ``(coin, corner)`` for flip-then-move.

    The coin is re-flipped fairly each step, then heads flips the first
    position bit and tails the second.
    """
    half = Fraction(1, 2) if exact else 0.5
    m = np.zeros((8, 8), dtype=object if exact else float)
    if exact:
        m[:] = Fraction(0)
    for coin in range(2):
        for corner in range(4):
            src = coin * 4 + corner
            for new_coin in range(2):
                bits = list(CORNER_BITS[corner])
                k = 0 if new_coin == 0 else 1
                bits[k] = "1" if bits[k] == "0" else "0"
                dst = new_coin * 4 + CORNER_BITS.index("".join(bits))
                m[dst, src] += half
    return m


def classical_walk(steps: int, start_corner: int = 0, exact: bool = False) -> list[np.ndarray]:
    """Exact corner distributions of the classical walk for steps 0..steps."""
    if steps < 0:
        raise OperatorError("steps must be non-negative")
    check_corner(start_corner)
    m = classical_transition(exact)
    v = np.zeros(8, dtype=object if exact else float)
    if exact:
        v[:] = Fraction(0)
        v[start_corner] = Fraction(1)
    else:
        v[start_corner] = 1.0
    out = []
    for k in range(steps + 1):
        if k:
            v = m.dot(v)
        out.append(v[:4] + v[4:])
    return out
