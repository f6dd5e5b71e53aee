"""Dense operator algebra for registers of up to four spin-1/2 nuclei.

Operators and states are plain complex ``numpy`` arrays of shape ``(2**n, 2**n)``.
Spin 1 is the leftmost tensor factor and the most significant bit of a basis
index, so ``pauli("ZII")`` acts on spin 1 of a three-spin register.

Rotations follow ``R_a(theta) = exp(-i theta sigma_a / 2)``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache, reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_SPINS = 4
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


class OperatorError(ValueError):
    """An operator or state violates a structural contract."""


def n_spins(op: np.ndarray) -> int:
    dim = op.shape[0]
    n = dim.bit_length() - 1
    if op.ndim != 2 or op.shape[1] != dim or 2**n != dim:
        raise OperatorError(f"expected a square 2^n matrix, got shape {op.shape}")
    return n


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product, leftmost argument is spin 1."""
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, ops)


@lru_cache(maxsize=None)
def _pauli_cached(label: str) -> np.ndarray:
    out = tensor(*(PAULIS[c] for c in label))
    out.setflags(write=False)
    return out


def pauli(label: str) -> np.ndarray:
    """Pauli string such as ``"XZI"``."""
    label = label.upper()
    if not label or len(label) > MAX_SPINS:
        raise OperatorError(f"Pauli label must have 1..{MAX_SPINS} letters, got {label!r}")
    bad = set(label) - set(PAULIS)
    if bad:
        raise OperatorError(f"invalid Pauli letters {sorted(bad)} in {label!r}")
    return _pauli_cached(label).copy()


def embed(op: np.ndarray, spin: int, n: int) -> np.ndarray:
    """Place a single-spin operator on ``spin`` (0-based) of an ``n``-spin register."""
    if not 0 <= spin < n:
        raise OperatorError(f"spin index {spin} out of range for {n} spins")
    factors = [I2] * n
    factors[spin] = op
    return tensor(*factors)


def rotation(angle: float, phase: float = 0.0) -> np.ndarray:
    """Rotation by ``angle`` about the transverse axis at azimuth ``phase``."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array(
        [[c, -1j * s * np.exp(-1j * phase)], [-1j * s * np.exp(1j * phase), c]],
        dtype=complex,
    )


def rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def rzz(angle: float) -> np.ndarray:
    """``exp(-i angle ZZ / 2)`` on two spins."""
    return np.diag(np.exp(-0.5j * angle * np.array([1, -1, -1, 1])))


def z_signs(n: int) -> np.ndarray:
    """Eigenvalue of ``Z_k`` for every basis index; shape ``(2**n, n)``."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


def diag_zphase(n: int, z_angles: Sequence[float] = (), zz_angles: Mapping | None = None) -> np.ndarray:
    """Diagonal of ``prod_k Rz_k(z_k) prod_{ij} exp(-i a_ij Z_i Z_j / 2)``."""
    s = z_signs(n)
    phase = np.zeros(2**n)
    if len(z_angles):
        phase += s @ np.asarray(z_angles, dtype=float)
    for (i, j), a in (zz_angles or {}).items():
        phase += a * s[:, i] * s[:, j]
    return np.exp(-0.5j * phase)


def ket(bits: str | Sequence[int]) -> np.ndarray:
    bits = [int(b) for b in bits]
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(map(str, bits)), 2) if bits else 0] = 1
    return v


def projector(bits: str | Sequence[int]) -> np.ndarray:
    v = ket(bits)
    return np.outer(v, v.conj())


def dagger(u: np.ndarray) -> np.ndarray:
    return u.conj().T


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return np.allclose(u @ dagger(u), np.eye(u.shape[0]), atol=tol, rtol=0)


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    n_spins(u)
    if not np.all(np.isfinite(u)):
        raise OperatorError("operator has non-finite entries")
    if not is_unitary(u, tol):
        err = np.max(np.abs(u @ dagger(u) - np.eye(u.shape[0])))
        raise OperatorError(f"operator is not unitary (max |UU^dag - 1| = {err:.3g})")
    return u


def check_state(rho: np.ndarray, kind: str = "normalized", tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a density matrix.

    ``kind="normalized"`` requires unit trace and no eigenvalue below ``-tol``;
    ``kind="deviation"`` only requires Hermiticity (NMR deviation matrices are
    usually traceless).
    """
    n_spins(rho)
    if not np.allclose(rho, dagger(rho), atol=tol, rtol=0):
        raise OperatorError("state is not Hermitian")
    if kind == "normalized":
        if abs(np.trace(rho) - 1) > 1e-12 * max(1, rho.shape[0]) + tol:
            raise OperatorError(f"state trace is {np.trace(rho).real:.6g}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -tol:
            raise OperatorError("state has negative eigenvalues")
    elif kind != "deviation":
        raise OperatorError(f"unknown state kind {kind!r}")
    return rho


def conjugate(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``U rho U^dag``; rejects non-unitary ``u``."""
    check_unitary(u)
    return u @ rho @ dagger(u)


def apply_kraus(rho: np.ndarray, kraus: Iterable[np.ndarray], tol: float = UNITARY_TOL) -> np.ndarray:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    if not kraus:
        raise OperatorError("empty Kraus set")
    completeness = sum(dagger(k) @ k for k in kraus)
    if not np.allclose(completeness, np.eye(rho.shape[0]), atol=tol, rtol=0):
        raise OperatorError("Kraus operators are not trace preserving")
    return sum(k @ rho @ dagger(k) for k in kraus)


@lru_cache(maxsize=None)
def pauli_labels(n: int) -> tuple[str, ...]:
    return tuple("".join(p) for p in itertools.product("IXYZ", repeat=n))


@lru_cache(maxsize=None)
def _pauli_stack(n: int) -> np.ndarray:
    stack = np.array([_pauli_cached(lbl) for lbl in pauli_labels(n)])
    stack.setflags(write=False)
    return stack


def pauli_decompose(rho: np.ndarray) -> dict[str, float]:
    """Real coefficients ``c_P = Tr(P rho) / 2**n`` for every Pauli string."""
    n = n_spins(rho)
    # Tr(P rho) = sum_ij P_ji rho_ij
    coeffs = np.einsum("kji,ij->k", _pauli_stack(n), rho).real / 2**n
    return dict(zip(pauli_labels(n), coeffs.tolist()))


def pauli_reconstruct(coeffs: Mapping[str, float], n: int | None = None) -> np.ndarray:
    if n is None:
        n = len(next(iter(coeffs)))
    out = np.zeros((2**n, 2**n), dtype=complex)
    for label, c in coeffs.items():
        if c:
            out += c * _pauli_cached(label)
    return out


def gate_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Phase-insensitive ``|Tr(U^dag V)| / d``."""
    if u.shape != v.shape:
        raise OperatorError(f"dimension mismatch {u.shape} vs {v.shape}")
    return float(abs(np.vdot(u, v)) / u.shape[0])


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """``min_phi ||U - exp(i phi) V||`` in the operator 2-norm.

    For unitaries this only depends on the eigenphases of ``V^dag U``: the
    optimum centres ``phi`` in the shortest arc covering all of them, and the
    distance is the chord to the arc's end points.
    """
    if u.shape != v.shape:
        raise OperatorError(f"dimension mismatch {u.shape} vs {v.shape}")
    w = dagger(v) @ u
    theta = np.sort(np.angle(np.linalg.eigvals(w)))
    gaps = np.diff(np.concatenate([theta, theta[:1] + 2 * np.pi]))
    width = 2 * np.pi - gaps.max()
    return float(2 * np.sin(width / 4))


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h``."""
    if np.allclose(h, np.diag(np.diag(h)), atol=0):
        return np.diag(np.exp(-1j * np.diag(h).real * t))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def permute_spins(op: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: factor ``k`` of the result is factor ``order[k]`` of ``op``."""
    n = n_spins(op)
    if sorted(order) != list(range(n)):
        raise OperatorError(f"{order} is not a permutation of {n} spins")
    t = op.reshape([2] * (2 * n))
    perm = list(order) + [n + k for k in order]
    return t.transpose(perm).reshape(2**n, 2**n)


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    n = n_spins(rho)
    keep = list(keep)
    drop = [k for k in range(n) if k not in keep]
    t = rho.reshape([2] * (2 * n))
    letters = "abcdefgh"
    rows = [letters[k] for k in range(n)]
    cols = [letters[k] if k in drop else letters[k].upper() for k in range(n)]
    out = "".join(letters[k] for k in keep) + "".join(letters[k].upper() for k in keep)
    d = 2 ** len(keep)
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, t).reshape(d, d)
