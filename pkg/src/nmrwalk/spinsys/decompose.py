"""Fit a simulated propagator as phase and coupling errors around an ideal gate.

The error model is

    U_sim ~ Z_post . ZZ(theta/2) . U_ideal . ZZ(theta/2) . Z_pre

where ``Z_*`` are per-spin z rotations and ``ZZ(theta/2)`` applies half of
each pair's coupling angle on either side, the natural picture for a
symmetric shaped pulse during which the couplings keep evolving.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import qops
from .optimize import simplex_minimize


@dataclass(frozen=True)
class ErrorDecomposition:
    pre_z: tuple[float, ...]
    post_z: tuple[float, ...]
    zz_error: dict[tuple[int, int], float] = field(default_factory=dict)
    residual_infidelity: float = 0.0

    def model(self, u_ideal: np.ndarray) -> np.ndarray:
        return error_model(u_ideal, self.pre_z, self.post_z, self.zz_error)


def error_model(u_ideal, pre_z, post_z, zz) -> np.ndarray:
    n = qops.n_spins(u_ideal)
    half = {p: 0.5 * a for p, a in zz.items()}
    left = qops.diag_zphase(n, post_z, half)
    right = qops.diag_zphase(n, [0.0] * n, half) * qops.diag_zphase(n, pre_z)
    return left[:, None] * u_ideal * right[None, :]


def _conjugation_sign(u: np.ndarray, op: np.ndarray) -> int:
    """+1 if u commutes with op, -1 if it anticommutes, 0 otherwise."""
    c = u @ op @ u.conj().T
    if np.allclose(c, op, atol=1e-9):
        return 1
    if np.allclose(c, -op, atol=1e-9):
        return -1
    return 0


def _phase_fit(u_sim, u_ideal, pre_free, zz_free, pairs) -> np.ndarray:
    """Linear least-squares starting point from the entrywise phase ratios.

    With diagonal errors on both sides, ``arg(U_sim[a, b] / U_ideal[a, b])``
    is a sum of a row term and a column term, each linear in the angles.
    """
    n = len(pre_free)
    s = qops.z_signs(n).astype(float)
    zz = np.stack([s[:, i] * s[:, j] for i, j in pairs], axis=1) if pairs else np.zeros((2**n, 0))
    zz = zz[:, zz_free]
    a, b = np.nonzero(np.abs(u_ideal) > 0.05)
    ref = np.vdot(u_ideal, u_sim)
    if abs(ref) < 1e-12:
        return np.zeros(sum(pre_free) + n + zz.shape[1])
    delta = np.angle(u_sim[a, b] * np.conj(u_ideal[a, b]) * np.conj(ref) / abs(ref))
    rows = np.hstack([
        -0.5 * s[b][:, pre_free],
        -0.5 * s[a],
        -0.25 * (zz[a] + zz[b]),
        np.ones((len(a), 1)),
    ])
    w = np.abs(u_ideal[a, b])
    x, *_ = np.linalg.lstsq(rows * w[:, None], delta * w, rcond=None)
    return x[:-1]


def error_decompose(
    u_sim: np.ndarray,
    u_ideal: np.ndarray,
    tol: float = 1e-15,
    max_evals: int = 20_000,
    restarts: int = 4,
) -> ErrorDecomposition:
    """Pre/post z angles and pair coupling angles that best explain ``u_sim``.

    Directions the fit cannot see are pinned to zero: a pre-rotation on a
    spin whose ``Z`` the ideal gate maps to ``+-Z`` (it folds into the
    post-rotation), and the coupling of a pair whose ``ZZ`` anticommutes
    with the ideal gate.
    """
    n = qops.n_spins(u_ideal)
    pairs = list(itertools.combinations(range(n), 2))
    pre_free = [_conjugation_sign(u_ideal, qops.embed(qops.Z, k, n)) == 0 for k in range(n)]
    zz_free = []
    for i, j in pairs:
        label = ["I"] * n
        label[i] = label[j] = "Z"
        zz_free.append(_conjugation_sign(u_ideal, qops.pauli("".join(label))) != -1)
    n_pre = sum(pre_free)
    n_zz = sum(zz_free)

    def unpack(x):
        pre = np.zeros(n)
        pre[pre_free] = x[:n_pre]
        post = x[n_pre : n_pre + n]
        zz_vals = np.zeros(len(pairs))
        zz_vals[zz_free] = x[n_pre + n :]
        return pre, post, dict(zip(pairs, zz_vals))

    def infidelity(x):
        pre, post, zz = unpack(x)
        return 1.0 - qops.gate_fidelity(u_sim, error_model(u_ideal, pre, post, zz))

    x0 = _phase_fit(u_sim, u_ideal, pre_free, zz_free, pairs)
    x, best, _ = simplex_minimize(infidelity, x0, step=0.01, fatol=tol, max_evals=max_evals, restarts=restarts)
    pre, post, zz = unpack(x)
    wrap = lambda a: float((a + np.pi) % (2 * np.pi) - np.pi)
    return ErrorDecomposition(
        pre_z=tuple(wrap(a) for a in pre),
        post_z=tuple(wrap(a) for a in post),
        zz_error={p: float(a) for p, a in zz.items()},
        residual_infidelity=float(min(max(best, 0.0), 1.0)),
    )
