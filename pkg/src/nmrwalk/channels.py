"""Gradient dephasing, refocused (protected) gradients and pseudo-pure inputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import qops
from .qops import I2, X, Z, OperatorError

# sinc(x) >= -0.2172..., so the closed form never exceeds this.
P_MAX = 0.5 * (1 + 0.21723362821122166)


@dataclass(frozen=True)
class GradientParams:
    """Gradient pulse of strength ``alpha_prime`` applied for ``t`` seconds.

    ``gamma_per_spin`` lists gyromagnetic ratios in units consistent with
    ``alpha_prime`` so that ``alpha_prime * gamma * t * z`` is a phase in rad.
    ``a`` is the sample half-length.
    """

    alpha_prime: float
    t: float
    a: float
    gamma_per_spin: tuple[float, ...]

    def __post_init__(self):
        if self.t < 0:
            raise OperatorError("gradient duration must be non-negative")
        if self.a <= 0:
            raise OperatorError("sample half-length must be positive")
        object.__setattr__(self, "gamma_per_spin", tuple(float(g) for g in self.gamma_per_spin))

    def phase_scale(self, spin: int) -> float:
        """``alpha' gamma t a`` for one spin: the edge-of-sample phase."""
        return self.alpha_prime * self.gamma_per_spin[spin] * self.t * self.a

    def scaled(self, t_factor: float) -> "GradientParams":
        return GradientParams(self.alpha_prime, self.t * t_factor, self.a, self.gamma_per_spin)


def sinc(x: float | np.ndarray) -> float | np.ndarray:
    """Unnormalised ``sin(x)/x`` with the removable singularity filled in."""
    return np.sinc(np.asarray(x) / np.pi)


def dephasing_probability_from_phase(x: float) -> float:
    return float(0.5 * (1 - sinc(x)))


def dephasing_probability(params: GradientParams, spin: int) -> float:
    """``p = (1 - sin(x)/x) / 2`` with ``x = alpha' gamma t a``.

    Not clamped: for some ``x`` the value lies in ``(0.5, P_MAX]`` and the
    channel then inverts the transverse components as well as shrinking them.
    """
    return dephasing_probability_from_phase(params.phase_scale(spin))


def check_p(p: float) -> float:
    if not 0 <= p <= 1:
        raise OperatorError(f"dephasing probability {p} outside [0, 1]")
    return float(p)


def z_dephase(rho: np.ndarray, spin: int, p: float) -> np.ndarray:
    """``(1 - p) rho + p Z rho Z`` on one spin."""
    check_p(p)
    n = qops.n_spins(rho)
    # Elementwise: coherences between opposite Z_spin eigenvalues scale by 1 - 2p.
    s = qops.z_signs(n)[:, spin]
    scale = np.where(np.equal.outer(s, s), 1.0, 1 - 2 * p)
    return rho * scale


def z_dephase_kraus(n: int, spin: int, p: float) -> list[np.ndarray]:
    check_p(p)
    return [np.sqrt(1 - p) * np.eye(2**n), np.sqrt(p) * qops.embed(Z, spin, n)]


def dephase_all(rho: np.ndarray, p: float | Sequence[float]) -> np.ndarray:
    n = qops.n_spins(rho)
    ps = [p] * n if np.isscalar(p) else list(p)
    for k, pk in enumerate(ps):
        rho = z_dephase(rho, k, pk)
    return rho


def _collective_scale(n: int, params: GradientParams, weights: Sequence[float]) -> np.ndarray:
    """Exact sample average of ``exp(-i alpha' t z sum_k w_k gamma_k Z_k / 2)`` conjugation.

    Element ``(r, c)`` picks up ``<exp(-i c_rc z)>_z = sinc(c_rc a)`` where
    ``c_rc`` is the difference of the joint phase rates of the two basis states.
    """
    s = qops.z_signs(n)
    rate = s @ (np.asarray(params.gamma_per_spin[:n]) * np.asarray(weights)) * params.alpha_prime * params.t / 2
    return sinc(np.subtract.outer(rate, rate) * params.a)


def gradient_pulse(rho: np.ndarray, params: GradientParams, mode: str = "independent") -> np.ndarray:
    """Ensemble-averaged z gradient.

    ``independent`` applies the single-spin closed form to each spin with its
    own ``p``. ``collective`` averages the joint phase of all spins over the
    one shared position ``z``, which leaves zero-quantum coherences intact.
    """
    n = qops.n_spins(rho)
    if len(params.gamma_per_spin) < n:
        raise OperatorError("gamma_per_spin must cover every spin")
    if mode == "independent":
        for k in range(n):
            rho = z_dephase(rho, k, dephasing_probability(params, k))
        return rho
    if mode == "collective":
        return rho * _collective_scale(n, params, [1.0] * n)
    raise OperatorError(f"unknown gradient mode {mode!r}")


def pi_x(n: int, spins: Iterable[int]) -> np.ndarray:
    factors = [I2] * n
    for k in spins:
        factors[k] = qops.rotation(np.pi, 0.0)
    return qops.tensor(*factors)


def protected_gradient(
    rho: np.ndarray,
    protected: Iterable[int],
    params: GradientParams,
    mode: str = "collective",
) -> np.ndarray:
    """Gradient, pi_x on ``protected`` spins, identical second gradient.

    Both gradients see the same position, so on protected spins the second one
    undoes the first and on the others it doubles the phase. The result is the
    pi-rotated input with protected spins undephased and the rest dephased as
    by a single gradient of twice the duration.
    """
    n = qops.n_spins(rho)
    protected = set(protected)
    r = pi_x(n, protected)
    weights = [0.0 if k in protected else 2.0 for k in range(n)]
    if mode == "collective":
        rho = rho * _collective_scale(n, params, weights)
    elif mode == "independent":
        doubled = params.scaled(2.0)
        for k in range(n):
            if k not in protected:
                rho = z_dephase(rho, k, dephasing_probability(doubled, k))
    else:
        raise OperatorError(f"unknown gradient mode {mode!r}")
    return r @ rho @ r.conj().T


def labeled_pps() -> np.ndarray:
    """Four-spin deviation state ``Z (x) |000><000|`` (spin 1 is the label)."""
    return qops.tensor(Z, qops.projector("000"))


def unlabel(rho: np.ndarray) -> np.ndarray:
    """Three-spin state seen through the label: ``Tr_1[(Z (x) 1) rho]``."""
    n = qops.n_spins(rho)
    return qops.partial_trace(qops.embed(Z, 0, n) @ rho, range(1, n))


def tce_input_states() -> list[np.ndarray]:
    """The three temporally averaged inputs whose sum is ``(1+Z)^(x)3``."""
    one_z = I2 + Z
    return [
        qops.tensor(Z, one_z, one_z),
        qops.tensor(I2, Z, one_z),
        qops.tensor(I2, I2, one_z),
    ]


def temporal_average(results: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of the three temporally averaged experiments."""
    if len(results) != 3:
        raise OperatorError(f"temporal averaging needs exactly 3 experiments, got {len(results)}")
    return results[0] + results[1] + results[2]


def quadrature_gradient(
    rho: np.ndarray,
    params: GradientParams,
    weights: Sequence[float] | None = None,
    n_points: int = 10_001,
    rotation: np.ndarray | None = None,
) -> np.ndarray:
    """Brute-force midpoint average over ``z`` in ``[-a, a]``.

    With ``rotation`` given, each sample applies gradient, ``rotation``,
    gradient with the same ``z``. Used as an independent check of the closed
    forms above.
    """
    n = qops.n_spins(rho)
    weights = [1.0] * n if weights is None else weights
    s = qops.z_signs(n)
    rate = s @ (np.asarray(params.gamma_per_spin[:n]) * np.asarray(weights)) * params.alpha_prime * params.t / 2
    h = 2 * params.a / n_points
    zs = -params.a + h * (np.arange(n_points) + 0.5)
    out = np.zeros_like(rho, dtype=complex)
    for z in zs:
        u = np.exp(-1j * rate * z)
        if rotation is None:
            out += (u[:, None] * rho) * u.conj()[None, :]
        else:
            v = u[:, None] * rotation * u[None, :]
            out += v @ rho @ v.conj().T
    return out / n_points
