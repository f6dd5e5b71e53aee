"""Simulated NMR state tomography.

A readout is one letter per observed spin: ``I`` (no pulse), ``x`` or ``y``
(a pi/2 rotation about that axis). After the readout the spectrometer sees
single coherences, Pauli terms with exactly one ``X``/``Y`` factor and
``I``/``Z`` elsewhere. Each such observable fixes one Pauli coefficient of
the pre-readout state (readouts are Clifford), so reconstruction is a
linear solve in which repeated determinations are averaged.

With ``label=True`` spin 0 is a labelling spin that is never pulsed or
observed directly; its ``I``/``Z`` state is resolved through the splitting
of the observed lines. The ``Z`` on the label alone (``ZIII``) is then
invisible and is supplied as a fixed offset (see :func:`label_offset`).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import qops
from .qops import OperatorError

SEVEN_READOUTS = ("yII", "IIy", "IIx", "yyI", "Ixx", "yyy", "xxx")
READOUT_LETTERS = {"I": None, "x": 0.0, "y": np.pi / 2}

Measurement = tuple[str, dict[str, float]]


class TomographyError(ValueError):
    pass


def check_readout(r: str, n_observed: Optional[int] = None) -> str:
    if any(c not in READOUT_LETTERS for c in r):
        raise TomographyError(f"readout {r!r} may only use I, x, y")
    if n_observed is not None and len(r) != n_observed:
        raise TomographyError(f"readout {r!r} has {len(r)} letters, expected {n_observed}")
    return r


def readout_unitary(r: str, label: bool = False) -> np.ndarray:
    check_readout(r)
    letters = ("I" if label else "") + r
    ops = [qops.I2 if READOUT_LETTERS[c] is None else qops.rotation(np.pi / 2, READOUT_LETTERS[c]) for c in letters]
    return qops.tensor(*ops)


@lru_cache(maxsize=None)
def single_coherence_labels(n: int, label: bool = False) -> tuple[str, ...]:
    """Observable Pauli labels: one X or Y among the observed spins, I or Z elsewhere."""
    m = n - 1 if label else n
    out = []
    for k in range(m):
        for t in "XY":
            for rest in itertools.product("IZ", repeat=m - 1):
                rest = list(rest)
                out.append("".join(rest[:k] + [t] + rest[k:]))
    if label:
        out = [a + s for a in "IZ" for s in out]
    return tuple(out)


def unknown_labels(n: int, label: bool = False) -> tuple[str, ...]:
    """Pauli coefficients tomography tries to determine."""
    labels = qops.pauli_labels(n)
    if not label:
        return tuple(p for p in labels if set(p) != {"I"})
    observed = [p for p in labels if p[0] in "IZ" and set(p[1:]) != {"I"}]
    return tuple(observed)


def _n_from(readout: str, label: bool) -> int:
    return len(readout) + (1 if label else 0)


def observe(
    rho: np.ndarray,
    readout: str,
    label: bool = False,
    labels: Optional[Sequence[str]] = None,
    sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> dict[str, float]:
    """Expectations ``Tr(P R rho R^dag)`` of the single-coherence labels after readout ``R``.

    ``sigma`` adds Gaussian noise (from ``rng``) to every value.
    """
    n = qops.n_spins(rho)
    check_readout(readout, n - 1 if label else n)
    labels = single_coherence_labels(n, label) if labels is None else tuple(labels)
    after = qops.conjugate(rho, readout_unitary(readout, label)) if set(readout) != {"I"} else rho
    vals = np.array([np.trace(qops.pauli(p) @ after).real for p in labels])
    if sigma:
        rng = np.random.default_rng() if rng is None else rng
        vals = vals + rng.normal(0.0, sigma, size=vals.shape)
    return dict(zip(labels, (float(v) for v in vals)))


def measure(
    rho: np.ndarray,
    readouts: Sequence[str] = SEVEN_READOUTS,
    label: bool = False,
    sigma: float = 0.0,
    seed: Optional[int] = None,
) -> list[Measurement]:
    rng = np.random.default_rng(seed)
    return [(r, observe(rho, r, label=label, sigma=sigma, rng=rng)) for r in readouts]


@lru_cache(maxsize=4096)
def _row(readout: str, obs: str, label: bool) -> np.ndarray:
    """Coefficients of ``Tr(Q R rho R^dag)`` on the unknown Pauli coefficients of ``rho``."""
    n = len(obs)
    u = readout_unitary(readout, label)
    back = u.conj().T @ qops.pauli(obs) @ u
    coeffs = qops.pauli_decompose(back)
    return np.array([2**n * coeffs[p] for p in unknown_labels(n, label)])


def design_matrix(pairs: Sequence[tuple[str, str]], n: int, label: bool = False) -> np.ndarray:
    """Rows for each ``(readout, observable)`` pair; columns follow :func:`unknown_labels`."""
    if not pairs:
        return np.zeros((0, len(unknown_labels(n, label))))
    return np.vstack([_row(r, q, label) for r, q in pairs])


@dataclass(frozen=True)
class Completeness:
    complete: bool
    rank: int
    n_unknowns: int
    missing: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.complete


def _missing(a: np.ndarray, n: int, label: bool) -> tuple[str, ...]:
    """Pauli directions with weight in the null space of ``a``."""
    names = unknown_labels(n, label)
    if a.shape[0] == 0:
        return names
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > 1e-9 * max(s.max(), 1.0)))
    null = vt[rank:]
    weight = np.sum(null**2, axis=0)
    return tuple(p for p, w in zip(names, weight) if w > 1e-9)


def readout_set_complete(readouts: Sequence[str], n: int = 3, label: bool = False) -> Completeness:
    """Whether the readouts determine every unknown Pauli coefficient, with the rank reached."""
    for r in readouts:
        check_readout(r, n - 1 if label else n)
    obs = single_coherence_labels(n, label)
    a = design_matrix([(r, q) for r in readouts for q in obs], n, label)
    k = len(unknown_labels(n, label))
    rank = int(np.linalg.matrix_rank(a)) if a.size else 0
    return Completeness(rank == k, rank, k, () if rank == k else _missing(a, n, label))


def reconstruct(
    measurements: Sequence[Measurement],
    label: bool = False,
    label_offset: float = 0.0,
) -> np.ndarray:
    """Deviation density matrix from readout/observable records.

    Least squares over all records; for these Clifford readouts that is the
    plain average of every determination of a coefficient. The identity
    coefficient is zero. With ``label`` the ``Z`` on the label spin alone is
    set to ``label_offset``.
    """
    if not measurements:
        raise TomographyError("no measurements to reconstruct from")
    n = _n_from(measurements[0][0], label)
    pairs, b = [], []
    for r, values in measurements:
        check_readout(r, n - 1 if label else n)
        for q, v in values.items():
            pairs.append((r, q))
            b.append(v)
    a = design_matrix(pairs, n, label)
    missing = _missing(a, n, label)
    if missing:
        shown = ", ".join(missing[:8]) + (" ..." if len(missing) > 8 else "")
        raise TomographyError(f"readout set is incomplete; undetermined: {shown} ({len(missing)} directions)")
    x, *_ = np.linalg.lstsq(a, np.asarray(b), rcond=None)
    coeffs = dict(zip(unknown_labels(n, label), x))
    if label:
        coeffs["Z" + "I" * (n - 1)] = label_offset
    return qops.pauli_reconstruct(coeffs, n)


def label_offset(reconstructed: np.ndarray, target: np.ndarray) -> float:
    """``ZIII`` coefficient that brings a label-mode reconstruction closest to ``target``.

    The target is first scaled to best match the determined terms, since
    an experiment only knows its state up to overall signal size. Chosen once
    on the initial state and then held fixed.
    """
    n = qops.n_spins(target)
    zi = "Z" + "I" * (n - 1)
    t = qops.pauli_decompose(target)
    r = qops.pauli_decompose(reconstructed)
    seen = [p for p in unknown_labels(n, label=True)]
    tv = np.array([t[p] for p in seen])
    rv = np.array([r[p] for p in seen])
    denom = float(tv @ tv)
    scale = float(rv @ tv) / denom if denom > 0 else 1.0
    return scale * t[zi]


def tomography(
    rho: np.ndarray,
    readouts: Sequence[str] = SEVEN_READOUTS,
    label: bool = False,
    label_offset: float = 0.0,
    sigma: float = 0.0,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Measure ``rho`` with ``readouts`` and reconstruct it."""
    return reconstruct(measure(rho, readouts, label, sigma, seed), label=label, label_offset=label_offset)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Normalised overlap ``Tr(a b) / sqrt(Tr(a^2) Tr(b^2))`` for (possibly deviation) states."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise OperatorError(f"shape mismatch {a.shape} vs {b.shape}")
    pa = np.vdot(a, a).real
    pb = np.vdot(b, b).real
    if pa <= 1e-300 or pb <= 1e-300:
        raise OperatorError("fidelity is undefined for a zero state")
    return float(np.vdot(a, b).real / np.sqrt(pa * pb))


def to_records(measurements: Sequence[Measurement]) -> list[dict]:
    return [{"readout": r, "labels": list(v), "values": [float(x) for x in v.values()]} for r, v in measurements]


def from_records(records: Sequence[Mapping]) -> list[Measurement]:
    out = []
    for k, rec in enumerate(records):
        try:
            labels, values = rec["labels"], rec["values"]
            if len(labels) != len(values):
                raise TomographyError(f"record {k}: {len(labels)} labels but {len(values)} values")
            out.append((check_readout(str(rec["readout"])), {str(p): float(v) for p, v in zip(labels, values)}))
        except KeyError as exc:
            raise TomographyError(f"record {k}: missing field {exc}") from None
    return out


def save_measurements(measurements: Sequence[Measurement], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"measurements": to_records(measurements)}, indent=1))


def load_measurements(path: str | Path) -> list[Measurement]:
    return from_records(json.loads(Path(path).read_text())["measurements"])
