"""Experiment drivers: one walk report per config, and the decoherence sweep."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from .. import channels, qops, tomo, walk
from ..spinsys import composite
from ..spinsys.compiler import compile_gates, register_for, walk_step_gates
from ..spinsys.molecule import Molecule, MoleculeError, builtin_molecule, load_molecule
from ..spinsys.schedule import simulate_schedule
from .config import ConfigError, ContractViolation, ExperimentConfig
from .report import StepRecord, SweepTable, WalkReport

SUM_TOL = 1e-10


def _deviation(rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return rho - np.trace(rho) / d * np.eye(d)


def _fidelity(rho: np.ndarray, ideal: np.ndarray) -> float:
    """Ensemble fidelity of the deviation parts (NaN when either is zero)."""
    try:
        return tomo.fidelity(_deviation(rho), _deviation(ideal))
    except qops.OperatorError:
        return float("nan")


def _channel(cfg: ExperimentConfig, spins: Optional[Sequence[int]] = None) -> Optional[Callable]:
    """Per-step decoherence from ``p`` or explicit gradient parameters."""
    grad = cfg.gradient_params()
    if grad is not None:
        return lambda rho: channels.gradient_pulse(rho, grad, cfg.gradient_mode)
    if cfg.p == 0:
        return None

    def dephase(rho):
        for k in range(qops.n_spins(rho)) if spins is None else spins:
            rho = channels.z_dephase(rho, k, cfg.p)
        return rho

    return dephase


def _ideal_states(cfg: ExperimentConfig) -> list[np.ndarray]:
    return [s for s, _ in walk.run_quantum_walk(cfg.steps, walk.initial_state("H", cfg.start_corner))]


def _check_sum(p: np.ndarray, step: int) -> None:
    if abs(p.sum() - 1) > SUM_TOL:
        raise ContractViolation(f"step {step}: corner probabilities sum to {p.sum():.12g}")


def _records(states: Sequence[np.ndarray], ideal: Sequence[np.ndarray]) -> list[StepRecord]:
    out = []
    for k, (rho, ref) in enumerate(zip(states, ideal)):
        p = walk.corner_probabilities(rho)
        _check_sum(p, k)
        out.append(StepRecord(k, tuple(float(x) for x in p), _fidelity(rho, ref)))
    return out


def _final_pauli(rho: np.ndarray) -> dict[str, float]:
    return {k: float(v) for k, v in qops.pauli_decompose(rho).items() if abs(v) > 1e-14}


def _resolve_molecule(cfg: ExperimentConfig, default: str) -> Molecule:
    name = cfg.molecule or default
    try:
        if os.path.exists(name):
            return load_molecule(name)
        return builtin_molecule(name.replace("-", "_"))
    except MoleculeError as exc:
        raise ConfigError(str(exc), "molecule") from None


def _normalise(rho: np.ndarray, step: int) -> np.ndarray:
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise ContractViolation(f"step {step}: reconstructed state has zero trace")
    return rho / tr


def _run_ideal(cfg: ExperimentConfig) -> tuple[list[StepRecord], np.ndarray, dict]:
    traj = walk.run_quantum_walk(cfg.steps, walk.initial_state("H", cfg.start_corner), _channel(cfg))
    states = [s for s, _ in traj]
    return _records(states, _ideal_states(cfg)), states[-1], {}


def _run_classical(cfg: ExperimentConfig) -> tuple[list[StepRecord], np.ndarray, dict]:
    dists = walk.classical_walk(cfg.steps, cfg.start_corner)
    recs = []
    for k, p in enumerate(dists):
        _check_sum(p, k)
        recs.append(StepRecord(k, tuple(float(x) for x in p)))
    return recs, None, {}


def _run_crotonic(cfg: ExperimentConfig) -> tuple[list[StepRecord], np.ndarray, dict]:
    """Compiled step on the labelled four-spin molecule, observed through the label."""
    m = _resolve_molecule(cfg, "crotonic_like")
    if m.n != 4:
        raise ConfigError("the labelled experiment needs a four-spin molecule", "molecule")
    try:
        register = register_for(m)
    except ValueError as exc:
        raise ConfigError(str(exc), "molecule") from None
    label = [k for k in range(m.n) if k not in register]
    if label != [0]:
        raise ConfigError("spin 0 must be the label spin", "molecule")
    sched = compile_gates(walk_step_gates(*register), m, pulse=cfg.pulse)
    phi = float(sched.info["fidelity"])
    if phi < cfg.min_phi:
        raise ContractViolation(f"compiled step fidelity {phi:.6f} is below {cfg.min_phi}")
    u = simulate_schedule(sched)
    chan = _channel(cfg, spins=register)
    rng_seed = cfg.seed
    # observed spins are 1..3 in molecule order; the walk wants (coin, q2, q3)
    order = [r - 1 for r in register]
    rho = channels.labeled_pps()
    offset = None
    states = []
    for k in range(cfg.steps + 1):
        if k:
            rho = u @ rho @ u.conj().T
            if chan is not None:
                rho = chan(rho)
        seen = rho
        if cfg.tomography:
            meas = tomo.measure(rho, label=True, sigma=cfg.noise_sigma, seed=rng_seed + k)
            seen = tomo.reconstruct(meas, label=True)
            if offset is None:
                offset = tomo.label_offset(seen, channels.labeled_pps())
            seen = tomo.reconstruct(meas, label=True, label_offset=offset)
        three = qops.permute_spins(channels.unlabel(seen), order)
        states.append(_normalise(three, k))
    extra = {
        "molecule": m.name,
        "compile_fidelity": phi,
        "pulse_count": sched.pulse_count,
        "schedule_duration_s": sched.duration,
    }
    if offset is not None:
        extra["label_offset"] = float(offset)
    return _records(states, _ideal_states(cfg)), states[-1], extra


def _run_tce(cfg: ExperimentConfig) -> tuple[list[StepRecord], np.ndarray, dict]:
    """Hand-written hard-pulse step on the three-spin molecule with temporal averaging."""
    m = _resolve_molecule(cfg, "tce")
    if m.n != 3:
        raise ConfigError("the temporally averaged experiment needs a three-spin molecule", "molecule")
    try:
        sched = composite.tce_walk_step(m)
    except ValueError as exc:
        raise ConfigError(str(exc), "molecule") from None
    u = simulate_schedule(sched)
    phi = qops.gate_fidelity(u, composite.tce_walk_unitary(m))
    chan = _channel(cfg)
    inputs = channels.tce_input_states()
    states = []
    for k in range(cfg.steps + 1):
        if k:
            inputs = [u @ r @ u.conj().T for r in inputs]
            if chan is not None:
                inputs = [chan(r) for r in inputs]
        seen = inputs
        if cfg.tomography:
            seen = [
                tomo.tomography(r, sigma=cfg.noise_sigma, seed=cfg.seed + 3 * k + j) + np.trace(r) / 8 * np.eye(8)
                for j, r in enumerate(inputs)
            ]
        states.append(_normalise(channels.temporal_average(seen), k))
    extra = {"molecule": m.name, "step_fidelity": phi, "pulse_count": sched.pulse_count,
             "schedule_duration_s": sched.duration}
    return _records(states, _ideal_states(cfg)), states[-1], extra


RUNNERS = {
    "ideal-walk": _run_ideal,
    "decoherence-sweep": _run_ideal,
    "classical-walk": _run_classical,
    "nmr-crotonic": _run_crotonic,
    "nmr-tce": _run_tce,
}


def run(cfg: ExperimentConfig) -> WalkReport:
    """Execute one experiment. Deterministic for a given config (including seed)."""
    cfg.validate()
    t0 = time.perf_counter()
    recs, final, extra = RUNNERS[cfg.mode](cfg)
    return WalkReport(
        mode=cfg.mode,
        steps=recs,
        final_pauli={} if final is None else _final_pauli(final),
        config=cfg.to_dict(),
        config_hash=cfg.hash(),
        wall_time=time.perf_counter() - t0,
        extra=extra,
    )


def _monotone_summary(p_grid: Sequence[float], reports: Sequence[WalkReport], step: int = 3) -> dict:
    if not reports or len(reports[0].steps) <= step:
        return {}
    vals = [r.steps[step].corners[3] for r in reports]
    return {
        f"corner3_step{step}": vals,
        "monotone_nonincreasing": bool(all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))),
    }


def sweep_decoherence(
    cfg: ExperimentConfig, p_grid: Optional[Sequence[float]] = None, workers: Optional[int] = None
) -> SweepTable:
    """One report per dephasing strength, ordered by ``p``.

    Points run in a process pool unless ``workers`` is 1.
    """
    grid = sorted(float(p) for p in (cfg.p_grid if p_grid is None else p_grid))
    configs = [cfg.with_(mode="decoherence-sweep", p=p, gradient=None, p_grid=tuple(grid)) for p in grid]
    workers = min(len(grid), os.cpu_count() or 1) if workers is None else workers
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, configs))
    else:
        reports = [run(c) for c in configs]
    return SweepTable(grid, reports, _monotone_summary(grid, reports))
