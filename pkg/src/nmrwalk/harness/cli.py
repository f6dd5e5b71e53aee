"""``nmrwalk`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical contract violated.
"""

from __future__ import annotations

import sys
from typing import Any, Optional

import click
import numpy as np

from .. import qops, tomo
from .config import DEFAULT_P_GRID, ConfigError, ContractViolation, ExperimentConfig, load_config
from .report import FORMATS, emit
from .run import run, sweep_decoherence

EXIT_CONFIG = 2
EXIT_CONTRACT = 3


def _build(config_path: Optional[str], **overrides: Any) -> ExperimentConfig:
    base = load_config(config_path).to_dict() if config_path else {}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ContractViolation as exc:
        click.echo(f"contract violation: {exc}", err=True)
        sys.exit(EXIT_CONTRACT)


def _emit(report, fmt: str, out: Optional[str]) -> None:
    try:
        emit(report, fmt, out)
    except OSError as exc:
        raise click.FileError(out, hint=exc.strerror)


def common(f):
    f = click.option("--format", "fmt", type=click.Choice(FORMATS), default="pretty", show_default=True)(f)
    f = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")(f)
    f = click.option("--config", "config_path", type=click.Path(), default=None, help="YAML experiment config.")(f)
    f = click.option("--steps", type=int, default=None, help="Walk steps (0..8).")(f)
    return f


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Discrete-time quantum walk on a square: ideal, NMR and decohered runs."""


@main.command()
@common
@click.option("--p", type=float, default=None, help="Dephasing probability on every spin after each step.")
def walk(steps, config_path, out, fmt, p):
    """Ideal quantum walk (optionally dephased each step)."""
    cfg = _guard(_build, config_path, mode="ideal-walk", steps=steps, p=p)
    _emit(_guard(run, cfg), fmt, out)


@main.command()
@common
@click.option("--start", "start_corner", type=int, default=None, help="Starting corner.")
def classical(steps, config_path, out, fmt, start_corner):
    """Classical random walk on the square (exact Markov chain)."""
    cfg = _guard(_build, config_path, mode="classical-walk", steps=steps, start_corner=start_corner)
    _emit(_guard(run, cfg), fmt, out)


@main.command()
@common
@click.option("--mode", type=click.Choice(["crotonic", "tce"]), default="crotonic", show_default=True)
@click.option("--molecule", type=str, default=None, help="Molecule YAML path or built-in name.")
@click.option("--pulse", type=click.Choice(["soft", "ideal"]), default=None, help="Compiler pulse model.")
@click.option("--tomography/--no-tomography", default=None, help="Reconstruct each state by tomography.")
@click.option("--noise", "noise_sigma", type=float, default=None, help="Gaussian sigma on observables.")
@click.option("--seed", type=int, default=None)
@click.option("--p", type=float, default=None, help="Dephasing probability on the register after each step.")
def nmr(steps, config_path, out, fmt, mode, molecule, pulse, tomography, noise_sigma, seed, p):
    """Pulse-level walk on the labelled four-spin or the three-spin TCE molecule."""
    cfg = _guard(
        _build, config_path, mode=f"nmr-{mode}", steps=steps, molecule=molecule, pulse=pulse,
        tomography=tomography, noise_sigma=noise_sigma, seed=seed, p=p,
    )
    _emit(_guard(run, cfg), fmt, out)


def _grid(text: Optional[str]):
    if text is None:
        return None
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma separated numbers, got {text!r}", param_hint="--p")


@main.command()
@common
@click.option("--p", "p_text", type=str, default=None,
              help=f"Comma separated grid (default {','.join(map(str, DEFAULT_P_GRID))}).")
@click.option("--workers", type=int, default=None, help="Parallel worker processes (1 = serial).")
def sweep(steps, config_path, out, fmt, p_text, workers):
    """Dephasing sweep: one walk per p, with a monotonicity summary."""
    cfg = _guard(_build, config_path, mode="decoherence-sweep", steps=steps, p_grid=_grid(p_text))
    table = _guard(sweep_decoherence, cfg, workers=workers)
    _emit(table, fmt, out)


@main.command("tomo-selftest")
@click.option("--states", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", "sigma", type=float, default=0.0, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True, help="Round-trip tolerance (noise free).")
def tomo_selftest(states, seed, sigma, tol):
    """Readout completeness and reconstruction round trip on random states."""
    rep = tomo.readout_set_complete(tomo.SEVEN_READOUTS)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(states):
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        rec = tomo.tomography(rho, sigma=sigma, seed=seed + k)
        dev = rho - np.eye(8) / 8
        err = max(abs(qops.pauli_decompose(rec)[p] - qops.pauli_decompose(dev)[p]) for p in qops.pauli_labels(3))
        worst = max(worst, err)
    click.echo(f"readouts: {','.join(tomo.SEVEN_READOUTS)}")
    click.echo(f"rank: {rep.rank}/{rep.n_unknowns} complete: {rep.complete}")
    click.echo(f"max coefficient error over {states} states: {worst:.3e}")
    if not rep.complete or (sigma == 0 and worst > tol):
        click.echo("contract violation: tomography round trip failed", err=True)
        sys.exit(EXIT_CONTRACT)


if __name__ == "__main__":
    main()
