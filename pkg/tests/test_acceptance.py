"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

from fractions import Fraction

import numpy as np
import pytest

from nmrwalk import channels, qops, tomo, walk
from nmrwalk.spinsys import composite, molecule
from nmrwalk.spinsys.compiler import compile_gates, register_for, walk_gates, walk_step_gates, walk_unitary
from nmrwalk.spinsys.decompose import error_decompose
from nmrwalk.spinsys.schedule import simulate_schedule

from conftest import random_state, random_unitary
from reference_tables import CLASSICAL_CORNERS, QUANTUM_CORNERS


@pytest.fixture
def verdict(capsys):
    def say(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return say


def test_criterion_01_quantum_columns(verdict):
    got = np.array([p for _, p in walk.run_quantum_walk(8)])
    err = float(np.max(np.abs(got - np.array(QUANTUM_CORNERS, dtype=float))))
    verdict(1, err < 1e-12, f"ideal walk vs quantum table, max error {err:.2e} (tol 1e-12)")


def test_criterion_02_classical_columns(verdict):
    got = [tuple(d) for d in walk.classical_walk(8, exact=True)]
    ok = got == [tuple(Fraction(x) for x in row) for row in CLASSICAL_CORNERS]
    ok = ok and all(isinstance(x, Fraction) for row in got for x in row)
    verdict(2, ok, "exact Markov chain equals classical table for steps 0..8")


def test_criterion_03_periodicity(verdict):
    w8 = np.linalg.matrix_power(walk.walk_step(), 8)
    dist = qops.phase_distance(w8, np.eye(8))
    states = walk.run_quantum_walk(8)
    f = tomo.fidelity(states[8][0], states[0][0])
    ok = dist < 1e-10 and abs(f - 1) < 1e-10
    verdict(3, ok, f"phase_distance(W^8, 1) = {dist:.2e}, F(step 8, step 0) = {f:.12f}")


def test_criterion_04_quantum_to_classical(verdict):
    classical = np.array(CLASSICAL_CORNERS, dtype=float)
    quantum = np.array(QUANTUM_CORNERS, dtype=float)
    dephase = lambda p: (lambda rho: channels.dephase_all(rho, p))
    full = np.array([c for _, c in walk.run_quantum_walk(8, per_step_channel=dephase(0.5))])
    none = np.array([c for _, c in walk.run_quantum_walk(8, per_step_channel=dephase(0.0))])
    err_c = float(np.max(np.abs(full[1:] - classical[1:])))
    err_q = float(np.max(np.abs(none - quantum)))
    grid = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    c3 = [walk.run_quantum_walk(3, per_step_channel=dephase(p))[3][1][3] for p in grid]
    mono = all(b <= a + 1e-12 for a, b in zip(c3, c3[1:]))
    ok = err_c < 1e-12 and err_q < 1e-12 and mono
    verdict(4, ok, f"p=0.5 vs classical {err_c:.1e}, p=0 vs quantum {err_q:.1e}, "
                   f"corner 3 at step 3 over p grid {[round(float(x), 4) for x in c3]} monotone={mono}")


def test_criterion_05_dephasing_formula(verdict):
    p_pi = channels.dephasing_probability_from_phase(np.pi)
    p_half = channels.dephasing_probability_from_phase(np.pi / 2)
    ok = abs(p_pi - 0.5) < 1e-12 and abs(p_half - 0.5 * (1 - 2 / np.pi)) < 1e-12
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        p1, p2 = rng.uniform(0, 0.5, 2)
        rho = random_state(rng)
        two = channels.z_dephase(channels.z_dephase(rho, 1, p1), 1, p2)
        one = channels.z_dephase(rho, 1, p1 + p2 - 2 * p1 * p2)
        worst = max(worst, float(np.max(np.abs(two - one))))
    ok = ok and worst < 1e-12
    verdict(5, ok, f"p(pi) = {p_pi:.15f}, p(pi/2) = {p_half:.15f}, composition error {worst:.1e}")


def test_criterion_06_residual_angle(verdict):
    deg = float(np.degrees(composite.residual_coupling_angle(molecule.tce())))
    verdict(6, abs(deg - 4.27) < 0.1, f"residual carbon coupling angle {deg:.4f} deg vs 4.27 (tol 0.1)")


def test_criterion_07_frame_trick(verdict):
    m = molecule.tce()
    phase = composite.relative_z_phase(m, 1 / (2 * m.j(0, 1)))
    err = abs(np.angle(np.exp(1j * (phase + np.pi / 2))))
    verdict(7, err < 1e-10, f"relative z phase on C2 over 1/(2J) = {phase:.12f} rad (target -pi/2, err {err:.1e})")


def test_criterion_08_composite_pulse(verdict):
    free = molecule.tce().with_couplings_scaled(0.0)
    worst = 0.0
    for target in (0, 1):
        for phase in np.linspace(0, 2 * np.pi, 100, endpoint=False):
            u = simulate_schedule(composite.tce_selective(free, target, phase))
            worst = max(worst, qops.phase_distance(u, composite.selective_ideal(free, target, phase)))
    ising = molecule.tce(model="ising")
    model = composite.residual_model_infidelity(ising)
    sim = composite.selective_infidelity(ising, 1)
    strong = composite.selective_infidelity(molecule.tce(model="strong"), 1)
    ratio = sim / model
    ok = worst < 1e-10 and 0.5 <= ratio <= 2.0
    verdict(8, ok, f"J=0 worst phase_distance {worst:.1e}; infidelity {sim:.3e} vs residual model {model:.3e} "
                   f"(ratio {ratio:.3f}); strong-coupling infidelity {strong:.3e} (ratio {strong / model:.2f})")


def test_criterion_09_compiler(verdict):
    m = molecule.crotonic_like()
    reg = register_for(m)
    one = compile_gates(walk_step_gates(*reg), m)
    phi1 = qops.gate_fidelity(simulate_schedule(one), walk_unitary(1, m.n, reg))
    eight = compile_gates(walk_gates(8, *reg), m)
    phi8 = qops.gate_fidelity(simulate_schedule(eight), walk_unitary(8, m.n, reg))

    ideal = qops.tensor(qops.rotation(np.pi / 2, 0.3), qops.I2, qops.I2)
    z_plant = error_decompose(qops.tensor(qops.rz(0.1), qops.I2, qops.I2) @ ideal, ideal)
    z_err = abs(z_plant.post_z[0] - 0.1)
    ideal_zz = qops.tensor(qops.I2, qops.I2, qops.rotation(np.pi / 2))
    zz_u = np.diag(qops.diag_zphase(3, zz_angles={(0, 1): 0.1})) @ ideal_zz
    zz_err = abs(error_decompose(zz_u, ideal_zz).zz_error[(0, 1)] - 0.1)
    ok = phi1 >= 0.999 and phi8 >= 0.992 and z_err < 1e-6 and zz_err < 1e-6
    verdict(9, ok, f"one step Phi {phi1:.5f} (>= 0.999), eight steps Phi {phi8:.5f} (>= 0.992), "
                   f"planted z recovered to {z_err:.1e}, planted zz to {zz_err:.1e}")


def test_criterion_10_strong_vs_weak(verdict):
    ratios = (10.5, 30, 100, 300, 1000)
    d = [composite.coupling_model_distance(r) for r in ratios]
    mono = all(a > b for a, b in zip(d, d[1:]))
    phi = {}
    for model in ("ising", "strong"):
        m = molecule.tce(model=model)
        phi[model] = qops.gate_fidelity(simulate_schedule(composite.tce_walk_step(m)), composite.tce_walk_unitary(m))
    ok = mono and d[-1] < 1e-3 and phi["strong"] < phi["ising"]
    verdict(10, ok, f"model distance {[f'{x:.2e}' for x in d]} monotone={mono}; "
                    f"TCE step Phi strong {phi['strong']:.4f} < ising {phi['ising']:.4f}")


def test_criterion_11_tomography(verdict):
    rank = tomo.readout_set_complete(tomo.SEVEN_READOUTS).rank
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        rho = random_state(rng)
        dev = rho - np.eye(8) / 8
        worst = max(worst, float(np.max(np.abs(tomo.tomography(rho) - dev))))
    verdict(11, rank == 63 and worst < 1e-10, f"seven-readout rank {rank}/63, round-trip error {worst:.1e} on 100 states")


def test_criterion_12_fidelity_metric(verdict):
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(50):
        a, b = random_state(rng), random_state(rng)
        u = random_unitary(rng, 8)
        worst = max(
            worst,
            abs(tomo.fidelity(a, a) - 1),
            abs(tomo.fidelity(a, b) - tomo.fidelity(b, a)),
            abs(tomo.fidelity(u @ a @ u.conj().T, u @ b @ u.conj().T) - tomo.fidelity(a, b)),
        )
    verdict(12, worst < 1e-12, f"self, symmetry and unitary invariance, worst deviation {worst:.1e}")


def test_criterion_13_pseudo_pure(verdict):
    total = channels.temporal_average(channels.tce_input_states())
    pure = qops.projector("000")
    exact = np.array_equal(total, 8 * pure)
    dev_total = total - np.trace(total) / 8 * np.eye(8)
    dev_pure = pure - np.eye(8) / 8
    same_dev = np.array_equal(dev_total, 8 * dev_pure)
    support = {k for k, v in qops.pauli_decompose(channels.labeled_pps()).items() if v != 0}
    expect = {"Z" + a + b + c for a in "IZ" for b in "IZ" for c in "IZ"}
    ok = exact and same_dev and support == expect
    verdict(13, ok, f"temporal average equals 8|000><000| exactly: {exact}; labelled support "
                    f"{'= Z(x){I,Z}^3' if support == expect else sorted(support)}")
