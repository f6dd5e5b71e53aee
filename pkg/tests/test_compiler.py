import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmrwalk import channels, qops, walk
from nmrwalk.spinsys import molecule
from nmrwalk.spinsys.compiler import (
    ZZ,
    CompileError,
    Rotation,
    ZRotation,
    circuit_unitary,
    compile_gates,
    register_for,
    schedule_fidelity,
    simplify,
    walk_gates,
    walk_step_gates,
    walk_unitary,
    zz_gate,
)
from nmrwalk.spinsys.molecule import Coupling, Molecule, Spin
from nmrwalk.spinsys.schedule import simulate_schedule


@pytest.fixture(scope="module")
def crotonic():
    return molecule.crotonic_like()


def test_register_for_builtins(crotonic):
    assert register_for(crotonic) == (2, 1, 3)
    assert register_for(molecule.tce()) == (0, 1, 2)


def test_walk_step_gates_realise_walk_step():
    u = circuit_unitary(walk_step_gates(), 3)
    assert qops.phase_distance(u, walk.walk_step()) < 1e-12


def test_walk_unitary_embeds_register(crotonic):
    reg = register_for(crotonic)
    u = walk_unitary(1, 4, reg)
    u_gates = circuit_unitary(walk_step_gates(*reg), 4)
    assert qops.phase_distance(u, u_gates) < 1e-12


gate_st = st.one_of(
    st.builds(Rotation, st.integers(0, 2), st.sampled_from([np.pi / 2, np.pi, -np.pi / 2]),
              st.sampled_from([0.0, np.pi / 2, np.pi, -np.pi / 2])),
    st.builds(ZRotation, st.integers(0, 2), st.floats(-4, 4)),
    st.builds(ZZ, st.just(0), st.integers(1, 2), st.floats(-4, 4)),
)


@given(st.lists(gate_st, max_size=12))
def test_simplify_preserves_unitary(gates):
    out = simplify(gates)
    assert len(out) <= len(gates)
    assert qops.phase_distance(circuit_unitary(out, 3), circuit_unitary(gates, 3)) < 1e-9


def test_simplify_cancels_inverse_pairs():
    g = [Rotation(0, np.pi / 2, 0.3), ZZ(0, 1, 0.5), Rotation(2, np.pi, 0), ZZ(0, 1, -0.5), Rotation(0, -np.pi / 2, 0.3)]
    assert simplify(g) == [Rotation(2, np.pi, 0)]


def test_zz_rejects_same_spin():
    with pytest.raises(CompileError):
        ZZ(1, 1, 0.3)


def test_one_step_soft_compile_meets_contract(crotonic):
    sched = compile_gates(walk_step_gates(*register_for(crotonic)), crotonic)
    u_ideal = walk_unitary(1, 4, register_for(crotonic))
    phi = schedule_fidelity(sched, u_ideal)
    assert phi >= 0.999
    assert phi == pytest.approx(sched.info["fidelity"], abs=1e-9)
    assert sched.pulse_count > 0


def test_ideal_pulse_compile_is_exact(crotonic):
    reg = register_for(crotonic)
    sched = compile_gates(walk_step_gates(*reg), crotonic, pulse="ideal")
    assert schedule_fidelity(sched, walk_unitary(1, 4, reg)) > 1 - 1e-9


def test_identity_circuit_compiles_to_nothing(crotonic):
    sched = compile_gates([Rotation(1, np.pi / 2), Rotation(1, -np.pi / 2)], crotonic)
    assert sched.events == []
    assert sched.info["fidelity"] == 1.0
    assert np.allclose(simulate_schedule(sched), np.eye(16))


def test_cancellation_removes_pulses_without_changing_the_circuit(crotonic):
    reg = register_for(crotonic)
    gates = walk_gates(8, *reg)
    with_cancel = compile_gates(gates, crotonic, pulse="ideal", refine_evals=0)
    without = compile_gates(gates, crotonic, pulse="ideal", cancel=False, refine_evals=0)
    assert with_cancel.pulse_count < without.pulse_count
    u_a, u_b = simulate_schedule(with_cancel), simulate_schedule(without)
    assert qops.phase_distance(u_a, u_b) < 1e-8
    assert qops.phase_distance(u_a, np.eye(16)) < 1e-8  # eight steps are the identity


def test_compile_rejects_bad_inputs(crotonic):
    with pytest.raises(CompileError):
        compile_gates([Rotation(7, np.pi)], crotonic)
    with pytest.raises(CompileError):
        compile_gates([Rotation(0, np.pi)], crotonic, pulse="magic")
    with pytest.raises(CompileError):
        register_for(Molecule("two", (Spin("A", 0.0), Spin("B", 100.0))))


def test_uncoupled_zz_is_infeasible():
    m = Molecule("split", (Spin("A", 0.0), Spin("B", 500.0), Spin("C", 900.0)), (Coupling(0, 1, 50.0),))
    with pytest.raises(CompileError):
        compile_gates([ZZ(0, 2, np.pi / 2)], m, pulse="ideal")
    with pytest.raises(CompileError):
        zz_gate(m, (0, 2), np.pi / 2)


def test_zz_gate_isolated_pair_is_a_half_coupling_delay():
    j = 40.0
    m = Molecule("pair", (Spin("A", 0.0), Spin("B", 700.0)), (Coupling(0, 1, j),))
    sched = zz_gate(m, (0, 1), np.pi / 2)
    assert sched.duration == pytest.approx(1 / (2 * j), rel=1e-9)
    assert schedule_fidelity(sched, qops.rzz(np.pi / 2)) > 1 - 1e-9


def test_zz_gate_zero_angle_is_empty(crotonic):
    assert zz_gate(crotonic, (2, 1), 0.0).events == []


@pytest.mark.parametrize("pair", [(2, 1), (2, 3)])
def test_zz_gate_refocuses_the_rest(crotonic, pair):
    sched = zz_gate(crotonic, pair, np.pi / 2)
    ideal = np.diag(qops.diag_zphase(4, zz_angles={tuple(sorted(pair)): np.pi / 2}))
    assert schedule_fidelity(sched, ideal) >= 1 - 1e-9


def test_simultaneous_couplings_compile_exactly_with_ideal_pulses(crotonic):
    gates = [ZZ(2, 1, np.pi / 2), ZZ(2, 3, -np.pi / 2)]
    sched = compile_gates(gates, crotonic, pulse="ideal")
    assert schedule_fidelity(sched, circuit_unitary(gates, 4)) >= 1 - 1e-9


def test_compiled_walk_reaches_opposite_corner(crotonic):
    """Three compiled steps from the labelled input send the walker to corner 3."""
    reg = register_for(crotonic)
    sched = compile_gates(walk_gates(3, *reg), crotonic)
    u = simulate_schedule(sched)
    rho = u @ channels.labeled_pps() @ u.conj().T
    three = qops.permute_spins(channels.unlabel(rho), [r - 1 for r in reg])
    p = walk.corner_probabilities(three / np.trace(three).real)
    assert p[3] >= 0.95
