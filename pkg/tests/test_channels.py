import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmrwalk import channels, qops, walk
from nmrwalk.channels import GradientParams
from nmrwalk.qops import I2, X, Y, Z, OperatorError

from conftest import random_state

probs = st.floats(min_value=0.0, max_value=1.0)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def params_for(x: float, n: int = 3, t: float = 1e-3, a: float = 0.01) -> GradientParams:
    """Gradient whose edge phase ``alpha' gamma t a`` equals ``x`` on every spin."""
    return GradientParams(alpha_prime=x / (t * a), t=t, a=a, gamma_per_spin=(1.0,) * n)


def test_dephasing_probability_examples():
    assert channels.dephasing_probability(GradientParams(5.0, 0.0, 0.01, (1.0,)), 0) == 0.0
    assert channels.dephasing_probability(params_for(np.pi, 1), 0) == pytest.approx(0.5, abs=1e-12)
    assert channels.dephasing_probability(params_for(np.pi / 2, 1), 0) == pytest.approx(0.5 * (1 - 2 / np.pi), abs=1e-12)


def test_dephasing_probability_can_exceed_half():
    x = 4.4934094579  # first minimum of sin(x)/x
    p = channels.dephasing_probability_from_phase(x)
    assert 0.5 < p <= channels.P_MAX + 1e-12
    assert p == pytest.approx(channels.P_MAX, abs=1e-9)


@given(st.floats(min_value=-50, max_value=50))
def test_dephasing_probability_even_and_bounded(x):
    p = channels.dephasing_probability_from_phase(x)
    assert p == pytest.approx(channels.dephasing_probability_from_phase(-x), abs=1e-15)
    assert -1e-15 <= p <= channels.P_MAX + 1e-12


def test_dephasing_probability_continuous_at_zero():
    assert channels.dephasing_probability_from_phase(1e-9) < 1e-16
    assert channels.dephasing_probability_from_phase(1e-4) == pytest.approx(1e-8 / 12, rel=1e-6)


def test_z_dephase_examples():
    rho = random_state(np.random.default_rng(0))
    assert np.allclose(channels.z_dephase(rho, 1, 0.0), rho)
    step1 = walk.run_quantum_walk(1)[-1][0]
    out = channels.z_dephase(step1, 0, 0.5)
    assert np.allclose(walk.corner_probabilities(out), [0, 0.5, 0, 0.5], atol=1e-12)
    xxx = (np.eye(8) + qops.pauli("XXX")) / 8
    assert np.allclose(channels.dephase_all(xxx, 0.5), np.eye(8) / 8)


def test_z_dephase_matches_kraus():
    rng = np.random.default_rng(5)
    rho = random_state(rng)
    for spin in range(3):
        for p in (0.1, 0.37, 0.5):
            brute = qops.apply_kraus(rho, channels.z_dephase_kraus(3, spin, p))
            assert np.allclose(channels.z_dephase(rho, spin, p), brute, atol=1e-14)


def test_z_dephase_scales_transverse_coefficients():
    rho = random_state(np.random.default_rng(9))
    out = channels.z_dephase(rho, 1, 0.3)
    a, b = qops.pauli_decompose(rho), qops.pauli_decompose(out)
    for label in a:
        scale = 1 - 2 * 0.3 if label[1] in "XY" else 1.0
        assert b[label] == pytest.approx(scale * a[label], abs=1e-14)


def test_z_dephase_rejects_out_of_range():
    with pytest.raises(OperatorError):
        channels.z_dephase(np.eye(2) / 2, 0, 1.5)
    with pytest.raises(OperatorError):
        channels.z_dephase(np.eye(2) / 2, 0, -0.1)


@given(seeds)
def test_full_dephasing_idempotent(seed):
    rho = random_state(np.random.default_rng(seed))
    once = channels.z_dephase(rho, 2, 0.5)
    assert np.max(np.abs(channels.z_dephase(once, 2, 0.5) - once)) < 1e-12


@given(seeds, probs, probs)
def test_dephasing_composition_law(seed, p1, p2):
    rho = random_state(np.random.default_rng(seed))
    two = channels.z_dephase(channels.z_dephase(rho, 0, p2), 0, p1)
    one = channels.z_dephase(rho, 0, p1 + p2 - 2 * p1 * p2)
    assert np.max(np.abs(two - one)) < 1e-12


def test_gradient_pulse_examples():
    rho = random_state(np.random.default_rng(1))
    zero = GradientParams(1.0, 0.0, 0.01, (1.0, 1.0, 1.0))
    for mode in ("independent", "collective"):
        assert np.allclose(channels.gradient_pulse(rho, zero, mode), rho)
    full = params_for(np.pi)
    assert np.allclose(channels.gradient_pulse(rho, full, "independent"), channels.dephase_all(rho, 0.5), atol=1e-14)


def test_gradient_pulse_rejects_unknown_mode():
    with pytest.raises(OperatorError):
        channels.gradient_pulse(np.eye(8) / 8, params_for(1.0), "sideways")


def test_collective_preserves_zero_quantum():
    zq = (np.eye(4) + qops.pauli("XX") + qops.pauli("YY")) / 4
    g = params_for(2.0, n=2)
    coll = qops.pauli_decompose(channels.gradient_pulse(zq, g, "collective"))
    assert coll["XX"] == pytest.approx(0.25, abs=1e-15)
    assert coll["YY"] == pytest.approx(0.25, abs=1e-15)
    quad = channels.quadrature_gradient(zq, g)
    assert np.allclose(channels.gradient_pulse(zq, g, "collective"), quad, atol=1e-8)
    # independent dephasing does not keep it: the discriminating case
    ind = qops.pauli_decompose(channels.gradient_pulse(zq, g, "independent"))
    assert ind["XX"] < 0.25 - 1e-3


def test_collective_matches_quadrature_on_random_state():
    rho = random_state(np.random.default_rng(11))
    g = GradientParams(300.0, 1e-3, 0.01, (1.0, 0.8, 1.3))
    assert np.allclose(channels.gradient_pulse(rho, g, "collective"), channels.quadrature_gradient(rho, g), atol=1e-8)


def test_single_spin_collective_equals_closed_form():
    plus = (I2 + X) / 2
    g = params_for(1.7, n=1)
    out = channels.gradient_pulse(plus, g, "collective")
    p = channels.dephasing_probability(g, 0)
    assert np.allclose(out, channels.z_dephase(plus, 0, p), atol=1e-14)


@given(seeds, st.floats(min_value=0, max_value=30), st.sampled_from(["independent", "collective"]))
def test_gradient_is_a_valid_channel(seed, x, mode):
    rho = random_state(np.random.default_rng(seed))
    out = channels.gradient_pulse(rho, params_for(x), mode)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.allclose(out, out.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(out).min() >= -1e-10


def test_protected_gradient_all_protected_is_pure_rotation():
    rho = random_state(np.random.default_rng(2))
    g = params_for(2.3)
    r = channels.pi_x(3, range(3))
    for mode in ("collective", "independent"):
        out = channels.protected_gradient(rho, range(3), g, mode)
        assert np.allclose(out, r @ rho @ r.conj().T, atol=1e-12)


def test_protected_gradient_none_protected_doubles_duration():
    rho = random_state(np.random.default_rng(3))
    g = params_for(0.9)
    for mode in ("collective", "independent"):
        out = channels.protected_gradient(rho, [], g, mode)
        assert np.allclose(out, channels.gradient_pulse(rho, g.scaled(2.0), mode), atol=1e-12)


def test_protected_coin_keeps_transverse_magnitude():
    coin_x = qops.tensor((I2 + X) / 2, I2 / 2, I2 / 2)
    g = params_for(2.0)
    out = channels.protected_gradient(coin_x, [0], g)
    c = qops.pauli_decompose(out)
    # pi about x leaves X alone
    assert abs(c["XII"]) == pytest.approx(qops.pauli_decompose(coin_x)["XII"], abs=1e-10)
    # echo oracle: brute-force gradient, pi pulse, gradient over the sample
    brute = channels.quadrature_gradient(coin_x, g, rotation=channels.pi_x(3, [0]))
    assert np.allclose(out, brute, atol=1e-8)
    coin_y = qops.tensor((I2 + Y) / 2, I2 / 2, I2 / 2)
    cy = qops.pauli_decompose(channels.protected_gradient(coin_y, [0], g))
    assert cy["YII"] == pytest.approx(-qops.pauli_decompose(coin_y)["YII"], abs=1e-10)


def test_labeled_pps():
    rho = channels.labeled_pps()
    assert abs(np.trace(rho)) < 1e-15
    assert np.allclose(qops.partial_trace(rho, [1, 2, 3]), 0)
    assert np.allclose(rho[:8, :8], qops.projector("000"))
    support = {k for k, v in qops.pauli_decompose(rho).items() if abs(v) > 1e-15}
    expect = {"Z" + a + b + c for a in "IZ" for b in "IZ" for c in "IZ"}
    assert support == expect
    assert len({round(v, 15) for k, v in qops.pauli_decompose(rho).items() if k in expect}) == 1


def test_temporal_average_examples():
    total = channels.temporal_average(channels.tce_input_states())
    assert np.allclose(total, qops.tensor(I2 + Z, I2 + Z, I2 + Z))
    assert np.allclose(total, 8 * qops.projector("000"))
    zeros = [np.zeros((8, 8))] * 3
    assert np.allclose(channels.temporal_average(zeros), 0)
    u = walk.walk_step()
    evolved = [u @ r @ u.conj().T for r in channels.tce_input_states()]
    assert np.allclose(channels.temporal_average(evolved), u @ total @ u.conj().T)


def test_temporal_average_needs_three():
    with pytest.raises(OperatorError):
        channels.temporal_average([np.eye(8)] * 2)


def test_unlabel_recovers_register_state():
    assert np.allclose(channels.unlabel(channels.labeled_pps()), 2 * qops.projector("000"))
