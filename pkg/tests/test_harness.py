import json
import math

import numpy as np
import pytest
import yaml

from nmrwalk.harness.config import ConfigError, ContractViolation, ExperimentConfig, load_config
from nmrwalk.harness.report import SCHEMA_VERSION, read_csv, to_csv, to_json, to_pretty
from nmrwalk.harness.run import run, sweep_decoherence

from reference_tables import CLASSICAL_CORNERS, QUANTUM_CORNERS


def as_float(table):
    return np.array([[float(x) for x in row] for row in table])


def test_ideal_walk_matches_table():
    rep = run(ExperimentConfig())
    assert np.max(np.abs(rep.corners() - as_float(QUANTUM_CORNERS))) < 1e-12
    assert np.allclose(rep.fidelities(), 1.0)
    assert [s.step for s in rep.steps] == list(range(9))


def test_classical_walk_matches_table():
    rep = run(ExperimentConfig(mode="classical-walk"))
    assert [tuple(s.corners) for s in rep.steps] == [tuple(float(x) for x in r) for r in CLASSICAL_CORNERS]
    assert all(math.isnan(f) for f in rep.fidelities())


def test_full_dephasing_run_is_classical():
    rep = run(ExperimentConfig(p=0.5))
    assert np.max(np.abs(rep.corners() - as_float(CLASSICAL_CORNERS))) < 1e-12


def test_gradient_config_drives_dephasing():
    # one spin's phase spread of pi gives p = 1/2 on every spin
    grad = {"alpha_prime": 1.0, "t": 1.0, "a": 1.0, "gamma_per_spin": [math.pi] * 3}
    rep = run(ExperimentConfig(gradient=grad))
    assert np.max(np.abs(rep.corners() - as_float(CLASSICAL_CORNERS))) < 1e-12


@pytest.mark.parametrize("mode", ["ideal-walk", "classical-walk"])
def test_every_step_sums_to_one(mode):
    for p in (0.0, 0.3):
        cfg = ExperimentConfig(mode=mode, p=p if mode == "ideal-walk" else 0.0)
        assert np.allclose(run(cfg).corners().sum(axis=1), 1.0, atol=1e-12)


def test_start_corner():
    rep = run(ExperimentConfig(start_corner=2, steps=3))
    assert rep.steps[0].corners == (0.0, 0.0, 1.0, 0.0)
    assert rep.steps[3].corners[1] == pytest.approx(1.0)


def test_runs_are_deterministic():
    cfg = ExperimentConfig(p=0.2)
    a, b = run(cfg), run(cfg)
    assert a.same_results(b)
    assert a.config_hash == b.config_hash == cfg.hash()
    assert not a.same_results(run(cfg.with_(p=0.3)))


def test_sweep_monotone_and_ordered():
    table = sweep_decoherence(ExperimentConfig(mode="decoherence-sweep"), workers=1)
    assert table.p_grid == sorted(table.p_grid)
    vals = table.summary["corner3_step3"]
    assert vals[0] == pytest.approx(1.0) and vals[-1] == pytest.approx(0.5)
    assert table.summary["monotone_nonincreasing"]


def test_sweep_intermediate_and_parallel():
    cfg = ExperimentConfig(mode="decoherence-sweep", steps=3)
    serial = sweep_decoherence(cfg, p_grid=[0.5, 0.0, 0.25], workers=1)
    assert serial.p_grid == [0.0, 0.25, 0.5]
    mid = serial.summary["corner3_step3"][1]
    assert 0.5 < mid < 1.0
    parallel = sweep_decoherence(cfg, p_grid=[0.5, 0.0, 0.25], workers=2)
    assert all(a.same_results(b) for a, b in zip(serial.reports, parallel.reports))


def test_nmr_crotonic_tracks_ideal():
    rep = run(ExperimentConfig(mode="nmr-crotonic"))
    assert np.max(np.abs(rep.corners() - as_float(QUANTUM_CORNERS))) < 5e-3
    assert rep.extra["compile_fidelity"] >= 0.999
    assert rep.fidelities().min() > 0.99


def test_nmr_crotonic_with_tomography():
    rep = run(ExperimentConfig(mode="nmr-crotonic", steps=3, tomography=True))
    plain = run(ExperimentConfig(mode="nmr-crotonic", steps=3))
    # the held label offset ignores the small label leakage of the compiled step
    assert np.max(np.abs(rep.corners() - plain.corners())) < 2e-3
    assert rep.extra["label_offset"] == pytest.approx(0.125)


def test_nmr_crotonic_contract():
    with pytest.raises(ContractViolation):
        run(ExperimentConfig(mode="nmr-crotonic", steps=1, min_phi=1.0))


def test_nmr_tce_runs():
    rep = run(ExperimentConfig(mode="nmr-tce", steps=2, tomography=True))
    assert rep.extra["step_fidelity"] > 0.97
    assert np.allclose(rep.corners().sum(axis=1), 1.0)
    assert rep.steps[1].corners[1] == pytest.approx(0.5, abs=0.05)


def test_unknown_molecule_is_a_config_error():
    with pytest.raises(ConfigError) as exc:
        run(ExperimentConfig(mode="nmr-crotonic", molecule="benzene"))
    assert exc.value.field == "molecule"
    with pytest.raises(ConfigError):
        run(ExperimentConfig(mode="nmr-crotonic", molecule="tce"))


@pytest.mark.parametrize(
    "changes, field",
    [
        ({"steps": 9}, "steps"),
        ({"steps": -1}, "steps"),
        ({"steps": 2.5}, "steps"),
        ({"mode": "walkies"}, "mode"),
        ({"p": 0.9}, "p"),
        ({"p": "lots"}, "p"),
        ({"pulse": "hard"}, "pulse"),
        ({"noise_sigma": 0.1}, "noise_sigma"),
        ({"p_grid": [0.0, 0.7]}, "p_grid"),
        ({"start_corner": 4}, "start_corner"),
        ({"min_phi": 0.0}, "min_phi"),
        ({"colour": "blue"}, "colour"),
        ({"gradient": {"alpha_prime": 1.0}}, "gradient"),
    ],
)
def test_config_errors_name_the_field(changes, field):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(changes)
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_config_hash_stable():
    a = ExperimentConfig(p=0.1)
    b = ExperimentConfig.from_dict({"p": "0.1"})
    assert a.hash() == b.hash()
    assert a.hash() != ExperimentConfig(p=0.2).hash()
    assert len(a.hash()) == 64


def test_load_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"mode": "decoherence-sweep", "steps": 4, "p_grid": [0, 0.5]}))
    cfg = load_config(path)
    assert cfg.steps == 4 and cfg.p_grid == (0.0, 0.5)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("steps: [unclosed")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_csv_round_trip():
    rep = run(ExperimentConfig(p=0.17))
    rows = read_csv(to_csv(rep))
    assert len(rows) == 9
    for row, s in zip(rows, rep.steps):
        assert row["step"] == s.step
        assert max(abs(row[f"corner{k}"] - s.corners[k]) for k in range(4)) < 1e-15
        assert abs(row["fidelity"] - s.fidelity) < 1e-15


def test_sweep_csv_has_p_column():
    table = sweep_decoherence(ExperimentConfig(mode="decoherence-sweep", steps=1), p_grid=[0.0, 0.5], workers=1)
    rows = read_csv(to_csv(table))
    assert [r["p"] for r in rows] == [0.0, 0.0, 0.5, 0.5]


def test_json_report():
    rep = run(ExperimentConfig(mode="classical-walk", steps=2))
    data = json.loads(to_json(rep))
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["config_hash"] == rep.config_hash
    assert data["steps"][0] == [0, 1.0, 0.0, 0.0, 0.0, None]
    assert data["config"]["mode"] == "classical-walk"


def test_pretty_report_has_no_negative_zero():
    text = to_pretty(run(ExperimentConfig(p=0.1)))
    assert "-0.0000" not in text
    assert text.splitlines()[0] == "mode: ideal-walk"
