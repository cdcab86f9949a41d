import json

import numpy as np
import pytest

from symnoise.cli import to_jsonable
from symnoise.operators import SIGMA_X, commutator
from symnoise.propagation import SymmetryViolation
from symnoise.scenarios import (ConfigError, ScenarioConfig, TfimConfig, build_dephasing, build_j_squared,
                                build_tfim, initial_state, leakage_metrics, prepare, run_scenario, state_labels,
                                tfim_hamiltonian)


def small_config(**over):
    base = dict(tfim={"n": 2, "duration": 0.5}, trajectories=200, checkpoints=2, n_omega=300, seed=3)
    base.update(over)
    return ScenarioConfig.from_dict(base)


def test_two_qubit_hamiltonian_explicit():
    h = tfim_hamiltonian(TfimConfig(n=2, coupling=0.7, field=0.3))
    zz = np.diag([1, -1, -1, 1])
    x1 = np.kron(SIGMA_X, np.eye(2))
    x2 = np.kron(np.eye(2), SIGMA_X)
    assert np.allclose(h, 0.7 * zz + 0.3 * (x1 + x2))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_all_to_all_tfim_commutes_with_total_spin(n):
    h = tfim_hamiltonian(TfimConfig(n=n, coupling=0.8, field=1.3))
    assert np.abs(commutator(h, build_j_squared(n))).max() < 1e-12


def test_zero_field_hamiltonian_is_diagonal():
    h = tfim_hamiltonian(TfimConfig(n=3, field=0.0))
    assert np.allclose(h, np.diag(np.diag(h)))


def test_j_squared_two_qubits_by_hand():
    # singlet has j(j+1) = 0, triplet 2
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    triplet = np.array([0, 1, 1, 0]) / np.sqrt(2)
    q = build_j_squared(2)
    assert np.allclose(q @ singlet, 0)
    assert np.allclose(q @ triplet, 2 * triplet)


def test_chain_schedule_rejected_for_three_qubits():
    with pytest.raises(SymmetryViolation):
        build_tfim(TfimConfig(n=3, topology="chain", duration=1.0, dt=0.1))
    build_tfim(TfimConfig(n=2, topology="chain", duration=1.0, dt=0.1))


def test_tfim_config_errors():
    with pytest.raises(ConfigError):
        TfimConfig(n=9).validate()
    TfimConfig(n=7, allow_large=True).validate()
    with pytest.raises(ConfigError):
        TfimConfig(topology="ring").validate()
    with pytest.raises(ConfigError):
        TfimConfig(n=2, topology="matrix").coupling_matrix()
    with pytest.raises(ConfigError):
        TfimConfig(n=2, topology="matrix", couplings=[[0, 1], [2, 0]]).validate()
    with pytest.raises(ConfigError):
        build_tfim(TfimConfig(n=2))


def test_scenario_config_errors():
    with pytest.raises(ConfigError):
        ScenarioConfig.preset("figure9")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"colour": 1})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"tfim": {"spins": 3}})
    with pytest.raises(ConfigError):
        small_config(noise="partial").validate()
    with pytest.raises(ConfigError):
        small_config(psd_kind="white").validate()
    with pytest.raises(ConfigError):
        small_config(omega_ir=30.0).validate()
    # |01> mixes the singlet and the triplet
    with pytest.raises(ConfigError):
        prepare(small_config(initial="basis:01"))


def test_initial_states():
    assert np.allclose(initial_state(2, "zeros"), np.diag([1, 0, 0, 0]))
    assert np.allclose(initial_state(2, "plus"), np.full((4, 4), 0.25))
    assert initial_state(3, "basis:101")[5, 5] == 1
    with pytest.raises(ConfigError):
        initial_state(2, "basis:1")
    with pytest.raises(ConfigError):
        initial_state(2, "ghz")
    with pytest.raises(ConfigError):
        build_dephasing(2, "partial", None)


def test_presets():
    fig2b = ScenarioConfig.preset("figure2b")
    assert fig2b.noise == "local" and fig2b.tfim.tau_factor == 2.0
    fig3a = ScenarioConfig.preset("figure3a")
    assert fig3a.long_time and not fig3a.run_mc and not fig3a.with_bounds
    assert ScenarioConfig.preset("figure3a", mc_long=True).run_mc


def test_default_strength_fixes_s0_times_tau():
    setup = prepare(ScenarioConfig.preset("figure2a"))
    assert setup.model.s0() * setup.tau == pytest.approx(1.0)
    assert setup.schedule.dt < np.pi / setup.model.band[1]
    assert setup.schedule.duration == pytest.approx(2 * setup.tau)


def test_leakage_metrics_of_sector_state(tfim2_basis):
    rho = tfim2_basis.spectrum.projector(1) / 3
    m = leakage_metrics(rho, tfim2_basis, 1)
    assert m.sector_population == pytest.approx(1.0)
    assert m.outside_population == pytest.approx(0.0, abs=1e-15)
    assert state_labels(tfim2_basis) == ["q=0#0", "q=2#0", "q=2#1", "q=2#2"]


def test_small_run_has_no_violations():
    report = run_scenario(small_config(noise="global"))
    assert report.violations == []
    assert report.metrics["mc"]["outside_population"] < 1e-12
    assert report.bounds["psi_nonsymmetric"] == 0.0
    json.dumps(to_jsonable(report.to_dict()))


def test_report_is_reproducible_across_workers():
    # 600 trajectories span three chunks
    one = to_jsonable(run_scenario(small_config(workers=1, trajectories=600)).to_dict())
    two = to_jsonable(run_scenario(small_config(workers=3, trajectories=600)).to_dict())
    one["config"].pop("workers")
    two["config"].pop("workers")
    assert json.dumps(one, sort_keys=True) == json.dumps(two, sort_keys=True)
