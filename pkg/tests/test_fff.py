import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symnoise.basis import build_qbasis, sector_decompose
from symnoise.fff import (assemble_cumulant, block_structure_report, chi_blocks, coherence_params, control_matrix,
                          cumulant_from_lambda, distance_and_bounds, filter_functions, predict_average_state,
                          steady_state, structure_check, structure_constants)
from symnoise.noise import NoiseModel, NyquistError, PsdSpec
from symnoise.operators import SIGMA_X, SIGMA_Z, commutator, embed, liouville_matrix
from symnoise.propagation import Schedule, SymmetryViolation, ideal_propagate
from symnoise.scenarios import TfimConfig, build_dephasing, build_j_squared, tfim_hamiltonian

PLUS = np.full((2, 2), 0.5, dtype=complex)
QUBIT = build_qbasis(sector_decompose(SIGMA_Z))


def qubit_setup(psd, duration=1.0, dt=0.02, h0=None):
    h0 = np.zeros((2, 2)) if h0 is None else h0
    sched = Schedule.constant(h0, duration, dt, symmetry=SIGMA_Z)
    cache, rho_t = ideal_propagate(sched, PLUS)
    model = NoiseModel((SIGMA_Z,), (psd,), np.eye(1))
    return cache, rho_t, model


def tfim_setup(n, kind, duration=1.0, dt=0.02, psd=None):
    psd = PsdSpec.lorentzian(0.2, 0.5, 60.0) if psd is None else psd
    h0 = tfim_hamiltonian(TfimConfig(n=n))
    basis = build_qbasis(sector_decompose(build_j_squared(n), refine=h0))
    sched = Schedule.constant(h0, duration, dt, symmetry=build_j_squared(n))
    cache, _ = ideal_propagate(sched, np.eye(2 ** n) / 2 ** n)
    return basis, cache, build_dephasing(n, kind, psd)


def test_qubit_basis_layout():
    kinds = [lab.kind for lab in QUBIT.labels]
    assert kinds == ["cartan", "ladder", "ladder"]
    assert np.allclose(np.abs(QUBIT.generators[0]), np.abs(SIGMA_Z) / np.sqrt(2))


def test_structure_constants_match_commutators():
    f = structure_constants(QUBIT)
    for i, x in enumerate(QUBIT.generators):
        expected = liouville_matrix(lambda y: commutator(x, y), QUBIT.liouville)
        assert np.allclose(1j * f[i], expected)
        assert np.allclose(f[i], -f[i].T)


def test_cumulant_by_hand_for_cartan_dephasing():
    # L = -c F_z F_z; [Z/sqrt2, X/sqrt2] = iY so F_z rotates x <-> y with weight sqrt2
    c = -0.3
    chi1 = np.zeros((3, 3))
    chi1[0, 0] = c
    mat = assemble_cumulant(chi1, np.zeros((3, 3)), QUBIT).matrix
    assert np.allclose(mat, np.diag([0.0, 0.0, 2 * c, 2 * c]), atol=1e-14)


def test_assemble_rejects_wrong_symmetry():
    with pytest.raises(ValueError):
        assemble_cumulant(np.triu(np.ones((3, 3))), np.zeros((3, 3)), QUBIT)
    with pytest.raises(ValueError):
        assemble_cumulant(np.zeros((3, 3)), np.ones((3, 3)), QUBIT)


def test_cumulant_from_lambda_splits_parts():
    lam = np.arange(9.0).reshape(3, 3)
    c = cumulant_from_lambda(lam, QUBIT)
    assert np.allclose(c.chi1, -(lam + lam.T) / 2)
    assert np.allclose(c.chi2, -(lam - lam.T) / 4)


def test_control_matrix_at_final_time_equals_operator_coefficients():
    cache, _, model = qubit_setup(PsdSpec.white(0.1, 40.0), h0=0.4 * SIGMA_Z)
    cm = control_matrix(cache, QUBIT, model)
    assert np.allclose(cm.r[-1, 0], QUBIT.coefficients(SIGMA_Z))
    assert cm.block_residual < 1e-12
    assert cm.duration == pytest.approx(1.0)


def test_control_matrix_rejects_symmetry_breaking_hamiltonian():
    sched = Schedule.constant(SIGMA_X, 1.0, 0.05)
    cache, _ = ideal_propagate(sched, PLUS)
    model = NoiseModel((SIGMA_Z,), (PsdSpec.white(0.1, 40.0),), np.eye(1))
    with pytest.raises(SymmetryViolation):
        control_matrix(cache, QUBIT, model)


def test_global_noise_has_no_ladder_entries():
    # one shared process drives every site, so only the channel sum J_z matters
    basis, cache, model = tfim_setup(2, "global")
    cm = control_matrix(cache, basis, model)
    ladder = basis.indices("ladder")
    assert np.abs(cm.r.sum(axis=1)[:, ladder]).max() < 1e-12
    assert np.abs(cm.rbar.sum(axis=1)[:, ladder]).max() < 1e-12
    ff = filter_functions(cm, model, n_omega=200)
    assert np.abs(ff.psi[np.ix_(ladder, ladder)]).max() == 0.0


def test_local_noise_stays_in_its_classes(tfim3_basis):
    h0 = tfim_hamiltonian(TfimConfig(n=3))
    sched = Schedule.constant(h0, 1.0, 1.0 / 200, symmetry=build_j_squared(3))
    cache, _ = ideal_propagate(sched, np.eye(8) / 8)
    model = build_dephasing(3, "local", PsdSpec.white(0.1, 200.0))
    cm = control_matrix(cache, tfim3_basis, model, square=True)
    report = block_structure_report(cm, tfim3_basis)
    assert report["noise_ok"] and report["square_ok"]
    assert report["orthogonality_error"] < 1e-10


def test_zero_noise_gives_zero_coherences():
    cache, rho_t, model = qubit_setup(PsdSpec.white(0.0, 40.0))
    cp = coherence_params(control_matrix(cache, QUBIT, model), model)
    assert not np.any(cp.chi1) and not np.any(cp.chi2)
    c = assemble_cumulant(cp.chi1, cp.chi2, QUBIT)
    assert np.allclose(predict_average_state(c, rho_t), rho_t)


def test_qubit_white_noise_single_entry():
    s0 = 0.05
    cache, rho_t, model = qubit_setup(PsdSpec.white(s0, 40.0))
    cp = coherence_params(control_matrix(cache, QUBIT, model), model)
    assert np.count_nonzero(cp.chi1) == 1
    assert not np.any(cp.chi2)
    # chi1 = -2 * int_{t2<t1} C = -S0 T for Z = sqrt2 * generator
    assert cp.chi1[0, 0] == pytest.approx(-s0 * 1.0, rel=0.02)
    rho = predict_average_state(assemble_cumulant(cp.chi1, cp.chi2, QUBIT), rho_t)
    assert rho[0, 1].real == pytest.approx(0.5 * np.exp(-2 * s0), rel=0.01)


def test_nyquist_guard_in_coherence_params():
    cache, _, model = qubit_setup(PsdSpec.white(0.1, 200.0), dt=0.02)
    with pytest.raises(NyquistError):
        coherence_params(control_matrix(cache, QUBIT, model), model)


def test_time_and_frequency_routes_agree_for_lorentzian():
    basis, cache, model = tfim_setup(2, "local")
    cm = control_matrix(cache, basis, model)
    cp = coherence_params(cm, model, kernel="quadrature")
    ff = filter_functions(cm, model, n_omega=6000)
    scale = np.abs(cp.chi1).max()
    assert np.abs(ff.chi1 - cp.chi1).max() < 0.01 * scale
    assert np.abs(ff.chi2 - cp.chi2).max() < 0.01 * scale
    assert np.all(ff.first_diagonal() >= 0)


def test_trapezoid_and_step_quadratures_agree():
    basis, cache, model = tfim_setup(2, "local")
    cm = control_matrix(cache, basis, model)
    step = coherence_params(cm, model, "step")
    trap = coherence_params(cm, model, "trapezoid")
    assert np.abs(step.chi1 - trap.chi1).max() < 0.02 * np.abs(step.chi1).max()
    with pytest.raises(ValueError):
        coherence_params(cm, model, "simpson")


def test_preserving_noise_cumulant_is_block_diagonal():
    basis, cache, model = tfim_setup(3, "global")
    cp = coherence_params(control_matrix(cache, basis, model), model)
    c = assemble_cumulant(cp.chi1, cp.chi2, basis)
    report = structure_check(c, "preserving")
    assert report.ok, report.residual
    blocks = chi_blocks(cp.chi1, cp.chi2, basis)
    assert all("ladder" not in key for key in blocks)


def test_breaking_noise_keeps_sector_states_in_place():
    basis, cache, model = tfim_setup(3, "local")
    cp = coherence_params(control_matrix(cache, basis, model), model)
    c = assemble_cumulant(cp.chi1, cp.chi2, basis)
    spec = basis.spectrum
    mixed = spec.projector(1) / 4
    report = structure_check(c, "breaking", sector=1, states=[mixed])
    assert report.ok, report.details
    assert "within_to_other_within" in report.details
    with pytest.raises(ValueError):
        structure_check(c, "breaking")
    assert not structure_check(c, "preserving").ok


def test_bounds_vanish_without_noise():
    basis, cache, model = tfim_setup(2, "local", psd=PsdSpec.lorentzian(0.0, 0.5, 60.0))
    cm = control_matrix(cache, basis, model)
    cp = coherence_params(cm, model)
    ff = filter_functions(cm, model, n_omega=200)
    c = assemble_cumulant(cp.chi1, cp.chi2, basis)
    rho = basis.spectrum.projector(1) / 3
    rep = distance_and_bounds(c, rho, ff, model, sector=1, duration=1.0)
    assert rep.distance == 0.0 and rep.bound_total == 0.0 and rep.white_bound == 0.0
    assert rep.ordered()
    assert rep.n_q == 6


def test_bounds_are_ordered_for_local_noise():
    basis, cache, model = tfim_setup(2, "local")
    cm = control_matrix(cache, basis, model)
    cp = coherence_params(cm, model)
    ff = filter_functions(cm, model, n_omega=2000)
    c = assemble_cumulant(cp.chi1, cp.chi2, basis)
    _, rho_t = ideal_propagate(Schedule.constant(tfim_hamiltonian(TfimConfig(n=2)), 1.0, 0.02),
                               basis.spectrum.projector(1) / 3)
    rep = distance_and_bounds(c, rho_t, ff, model, sector=1, duration=1.0)
    assert 0 < rep.distance <= rep.bound_total <= rep.white_bound
    assert rep.psi_nonsymmetric > 0


def test_steady_state_for_dephased_qubit():
    chi1 = np.zeros((3, 3))
    chi1[0, 0] = -0.5
    c = assemble_cumulant(chi1, np.zeros((3, 3)), QUBIT)
    up = np.diag([1.0, 0.0]).astype(complex)
    rep = steady_state(c, sector=QUBIT.spectrum.sector_of(1.0), noise_class="preserving", rho_t=PLUS)
    # populations survive, coherences decay
    assert np.allclose(rep.state, np.eye(2) / 2, atol=1e-10)
    assert rep.kernel_dim == 2
    assert rep.distance_to_predicted == pytest.approx(0.5, abs=1e-9)
    assert np.allclose(steady_state(c, 1, "preserving", rho_t=up).extrapolated, up, atol=1e-10)


def test_steady_state_without_noise_returns_input():
    c = assemble_cumulant(np.zeros((3, 3)), np.zeros((3, 3)), QUBIT)
    rep = steady_state(c, 0, "breaking", rho_t=PLUS)
    assert np.allclose(rep.state, PLUS)
    assert rep.gap == 0.0
    with pytest.raises(ValueError):
        steady_state(c, 0, "other")


def test_predict_first_order_matches_linear_term():
    chi1 = np.zeros((3, 3))
    chi1[0, 0] = -0.01
    c = assemble_cumulant(chi1, np.zeros((3, 3)), QUBIT)
    first = predict_average_state(c, PLUS, order="first")
    assert first[0, 1].real == pytest.approx(0.5 * (1 - 0.02))
    with pytest.raises(ValueError):
        predict_average_state(c, PLUS, order="third")


def random_lambda(seed, dim, rank):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(dim, rank))
    a = rng.normal(size=(dim, dim))
    return v @ v.T + 0.5 * (a - a.T)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 4))
def test_psd_lambda_gives_dissipative_cumulant(seed, rank):
    basis = build_qbasis(sector_decompose(build_j_squared(2)))
    c = cumulant_from_lambda(random_lambda(seed, 15, rank), basis)
    rep = c.spectrum_report()
    assert rep["sym_nsd"]
    assert rep["identity_image_norm"] < 1e-12 * max(1.0, c.norm())
    assert rep["identity_row_norm"] < 1e-12 * max(1.0, c.norm())
    assert rep["asym_imaginary"]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_cumulant_preserves_hermiticity_and_trace(seed):
    basis = build_qbasis(sector_decompose(build_j_squared(2)))
    c = cumulant_from_lambda(random_lambda(seed, 15, 2), basis)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    out = c.apply(rho)
    assert abs(np.trace(out)) < 1e-12 * max(1.0, c.norm())
    assert np.allclose(out, out.conj().T)


def test_dephasing_models():
    local = build_dephasing(3, "local", PsdSpec.white(1.0, 10.0))
    shared = build_dephasing(3, "global", PsdSpec.white(1.0, 10.0))
    assert np.allclose(local.operators[2], embed(SIGMA_Z, 2, 3))
    assert np.allclose(local.correlation, np.eye(3))
    assert np.allclose(shared.correlation, np.ones((3, 3)))
