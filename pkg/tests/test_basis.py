import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from symnoise.basis import (AmbiguousClusteringWarning, block_populations, build_qbasis, centralizer_dims,
                            classify_operator, qbasis_from_json, qbasis_to_json, sector_decompose)
from symnoise.operators import SIGMA_Z, DimensionError, NotHermitianError, commutator, embed
from symnoise.scenarios import build_j_squared


def assert_orthonormal(basis):
    gens = basis.generators
    gram = np.einsum("iab,jab->ij", gens.conj(), gens)
    assert np.allclose(gram, np.eye(len(gens)), atol=1e-12)
    for g in gens:
        assert np.allclose(g, g.conj().T)
        assert abs(np.trace(g)) < 1e-12


def test_j_squared_spectrum_two_qubits():
    spec = sector_decompose(build_j_squared(2))
    assert np.allclose(spec.eigenvalues, [0.0, 2.0])
    assert list(spec.multiplicities) == [1, 3]


def test_j_squared_spectrum_three_qubits():
    spec = sector_decompose(build_j_squared(3))
    assert np.allclose(spec.eigenvalues, [0.75, 3.75])
    assert list(spec.multiplicities) == [4, 4]


def test_j_squared_spectrum_four_qubits():
    spec = sector_decompose(build_j_squared(4))
    assert np.allclose(spec.eigenvalues, [0.0, 2.0, 6.0])
    assert list(spec.multiplicities) == [2, 9, 5]


def test_sector_decompose_rejects_bad_input():
    with pytest.raises(DimensionError):
        sector_decompose(np.zeros((2, 3)))
    with pytest.raises(NotHermitianError):
        sector_decompose(np.array([[0, 1], [0, 0]]))


def test_ambiguous_gap_warns():
    q = np.diag([0.0, 1e-8, 1.0])
    with pytest.warns(AmbiguousClusteringWarning):
        sector_decompose(q, grouping_tol=1e-8)


def test_clear_gaps_do_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sector_decompose(build_j_squared(3))


def test_projectors_resolve_identity():
    spec = sector_decompose(build_j_squared(3))
    total = sum(spec.projector(s) for s in range(spec.n_sectors))
    assert np.allclose(total, np.eye(8))
    for s in range(spec.n_sectors):
        assert np.allclose(spec.Q @ spec.projector(s), spec.eigenvalues[s] * spec.projector(s))


def test_refine_diagonalizes_commuting_operator():
    h = sum(embed(SIGMA_Z, i, 3) for i in range(3))
    spec = sector_decompose(build_j_squared(3), refine=h)
    h_eig = spec.to_eigenbasis(h)
    assert np.allclose(h_eig, np.diag(np.diag(h_eig)), atol=1e-12)


def test_two_qubit_basis_counts(tfim2_basis):
    assert len(tfim2_basis) == 15
    dims = centralizer_dims(tfim2_basis)
    assert dims.N_Q == 9
    assert dims.N_q == {0.0: 0, 2.0: 6}
    assert {k: v for k, v in dims.N_qq.items()} == {(0.0, 2.0): 6}


def test_three_qubit_basis_counts(tfim3_basis):
    assert len(tfim3_basis) == 63
    dims = centralizer_dims(tfim3_basis)
    assert dims.N_Q == 31
    assert dims.N_q == {0.75: 12, 3.75: 12}
    assert sum(dims.N_qq.values()) == 32
    assert len(tfim3_basis.indices("cartan")) == 7


def test_basis_orthonormal(tfim3_basis):
    assert_orthonormal(tfim3_basis)


def test_liouville_basis_starts_with_identity(tfim2_basis):
    assert np.allclose(tfim2_basis.liouville[0], np.eye(4) / 2)
    assert np.allclose(tfim2_basis.liouville[1:], tfim2_basis.generators)


def test_centralizer_generators_commute_with_q(tfim3_basis):
    q = tfim3_basis.spectrum.Q
    for i, lab in enumerate(tfim3_basis.labels):
        comm = np.abs(commutator(q, tfim3_basis.generators[i])).max()
        if lab.kind == "ladder":
            assert comm > 1e-3
        else:
            assert comm < 1e-12


def test_ladder_pairs_raise_between_sectors(tfim3_basis):
    spec = tfim3_basis.spectrum
    for ix, iy in tfim3_basis.ladder_pairs():
        lab = tfim3_basis.labels[ix]
        raising = (tfim3_basis.generators[ix] + 1j * tfim3_basis.generators[iy]) / np.sqrt(2)
        src, dst = spec.projector(lab.sector), spec.projector(lab.target)
        assert np.allclose(dst @ raising @ src, raising, atol=1e-12)
        assert np.linalg.norm(raising) == pytest.approx(1.0)


def test_labels_render_as_names(tfim2_basis):
    names = {str(lab).split("(")[0] for lab in tfim2_basis.labels}
    assert names == {"Cartan", "Within", "Ladder"}
    assert "ladder(0->2)" in tfim2_basis.block_names()


def test_coefficients_reconstruct(tfim3_basis, rng):
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    a = a + a.conj().T
    coef = tfim3_basis.coefficients(a)
    assert coef.dtype == float
    assert np.allclose(tfim3_basis.reconstruct(coef, np.trace(a)), a)


def test_global_dephasing_is_preserving(tfim3_basis):
    jz = sum(embed(SIGMA_Z, i, 3) for i in range(3)) / 2
    report = classify_operator(jz, tfim3_basis)
    assert report.preserving
    assert report.ladder_weight < 1e-12


def test_local_dephasing_is_breaking(tfim3_basis):
    report = classify_operator(embed(SIGMA_Z, 0, 3), tfim3_basis)
    assert not report.preserving
    assert report.ladder_weight > 0.5
    total = sum(w ** 2 for w in report.kind_weights.values())
    assert total == pytest.approx(report.norm ** 2)


def test_block_populations_of_mixed_state(tfim3_basis):
    pops = block_populations(np.eye(8) / 8, tfim3_basis.spectrum)
    assert np.allclose(pops.populations, [0.5, 0.5])
    assert pops.coherence_max[(0, 1)] < 1e-14
    with pytest.raises(ValueError):
        block_populations(np.eye(8), tfim3_basis.spectrum)


def test_json_round_trip(tfim2_basis):
    restored = qbasis_from_json(qbasis_to_json(tfim2_basis))
    assert restored.labels == tfim2_basis.labels
    assert np.allclose(restored.generators, tfim2_basis.generators)
    assert np.allclose(restored.spectrum.eigenvalues, tfim2_basis.spectrum.eigenvalues)


def test_basis_build_is_fast():
    start = time.perf_counter()
    for n in (2, 3, 4):
        build_qbasis(sector_decompose(build_j_squared(n)))
    assert time.perf_counter() - start < 1.0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=4), st.integers(0, 10 ** 6))
def test_random_q_with_designed_degeneracy(mults, seed):
    dim = sum(mults)
    if dim < 2:
        return
    values = np.repeat(np.arange(len(mults), dtype=float) * 1.5 - 1.0, mults)
    u = unitary_group.rvs(dim, random_state=seed) if dim > 1 else np.eye(1)
    q = u @ np.diag(values) @ u.conj().T
    spec = sector_decompose(q)
    assert list(spec.multiplicities) == mults
    basis = build_qbasis(spec)
    assert len(basis) == dim ** 2 - 1
    assert_orthonormal(basis)
    dims = centralizer_dims(basis)
    assert dims.N_Q == sum(m * m for m in mults) - 1
    assert sum(dims.N_qq.values()) == dim ** 2 - sum(m * m for m in mults)
    for i, lab in enumerate(basis.labels):
        comm = np.abs(commutator(q, basis.generators[i])).max()
        assert (comm > 1e-6) == (lab.kind == "ladder")
