import json
import math

import numpy as np
import pytest
import scipy.linalg
from conftest import random_hermitian, random_unitary
from hypothesis import given, settings
from hypothesis import strategies as st

from seadyn.operators import (
    DensityState,
    DimensionError,
    HermiticityError,
    PositivityError,
    TraceError,
    build_selfadjoint_basis,
    hermitian_part,
    hs_inner,
    hs_norm,
    matrix_exp_hermitian,
    matrix_log,
    operator_from_json,
    operator_to_json,
    trace_distance,
    validate_hermitian,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


class TestHsInner:
    def test_identity_pair(self):
        assert hs_inner(np.eye(2), np.eye(2)) == pytest.approx(2.0, abs=1e-15)

    def test_orthogonal_paulis(self):
        assert hs_inner(SX, SZ) == pytest.approx(0.0, abs=1e-15)

    def test_diagonal_product(self):
        a = np.diag([0.9, 0.1])
        b = np.diag([0.0, 1.0])
        assert hs_inner(a, b) == pytest.approx(0.1, abs=1e-15)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            hs_inner(np.eye(2), np.eye(3))

    def test_imaginary_residue_rejected(self):
        # clearly non-Hermitian pair with a complex trace
        a = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(HermiticityError):
            hs_inner(a, 1j * a.T)


class TestSelfAdjointBasis:
    def test_n1_single_projector(self):
        basis = build_selfadjoint_basis(1)
        assert len(basis) == 1
        np.testing.assert_allclose(basis.elements[0], [[1.0]], atol=1e-15)

    def test_n2_canonical_elements(self):
        basis = build_selfadjoint_basis(2)
        s = 1 / math.sqrt(2)
        expected = [
            np.diag([1.0, 0.0]),
            np.diag([0.0, 1.0]),
            s * SX,
            np.array([[0, 1j], [-1j, 0]]) * s,
        ]
        assert len(basis) == 4
        for got, want in zip(basis.elements, expected):
            np.testing.assert_allclose(got, want, atol=1e-15)

    def test_n3_gram_is_identity(self):
        # independent oracle: explicit 9x9 Gram via plain trace loops
        basis = build_selfadjoint_basis(3)
        gram = np.array([
            [np.trace(a @ b).real for b in basis.elements] for a in basis.elements
        ])
        np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)
        np.testing.assert_allclose(basis.gram, np.eye(9), atol=1e-12)
        assert basis.gram_condition == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_orthonormality_up_to_n6(self, n):
        basis = build_selfadjoint_basis(n)
        flat = basis.elements.reshape(n * n, n * n)
        gram = (flat.conj() @ flat.T).real
        np.testing.assert_allclose(gram, np.eye(n * n), atol=1e-12)
        for e in basis.elements:
            validate_hermitian(e)

    @given(n=st.integers(1, 6), seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None, derandomize=True)
    def test_completeness_on_random_hermitian(self, n, seed):
        basis = build_selfadjoint_basis(n)
        a = random_hermitian(n, np.random.default_rng(seed))
        rebuilt = basis.from_coords(basis.coords(a))
        assert hs_norm(rebuilt - a) <= 1e-10

    def test_invalid_dimension(self):
        with pytest.raises(ValueError):
            build_selfadjoint_basis(0)


class TestMatrixLog:
    def test_maximally_mixed(self):
        state = DensityState.from_matrix(np.eye(2) / 2)
        out, clamped = matrix_log(state)
        np.testing.assert_allclose(out, -math.log(2) * np.eye(2), atol=1e-12)
        assert clamped == 0

    def test_diagonal_state(self):
        out, _ = matrix_log(np.diag([0.9, 0.1]).astype(complex))
        np.testing.assert_allclose(out, np.diag([math.log(0.9), math.log(0.1)]), atol=1e-12)

    def test_coherent_state_closed_form_eigenvalues(self):
        # 2x2 closed form: eigenvalues 0.5 +- sqrt(0.16 + 0.04)
        rho = np.array([[0.9, 0.2], [0.2, 0.1]], dtype=complex)
        lam_hi = 0.5 + math.sqrt(0.2)
        lam_lo = 0.5 - math.sqrt(0.2)
        out, clamped = matrix_log(rho)
        got = np.linalg.eigvalsh(out)
        np.testing.assert_allclose(got, [math.log(lam_lo), math.log(lam_hi)], atol=1e-12)
        assert clamped == 0

    def test_clamp_count_reported(self):
        out, clamped = matrix_log(np.diag([1.0, 0.0]).astype(complex), 1e-12)
        assert clamped == 1
        assert out[1, 1] == pytest.approx(math.log(1e-12))

    def test_non_psd_rejected(self):
        with pytest.raises(PositivityError):
            matrix_log(np.diag([1.1, -0.1]).astype(complex))

    def test_invalid_floor(self):
        with pytest.raises(ValueError):
            matrix_log(np.eye(2) / 2, 0.0)


class TestMatrixExp:
    def test_zero_matrix(self):
        np.testing.assert_allclose(matrix_exp_hermitian(np.zeros((3, 3))), np.eye(3), atol=1e-14)

    def test_diagonal(self):
        out = matrix_exp_hermitian(np.diag([1.0, 2.0]))
        np.testing.assert_allclose(out, np.diag([math.e, math.e**2]), rtol=1e-14)

    def test_pauli_hyperbolic_identity(self):
        t = 0.3
        expected = math.cosh(t) * np.eye(2) + math.sinh(t) * SX
        np.testing.assert_allclose(matrix_exp_hermitian(t * SX), expected, atol=1e-14)

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None, derandomize=True)
    def test_log_exp_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        w = rng.random(4) + 1e-2
        w /= w.sum()
        u = random_unitary(4, rng)
        rho = hermitian_part((u * w) @ u.conj().T)
        logm, _ = matrix_log(rho)
        assert hs_norm(matrix_exp_hermitian(logm) - rho) <= 1e-9

    def test_unitary_covariance_of_log(self):
        rng = np.random.default_rng(7)
        rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
        u = random_unitary(3, rng)
        direct, _ = matrix_log(hermitian_part(u @ rho @ u.conj().T))
        conjugated = u @ matrix_log(rho)[0] @ u.conj().T
        assert hs_norm(direct - conjugated) <= 1e-9

    def test_against_scipy(self):
        rng = np.random.default_rng(11)
        a = random_hermitian(4, rng)
        np.testing.assert_allclose(matrix_exp_hermitian(a), scipy.linalg.expm(a), atol=1e-10)


class TestDensityState:
    def test_valid_construction_caches_spectrum(self):
        state = DensityState.from_matrix(np.diag([0.7, 0.3]).astype(complex))
        rebuilt = (state.eigenvectors * state.eigenvalues) @ state.eigenvectors.conj().T
        assert hs_norm(rebuilt - state.matrix) <= 1e-10

    def test_trace_violation(self):
        with pytest.raises(TraceError):
            DensityState.from_matrix(np.diag([0.7, 0.4]))

    def test_negative_eigenvalue(self):
        with pytest.raises(PositivityError):
            DensityState.from_matrix(np.diag([1.2, -0.2]))

    def test_non_hermitian(self):
        with pytest.raises(HermiticityError):
            DensityState.from_matrix(np.array([[0.5, 0.1], [0.4, 0.5]]))

    def test_immutability(self):
        state = DensityState.from_matrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            state.matrix[0, 0] = 9.0


class TestSerialization:
    def test_round_trip(self):
        a = np.array([[1.0, 0.5 - 0.25j], [0.5 + 0.25j, -2.0]])
        doc = json.loads(json.dumps(operator_to_json(a)))
        np.testing.assert_allclose(operator_from_json(doc), a, atol=1e-15)

    def test_im_block_optional(self):
        got = operator_from_json({"dim": 2, "re": [[1, 0], [0, 2]]})
        np.testing.assert_allclose(got, np.diag([1.0, 2.0]), atol=1e-15)

    def test_hermiticity_revalidated(self):
        with pytest.raises(HermiticityError):
            operator_from_json({"dim": 2, "re": [[0, 1], [0, 0]]})

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            operator_from_json({"dim": 3, "re": [[0, 0], [0, 0]]})


def test_trace_distance_of_orthogonal_pure_states():
    assert trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(1.0)
