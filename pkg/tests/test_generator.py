import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import random_hermitian

from seadyn.generator import (
    apply_generator,
    build_constraint_set,
    build_projector_generator,
    random_property_checks,
    verify_generator,
)
from seadyn.operators import HermiticityError, hs_inner, hs_norm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


class TestConstraintSet:
    def test_hand_gram_schmidt_2x2(self):
        # oracle by hand: e1 = I/sqrt(2), e2 = sqrt(2) * (diag(0,1) - I/2)
        cs = build_constraint_set(2, [I2, np.diag([0.0, 1.0])])
        assert cs.rank == 2
        np.testing.assert_allclose(cs.ortho[0], I2 / math.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(
            cs.ortho[1], math.sqrt(2) * (np.diag([0.0, 1.0]) - I2 / 2), atol=1e-12
        )

    def test_dependent_inputs_collapse(self):
        cs = build_constraint_set(2, [I2, 3.0 * I2])
        assert cs.rank == 1

    def test_vandermonde_independence(self):
        d = np.diag([0.0, 1.0, 2.0])
        cs = build_constraint_set(3, [np.eye(3), d, d @ d])
        assert cs.rank == 3

    def test_identity_inserted_when_absent(self):
        cs = build_constraint_set(2, [SZ])
        np.testing.assert_allclose(cs.raw[0], I2, atol=1e-15)
        assert cs.rank == 2

    def test_orthonormality_and_span(self):
        rng = np.random.default_rng(3)
        ops = [random_hermitian(3, rng) for _ in range(3)]
        cs = build_constraint_set(3, ops)
        for i, a in enumerate(cs.ortho):
            for j, b in enumerate(cs.ortho):
                assert hs_inner(a, b) == pytest.approx(float(i == j), abs=1e-10)
        for raw in cs.raw:
            assert hs_norm(raw - cs.project_span(raw)) <= 1e-9

    def test_non_hermitian_rejected(self):
        with pytest.raises(HermiticityError):
            build_constraint_set(2, [np.array([[0, 1], [0, 0]])])


class TestProjectorGenerator:
    def test_full_span_gives_zero_generator(self):
        rng = np.random.default_rng(5)
        ops = [random_hermitian(2, rng) for _ in range(8)]
        cs = build_constraint_set(2, ops)
        assert cs.rank == 4
        gen = build_projector_generator(cs, 1.0)
        np.testing.assert_allclose(gen.matrix_rep, np.zeros((4, 4)), atol=1e-12)

    def test_pauli_projector_action(self):
        gen = build_projector_generator(build_constraint_set(2, [I2, SZ]), 1.0)
        np.testing.assert_allclose(apply_generator(gen, SX), SX, atol=1e-12)
        np.testing.assert_allclose(apply_generator(gen, SZ), np.zeros((2, 2)), atol=1e-12)
        np.testing.assert_allclose(apply_generator(gen, I2), np.zeros((2, 2)), atol=1e-12)

    def test_tau_scaling(self):
        gen = build_projector_generator(build_constraint_set(2, [I2, SZ]), 2.0)
        np.testing.assert_allclose(apply_generator(gen, SX), SX / 2, atol=1e-12)

    def test_linearity_on_mixed_operand(self):
        gen = build_projector_generator(build_constraint_set(2, [I2, SZ]), 1.0)
        np.testing.assert_allclose(apply_generator(gen, SX + SZ), SX, atol=1e-12)

    def test_hamiltonian_annihilated(self):
        rng = np.random.default_rng(9)
        h = random_hermitian(3, rng)
        gen = build_projector_generator(build_constraint_set(3, [h]), 0.7)
        assert hs_norm(apply_generator(gen, h)) <= 1e-10
        assert hs_norm(apply_generator(gen, np.eye(3))) <= 1e-10

    def test_invalid_tau(self):
        with pytest.raises(ValueError):
            build_projector_generator(build_constraint_set(2, [SZ]), 0.0)

    def test_disabled_dissipator_is_zero_map(self):
        gen = build_projector_generator(build_constraint_set(2, [SZ]), math.inf)
        np.testing.assert_allclose(gen.matrix_rep, np.zeros((4, 4)), atol=1e-15)
        assert gen.rate == 0.0


class TestVerifyGenerator:
    def test_projector_passes(self):
        gen = build_projector_generator(build_constraint_set(2, [I2, SZ]), 1.0)
        report = verify_generator(gen)
        assert report.passed
        assert report.hermiticity_violation <= 1e-12
        assert report.min_eigenvalue >= -1e-12
        assert report.max_constraint_residual <= 1e-12

    def test_negated_matrix_fails_psd(self):
        gen = build_projector_generator(build_constraint_set(2, [I2, SZ]), 1.0)
        tampered = replace(gen, matrix_rep=-gen.matrix_rep)
        report = verify_generator(tampered)
        assert not report.passed
        assert report.min_eigenvalue == pytest.approx(-1.0, abs=1e-9)

    def test_asymmetric_entry_fails_hermiticity(self):
        gen = build_projector_generator(build_constraint_set(2, [I2, SZ]), 1.0)
        m = np.array(gen.matrix_rep)
        m[0, 1] += 1e-6
        report = verify_generator(replace(gen, matrix_rep=m))
        assert not report.passed
        assert report.hermiticity_violation == pytest.approx(1e-6, rel=1e-6)


@pytest.fixture(scope="module")
def generators():
    rng = np.random.default_rng(42)
    gens = []
    for n, n_extra, tau in [(2, 0, 1.0), (3, 1, 0.5), (4, 2, 2.0)]:
        ops = [random_hermitian(n, rng) for _ in range(1 + n_extra)]
        gens.append(build_projector_generator(build_constraint_set(n, ops), tau))
    return gens


class TestProjectorProperties:
    def test_idempotence(self, generators):
        rng = np.random.default_rng(1)
        for gen in generators:
            a = random_hermitian(gen.dim, rng)
            la = apply_generator(gen, a)
            assert hs_norm(apply_generator(gen, gen.tau * la) - la) <= 1e-9

    def test_orthogonality_split(self, generators):
        rng = np.random.default_rng(2)
        for gen in generators:
            a = random_hermitian(gen.dim, rng)
            split = gen.tau * apply_generator(gen, a) + gen.constraints.project_span(a)
            assert hs_norm(a - split) <= 1e-9

    def test_spectrum_is_zero_and_rate(self, generators):
        for gen in generators:
            eigs = np.linalg.eigvalsh(gen.matrix_rep)
            rate = 1.0 / gen.tau
            dev = np.minimum(np.abs(eigs), np.abs(eigs - rate))
            assert float(dev.max()) <= 1e-9
            n_zero = int(np.count_nonzero(eigs < rate / 2))
            assert n_zero == gen.constraints.rank

    def test_kernel_exactness(self, generators):
        rng = np.random.default_rng(3)
        for gen in generators:
            for _ in range(5):
                la = apply_generator(gen, random_hermitian(gen.dim, rng))
                for c in gen.constraints.raw:
                    assert abs(hs_inner(c, la)) <= 1e-10

    def test_randomized_check_helper(self, generators):
        for gen in generators:
            result = random_property_checks(gen, samples=10, seed=0)
            assert result["passed"]
