"""Constrained dissipative superoperator built as a Hilbert-Schmidt projector.

The dissipator is L = (1/tau) * P_perp, where P_perp projects operator space
onto the orthogonal complement of the span of the conserved observables
{I, H, C_1, ...}. This is the minimal construction that is symmetric,
positive semidefinite, and annihilates every constraint, so trace and all
constrained expectations are conserved while entropy can only be produced.

Sign convention: the generator enters the master equation as -L(log rho),
which makes the entropy production <log rho, L log rho> nonnegative for a
positive-semidefinite L. The convention is recorded on the generator.
"""

from dataclasses import dataclass
from math import isinf

import numpy as np

from .operators import (
    DimensionError,
    SelfAdjointBasis,
    as_operator,
    build_selfadjoint_basis,
    hs_inner,
    hs_norm,
    validate_hermitian,
)

RANK_TOL = 1e-10
VERIFY_TOL = 1e-10
SPECTRUM_TOL = 1e-9
SIGN_CONVENTION = "dissipator enters the master equation as -L(log rho)"


@dataclass(frozen=True)
class ConstraintSet:
    """Conserved observables with an orthonormalized internal representation.

    raw keeps the inputs in order with the identity always at position 0;
    ortho is the Hilbert-Schmidt orthonormal spanning collection obtained by
    modified Gram-Schmidt, with linearly dependent inputs dropped.
    """

    dim: int
    raw: tuple[np.ndarray, ...]
    ortho: tuple[np.ndarray, ...]

    @property
    def rank(self) -> int:
        return len(self.ortho)

    def project_span(self, a) -> np.ndarray:
        """Orthogonal projection of a Hermitian matrix onto the constraint span."""
        arr = as_operator(a)
        out = np.zeros_like(arr)
        for e in self.ortho:
            out = out + hs_inner(e, arr) * e
        return out

    def project_complement(self, a) -> np.ndarray:
        arr = as_operator(a)
        return arr - self.project_span(arr)


def build_constraint_set(dim: int, observables, rank_tol: float = RANK_TOL) -> ConstraintSet:
    """Validate, orthonormalize, and rank-reduce a list of conserved observables.

    The identity is inserted at position 0 when not already there. Modified
    Gram-Schmidt runs with a re-orthogonalization pass; residuals with
    Hilbert-Schmidt norm below rank_tol are dropped as dependent.
    """
    ops = []
    for i, obs in enumerate(observables):
        op = validate_hermitian(obs, name=f"constraint[{i}]")
        if op.shape[0] != dim:
            raise DimensionError(
                f"constraint[{i}] has dimension {op.shape[0]}, expected {dim}"
            )
        ops.append(op)
    eye = np.eye(dim, dtype=complex)
    if not ops or float(np.max(np.abs(ops[0] - eye))) > 1e-12:
        ops.insert(0, eye)
    ortho: list[np.ndarray] = []
    for op in ops:
        v = op.astype(complex)
        for _ in range(2):       # re-orthogonalization pass for near-dependent inputs
            for e in ortho:
                v = v - hs_inner(e, v) * e
        nrm = hs_norm(v)
        if nrm >= rank_tol:
            ortho.append(v / nrm)
    return ConstraintSet(dim, tuple(ops), tuple(ortho))


@dataclass(frozen=True)
class DissipativeGenerator:
    """Superoperator (1/tau) * P_perp with a cached matrix representation.

    matrix_rep is the real symmetric action matrix over the canonical
    self-adjoint basis; tau = inf represents a disabled dissipator (zero map).
    """

    dim: int
    tau: float
    constraints: ConstraintSet
    basis: SelfAdjointBasis
    matrix_rep: np.ndarray
    sign_convention: str = SIGN_CONVENTION

    @property
    def rate(self) -> float:
        """Relaxation rate 1/tau (0 for a disabled dissipator)."""
        return 0.0 if isinf(self.tau) else 1.0 / self.tau


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the structural checks on a dissipative generator."""

    hermiticity_violation: float
    min_eigenvalue: float
    max_constraint_residual: float
    spectrum_deviation: float
    tolerance: float
    spectrum_tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "hermiticity_violation": self.hermiticity_violation,
            "min_eigenvalue": self.min_eigenvalue,
            "max_constraint_residual": self.max_constraint_residual,
            "spectrum_deviation": self.spectrum_deviation,
            "tolerance": self.tolerance,
            "spectrum_tolerance": self.spectrum_tolerance,
            "passed": self.passed,
        }


def build_projector_generator(constraints: ConstraintSet, tau: float,
                              basis: SelfAdjointBasis | None = None) -> DissipativeGenerator:
    """Build L = (1/tau) * P_perp over the canonical self-adjoint basis.

    The invariants (symmetry, positive semidefiniteness, constraint
    annihilation) hold by construction; verification still runs and a failure
    raises rather than returning a defective generator.
    """
    if not tau > 0.0:
        raise ValueError(f"relaxation time tau must be positive, got {tau!r}")
    n = constraints.dim
    if basis is None:
        basis = build_selfadjoint_basis(n)
    elif basis.dim != n:
        raise DimensionError(f"basis dim {basis.dim} does not match constraints dim {n}")
    if constraints.ortho:
        b = np.stack([basis.coords(e) for e in constraints.ortho])
        proj = b.T @ b
    else:
        proj = np.zeros((n * n, n * n))
    rate = 0.0 if isinf(tau) else 1.0 / tau
    m = (np.eye(n * n) - proj) * rate
    m = np.ascontiguousarray((m + m.T) / 2.0)
    m.setflags(write=False)
    gen = DissipativeGenerator(n, float(tau), constraints, basis, m)
    report = verify_generator(gen)
    if not report.passed:
        raise RuntimeError(f"constructed generator failed verification: {report.as_dict()}")
    return gen


def apply_generator(gen: DissipativeGenerator, a) -> np.ndarray:
    """Image of a Hermitian matrix under the superoperator, via matrix_rep."""
    arr = as_operator(a)
    if arr.shape[0] != gen.dim:
        raise DimensionError(f"operand dimension {arr.shape[0]} does not match generator dim {gen.dim}")
    c = gen.basis.coords(arr)
    return gen.basis.from_coords(gen.matrix_rep @ c)


def verify_generator(gen: DissipativeGenerator, tolerance: float = VERIFY_TOL,
                     spectrum_tolerance: float = SPECTRUM_TOL) -> VerificationReport:
    """Check symmetry, positivity, constraint annihilation, and the spectrum.

    Failures are report entries, not faults. The spectrum of a projector
    generator must be {0, 1/tau} with the zero eigenvalue carrying the
    constraint rank.
    """
    m = gen.matrix_rep
    herm = float(np.max(np.abs(m - m.T)))
    eigs = np.linalg.eigvalsh((m + m.T) / 2.0)
    min_eig = float(eigs[0])
    rate = gen.rate
    spec_dev = float(np.max(np.minimum(np.abs(eigs), np.abs(eigs - rate))))
    resid = 0.0
    for c in gen.constraints.raw:
        resid = max(resid, hs_norm(apply_generator(gen, c)))
    passed = (
        herm <= tolerance
        and min_eig >= -tolerance
        and resid <= tolerance
        and spec_dev <= spectrum_tolerance
    )
    return VerificationReport(herm, min_eig, resid, spec_dev, tolerance,
                              spectrum_tolerance, passed)


def random_property_checks(gen: DissipativeGenerator, samples: int = 20,
                           seed: int = 0) -> dict:
    """Randomized structural checks on random Hermitian operands.

    Covers idempotence of tau * L, the orthogonal split a = tau*L(a) + P(a),
    and exactness of the constraint kernel. The idempotence and split checks
    are void for a disabled (tau = inf) dissipator and are reported as None.
    """
    rng = np.random.default_rng(seed)
    n = gen.dim
    finite = not isinf(gen.tau)
    max_idem = 0.0 if finite else None
    max_split = 0.0 if finite else None
    max_kernel = 0.0
    for _ in range(samples):
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        a = (g + g.conj().T) / 2.0
        la = apply_generator(gen, a)
        if finite:
            scaled = gen.tau * la
            max_idem = max(max_idem, hs_norm(apply_generator(gen, scaled) - la))
            max_split = max(max_split, hs_norm(a - scaled - gen.constraints.project_span(a)))
        for c in gen.constraints.raw:
            max_kernel = max(max_kernel, abs(hs_inner(c, la)))
    passed = max_kernel <= 1e-10
    if finite:
        passed = passed and max_idem <= 1e-9 and max_split <= 1e-9
    return {
        "seed": seed,
        "samples": samples,
        "max_idempotence_defect": max_idem,
        "max_split_defect": max_split,
        "max_kernel_overlap": max_kernel,
        "passed": passed,
    }
