"""Heisenberg transforms of observables and the Onsager coefficient matrix.

For a symmetric positive-semidefinite generator and any self-adjoint
operator basis, the coefficient matrix Tr(chi_a^H L chi_b^H) built from the
Heisenberg-transformed basis is real and symmetric at every time; its
eigenvalue multiset is time independent because unitary conjugation acts
orthogonally on the real coordinate space of Hermitian operators.
"""

from dataclasses import dataclass

import numpy as np

from .generator import DissipativeGenerator
from .operators import (
    DimensionError,
    HermiticityError,
    SelfAdjointBasis,
    as_operator,
    hermitian_part,
    validate_hermitian,
)

RECIPROCITY_TOL = 1e-10
IMAG_ENTRY_TOL = 1e-12
GROSS_ASYMMETRY_TOL = 1e-8


def hamiltonian_propagator(hamiltonian, t: float, hbar: float = 1.0) -> np.ndarray:
    """Unitary exp(i H t / hbar) via the eigendecomposition of H."""
    h = validate_hermitian(hamiltonian, name="hamiltonian")
    w, v = np.linalg.eigh(h)
    phases = np.exp(1j * w * (t / hbar))
    return (v * phases) @ v.conj().T


def heisenberg_transform(chi, hamiltonian, t: float, hbar: float = 1.0) -> np.ndarray:
    """Conjugation exp(i H t / hbar) chi exp(-i H t / hbar); norm preserving."""
    op = validate_hermitian(chi, name="observable")
    h = as_operator(hamiltonian)
    if op.shape != h.shape:
        raise DimensionError(f"dimension mismatch: {op.shape[0]} vs {h.shape[0]}")
    u = hamiltonian_propagator(h, t, hbar)
    return hermitian_part(u @ op @ u.conj().T)


@dataclass(frozen=True)
class OnsagerMatrix:
    """Real symmetric coefficient matrix over a Heisenberg-transformed basis."""

    t: float
    basis: SelfAdjointBasis
    entries: np.ndarray
    max_imag_residue: float


@dataclass(frozen=True)
class ReciprocityReport:
    max_asymmetry: float
    max_imag_residue: float
    min_eigenvalue: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "max_asymmetry": self.max_asymmetry,
            "max_imag_residue": self.max_imag_residue,
            "min_eigenvalue": self.min_eigenvalue,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def onsager_matrix(gen: DissipativeGenerator, basis: SelfAdjointBasis,
                   hamiltonian, t: float, hbar: float = 1.0) -> OnsagerMatrix:
    """Coefficients Tr(chi_a^H L chi_b^H) over the transformed basis.

    Entries are computed as complex traces, the imaginary residue is
    recorded and checked before it is discarded, and gross asymmetry beyond
    GROSS_ASYMMETRY_TOL is escalated because it signals a defective
    generator rather than a diagnostic to report.
    """
    h = validate_hermitian(hamiltonian, name="hamiltonian")
    if basis.dim != gen.dim or h.shape[0] != gen.dim:
        raise DimensionError(
            f"inconsistent dimensions: generator {gen.dim}, basis {basis.dim}, "
            f"hamiltonian {h.shape[0]}"
        )
    u = hamiltonian_propagator(h, t, hbar)
    chi = np.einsum("ab,kbc,dc->kad", u, basis.elements, u.conj())
    # the generator acts through its own basis; chi may come from another one
    coords = np.einsum("lij,kji->kl", gen.basis.elements, chi)
    coord_resid = float(np.max(np.abs(coords.imag)))
    if coord_resid > IMAG_ENTRY_TOL:
        raise HermiticityError(
            f"transformed basis coordinates carry imaginary residue {coord_resid:.3e}"
        )
    images = np.einsum("kl,lij->kij", coords.real @ gen.matrix_rep.T, gen.basis.elements)
    entries_c = np.einsum("aij,bji->ab", chi, images)
    imag_resid = float(np.max(np.abs(entries_c.imag)))
    if imag_resid > IMAG_ENTRY_TOL:
        raise HermiticityError(
            f"coefficient matrix has imaginary residue {imag_resid:.3e} beyond {IMAG_ENTRY_TOL:.1e}"
        )
    entries = np.ascontiguousarray(entries_c.real)
    asym = float(np.max(np.abs(entries - entries.T)))
    if asym > GROSS_ASYMMETRY_TOL:
        raise RuntimeError(
            f"coefficient matrix asymmetry {asym:.3e} exceeds {GROSS_ASYMMETRY_TOL:.1e}; "
            "the generator is defective"
        )
    entries.setflags(write=False)
    return OnsagerMatrix(float(t), basis, entries, imag_resid)


def check_reciprocity(m: OnsagerMatrix, tol: float = RECIPROCITY_TOL) -> ReciprocityReport:
    """Diagnose symmetry, reality, and positivity of a coefficient matrix."""
    entries = m.entries
    asym = float(np.max(np.abs(entries - entries.T)))
    min_eig = float(np.linalg.eigvalsh((entries + entries.T) / 2.0)[0])
    passed = asym <= tol and m.max_imag_residue <= tol and min_eig >= -tol
    return ReciprocityReport(asym, m.max_imag_residue, min_eig, tol, passed)
