"""Hermitian operator algebra and Hilbert-Schmidt geometry on dense matrices.

Operators are plain complex numpy arrays. This module supplies the trace
pairing <A, B> = Tr(A B) (real for Hermitian pairs), eigendecomposition-based
matrix log/exp, the canonical self-adjoint operator basis spanning the n^2
dimensional real vector space of Hermitian matrices, and validated container
types (density states, operator bases). Container types are immutable after
construction and safe to share between concurrent workers.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
IMAG_RESIDUE_TOL = 1e-12
DEFAULT_EIG_FLOOR = 1e-12


class DimensionError(ValueError):
    """Operands live on different Hilbert spaces or are not square."""


class HermiticityError(ValueError):
    """Matrix violates the Hermitian symmetry tolerance."""


class PositivityError(ValueError):
    """Matrix has an eigenvalue below the positive-semidefinite tolerance."""


class TraceError(ValueError):
    """Density matrix trace differs from 1 beyond tolerance."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def as_operator(a) -> np.ndarray:
    """Coerce input to a square complex matrix; no symmetry check."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionError(
            f"expected a square matrix of dimension >= 1, got shape {arr.shape}"
        )
    return arr


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Return (A + A^dagger) / 2."""
    return (a + a.conj().T) / 2.0


def validate_hermitian(a, tol: float = HERMITICITY_TOL, name: str = "operator") -> np.ndarray:
    """Validate per-entry Hermitian symmetry and return the matrix."""
    arr = as_operator(a)
    dev = float(np.max(np.abs(arr - arr.conj().T)))
    if dev > tol:
        raise HermiticityError(
            f"{name} deviates from Hermitian symmetry by {dev:.3e} (tol {tol:.1e})"
        )
    return arr


def hs_inner(a, b) -> float:
    """Hilbert-Schmidt pairing Tr(a b), real for a Hermitian pair.

    The imaginary residue must stay below IMAG_RESIDUE_TOL; it is checked and
    then discarded.
    """
    a = as_operator(a)
    b = as_operator(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    val = complex(np.einsum("ij,ji->", a, b))
    if abs(val.imag) > IMAG_RESIDUE_TOL:
        raise HermiticityError(
            f"trace pairing has imaginary residue {val.imag:.3e}; "
            "operands are not a Hermitian pair"
        )
    return float(val.real)


def hs_norm(a) -> float:
    """Frobenius norm, which is the Hilbert-Schmidt norm."""
    return float(np.linalg.norm(np.asarray(a)))


def trace_norm(a) -> float:
    """Trace norm of a Hermitian matrix: sum of absolute eigenvalues."""
    arr = as_operator(a)
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(arr)))))


def trace_distance(a, b) -> float:
    """Trace distance (1/2) * ||a - b||_1 between Hermitian matrices."""
    return 0.5 * trace_norm(as_operator(a) - as_operator(b))


@dataclass(frozen=True)
class DensityState:
    """Positive-semidefinite unit-trace Hermitian matrix with cached spectrum.

    The cached eigenvalues are ascending and the eigenvector columns match
    their order, so matrix functions of the state reuse one factorization.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, mat, *, herm_tol: float = HERMITICITY_TOL,
                    psd_tol: float = PSD_TOL, trace_tol: float = TRACE_TOL) -> "DensityState":
        arr = validate_hermitian(mat, herm_tol, name="density matrix")
        tr = float(np.trace(arr).real)
        if abs(tr - 1.0) > trace_tol:
            raise TraceError(
                f"density matrix trace {tr!r} differs from 1 by {abs(tr - 1.0):.3e} "
                f"(tol {trace_tol:.1e})"
            )
        eigvals, eigvecs = np.linalg.eigh(arr)
        if float(eigvals[0]) < -psd_tol:
            raise PositivityError(
                f"density matrix has eigenvalue {float(eigvals[0]):.3e} below -{psd_tol:.1e}"
            )
        return cls(_freeze(arr.copy()), _freeze(eigvals), _freeze(eigvecs))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])


@dataclass(frozen=True)
class SelfAdjointBasis:
    """Ordered basis of dim^2 Hermitian matrices with its real Gram matrix.

    The canonical construction is orthonormal (Gram = identity); the Gram
    matrix and its condition number are kept so non-orthogonal bases can be
    represented without an interface change.
    """

    dim: int
    elements: np.ndarray        # (dim^2, dim, dim) complex, each Hermitian
    gram: np.ndarray            # (dim^2, dim^2) real symmetric
    gram_condition: float

    def __len__(self) -> int:
        return self.elements.shape[0]

    def coords(self, a) -> np.ndarray:
        """Real coordinates of a Hermitian matrix in this (orthonormal) basis."""
        arr = as_operator(a)
        if arr.shape[0] != self.dim:
            raise DimensionError(f"dimension mismatch: {arr.shape[0]} vs basis dim {self.dim}")
        c = np.einsum("kij,ji->k", self.elements, arr)
        resid = float(np.max(np.abs(c.imag)))
        if resid > IMAG_RESIDUE_TOL:
            raise HermiticityError(
                f"coordinates carry imaginary residue {resid:.3e}; operand is not Hermitian"
            )
        return np.ascontiguousarray(c.real)

    def from_coords(self, c) -> np.ndarray:
        """Hermitian matrix with the given real coordinates."""
        vec = np.asarray(c, dtype=float)
        if vec.shape != (len(self),):
            raise DimensionError(f"expected {len(self)} coordinates, got shape {vec.shape}")
        return np.einsum("k,kij->ij", vec, self.elements)


def build_selfadjoint_basis(n: int) -> SelfAdjointBasis:
    """Canonical self-adjoint basis of the n x n operator space.

    Ordering: the n diagonal projectors first, then for every index pair
    a < b (lexicographic) the symmetric combination (E_ab + E_ba)/sqrt(2)
    followed by the antisymmetric one i(E_ab - E_ba)/sqrt(2). The result is
    orthonormal under hs_inner.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"basis dimension must be a positive integer, got {n!r}")
    n = int(n)
    elements = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for a in range(n):
        elements[k, a, a] = 1.0
        k += 1
    s = 1.0 / sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            elements[k, a, b] = s
            elements[k, b, a] = s
            k += 1
            elements[k, a, b] = 1j * s
            elements[k, b, a] = -1j * s
            k += 1
    flat = elements.reshape(n * n, n * n)
    gram_c = flat.conj() @ flat.T
    resid = float(np.max(np.abs(gram_c.imag)))
    if resid > IMAG_RESIDUE_TOL:
        raise HermiticityError(f"basis Gram matrix has imaginary residue {resid:.3e}")
    gram = np.ascontiguousarray(gram_c.real)
    cond = float(np.linalg.cond(gram))
    return SelfAdjointBasis(n, _freeze(elements), _freeze(gram), cond)


def matrix_log(rho, eig_floor: float = DEFAULT_EIG_FLOOR, *,
               psd_tol: float = PSD_TOL) -> tuple[np.ndarray, int]:
    """Eigendecomposition-based log of a density state, with eigenvalue floor.

    Eigenvalues below eig_floor are clamped up to eig_floor before taking the
    log, which keeps near-singular states usable; the number of clamped
    eigenvalues is returned alongside the log so callers can tell when a
    result is regularization-dominated.
    """
    if eig_floor <= 0.0:
        raise ValueError(f"eig_floor must be positive, got {eig_floor!r}")
    if isinstance(rho, DensityState):
        eigvals, eigvecs = rho.eigenvalues, rho.eigenvectors
    else:
        arr = validate_hermitian(rho, name="state")
        eigvals, eigvecs = np.linalg.eigh(arr)
    if float(eigvals[0]) < -psd_tol:
        raise PositivityError(
            f"state has eigenvalue {float(eigvals[0]):.3e} below -{psd_tol:.1e}; log rejected"
        )
    clamped = int(np.count_nonzero(eigvals < eig_floor))
    logvals = np.log(np.maximum(eigvals, eig_floor))
    out = (eigvecs * logvals) @ eigvecs.conj().T
    return hermitian_part(out), clamped


def matrix_exp_hermitian(a) -> np.ndarray:
    """Eigendecomposition-based exponential of a Hermitian matrix."""
    arr = validate_hermitian(a)
    w, v = np.linalg.eigh(arr)
    return hermitian_part((v * np.exp(w)) @ v.conj().T)


def operator_to_json(a) -> dict:
    """Serialize an operator as {"dim": n, "re": [[...]], "im": [[...]]}."""
    arr = as_operator(a)
    return {
        "dim": int(arr.shape[0]),
        "re": arr.real.tolist(),
        "im": arr.imag.tolist(),
    }


def operator_from_json(obj, *, herm_tol: float = HERMITICITY_TOL,
                       name: str = "operator") -> np.ndarray:
    """Deserialize an operator object, re-validating hermiticity.

    The "im" block may be omitted for real matrices.
    """
    if not isinstance(obj, dict):
        raise ValueError(f"{name}: expected an object with 're'/'im' blocks, got {type(obj).__name__}")
    if "re" not in obj:
        raise ValueError(f"{name}: missing 're' block")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise DimensionError(f"{name}: 're'/'im' blocks must be matching square matrices")
    arr = re + 1j * im
    if "dim" in obj and int(obj["dim"]) != arr.shape[0]:
        raise DimensionError(
            f"{name}: declared dim {obj['dim']} does not match matrix shape {arr.shape}"
        )
    return validate_hermitian(arr, herm_tol, name=name)
