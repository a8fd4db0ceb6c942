"""Dense spectral machinery.

Hermitian and biorthogonal (left/right) eigendecompositions, the closed-form
eigenvectors of the unidirectional chain, and matrix-exponential action.
Everything here is dense; the dimensions in this package stay well below the
point where sparse or Krylov methods would pay off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln

from .errors import ExceptionalPointProximity
from .model import LatticeSpec, OperatorMatrix, as_matrix

__all__ = [
    "BiorthogonalSystem",
    "eig_hermitian",
    "eig_biorthogonal",
    "unidirectional_eigvec",
    "unidirectional_eigvec_normalized",
    "expm_action",
]

# Above this eigenvector-matrix condition number the basis is treated as
# defective (exceptional-point proximity) and rejected.
EIGENVECTOR_CONDITION_LIMIT = 1e10

# log(float64 max); ||A||*|t| beyond this cannot be exponentiated.
EXP_ARGUMENT_LIMIT = 709.0


@dataclass
class BiorthogonalSystem:
    """Eigenvalues with mutually normalized right and left eigenvector sets.

    Columns of ``right_vectors`` / ``left_vectors`` are paired so that
    <L_m|R_n> = delta_mn; ``condition`` is the 2-norm condition number of the
    right-vector matrix and quantifies how far the completeness relation can
    be trusted.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    condition: float

    @property
    def dim(self) -> int:
        return self.right_vectors.shape[0]

    def overlaps(self, psi: np.ndarray) -> np.ndarray:
        """Expansion coefficients <L_n|psi> of a state in the right basis."""
        return self.left_vectors.conj().T @ np.asarray(psi, dtype=complex)


def _require_hermitian(H) -> np.ndarray:
    if isinstance(H, OperatorMatrix):
        if not H.hermitian:
            raise ValueError("eig_hermitian requires the hermitian tag")
        return H.entries
    A = as_matrix(H)
    scale = float(np.abs(A).max())
    if scale > 0.0 and float(np.abs(A - A.conj().T).max()) >= 1e-12 * scale:
        raise ValueError("eig_hermitian called with a non-Hermitian matrix")
    return A


def eig_hermitian(H):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    Rejects input without a verified Hermiticity tag.
    """
    A = _require_hermitian(H)
    w, V = np.linalg.eigh(A)
    return w, V


def eig_biorthogonal(H) -> BiorthogonalSystem:
    """Left/right eigendecomposition normalized to <L_m|R_n> = delta_mn.

    Eigenvalues are sorted by real part (ties by imaginary part) and each
    right eigenvector's largest-magnitude component is rotated to the real
    positive axis, which makes the output deterministic.  Raises
    ExceptionalPointProximity when the right-vector matrix condition number
    exceeds ``EIGENVECTOR_CONDITION_LIMIT`` (defective or nearly defective
    input, e.g. the unidirectional chain at h = 0).
    """
    A = as_matrix(H)
    w, vr = sla.eig(A)
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    vr = vr[:, order]

    cond = float(np.linalg.cond(vr))
    if not np.isfinite(cond) or cond > EIGENVECTOR_CONDITION_LIMIT:
        raise ExceptionalPointProximity(
            f"eigenvector condition number {cond:.3e} exceeds "
            f"{EIGENVECTOR_CONDITION_LIMIT:.0e}; matrix is defective or nearly so"
        )

    # Phase fix: largest-magnitude component of each right vector made real
    # positive.  The left vectors inherit the same rotation through the
    # inverse, which keeps <L_m|R_n> = delta_mn.
    dim = A.shape[0]
    peak = np.argmax(np.abs(vr), axis=0)
    phases = vr[peak, np.arange(dim)]
    phases = phases / np.abs(phases)
    vr = vr / phases[np.newaxis, :]

    left = np.linalg.inv(vr).conj().T
    return BiorthogonalSystem(w, vr, left, cond)


def _unidirectional_log_coeffs(n: int, spec: LatticeSpec) -> np.ndarray:
    if spec.h <= 0:
        raise ValueError("unidirectional eigenvectors require h > 0 (h = 0 is defective)")
    if not 0 <= n <= spec.L - 1:
        raise ValueError(f"eigenvector index must be in 0..{spec.L - 1}, got {n}")
    j = np.arange(spec.L)
    k = n - j  # exponent of (J/h), nonnegative on the support j <= n
    with np.errstate(divide="ignore", invalid="ignore"):
        log_c = np.where(j <= n, k * np.log(spec.J / spec.h) - gammaln(np.maximum(k, 0) + 1.0), -np.inf)
    return log_c


def unidirectional_eigvec(n: int, spec: LatticeSpec) -> np.ndarray:
    """Closed-form unnormalized right eigenvector of the unidirectional chain.

    ``n`` is the 0-based index of the paper-style formula: component 1 at
    site n, (J/h)^(n-j)/(n-j)! below it, 0 above.  On the 1-based lattice the
    eigenvalue is h*(n+1).  Coefficients are evaluated in log space; inputs
    whose largest coefficient would overflow float64 are rejected (use
    :func:`unidirectional_eigvec_normalized` in that regime).
    """
    log_c = _unidirectional_log_coeffs(n, spec)
    peak = float(np.max(log_c))
    if peak > EXP_ARGUMENT_LIMIT:
        raise OverflowError(
            f"largest coefficient exp({peak:.1f}) overflows float64; "
            "use unidirectional_eigvec_normalized"
        )
    return np.exp(log_c).astype(complex)


def unidirectional_eigvec_normalized(n: int, spec: LatticeSpec) -> np.ndarray:
    """Unit-norm closed-form eigenvector, stable for arbitrarily large J/h."""
    log_c = _unidirectional_log_coeffs(n, spec)
    c = np.exp(log_c - np.max(log_c))
    return (c / np.linalg.norm(c)).astype(complex)


def expm_action(A, v: np.ndarray, t: float) -> np.ndarray:
    """Apply exp(A*t) to a vector via the dense scaling-and-squaring exponential.

    Rejects arguments whose 1-norm times |t| exceeds the float64 exponent
    range, which signals unphysical gain.
    """
    M = as_matrix(A)
    v = np.asarray(v, dtype=complex)
    if M.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {M.shape[0]} vs {v.shape[0]}")
    norm1 = float(np.linalg.norm(M, 1))
    if norm1 * abs(t) > EXP_ARGUMENT_LIMIT:
        raise OverflowError(
            f"||A||*|t| = {norm1 * abs(t):.3g} exceeds the float64 exponent range"
        )
    if t == 0.0 or norm1 == 0.0:
        return v.copy()
    return sla.expm(M * t) @ v
