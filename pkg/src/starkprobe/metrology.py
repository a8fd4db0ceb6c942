"""Fisher-information layer.

Pure-state quantum Fisher information, the mixed-state construction through
the symmetric logarithmic derivative, classical Fisher information, field
derivatives of probe states by gauge-aligned central differences, and the
signal-to-noise ratio h*sqrt(M*F).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, StepCollapse
from .lindblad import _entries

__all__ = [
    "FisherResult",
    "qfi_pure",
    "qfi_mixed",
    "cfi",
    "state_derivative",
    "default_step",
    "snr",
    "align_phase",
    "qfi_pure_batch",
]

# Negative values above this are clamped to zero; anything below is a hard error.
NEGATIVE_CLAMP = -1e-10

# Spectral pairs with p_m + p_n below this weight are dropped from the SLD sum.
SLD_WEIGHT_THRESHOLD = 1e-12

# Fraction of dropped pairs beyond which rank deficiency is flagged.
RANK_DEFICIENCY_FRACTION = 0.2

CFI_PROBABILITY_FLOOR = 1e-12


@dataclass
class FisherResult:
    """Fisher-information value with provenance.

    ``method`` is "pure" (state-overlap formula) or "sld" (symmetric
    logarithmic derivative); ``derivative_step`` records the finite-difference
    step that produced the derivative (0 when the derivative was supplied
    directly); ``condition_flags`` collects soft diagnostics such as
    "rank-deficient".
    """

    value: float
    method: str
    derivative_step: float = 0.0
    condition_flags: list[str] = field(default_factory=list)


def _clamped(value: float, context: str) -> float:
    if value < 0.0:
        if value < NEGATIVE_CLAMP:
            raise NumericalError(
                f"{context}: value {value:.3e} below the clamp window; broken derivative"
            )
        return 0.0
    if not math.isfinite(value):
        raise NumericalError(f"{context}: non-finite value")
    return value


def qfi_pure(psi, dpsi, *, derivative_step: float = 0.0) -> FisherResult:
    """Quantum Fisher information 4(<dpsi|dpsi> - |<dpsi|psi>|^2) of a pure probe.

    ``dpsi`` must be the parameter derivative of the normalized state; a
    global-phase component of the derivative drops out of the formula.
    """
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.asarray(dpsi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("qfi_pure requires a normalized state")
    grad = float(np.vdot(dpsi, dpsi).real)
    overlap = complex(np.vdot(dpsi, psi))
    value = 4.0 * (grad - abs(overlap) ** 2)
    return FisherResult(_clamped(value, "qfi_pure"), "pure", derivative_step)


def qfi_mixed(rho, drho, *, derivative_step: float = 0.0):
    """Mixed-state QFI and SLD from the spectral decomposition of rho.

    With rho = sum_m p_m |m><m| the SLD matrix elements are
    2 <m|drho|n> / (p_m + p_n) over pairs whose weight exceeds
    ``SLD_WEIGHT_THRESHOLD``, and F = sum 2 |<m|drho|n>|^2 / (p_m + p_n).
    Dropping more than 20% of the pairs flags "rank-deficient" (reported,
    not fatal).  Returns (FisherResult, SLD) with the SLD in the input basis.
    """
    r = _entries(rho)
    d = np.asarray(drho, dtype=complex)
    if d.shape != r.shape:
        raise ValueError(f"shape mismatch: rho {r.shape}, drho {d.shape}")
    scale = float(np.abs(d).max())
    if scale > 0.0 and float(np.abs(d - d.conj().T).max()) > 1e-8 * max(scale, 1.0):
        raise ValueError("drho must be Hermitian")
    if abs(complex(np.trace(d))) > 1e-8 * max(scale * r.shape[0], 1.0):
        raise ValueError("drho must be traceless")

    p, V = np.linalg.eigh(r)
    M = V.conj().T @ d @ V
    weight = p[:, np.newaxis] + p[np.newaxis, :]
    mask = weight > SLD_WEIGHT_THRESHOLD

    sld_eig = np.zeros_like(M)
    sld_eig[mask] = 2.0 * M[mask] / weight[mask]
    value = float((2.0 * np.abs(M[mask]) ** 2 / weight[mask]).sum())

    flags = []
    dropped = 1.0 - mask.sum() / mask.size
    if dropped > RANK_DEFICIENCY_FRACTION:
        flags.append("rank-deficient")

    sld = V @ sld_eig @ V.conj().T
    result = FisherResult(_clamped(value, "qfi_mixed"), "sld", derivative_step, flags)
    return result, sld


def cfi(p, dp, *, threshold: float = CFI_PROBABILITY_FLOOR) -> float:
    """Classical Fisher information sum_n (dp_n)^2 / p_n of an outcome distribution.

    Outcomes with probability below ``threshold`` but a resolvable derivative
    are singular (formally infinite information) and reported as ``inf``.
    """
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    if p.shape != dp.shape:
        raise ValueError("p and dp must have the same shape")
    if abs(p.sum() - 1.0) > 1e-8:
        raise ValueError(f"probabilities sum to {p.sum():.10f}, expected 1")
    if abs(dp.sum()) > 1e-8:
        raise ValueError(f"probability derivatives sum to {dp.sum():.3e}, expected 0")
    live = p > threshold
    if np.any(~live & (np.abs(dp) > 1e-10)):
        return math.inf
    return float((dp[live] ** 2 / p[live]).sum())


def align_phase(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rotate v by a global phase to maximize its real overlap with ref."""
    z = complex(np.vdot(ref, v))
    if z == 0.0:
        return v
    return v * (z.conjugate() / abs(z))


def default_step(h: float) -> float:
    """Central-difference step max(1e-6, 1e-4 |h|), in units of J."""
    return max(1e-6, 1e-4 * abs(h))


def state_derivative(evolve, h: float, *, delta: float | None = None,
                     richardson: bool = False):
    """State and its field derivative by gauge-aligned central differences.

    ``evolve(h')`` must deterministically return either a state vector or a
    density matrix.  Vectors at h +/- delta are phase-rotated to maximize
    their real overlap with the vector at h before differencing (matrices
    are differenced entrywise with no gauge step).  ``richardson`` requests
    a second evaluation at delta/2 and the extrapolated derivative; a
    relative disagreement above 1e-3 between the two steps raises
    StepCollapse (non-smooth point).

    Returns (state, derivative, delta).
    """
    if delta is None:
        delta = default_step(h)
    base = np.asarray(evolve(h), dtype=complex)

    def central(d: float) -> np.ndarray:
        plus = np.asarray(evolve(h + d), dtype=complex)
        minus = np.asarray(evolve(h - d), dtype=complex)
        if base.ndim == 1:
            plus = align_phase(plus, base)
            minus = align_phase(minus, base)
        return (plus - minus) / (2.0 * d)

    der = central(delta)
    if richardson:
        der_half = central(delta / 2.0)
        scale = max(float(np.linalg.norm(der_half)), 1e-300)
        gap = float(np.linalg.norm(der_half - der)) / scale
        if gap > 1e-3:
            raise StepCollapse(
                f"step sizes {delta:.2e} and {delta / 2:.2e} disagree by {gap:.2e}"
            )
        der = (4.0 * der_half - der) / 3.0
    return base, der, delta


def qfi_pure_batch(states, states_plus, states_minus, delta: float) -> np.ndarray:
    """Pure-state QFI for a stack of gauge-aligned central differences.

    ``states*`` are arrays of shape (n, dim), rows being normalized states of
    the same probe family at field h and h +/- delta.  Row i of the result is
    the QFI at sample i.  This is the vectorized form of
    ``state_derivative`` + ``qfi_pure`` used by the time-series pipelines.
    """
    states = np.asarray(states, dtype=complex)
    plus = np.asarray(states_plus, dtype=complex)
    minus = np.asarray(states_minus, dtype=complex)

    def aligned(block):
        z = np.einsum("ij,ij->i", states.conj(), block)
        mag = np.abs(z)
        phase = np.where(mag > 0.0, np.conj(z) / np.where(mag > 0, mag, 1.0), 1.0)
        return block * phase[:, np.newaxis]

    der = (aligned(plus) - aligned(minus)) / (2.0 * delta)
    grad = np.einsum("ij,ij->i", der.conj(), der).real
    overlap = np.einsum("ij,ij->i", der.conj(), states)
    values = 4.0 * (grad - np.abs(overlap) ** 2)
    bad = values < NEGATIVE_CLAMP
    if np.any(bad):
        raise NumericalError(
            f"qfi_pure_batch: {int(bad.sum())} values below the clamp window"
        )
    return np.clip(values, 0.0, None)


def snr(h: float, M: float, fq: float) -> float:
    """Signal-to-noise ratio h * sqrt(M * F) of M optimal repetitions."""
    if h < 0 or M < 0 or fq < 0:
        raise ValueError("snr requires nonnegative h, M and fq")
    return h * math.sqrt(M * fq)
