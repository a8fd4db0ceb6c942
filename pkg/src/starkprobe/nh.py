"""Trace-preserving evolution under non-Hermitian Hamiltonians.

The normalized state sum_n exp(-i E_n t) <L_n|psi0> |R_n> / ||...|| is exact
for any diagonalizable generator; conjugation-and-renormalization gives the
density-matrix form, and the equivalent Lindblad-like equation of motion
(built from the Hermitian / anti-Hermitian split of the generator) preserves
trace and keeps pure states pure.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import ExceptionalPointProximity, TraceCollapse
from .lindblad import DensityMatrix, _entries
from .model import as_matrix
from .spectral import BiorthogonalSystem, eig_biorthogonal, expm_action

__all__ = [
    "evolve_nh",
    "evolve_nh_series",
    "evolve_nh_grid",
    "trace_preserving_rhs",
    "evolve_nh_density",
]

TRACE_COLLAPSE_FLOOR = 1e-300


def evolve_nh(psi0, H_NH, t: float, *, system: BiorthogonalSystem | None = None,
              method: str = "auto") -> np.ndarray:
    """Unit-norm state after non-unitary evolution for time t.

    ``method`` selects the spectral route ("spectral"), the dense-exponential
    route ("expm"), or tries the spectral route first and falls back on
    exceptional-point proximity ("auto").  A precomputed biorthogonal
    ``system`` is reused across calls (and across the finite-difference field
    shifts in the metrology layer).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if method not in ("auto", "spectral", "expm"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "spectral"):
        try:
            if system is None:
                system = eig_biorthogonal(H_NH)
            coeff = system.overlaps(psi0) * np.exp(-1j * system.eigenvalues * t)
            v = system.right_vectors @ coeff
            return _normalized(v)
        except ExceptionalPointProximity:
            if method == "spectral":
                raise
            warnings.warn(
                "near-defective generator; falling back to the exponential route",
                stacklevel=2,
            )
    v = expm_action(-1j * as_matrix(H_NH), psi0, t)
    return _normalized(v)


def evolve_nh_series(psi0, system: BiorthogonalSystem, times) -> np.ndarray:
    """Normalized states at many times from one biorthogonal decomposition.

    Returns an array of shape (len(times), dim), row i being the state at
    times[i].
    """
    psi0 = np.asarray(psi0, dtype=complex)
    times = np.asarray(times, dtype=float)
    coeff = system.overlaps(psi0)
    phases = np.exp(-1j * np.outer(system.eigenvalues, times))
    states = system.right_vectors @ (phases * coeff[:, np.newaxis])
    norms = np.linalg.norm(states, axis=0)
    if np.any(norms == 0.0):
        raise ZeroDivisionError("evolved state vanished")
    return (states / norms[np.newaxis, :]).T


def evolve_nh_grid(psi0, H_NH, times) -> np.ndarray:
    """Normalized states on a uniform time grid via repeated short steps.

    One dense exponential of the step generator is reused for the whole
    grid, with renormalization after every step; projectively this equals
    the single-shot exponential but never overflows, so it covers the
    near-defective regimes the spectral route rejects (e.g. the
    unidirectional chain at small h).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty((0, psi0.size), dtype=complex)
    dt = times[0] if times.size == 1 else float(times[1] - times[0])
    if dt <= 0.0:
        raise ValueError("grid times must be strictly increasing from > 0")
    k = np.rint(times / dt)
    if np.max(np.abs(k * dt - times)) > 1e-9 * max(1.0, float(times[-1])):
        raise ValueError("times do not form a uniform grid")
    E = sla.expm(-1j * as_matrix(H_NH) * dt)
    out = np.empty((times.size, psi0.size), dtype=complex)
    psi = _normalized(psi0)
    steps_done = 0
    for i, target in enumerate(k.astype(int)):
        while steps_done < target:
            psi = _normalized(E @ psi)
            steps_done += 1
        out[i] = psi
    return out


def trace_preserving_rhs(rho, H_h, H_ah, gamma: float) -> np.ndarray:
    """Right-hand side -i[H_h, rho] + gamma(2 Tr(rho H_ah) rho - {H_ah, rho}).

    Requires Hermitian H_h and H_ah and a trace-one rho; the result is then
    traceless, so the evolution preserves normalization.
    """
    r = _entries(rho)
    Hh = as_matrix(H_h)
    Hah = as_matrix(H_ah)
    for name, M in (("H_h", Hh), ("H_ah", Hah)):
        scale = float(np.abs(M).max())
        if scale > 0.0 and float(np.abs(M - M.conj().T).max()) > 1e-10 * scale:
            raise ValueError(f"{name} must be Hermitian")
    if abs(complex(np.trace(r)) - 1.0) > 1e-8:
        raise ValueError("rho must have unit trace")
    comm = Hh @ r - r @ Hh
    anti = Hah @ r + r @ Hah
    return -1j * comm + gamma * (2.0 * np.trace(r @ Hah) * r - anti)


def evolve_nh_density(rho0, H_NH, t: float) -> DensityMatrix:
    """Normalized conjugation exp(-i H t) rho0 exp(i H^dag t) / trace.

    Raises TraceCollapse when the unnormalized trace underflows (total loss,
    an unphysical parameter regime).
    """
    r0 = _entries(rho0)
    M = sla.expm(-1j * as_matrix(H_NH) * t)
    r = M @ r0 @ M.conj().T
    tr = float(np.trace(r).real)
    if not np.isfinite(tr) or tr < TRACE_COLLAPSE_FLOOR:
        raise TraceCollapse(f"unnormalized trace {tr:.3e} at t = {t}")
    r = r / tr
    return DensityMatrix((r + r.conj().T) / 2.0)


def _normalized(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise ZeroDivisionError("evolved state has no finite norm")
    return v / n
