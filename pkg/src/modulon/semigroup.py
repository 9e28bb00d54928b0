"""Semigroup growth verification on truncations: weighted propagator norms,
the H^{-1}/H^{1} duality identity, Riesz spectral projections, and
exponential-trichotomy dimension counts.

Propagator norms are Sobolev-weighted spectral norms of the matrix
exponential of a Bloch generator,

    ||e^{tA}||_{H^s}  =  || W_s e^{tA} W_s^{-1} ||_2,
    W_s = diag((1 + |xi_n + k|^2)^{s/2}),

computed by scaling-and-squaring (Pade order 13).  The adjoint identity
(A = DL, L Hermitian, D skew) makes ||e^{tA}||_{H^{-1}} equal to the H^1
norm of exp(t L D) exactly, up to round-off, for the real-symmetric L that
even real waves produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from .bloch import BlochOperator, eigens
from .errors import ContourError, DomainError, PropagatorRangeError, \
    StructureViolationError

_LOG_OVERFLOW = 600.0   # cap on lambda0 * t before expm overflows


def _weighted_norm(mat: np.ndarray, weights: np.ndarray) -> float:
    return float(np.linalg.norm((weights[:, None] * mat) / weights[None, :], 2))


def _spectral_abscissa(mat: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(mat).real))


def propagator_norm(op: BlochOperator, t: float, s: float = 0.0) -> float:
    """H^s operator norm of e^{tA} on the truncation."""
    if t < 0:
        raise DomainError("propagator norms are probed for t >= 0")
    growth = _spectral_abscissa(op.A_mat) * t
    if growth > _LOG_OVERFLOW:
        raise PropagatorRangeError(
            f"e^(t A) overflows at t = {t}; cap t near "
            f"{_LOG_OVERFLOW / max(growth / t, 1e-30):.3g}",
            t_cap=_LOG_OVERFLOW / max(growth / t, 1e-30))
    E = scipy.linalg.expm(t * op.A_mat)
    return _weighted_norm(E, op.sobolev_weights(s))


def dual_propagator_norm(op: BlochOperator, t: float,
                         check: bool = True, tol: float = 1e-8) -> float:
    """H^1 norm of exp(t L D), the dual propagator of e^{tA} in H^{-1}.

    For the real symmetric L of an even real wave the two norms agree to
    round-off; with ``check`` the identity is asserted.
    """
    if t < 0:
        raise DomainError("propagator norms are probed for t >= 0")
    LD = op.L_mat @ np.diag(op.D_diag)
    E = scipy.linalg.expm(t * LD)
    nrm = _weighted_norm(E, op.sobolev_weights(1.0))
    if check:
        direct = propagator_norm(op, t, s=-1.0)
        if abs(nrm - direct) > tol * max(1.0, abs(direct)):
            raise StructureViolationError(
                f"H^1/H^-1 duality defect {abs(nrm - direct):.3e} at t = {t}")
    return nrm


@dataclass
class PropagatorProbe:
    """Measured weighted norms of e^{tA} on a time grid."""

    op: BlochOperator
    t_grid: np.ndarray
    s: float
    norms: np.ndarray = dc_field(default=None)

    def run(self):
        self.norms = np.array([propagator_norm(self.op, t, self.s)
                               for t in self.t_grid])
        return self

    def log_slope(self, t_min: float = 5.0, t_max: float = 20.0) -> float:
        """Least-squares slope of log norm over [t_min, t_max]."""
        mask = (self.t_grid >= t_min) & (self.t_grid <= t_max)
        if np.sum(mask) < 2:
            raise DomainError("need at least two samples in the slope window")
        return float(np.polyfit(self.t_grid[mask],
                                np.log(self.norms[mask]), 1)[0])


def probe_growth(op: BlochOperator, s: float, t_min: float = 5.0,
                 t_max: float = 20.0, samples: int = 16) -> PropagatorProbe:
    t = np.linspace(t_min, t_max, samples)
    return PropagatorProbe(op, t, s).run()


def riesz_projection(M: np.ndarray, center: complex, radius: float,
                     quad_points: int = 64, idem_tol: float = 1e-8,
                     max_points: int = 2048) -> np.ndarray:
    """Spectral projector (1/2 pi i) contour integral of (zI - M)^{-1}.

    Trapezoidal quadrature on the circle, with the point count doubled until
    the idempotence defect drops below ``idem_tol``.  The contour must keep
    clear of the spectrum (distance > radius/100).
    """
    vals = np.linalg.eigvals(M)
    dist = np.abs(np.abs(vals - center) - radius)
    if np.min(dist) <= radius / 100.0:
        raise ContourError(
            f"eigenvalue within {np.min(dist):.3e} of the contour "
            f"(center {center}, radius {radius}); move the circle")
    n_enclosed = int(np.sum(np.abs(vals - center) < radius))
    I = np.eye(M.shape[0], dtype=complex)
    n = quad_points
    while True:
        theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        z = center + radius * np.exp(1j * theta)
        P = np.zeros_like(I)
        for zj in z:
            P += np.linalg.solve(zj * I - M, I) * np.exp(1j * np.angle(zj - center))
        P *= radius / n
        defect = np.linalg.norm(P @ P - P, 2)
        if defect < idem_tol:
            break
        n *= 2
        if n > max_points:
            raise ContourError(
                f"projector defect {defect:.2e} did not reach {idem_tol:g} "
                f"with {max_points} quadrature points")
    rank = int(round(np.trace(P).real))
    if rank != n_enclosed:
        raise ContourError(
            f"projector rank {rank} disagrees with enclosed eigenvalue "
            f"count {n_enclosed}")
    return P


@dataclass
class TrichotomySplit:
    dim_Eu: int
    dim_Es: int
    dim_Ec: int
    n_minus_L: int


def trichotomy_split(op: BlochOperator, threshold: float = 1e-8,
                     strict: bool = True) -> TrichotomySplit:
    """Count unstable/stable/center dimensions and the Morse index of L.

    Asserts dim E^u = dim E^s <= n^-(L); a violation signals a truncation
    too coarse to respect the Hamiltonian structure.
    """
    herm_defect = np.linalg.norm(op.L_mat - op.L_mat.conj().T, np.inf)
    if herm_defect > 1e-12 * max(1.0, np.linalg.norm(op.L_mat, np.inf)):
        raise StructureViolationError(
            f"L matrix not Hermitian (defect {herm_defect:.2e})")
    vals = np.linalg.eigvals(op.A_mat)
    dim_u = int(np.sum(vals.real > threshold))
    dim_s = int(np.sum(vals.real < -threshold))
    dim_c = len(vals) - dim_u - dim_s
    n_minus = int(np.sum(np.linalg.eigvalsh(op.L_mat) < -1e-10))
    split = TrichotomySplit(dim_u, dim_s, dim_c, n_minus)
    if strict:
        if dim_u != dim_s:
            raise StructureViolationError(
                f"dim E^u = {dim_u} != dim E^s = {dim_s} at k = {op.k} "
                f"(truncation too coarse)")
        if dim_u > n_minus:
            raise StructureViolationError(
                f"dim E^u = {dim_u} exceeds n^-(L) = {n_minus} at k = {op.k}")
    return split


def expm_cross_check(op: BlochOperator, t: float, cond_cap: float = 1e6):
    """Compare scaling-and-squaring with the eigendecomposition propagator.

    Returns (relative difference, eigenvector condition number); the
    comparison is skipped (returns None) when the eigenbasis is too
    ill-conditioned to trust.
    """
    vals, vecs = eigens(op, check_residual=False)
    cond = float(np.linalg.cond(vecs))
    if cond > cond_cap:
        return None, cond
    E_pade = scipy.linalg.expm(t * op.A_mat)
    E_eig = (vecs * np.exp(t * vals)) @ np.linalg.inv(vecs)
    rel = float(np.linalg.norm(E_pade - E_eig, 2) /
                max(np.linalg.norm(E_pade, 2), 1e-300))
    return rel, cond
