"""Truncated Bloch operators, spectra over k in [0, 1], band location,
band-edge fits, and unstable eigenfunctions.

Conventions: in the Fourier basis {e^{inx}}, |n| <= N/2, the generator at
Bloch parameter k is

    kdv_type:  A = D_k L_k,  D_k = diag(i kappa (n+k)),
               L_k = diag(alpha(kappa (n+k)) - c) + Toeplitz(f'(u_c))
    bbm:       A = diag(i kappa (n+k) / (1 + xi^2)) (c diag(1 + xi^2) - I - T)

with xi = kappa (n+k).  L_k is Hermitian, so every spectrum is closed under
lambda -> -conj(lambda); the maximal real part lambda0 is the growth rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (BandFitError, DomainError, InsufficientDataError,
                     ModulonError, RationalApproximationError,
                     StructureViolationError)
from .fields import PeriodicField, csv_float, l2_norm
from .symbols import ModelSpec, evaluate_symbol
from .waves import TravelingWave, pointwise_image, resample, _nonlinear_pad, \
    spectral_decay_diagnostic

UNSTABLE_THRESHOLD = 1e-8


@dataclass
class BlochOperator:
    """Dense truncation of (J_k, L_k) for one Bloch parameter."""

    k: float
    N: int
    family: str
    xi: np.ndarray          # physical frequencies kappa*(n+k)
    D_diag: np.ndarray      # diagonal of the symplectic factor
    L_mat: np.ndarray       # Hermitian energy matrix
    A_mat: np.ndarray       # generator D L (or BBM pencil)
    model: ModelSpec | None = None
    wave: TravelingWave | None = None

    def sobolev_weights(self, s: float) -> np.ndarray:
        return (1.0 + np.abs(self.xi) ** 2) ** (s / 2.0)


def _df_coefficients(model: ModelSpec, wave: TravelingWave, N: int) -> np.ndarray:
    """Complex Fourier coefficients of f'(u_c) for modes -N..N."""
    base = resample(wave.profile, 2 * N + 4)
    w = pointwise_image(base, model.nonlinearity.df,
                        pad=_nonlinear_pad(model.nonlinearity))
    half = w.N // 2
    return w.coef[half - N:half + N + 1].copy()


def assemble_bloch(model: ModelSpec, wave: TravelingWave, k: float,
                   N: int) -> BlochOperator:
    """Assemble the dense Bloch matrices at parameter k on an (N+1)-mode grid."""
    if not 0.0 <= k <= 1.0:
        raise DomainError(f"Bloch parameter must lie in [0, 1], got {k}")
    if N % 2 != 0:
        raise DomainError("truncation N must be even")
    n = np.arange(-(N // 2), N // 2 + 1)
    kap = model.kappa
    xi = kap * (n + k)
    w = _df_coefficients(model, wave, N)
    # Toeplitz block T[i, j] = w_{n_i - n_j}
    col = w[N:]          # w_0 .. w_N
    row = w[N::-1]       # w_0 .. w_{-N}
    T = scipy.linalg.toeplitz(col, row)
    if model.family == "kdv_type":
        L = np.diag(evaluate_symbol(model.symbol, xi) - wave.c) + T
        D = 1j * kap * (n + k)
    else:
        s2 = 1.0 + xi ** 2
        L = np.diag(wave.c * s2 - 1.0) - T
        D = 1j * kap * (n + k) / s2
    A = D[:, None] * L
    return BlochOperator(k=float(k), N=N, family=model.family, xi=xi,
                         D_diag=D, L_mat=L, A_mat=A, model=model, wave=wave)


def eigens(op: BlochOperator, check_residual: bool = True):
    """Full dense eigensolve; pairs sorted by decreasing real part.

    Eigenvector phases are fixed by rotating the largest-magnitude entry to
    the positive real axis, so output files are reproducible.
    """
    try:
        vals, vecs = scipy.linalg.eig(op.A_mat)
    except Exception as exc:
        cond = np.linalg.cond(op.A_mat)
        raise ModulonError(
            f"dense eigensolve failed at k={op.k} (cond ~ {cond:.2e})") from exc
    order = np.lexsort((-vals.imag, -vals.real))
    vals = vals[order]
    vecs = vecs[:, order]
    norms = np.linalg.norm(vecs, axis=0)
    vecs = vecs / norms
    idx = np.argmax(np.abs(vecs), axis=0)
    phases = vecs[idx, np.arange(vecs.shape[1])]
    phases = phases / np.abs(phases)
    vecs = vecs / phases
    if check_residual:
        for j in range(min(5, len(vals))):
            r = np.linalg.norm(op.A_mat @ vecs[:, j] - vals[j] * vecs[:, j])
            if r > 1e-8 * max(1.0, np.linalg.norm(op.A_mat @ vecs[:, j])):
                raise ModulonError(
                    f"eigenpair residual {r:.2e} too large at k={op.k}; "
                    f"cond(A) ~ {np.linalg.cond(op.A_mat):.2e}")
    return vals, vecs


@dataclass
class BlochSpectrum:
    """Eigenvalues over a refined grid of Bloch parameters."""

    k_grid: np.ndarray            # sorted sample locations
    eigenvalues: list             # complex array per k
    lambda0: float
    k0: float
    bands: list                   # [(k_lo, k_hi), ...] where max Re > threshold
    threshold: float = UNSTABLE_THRESHOLD
    grid_spacing: float = 0.0     # coarse-scan spacing, sets the fit window

    def max_real(self) -> np.ndarray:
        return np.array([float(np.max(ev.real)) for ev in self.eigenvalues])

    def band_containing_k0(self):
        for lo, hi in self.bands:
            if lo - 1e-12 <= self.k0 <= hi + 1e-12:
                return lo, hi
        return None


def _spectra_at(model, wave, ks, N, jobs=1):
    def one(k):
        vals, _ = eigens(assemble_bloch(model, wave, k, N), check_residual=False)
        return vals
    if jobs <= 1 or len(ks) < 4:
        return [one(k) for k in ks]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_eig_worker, [(model, wave, k, N) for k in ks]))


def _eig_worker(args):
    model, wave, k, N = args
    vals, _ = eigens(assemble_bloch(model, wave, k, N), check_residual=False)
    return vals


def scan_bloch(model: ModelSpec, wave: TravelingWave, k_count: int, N: int,
               threshold: float = UNSTABLE_THRESHOLD, jobs: int = 1,
               fit_fill: int = 12) -> BlochSpectrum:
    """Scan k in [0, 1]: uniform grid, trisection refinement of local maxima,
    then a small uniform fill around the global maximum for band fitting."""
    if k_count < 16:
        raise DomainError("k_count must be at least 16")
    ks = list(np.linspace(0.0, 1.0, k_count))
    samples = dict(zip(ks, _spectra_at(model, wave, ks, N, jobs)))

    def r_of(k):
        if k not in samples:
            vals, _ = eigens(assemble_bloch(model, wave, k, N),
                             check_residual=False)
            samples[k] = vals
        return float(np.max(samples[k].real))

    grid = sorted(samples)
    rvals = [r_of(k) for k in grid]
    # local maxima on the uniform grid (interior only); refine anything that
    # could plausibly clear the instability threshold at its true peak
    refine_floor = max(threshold / 100.0, 1e-12)
    maxima = [i for i in range(1, len(grid) - 1)
              if rvals[i] >= rvals[i - 1] and rvals[i] >= rvals[i + 1]
              and rvals[i] > refine_floor]
    for i in maxima:
        a, b, c = grid[i - 1], grid[i], grid[i + 1]
        for _ in range(3):   # trisection rounds
            m1 = 0.5 * (a + b)
            m2 = 0.5 * (b + c)
            trio = [(r_of(x), x) for x in (m1, b, m2)]
            _, best = max(trio)
            if best == m1:
                c = b
            elif best == m2:
                a = b
            else:
                a, c = m1, m2
            b = best

    all_k = sorted(samples)
    rs = np.array([float(np.max(samples[k].real)) for k in all_k])
    i0 = int(np.argmax(rs))
    k0 = all_k[i0]
    lambda0 = float(rs[i0])

    if lambda0 > threshold and fit_fill > 0:
        spacing = 1.0 / (k_count - 1)
        w = 1.5 * spacing
        for kk in np.linspace(max(0.0, k0 - w), min(1.0, k0 + w), fit_fill):
            r_of(float(kk))

    all_k = sorted(samples)
    rs = np.array([float(np.max(samples[k].real)) for k in all_k])
    i0 = int(np.argmax(rs))
    k0 = float(all_k[i0])
    lambda0 = float(rs[i0])
    bands = _bands_from_samples(np.array(all_k), rs, threshold)
    return BlochSpectrum(k_grid=np.array(all_k),
                         eigenvalues=[samples[k] for k in all_k],
                         lambda0=max(lambda0, 0.0), k0=k0, bands=bands,
                         threshold=threshold,
                         grid_spacing=1.0 / (k_count - 1))


def _bands_from_samples(ks, rs, thr):
    bands = []
    above = rs > thr
    i = 0
    n = len(ks)
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        lo = ks[i]
        if i > 0:
            f = (thr - rs[i - 1]) / (rs[i] - rs[i - 1])
            lo = ks[i - 1] + f * (ks[i] - ks[i - 1])
        hi = ks[j]
        if j + 1 < n:
            f = (thr - rs[j]) / (rs[j + 1] - rs[j])
            hi = ks[j] + f * (ks[j + 1] - ks[j])
        bands.append((float(lo), float(hi)))
        i = j + 1
    return bands


@dataclass
class GrowthCurve:
    """Fitted band edge Re lambda(k) ~ lambda0 - a_fit (k - k0)^l, l even."""

    k_samples: np.ndarray
    re_lambda: np.ndarray
    lambda0: float
    k0: float
    l: int
    a_fit: float
    rel_residual: float


def fit_band(spectrum: BlochSpectrum, window: float | None = None) -> GrowthCurve:
    """Fit the local band-edge model over |k - k0| <= window.

    Tries l in {2, 4, 6}, adjusting the peak location within one sample
    spacing, and keeps the order with the smallest relative residual.  The
    default window is 1.6 coarse-grid spacings, matching the fill samples
    the scan lays down around the maximum.
    """
    if spectrum.lambda0 <= 0.0:
        raise BandFitError("band fit requires a positive growth rate")
    if window is None:
        window = 1.6 * (spectrum.grid_spacing or 0.02)
    ks = spectrum.k_grid
    rs = spectrum.max_real()
    mask = np.abs(ks - spectrum.k0) <= window
    if int(np.sum(mask)) < 9:
        raise InsufficientDataError(
            f"band fit needs >= 9 samples in the window, found {int(np.sum(mask))}")
    ks = ks[mask]
    rs = rs[mask]
    i0 = int(np.argmax(rs))
    if i0 == 0 or i0 == len(ks) - 1:
        raise BandFitError("no interior maximum inside the fit window")
    h = max(np.max(np.diff(np.sort(ks))), 1e-12)
    rng = float(np.max(rs) - np.min(rs))
    if rng <= 0.0:
        raise BandFitError("flat band: nothing to fit")

    from scipy.optimize import minimize_scalar

    def fit_for(l):
        def misfit(kc):
            X = np.column_stack([np.ones_like(ks), -np.abs(ks - kc) ** l])
            sol, *_ = np.linalg.lstsq(X, rs, rcond=None)
            res = float(np.linalg.norm(X @ sol - rs))
            return res, sol

        opt = minimize_scalar(lambda kc: misfit(kc)[0],
                              bounds=(ks[i0] - h, ks[i0] + h), method="bounded")
        res, sol = misfit(float(opt.x))
        return res / (np.sqrt(len(ks)) * rng), float(opt.x), sol

    best = None
    for l in (2, 4, 6):
        rel, kc, (lam, a) = fit_for(l)
        if a > 0 and (best is None or rel < best[0]):
            best = (rel, l, kc, lam, a)
    if best is None or best[0] > 0.20:
        raise BandFitError(
            "all band-edge orders fit poorly (degenerate band)"
            + ("" if best is None else f"; best residual {best[0]:.1%}"))
    rel, l, kc, lam, a = best
    return GrowthCurve(k_samples=ks, re_lambda=rs, lambda0=float(lam),
                       k0=float(kc), l=int(l), a_fit=float(a),
                       rel_residual=float(rel))


def rational_k0(k0: float, q_max: int, tol: float):
    """Smallest-denominator p/q with |p/q - k0| <= tol and q <= q_max.

    Enumerates continued-fraction convergents and semiconvergents in order
    of increasing denominator; every minimal-denominator approximation
    within a tolerance is among them.
    """
    if not 0.0 <= k0 <= 1.0:
        raise DomainError(f"k0 must lie in [0, 1], got {k0}")
    if q_max < 1:
        raise DomainError("q_max must be >= 1")
    candidates = []
    p_prev, q_prev = 1, 0        # p_{-1}/q_{-1}
    p_cur, q_cur = int(np.floor(k0)), 1
    candidates.append((q_cur, abs(p_cur / q_cur - k0), p_cur))
    x = k0 - np.floor(k0)
    for _ in range(64):
        if x <= 1e-15:
            break
        x = 1.0 / x
        a = int(np.floor(x))
        x -= a
        # semiconvergents (p_prev + j p_cur) / (q_prev + j q_cur), j = 1..a
        for j in range(1, a + 1):
            p_s = p_prev + j * p_cur
            q_s = q_prev + j * q_cur
            if q_s > q_max:
                break
            candidates.append((q_s, abs(p_s / q_s - k0), p_s))
        p_prev, p_cur = p_cur, p_prev + a * p_cur
        q_prev, q_cur = q_cur, q_prev + a * q_cur
        if q_cur > q_max:
            break
    candidates.sort(key=lambda t: (t[0], t[1]))
    for q, err, p in candidates:
        if err <= tol:
            return p, q
    raise RationalApproximationError(
        f"no p/q with q <= {q_max} within {tol:g} of {k0}; increase q_max")


def unstable_eigenfunction(model: ModelSpec, wave: TravelingWave, k: float,
                           N: int | None = None):
    """Top eigenpair at k, with the eigenfunction as a unit-L2 field on T_2pi.

    Verifies the vanishing of <L_k v, v> (exact for true unstable
    eigenfunctions) and that the coefficient decay looks smooth.
    """
    if N is None:
        N = wave.profile.N
    op = assemble_bloch(model, wave, k, N)
    vals, vecs = eigens(op)
    lam = vals[0]
    if lam.real <= UNSTABLE_THRESHOLD:
        raise DomainError(f"k = {k} is not inside an unstable band "
                          f"(top Re lambda = {lam.real:.3e})")
    v = vecs[:, 0]
    f = PeriodicField(1, N, v.copy(), real=False)
    nrm = l2_norm(f)
    f = f * (1.0 / nrm)
    v = v / np.linalg.norm(v)
    pairing = complex(np.vdot(v, op.L_mat @ v))   # <L v, v> per unit L2 mass
    l_norm = float(np.max(np.abs(np.linalg.eigvalsh(op.L_mat))))
    if abs(pairing) > 1e-6 * l_norm:
        raise StructureViolationError(
            f"<L_k v, v> = {abs(pairing):.3e} exceeds 1e-6 * ||L|| = "
            f"{1e-6 * l_norm:.3e} at k = {k}")
    slope = spectral_decay_diagnostic(f)
    if slope > -0.05:
        raise StructureViolationError(
            f"unstable eigenfunction coefficients decay too slowly "
            f"(slope {slope:.3f}) at k = {k}")
    return complex(lam), f


# -- persistence ------------------------------------------------------------------


def export_spectrum_dump(spectrum: BlochSpectrum, path, top: int = 20):
    """CSV rows k, re_lambda, im_lambda for the top eigenvalues by Re at each k."""
    with open(path, "w") as fh:
        fh.write("k,re_lambda,im_lambda\n")
        for k, ev in zip(spectrum.k_grid, spectrum.eigenvalues):
            order = np.lexsort((-ev.imag, -ev.real))
            for lam in ev[order][:top]:
                fh.write(f"{csv_float(k)},{csv_float(lam.real)},"
                         f"{csv_float(lam.imag)}\n")


def spectrum_summary(spectrum: BlochSpectrum, curve: GrowthCurve | None = None,
                     pq: tuple | None = None) -> dict:
    out = {
        "lambda0": spectrum.lambda0,
        "k0": spectrum.k0,
        "threshold": spectrum.threshold,
        "bands": [[lo, hi] for lo, hi in spectrum.bands],
    }
    if pq is not None:
        out["p"], out["q"] = int(pq[0]), int(pq[1])
    if curve is not None:
        out["l"] = curve.l
        out["a_fit"] = curve.a_fit
        out["fit_residual"] = curve.rel_residual
    return out


def save_spectrum_summary(summary: dict, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
