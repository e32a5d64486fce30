"""Affinity, degree, transition matrices; fused NCCA/AD matrices; spectra."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ConfigurationError, InputError, NumericalError

log = logging.getLogger("fusion_spectra")

IMAG_WARN_FACTOR = 1e-6


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the columns of a p x n matrix.

    Each unordered pair is evaluated once, so the result is exactly symmetric
    with an exactly zero diagonal.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise InputError(f"expected a 2-d matrix, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InputError("input matrix contains NaN or Inf")
    return squareform(pdist(pts.T, metric="sqeuclidean"))


def affinity(sq_dists: np.ndarray, h: float, upsilon: float) -> np.ndarray:
    """Gaussian affinity exp(-upsilon * d^2 / h) with unit diagonal."""
    if h <= 0:
        raise ConfigurationError(f"bandwidth must be > 0, got {h}")
    if upsilon <= 0:
        raise ConfigurationError(f"upsilon must be > 0, got {upsilon}")
    sq = np.asarray(sq_dists, dtype=float)
    if not np.all(np.isfinite(sq)):
        raise InputError("squared distances contain NaN or Inf")
    w = np.exp(-upsilon * sq / h)
    np.fill_diagonal(w, 1.0)
    return w


def transition(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic transition matrix D^-1 W and the degree vector.

    Degrees are applied as a row scaling, never as an explicit inverse.
    """
    w = np.asarray(w, dtype=float)
    deg = w.sum(axis=1)
    if not np.all(np.isfinite(deg)) or np.any(deg <= 0):
        raise NumericalError("degree vector has nonpositive or nonfinite entries")
    return w / deg[:, None], deg


@dataclass(frozen=True)
class KernelStack:
    """Per-sensor affinity/degree/transition matrices and the fused matrices.

    N = A1 @ A2.T is the NCCA matrix, A_fused = A1 @ A2 the alternating
    diffusion matrix. ``h1``/``h2`` record the bandwidths used (squared
    distance units).
    """

    W1: np.ndarray
    W2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    N: np.ndarray
    A_fused: np.ndarray
    h1: float
    h2: float


def fuse(w1: np.ndarray, w2: np.ndarray, h1: float = np.nan, h2: float = np.nan) -> KernelStack:
    """Fuse two affinity matrices into the NCCA and AD matrices."""
    a1, d1 = transition(w1)
    a2, d2 = transition(w2)
    return KernelStack(
        W1=w1, W2=w2, D1=d1, D2=d2, A1=a1, A2=a2,
        N=a1 @ a2.T, A_fused=a1 @ a2, h1=float(h1), h2=float(h2),
    )


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues (descending real part) and singular values of a scaled matrix."""

    eigen_real: np.ndarray
    eigen_imag_max: float
    singular: np.ndarray
    scale_applied: float


def spectrum(m: np.ndarray, power: int = 0, with_singular: bool = True) -> SpectrumResult:
    """Spectrum of ``n**power * m`` for power in {0, 1, 2}.

    Eigenvalues of the (generally non-normal) matrix are sorted by descending
    real part; the largest imaginary magnitude is recorded and a warning is
    logged when it exceeds 1e-6 of the spectral radius. Singular values come
    from an SVD of the same scaled matrix (skippable for inner loops that
    only consume eigenvalues).
    """
    if power not in (0, 1, 2):
        raise ConfigurationError(f"power must be 0, 1 or 2, got {power}")
    mat = np.asarray(m, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InputError(f"expected a square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise InputError("matrix contains NaN or Inf")
    n = mat.shape[0]
    scale = float(n) ** power
    scaled = scale * mat
    sing = np.empty(0)
    if with_singular:
        try:
            sing = np.linalg.svd(scaled, compute_uv=False)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalError(f"SVD did not converge: {exc}") from exc
    try:
        eig = np.linalg.eigvals(scaled)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigensolver did not converge: {exc}", partial=sing
        ) from exc
    order = np.argsort(-eig.real)
    eig = eig[order]
    imag_max = float(np.max(np.abs(eig.imag))) if n else 0.0
    radius = float(np.max(np.abs(eig))) if n else 0.0
    if radius > 0 and imag_max > IMAG_WARN_FACTOR * radius:
        log.warning(
            "eigenvalues of non-normal matrix have |Im| up to %.3e (%.2e of spectral radius)",
            imag_max, imag_max / radius,
        )
    return SpectrumResult(
        eigen_real=eig.real.copy(),
        eigen_imag_max=imag_max,
        singular=np.sort(sing)[::-1].copy(),
        scale_applied=scale,
    )


def operator_norm(m: np.ndarray, tol: float = 1e-8, max_iter: int = 2000) -> float:
    """Largest singular value by power iteration on M^T M.

    Deterministic start vector; stops when the relative change of the
    estimate drops below ``tol``.
    """
    mat = np.asarray(m, dtype=float)
    if mat.size == 0:
        return 0.0
    ncol = mat.shape[1]
    v = np.ones(ncol) + np.linspace(0.0, 1.0, ncol)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = mat @ v
        new_est = np.linalg.norm(w)  # v is unit, so this estimates sigma_1
        v_next = mat.T @ w
        nrm = np.linalg.norm(v_next)
        if nrm == 0.0:
            return 0.0
        v = v_next / nrm
        if est > 0 and abs(new_est - est) <= tol * new_est:
            est = new_est
            break
        est = new_est
    return float(est)
