"""Clean-signal and surrogate reference matrices for the regime theorems.

Builds, from the clean/noise split of a synthetic pair: the clean affinities
W_{k,s}; their lazy-walk rescalings W~_{k,s} = e^{-2 ups p/h} W_{k,s} +
(1 - e^{-2 ups p/h}) I with transitions A~_{k,s}; the plain clean transitions
A_{k,s}; the signal-noise cross variants W~_{k,c}, A~_{k,c}; the noise-Gram
surrogates T_k; and the mixed-regime surrogate N~. Also the entrywise
Taylor-expansion shift matrices Sh and the low-SNR kernel surrogate K_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .kernels import affinity, operator_norm, pairwise_sq_dists, transition
from .freeconv import scalars
from .model import ModelConfig, PointCloudPair


@dataclass(frozen=True)
class ReferenceStack:
    """Reference matrices per sensor (index 0 = sensor 1, 1 = sensor 2)."""

    W_s: tuple
    W_tilde_s: tuple
    A_tilde_s: tuple
    A_s: tuple
    W_tilde_c: tuple
    A_tilde_c: tuple
    T1: np.ndarray
    T2: np.ndarray
    N_tilde: np.ndarray | None
    h1: float
    h2: float
    branch: str


def _cross_inner(u: np.ndarray, z: np.ndarray) -> np.ndarray:
    # (u_i - u_j)^T (z_i - z_j) = C_ii + C_jj - C_ij - C_ji with C = U^T Z
    c = u.T @ z
    d = np.diag(c)
    q = d[:, None] + d[None, :] - c - c.T
    np.fill_diagonal(q, 0.0)
    return q


def build_reference(pair: PointCloudPair, config: ModelConfig, h1: float, h2: float) -> ReferenceStack:
    """All clean-reference matrices for one generated pair at bandwidths (h1, h2).

    The clean affinities use the same bandwidth and kernel constant as the
    noisy run. The cross variants use exp(-2 ups (u_i-u_j)^T (z_i-z_j)/h_k),
    which reduces to the classic form at h = p. N~ uses the zeta_1 branch:
    the scaled-shifted clean walk for 1 <= zeta_1 < 2, the cross walk for
    zeta_1 >= 2; it is None when zeta_1 < 1.
    """
    if pair.U_x is None or pair.U_y is None:
        raise InputError("pair is missing its clean signal parts")
    ups = config.upsilon
    sc = scalars(config, h1, h2)
    w_s, w_tilde_s, a_tilde_s, a_s, w_tilde_c, a_tilde_c = [], [], [], [], [], []
    for (u, z, p, h) in (
        (pair.U_x, pair.Z, config.p1, h1),
        (pair.U_y, pair.W_noise, config.p2, h2),
    ):
        sq = pairwise_sq_dists(u)
        ws = affinity(sq, h, ups)
        lam = math.exp(-2.0 * ups * p / h)
        wts = lam * ws + (1.0 - lam) * np.eye(config.n)
        ats, _ = transition(wts)
        as_, _ = transition(ws)
        # W~_c = W~_s o exp(-2 ups (u_i-u_j)^T(z_i-z_j)/h): the factors are
        # separately exp-overflowing at large SNR, but their combined
        # exponent -(||u_i-u_j||^2 + 2(u_i-u_j)^T(z_i-z_j))/h is bounded
        # below by -||z_i-z_j||^2/h, so exponentiate the sum.
        cross = _cross_inner(u, z)
        wtc = lam * np.exp(-ups * (sq + 2.0 * cross) / h)
        np.fill_diagonal(wtc, 1.0)
        atc, _ = transition(wtc)
        w_s.append(ws)
        w_tilde_s.append(wts)
        a_tilde_s.append(ats)
        a_s.append(as_)
        w_tilde_c.append(wtc)
        a_tilde_c.append(atc)

    gram1 = pair.Z.T @ pair.Z
    gram2 = pair.W_noise.T @ pair.W_noise
    coef1 = 2.0 * ups * math.exp(-ups * sc.tau1 * config.p1 / h1) / h1
    coef2 = 2.0 * ups * math.exp(-ups * sc.tau2 * config.p2 / h2) / h2
    t1 = coef1 * gram1 + sc.varsigma1_h * np.eye(config.n)
    t2 = coef2 * gram2 + sc.varsigma2_h * np.eye(config.n)

    zeta1 = max(config.zeta1, default=0.0)
    n_tilde = None
    branch = "none"
    if zeta1 >= 1.0:
        front = math.exp(2.0 * ups * config.p2 / h2)
        first = a_tilde_s[0] if zeta1 < 2.0 else a_tilde_c[0]
        branch = "signal" if zeta1 < 2.0 else "cross"
        n_tilde = front * (first @ t2)

    return ReferenceStack(
        W_s=tuple(w_s),
        W_tilde_s=tuple(w_tilde_s),
        A_tilde_s=tuple(a_tilde_s),
        A_s=tuple(a_s),
        W_tilde_c=tuple(w_tilde_c),
        A_tilde_c=tuple(a_tilde_c),
        T1=t1,
        T2=t2,
        N_tilde=n_tilde,
        h1=float(h1),
        h2=float(h2),
        branch=branch,
    )


# -- entrywise Taylor expansion shift matrices --------------------------------

def frak_depth(zeta: float) -> int:
    """Expansion depth: ceil(1/(1-zeta)) + 1, defined for zeta < 1."""
    if zeta >= 1.0:
        raise ConfigurationError(f"expansion depth defined for zeta < 1, got {zeta}")
    return math.ceil(1.0 / (1.0 - zeta)) + 1


def error_exponent(zeta: float) -> float:
    """Surrogate error exponent (zeta-1)*(ceil(1/(1-zeta))+1) + 1 (negative)."""
    return (zeta - 1.0) * frak_depth(zeta) + 1.0


@dataclass(frozen=True)
class ShMatrices:
    """Low-rank shift matrices of the kernel expansion around tau, plus K_1.

    Phi holds phi_i = ||x_i||^2/p - (1 + sigma^2/p). Sh0/Sh1/Sh2 are the
    order-0/1/2 terms (rank 1 / <=2 / <=3); Sh_d collects orders 3..frak_d-1
    of the rank-structured deviation and is None below zeta = 0.5.
    """

    phi: np.ndarray
    sh0: np.ndarray
    sh1: np.ndarray
    sh2: np.ndarray
    sh_d: np.ndarray | None
    k1: np.ndarray
    tau: float
    zeta: float
    frak_d: int
    sensor: int


def build_sh(pair: PointCloudPair, config: ModelConfig, sensor: int) -> ShMatrices:
    """Shift matrices and the K_1 surrogate for one sensor in the low-SNR regime.

    Requires the sensor's SNR exponent < 1 and at most one spike (the
    expansion is stated for d = 1; pure noise d = 0 also works).
    """
    if sensor not in (1, 2):
        raise ConfigurationError("sensor must be 1 or 2")
    x = pair.X if sensor == 1 else pair.Y
    u = pair.U_x if sensor == 1 else pair.U_y
    p = config.p1 if sensor == 1 else config.p2
    d = config.d1 if sensor == 1 else config.d2
    zetas = config.zeta1 if sensor == 1 else config.zeta2
    if d > 1:
        raise ConfigurationError("kernel expansion implemented for d <= 1 per sensor")
    zeta = zetas[0] if zetas else 0.0
    if zeta >= 1.0:
        raise ConfigurationError(
            f"sensor {sensor} has zeta = {zeta} >= 1: outside the expansion regime"
        )
    n = config.n
    ups = config.upsilon
    sigma_sq = config.sigma_sq(sensor)
    tau = 2.0 * (sigma_sq / p + 1.0)
    f_tau = math.exp(-ups * tau)

    def fderiv(t):  # t-th derivative of exp(-ups*x) at tau; equals ell_{k,t}
        return (-ups) ** t * f_tau

    phi = (x * x).sum(axis=0) / p - (1.0 + sigma_sq / p)
    ones = np.ones(n)
    sh0 = f_tau * np.outer(ones, ones)
    sh1 = fderiv(1) * (np.outer(ones, phi) + np.outer(phi, ones))
    phi2 = phi * phi
    sh2 = (fderiv(2) / 2.0) * (
        np.outer(ones, phi2)
        + np.outer(phi2, ones)
        + 2.0 * np.outer(phi, phi)
        + 4.0 * ((sigma_sq + 1.0) ** 2 + p) / p**2 * np.outer(ones, ones)
    )

    dk = frak_depth(zeta)
    sh_d = None
    if zeta >= 0.5:
        # Deviation of the kernel argument from tau, keeping only the
        # rank-structured generators {1, Phi, signal Gram}: entrywise powers
        # of a rank <= 3 matrix stay low-rank, which is what the rank bound
        # rank(Sh_d) <= s_1 <= C 4^frak_d measures.
        core = np.outer(ones, phi) + np.outer(phi, ones) - (2.0 / p) * (u.T @ u)
        sh_d = np.zeros((n, n))
        hadamard = core * core * core
        for k in range(3, dk):
            sh_d += (fderiv(k) / math.factorial(k)) * hadamard
            hadamard = hadamard * core

    sc = scalars(config, float(config.p1), float(config.p2))
    varsigma = sc.varsigma1 if sensor == 1 else sc.varsigma2
    k1 = (-2.0 * fderiv(1) / p) * (x.T @ x) + varsigma * np.eye(n) + sh0 + sh1 + sh2
    if sh_d is not None:
        k1 = k1 + sh_d
    return ShMatrices(
        phi=phi, sh0=sh0, sh1=sh1, sh2=sh2, sh_d=sh_d, k1=k1,
        tau=tau, zeta=zeta, frak_d=dk, sensor=sensor,
    )


def surrogate_error(w: np.ndarray, sh: ShMatrices) -> float:
    """Operator-norm deviation ||W - K_1|| of the Taylor surrogate."""
    w = np.asarray(w, dtype=float)
    if w.shape != sh.k1.shape:
        raise InputError(f"shape mismatch: W is {w.shape}, K1 is {sh.k1.shape}")
    return operator_norm(w - sh.k1)


def numerical_rank(m: np.ndarray, rel_tol: float = 1e-8) -> int:
    """Rank counted from singular values above rel_tol * sigma_1."""
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
