"""Spectral measures on the nonnegative reals with Stieltjes/M transforms.

A measure is stored as a piecewise-linear CDF (cells with masses) plus exact
point atoms. Marchenko-Pastur measures are discretized with the square-root
substitution x = center - radius*cos(theta), which clusters cells at the
edges and tames the 1/x factor at a hard zero edge; they also carry a
closed-form Stieltjes transform.

Conventions. ``marchenko_pastur(c, s2)`` is the limiting eigenvalue law of
the n x n Gram matrix (s2/p) Z^T Z with c = n/p and unit-variance noise Z.
Its continuous density is sqrt((lam_p - x)(x - lam_m)) / (2 pi c s2 x) on
[lam_m, lam_p] with lam_pm = s2*(1 +- sqrt(c))^2, and the point mass at 0 is
(1 - 1/c)_+ (the matrix is full rank for n < p). ``atom_convention="companion"``
instead places the (1 - c)_+ atom of the p x p companion, kept behind this
flag for comparison; the Monte-Carlo moment oracle validates the default.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, InputError

DEFAULT_CELLS = 4096
ATOM_CONVENTIONS = ("gram", "companion")


def _mp_companion_stieltjes(c: float, s2: float):
    """Closed-form Stieltjes transform of marchenko_pastur(c, s2).

    Built from the classical MP transform of (1/n) Z Z^T via the companion
    relation; branch chosen so Im m > 0 whenever Im z > 0.
    """
    lam = 1.0 / c  # classical aspect ratio of the p x p side

    def m(z):
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        flip = z.imag < 0
        zz = np.where(flip, np.conj(z), z)
        za = zz / s2                    # undo the s2 scaling
        w = za / c                      # argument of the classical transform
        b = 1.0 - lam - w
        disc = np.sqrt(b * b - 4.0 * lam * w)
        r1 = (b + disc) / (2.0 * lam * w)
        r2 = (b - disc) / (2.0 * lam * w)
        # Upper half plane: exactly one root has positive imaginary part.
        mc = np.where(r1.imag > 0, r1, r2)
        # Real arguments outside the support: pick the branch with m -> -1/w.
        real = np.abs(w.imag) == 0.0
        if np.any(real):
            hi_side = w.real > 1.0 + lam
            mc = np.where(real & hi_side, r1, mc)
            mc = np.where(real & ~hi_side, r2, mc)
        ma = mc / (c * c) - (1.0 - 1.0 / c) / za
        out = ma / s2
        out = np.where(flip, np.conj(out), out)
        return out[0] if scalar else out

    return m


class Measure:
    """Probability measure: continuous cells plus point atoms.

    ``cell_edges`` (K+1 ascending) and ``cell_masses`` (K nonnegative) define
    a piecewise-linear CDF; ``atoms`` is a sequence of (location, mass) pairs.
    """

    def __init__(self, cell_edges, cell_masses, atoms=(), stieltjes_fn=None, kind="grid"):
        edges = np.asarray(cell_edges, dtype=float)
        masses = np.asarray(cell_masses, dtype=float)
        if edges.size:
            if edges.ndim != 1 or edges.size != masses.size + 1:
                raise InputError("cell_edges must have one more entry than cell_masses")
            if np.any(np.diff(edges) <= 0):
                raise InputError("cell_edges must be strictly increasing")
            if np.any(masses < -1e-12):
                raise InputError("cell masses must be nonnegative")
            masses = np.clip(masses, 0.0, None)
        elif masses.size:
            raise InputError("cell_masses given without cell_edges")
        self.cell_edges = edges
        self.cell_masses = masses
        self.atoms = tuple(sorted((float(a), float(m)) for a, m in atoms if m > 0.0))
        if not edges.size and not self.atoms:
            raise InputError("measure has no mass")
        self.kind = kind
        self._stieltjes_fn = stieltjes_fn
        self._xs, self._cdf_vals = self._build_cdf()

    # -- construction -----------------------------------------------------

    @classmethod
    def marchenko_pastur(cls, c: float, s2: float, cells: int = DEFAULT_CELLS,
                         atom_convention: str = "gram") -> "Measure":
        if c <= 0:
            raise ConfigurationError(f"aspect ratio c must be > 0, got {c}")
        if s2 <= 0:
            raise ConfigurationError(f"scale s2 must be > 0, got {s2}")
        if atom_convention not in ATOM_CONVENTIONS:
            raise ConfigurationError(f"atom_convention must be one of {ATOM_CONVENTIONS}")
        sqc = np.sqrt(c)
        lam_m = s2 * (1.0 - sqc) ** 2
        lam_p = s2 * (1.0 + sqc) ** 2
        center = 0.5 * (lam_p + lam_m)
        radius = 0.5 * (lam_p - lam_m)
        theta_edges = np.linspace(0.0, np.pi, cells + 1)
        theta_mid = 0.5 * (theta_edges[:-1] + theta_edges[1:])
        x_edges = center - radius * np.cos(theta_edges)
        x_edges[0], x_edges[-1] = lam_m, lam_p
        x_mid = center - radius * np.cos(theta_mid)
        dtheta = np.pi / cells
        masses = radius * radius * np.sin(theta_mid) ** 2 / (2.0 * np.pi * c * s2 * x_mid) * dtheta
        if atom_convention == "gram":
            atom_mass = max(0.0, 1.0 - 1.0 / c)
            fn = _mp_companion_stieltjes(c, s2)
        else:
            atom_mass = max(0.0, 1.0 - c)
            fn = None  # quadrature keeps this variant self-consistent
        masses *= (1.0 - atom_mass) / masses.sum()
        atoms = ((0.0, atom_mass),) if atom_mass > 0 else ()
        return cls(x_edges, masses, atoms=atoms, stieltjes_fn=fn, kind="mp")

    @classmethod
    def point_mass(cls, location: float) -> "Measure":
        loc = float(location)

        def fn(z):
            return 1.0 / (loc - np.asarray(z, dtype=complex))

        return cls(np.empty(0), np.empty(0), atoms=((loc, 1.0),), stieltjes_fn=fn, kind="point")

    @classmethod
    def from_grid(cls, x, density, atoms=(), kind="grid") -> "Measure":
        """Measure from density samples on a grid (trapezoid cells, renormalized)."""
        x = np.asarray(x, dtype=float)
        rho = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.size < 2 or x.shape != rho.shape:
            raise InputError("grid and density must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise InputError("grid must be strictly increasing")
        if np.any(rho < 0):
            rho = np.clip(rho, 0.0, None)
        masses = 0.5 * (rho[:-1] + rho[1:]) * np.diff(x)
        atom_mass = float(sum(m for _, m in atoms))
        total = masses.sum()
        if total <= 0 and atom_mass <= 0:
            raise InputError("density integrates to zero")
        if total > 0:
            masses *= (1.0 - atom_mass) / total
        return cls(x, masses, atoms=atoms, kind=kind)

    def shift(self, a: float) -> "Measure":
        """The shifted measure T_a mu (support translated by a)."""
        base_fn = self._stieltjes_fn
        fn = (lambda z, _f=base_fn, _a=a: _f(np.asarray(z, dtype=complex) - _a)) if base_fn else None
        edges = self.cell_edges + a if self.cell_edges.size else self.cell_edges
        atoms = tuple((loc + a, m) for loc, m in self.atoms)
        return Measure(edges, self.cell_masses.copy(), atoms=atoms, stieltjes_fn=fn, kind="shifted")

    # -- CDF / quantiles ---------------------------------------------------

    def _build_cdf(self):
        # Merge atoms into the piecewise-linear CDF as vertical jumps.
        xs: list = []
        vals: list = []
        if self.cell_edges.size:
            cum = np.concatenate([[0.0], np.cumsum(self.cell_masses)])
            xs = list(self.cell_edges)
            vals = list(cum)
        for loc, mass in self.atoms:
            if not xs:
                xs = [loc, loc]
                vals = [0.0, mass]
                continue
            idx = int(np.searchsorted(np.asarray(xs), loc, side="right"))
            before = np.interp(loc, xs, vals) if xs[0] <= loc <= xs[-1] else (
                0.0 if loc < xs[0] else vals[-1]
            )
            xs.insert(idx, loc)
            vals.insert(idx, before)
            xs.insert(idx + 1, loc)
            vals.insert(idx + 1, before + mass)
            # push the jump through everything to the right
            for k in range(idx + 2, len(vals)):
                vals[k] += mass
        return np.asarray(xs, dtype=float), np.asarray(vals, dtype=float)

    def total_mass(self) -> float:
        return float(self._cdf_vals[-1])

    def support(self) -> tuple[float, float]:
        los, his = [], []
        if self.cell_masses.size:
            pos = np.flatnonzero(self.cell_masses > 0)
            if pos.size:
                los.append(self.cell_edges[pos[0]])
                his.append(self.cell_edges[pos[-1] + 1])
        if self.atoms:
            los.append(min(a for a, _ in self.atoms))
            his.append(max(a for a, _ in self.atoms))
        return min(los), max(his)

    def mean(self) -> float:
        out = sum(loc * m for loc, m in self.atoms)
        if self.cell_masses.size:
            mids = 0.5 * (self.cell_edges[:-1] + self.cell_edges[1:])
            out += float(mids @ self.cell_masses)
        return float(out)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.interp(x, self._xs, self._cdf_vals, left=0.0, right=self.total_mass())

    def quantile_upper(self, j: int, n: int) -> float:
        """gamma_mu(j): the location with upper-tail mass j/n.

        j = 0 returns the upper support edge, j = n the lower one.
        """
        if n < 1:
            raise ConfigurationError(f"n must be >= 1, got {n}")
        if j < 0 or j > n:
            raise ConfigurationError(f"quantile index j = {j} outside [0, {n}]")
        lo, hi = self.support()
        if j == 0:
            return float(hi)
        if j == n:
            return float(lo)
        target = self.total_mass() * (1.0 - j / n)
        return float(self._inv_cdf(np.asarray([target]))[0])

    def quantiles_upper(self, n: int) -> np.ndarray:
        """gamma_mu(j) for j = 1..n (nonincreasing)."""
        if n < 1:
            raise ConfigurationError(f"n must be >= 1, got {n}")
        j = np.arange(1, n + 1)
        targets = self.total_mass() * (1.0 - j / n)
        out = self._inv_cdf(targets)
        lo, hi = self.support()
        out[0] = min(out[0], hi)
        out[-1] = max(min(out[-1], out[0]), lo)
        return out

    def _inv_cdf(self, targets: np.ndarray) -> np.ndarray:
        xs, F = self._xs, self._cdf_vals
        t = np.clip(targets, 0.0, F[-1])
        idx = np.searchsorted(F, t, side="left")
        idx = np.clip(idx, 1, len(F) - 1)
        f0, f1 = F[idx - 1], F[idx]
        x0, x1 = xs[idx - 1], xs[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(f1 > f0, (t - f0) / np.where(f1 > f0, f1 - f0, 1.0), 1.0)
        return x0 + frac * (x1 - x0)

    # -- transforms ---------------------------------------------------------

    def density_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell midpoints and average density per cell (continuous part)."""
        if not self.cell_masses.size:
            return np.empty(0), np.empty(0)
        widths = np.diff(self.cell_edges)
        mids = 0.5 * (self.cell_edges[:-1] + self.cell_edges[1:])
        return mids, self.cell_masses / widths

    def stieltjes(self, z) -> np.ndarray:
        """m_mu(z) = int (x - z)^-1 dmu(x) for complex z off the support."""
        if self._stieltjes_fn is not None:
            return self._stieltjes_fn(z)
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        zz = np.atleast_1d(z)
        out = np.zeros_like(zz)
        if self.cell_masses.size:
            mids, _ = self.density_grid()
            chunk = max(1, int(2e6 / max(mids.size, 1)))
            for i in range(0, zz.size, chunk):
                blk = zz[i:i + chunk, None]
                out[i:i + chunk] += (self.cell_masses[None, :] / (mids[None, :] - blk)).sum(axis=1)
        for loc, mass in self.atoms:
            out += mass / (loc - zz)
        return out[0] if scalar else out

    def m_transform(self, z) -> np.ndarray:
        """M_mu(z) = z m_mu(z) / (1 + z m_mu(z))."""
        z = np.asarray(z, dtype=complex)
        zm = z * self.stieltjes(z)
        return zm / (1.0 + zm)
