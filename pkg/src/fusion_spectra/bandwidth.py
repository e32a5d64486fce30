"""Bandwidth policies: classic (h = p) and adaptive percentile selection.

Bandwidths are always returned in squared-distance units so that the affinity
exp(-upsilon * d^2 / h) can be used unchanged under either policy. The
percentile policy takes the omega-percentile of the *distances* (nearest-rank,
no interpolation) and squares it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ConfigurationError, InputError

POLICY_KINDS = ("classic", "percentile")


@dataclass(frozen=True)
class BandwidthPolicy:
    kind: str = "classic"
    omega1: float = 0.5
    omega2: float = 0.5

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"bandwidth kind must be one of {POLICY_KINDS}")
        if self.kind == "percentile":
            for name, w in (("omega1", self.omega1), ("omega2", self.omega2)):
                if not (0.0 < w < 1.0):
                    raise ConfigurationError(f"{name} must lie in (0,1), got {w}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "omega1": self.omega1, "omega2": self.omega2}

    @classmethod
    def from_dict(cls, d: dict) -> "BandwidthPolicy":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown bandwidth config keys: {sorted(extra)}")
        return cls(**d)


def classic_bandwidth(p: int) -> float:
    """The classic choice h = p (already in squared-distance units)."""
    if p < 1:
        raise ConfigurationError(f"dimension must be >= 1, got {p}")
    return float(p)


def percentile_bandwidth(points: np.ndarray, omega: float) -> float:
    """Square of the nearest-rank omega-percentile of all pairwise distances.

    With m = n(n-1)/2 distances, returns the ceil(omega*m)-th smallest one,
    squared. Ties are resolved by the stable sort; an all-zero distance
    multiset is rejected (zero bandwidth).
    """
    if not (0.0 < omega < 1.0):
        raise ConfigurationError(f"omega must lie in (0,1), got {omega}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise InputError("need at least two points to pick a percentile bandwidth")
    if not np.all(np.isfinite(pts)):
        raise InputError("input matrix contains NaN or Inf")
    dists = np.sort(pdist(pts.T, metric="euclidean"), kind="stable")
    m = dists.size
    rank = max(1, math.ceil(omega * m))
    d = dists[rank - 1]
    if d <= 0.0:
        raise InputError("percentile bandwidth is zero (degenerate point cloud)")
    return float(d) ** 2


def bandwidths_for(x: np.ndarray, y: np.ndarray, policy: BandwidthPolicy) -> tuple[float, float]:
    """Bandwidth pair (h1, h2) for two noisy point clouds under ``policy``."""
    if policy.kind == "classic":
        return classic_bandwidth(x.shape[0]), classic_bandwidth(y.shape[0])
    return (
        percentile_bandwidth(x, policy.omega1),
        percentile_bandwidth(y, policy.omega2),
    )
