"""Synthetic two-sensor datasets under a spiked common-signal model.

Two aligned point clouds share one latent draw per column. Each sensor embeds
the latent into its own ambient dimension (the first ``d`` coordinates carry
signal, the rest are zero) and adds isotropic unit-variance noise. Signal
variance per spike is ``n**zeta`` exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputError

NOISE_KINDS = ("gaussian", "rademacher")
SIGNAL_KINDS = ("gaussian-spike", "circle-manifold")

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 output for the 64-bit integer ``state``."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(root_seed: int, trial: int) -> int:
    """Derive the seed for trial ``trial`` from ``root_seed``.

    This is the documented splitmix-style jump: trial t uses
    ``splitmix64(root_seed + t)``, so independent trials can be generated in
    any order (or in parallel) and still reproduce bit-identically.
    """
    if trial < 0:
        raise ConfigurationError("trial index must be nonnegative")
    return splitmix64((root_seed + trial) & _MASK64)


def snr_sigma(n: int, zeta: float) -> float:
    """Signal variance for sample count ``n`` and SNR exponent ``zeta``: n**zeta."""
    if n < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {n}")
    if zeta < 0:
        raise ConfigurationError(f"SNR exponent must be >= 0, got {zeta}")
    return float(n) ** float(zeta)


@dataclass(frozen=True)
class ModelConfig:
    """Full experiment description for one synthetic two-sensor draw.

    ``zeta1``/``zeta2`` list one SNR exponent per spike; their lengths must
    equal ``d1``/``d2``. ``gamma`` bounds the admissible aspect ratios
    n/p_k in [gamma, 1/gamma]. ``phi_warp`` is the ``a`` of the latent
    reparametrization theta -> theta + a*sin(theta) applied to sensor 2
    (circle-manifold signals only; 0 keeps the bijection the identity).
    """

    n: int
    p1: int
    p2: int
    d1: int = 0
    d2: int = 0
    zeta1: tuple = ()
    zeta2: tuple = ()
    upsilon: float = 1.0
    noise_kind: str = "gaussian"
    signal_kind: str = "gaussian-spike"
    seed: int = 0
    gamma: float = 0.05
    phi_warp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "zeta1", tuple(float(z) for z in self.zeta1))
        object.__setattr__(self, "zeta2", tuple(float(z) for z in self.zeta2))
        self.validate()

    def validate(self):
        if self.n < 2 or self.p1 < 2 or self.p2 < 2:
            raise ConfigurationError("n, p1, p2 must all be >= 2")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigurationError(f"gamma must lie in (0,1), got {self.gamma}")
        for name, p in (("p1", self.p1), ("p2", self.p2)):
            c = self.n / p
            if not (self.gamma <= c <= 1.0 / self.gamma):
                raise ConfigurationError(
                    f"aspect ratio n/{name} = {c:.4g} outside [{self.gamma}, {1/self.gamma:.4g}]"
                )
        for k, (d, p, zeta) in enumerate(
            ((self.d1, self.p1, self.zeta1), (self.d2, self.p2, self.zeta2)), start=1
        ):
            if d < 0 or d > p:
                raise ConfigurationError(f"d{k} must lie in [0, p{k}]")
            if len(zeta) != d:
                raise ConfigurationError(
                    f"zeta{k} has length {len(zeta)} but d{k} = {d}"
                )
            if any(z < 0 for z in zeta):
                raise ConfigurationError(f"all entries of zeta{k} must be >= 0")
        if self.upsilon <= 0:
            raise ConfigurationError(f"upsilon must be > 0, got {self.upsilon}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigurationError(f"noise_kind must be one of {NOISE_KINDS}")
        if self.signal_kind not in SIGNAL_KINDS:
            raise ConfigurationError(f"signal_kind must be one of {SIGNAL_KINDS}")
        if self.signal_kind == "circle-manifold":
            for k, (d, zeta) in enumerate(
                ((self.d1, self.zeta1), (self.d2, self.zeta2)), start=1
            ):
                if d != 2:
                    raise ConfigurationError(
                        f"circle-manifold signals fix d{k} = 2 (got {d})"
                    )
                if zeta[0] != zeta[1]:
                    raise ConfigurationError(
                        f"circle-manifold uses one radius per sensor; zeta{k} entries must match"
                    )

    def sigma_sq(self, sensor: int) -> float:
        """Total signal variance of one sensor: sum of n**zeta over spikes."""
        zeta = self.zeta1 if sensor == 1 else self.zeta2
        return float(sum(snr_sigma(self.n, z) for z in zeta))

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=int(seed))

    def swapped(self) -> "ModelConfig":
        """Sensor labels exchanged (X <-> Y)."""
        return replace(
            self,
            p1=self.p2,
            p2=self.p1,
            d1=self.d2,
            d2=self.d1,
            zeta1=self.zeta2,
            zeta2=self.zeta1,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["zeta1"] = list(self.zeta1)
        d["zeta2"] = list(self.zeta2)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown model config keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class PointCloudPair:
    """Aligned noisy observations plus their clean and noise parts.

    All matrices are sensors-by-columns: X = U_x + Z is p1 x n,
    Y = U_y + W_noise is p2 x n. Arrays are frozen after construction and
    safe to share read-only across threads.
    """

    X: np.ndarray
    Y: np.ndarray
    U_x: np.ndarray
    U_y: np.ndarray
    Z: np.ndarray
    W_noise: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def swapped(self) -> "PointCloudPair":
        """Sensor labels exchanged (X <-> Y)."""
        return PointCloudPair(
            X=self.Y, Y=self.X, U_x=self.U_y, U_y=self.U_x, Z=self.W_noise, W_noise=self.Z
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _draw_noise(rng: np.random.Generator, p: int, n: int, kind: str) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal((p, n))
    # Rademacher +-1 entries: zero mean, unit variance, sub-Gaussian.
    return rng.integers(0, 2, size=(p, n)).astype(float) * 2.0 - 1.0


def generate(config: ModelConfig) -> PointCloudPair:
    """Draw one aligned pair of noisy point clouds.

    Deterministic for a fixed seed. Draw order is fixed (latent, then sensor-1
    noise, then sensor-2 noise) so that regenerating reproduces bit-identical
    matrices.
    """
    config.validate()
    rng = np.random.default_rng(config.seed & _MASK64)
    n, p1, p2 = config.n, config.p1, config.p2

    u_x = np.zeros((p1, n))
    u_y = np.zeros((p2, n))
    if config.signal_kind == "gaussian-spike":
        d_lat = max(config.d1, config.d2)
        if d_lat:
            latent = rng.standard_normal((d_lat, n))
            for i, z in enumerate(config.zeta1):
                u_x[i] = np.sqrt(snr_sigma(n, z)) * latent[i]
            for i, z in enumerate(config.zeta2):
                u_y[i] = np.sqrt(snr_sigma(n, z)) * latent[i]
    else:  # circle-manifold: d = 2 per sensor, one shared angle
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        theta_y = theta + config.phi_warp * np.sin(theta)
        s1 = np.sqrt(snr_sigma(n, config.zeta1[0]))
        s2 = np.sqrt(snr_sigma(n, config.zeta2[0]))
        u_x[0], u_x[1] = s1 * np.cos(theta), s1 * np.sin(theta)
        u_y[0], u_y[1] = s2 * np.cos(theta_y), s2 * np.sin(theta_y)

    z = _draw_noise(rng, p1, n, config.noise_kind)
    w = _draw_noise(rng, p2, n, config.noise_kind)
    return PointCloudPair(
        X=_freeze(u_x + z),
        Y=_freeze(u_y + w),
        U_x=_freeze(u_x),
        U_y=_freeze(u_y),
        Z=_freeze(z),
        W_noise=_freeze(w),
    )


_PAIR_FORMAT = "fusion-spectra-pointcloud-v1"
_PAIR_FIELDS = ("X", "Y", "U_x", "U_y", "Z", "W_noise")


def dump_matrices(matrices: dict, out_dir, fmt: str = _PAIR_FORMAT,
                  seed=None, config_echo=None) -> Path:
    """Write named matrices as raw little-endian float64 column-major files.

    One ``<name>.bin`` per matrix plus ``manifest.json`` carrying dims, the
    seed, and a config echo. Returns the manifest path. Used for point-cloud
    pairs and for exporting kernel matrices in the same format.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dims = {}
    for name, arr in matrices.items():
        arr = np.asarray(arr, dtype="<f8")
        (out / f"{name}.bin").write_bytes(arr.tobytes(order="F"))
        dims[name] = list(arr.shape)
    manifest = {
        "format": fmt,
        "dtype": "<f8",
        "order": "F",
        "matrices": dims,
        "seed": seed,
        "config": config_echo,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def dump_pair(pair: PointCloudPair, out_dir, config: ModelConfig | None = None) -> Path:
    """Write a pair in the raw-matrix format; see :func:`dump_matrices`."""
    return dump_matrices(
        {name: getattr(pair, name) for name in _PAIR_FIELDS},
        out_dir,
        seed=config.seed if config is not None else None,
        config_echo=config.to_dict() if config is not None else None,
    )


def load_pair(in_dir):
    """Load a pair written by :func:`dump_pair`; returns (pair, config_or_None)."""
    src = Path(in_dir)
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise InputError(f"no manifest.json under {src}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != _PAIR_FORMAT:
        raise InputError(f"unrecognized pair format: {manifest.get('format')!r}")
    arrays = {}
    for name in _PAIR_FIELDS:
        shape = tuple(manifest["matrices"][name])
        raw = (src / f"{name}.bin").read_bytes()
        arr = np.frombuffer(raw, dtype="<f8").reshape(shape, order="F").copy()
        arrays[name] = _freeze(arr)
    config = None
    if manifest.get("config") is not None:
        config = ModelConfig.from_dict(manifest["config"])
    return PointCloudPair(**arrays), config
