"""Regime classification, the full predicted-vs-empirical pipeline, and reports.

The SNR exponent pair (zeta1, zeta2) selects one of six regimes; each regime
compares a different functional of the fused matrix against its random-matrix
prediction:

* BothLow         -- eigenvalues of n^2 N against scaled free-convolution
                     quantiles, excluding the first T outliers;
* Mixed           -- eigenvalues of n N against those of the surrogate N~
                     beyond index S (and, for extreme zeta_1, against scaled
                     quantiles of the single-sensor noise law);
* BothHigh_1/2/3  -- operator-norm distance of N to the clean reference
                     product, plus the tail bound on the reference spectrum
                     beyond index R;
* ExtremeIdentity -- operator-norm distance of N to the identity.

Swapping the sensor labels leaves every classification invariant; inputs are
swapped internally so sensor 1 always carries the larger exponent.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bandwidth import BandwidthPolicy, bandwidths_for
from .errors import ConfigurationError
from .freeconv import free_multiplicative_convolution, noise_measures
from .kernels import affinity, fuse, operator_norm, pairwise_sq_dists, spectrum
from .model import ModelConfig, generate, trial_seed
from .reference import build_reference, error_exponent, frak_depth

log = logging.getLogger("fusion_spectra")

REGIMES = ("BothLow", "Mixed", "BothHigh_1", "BothHigh_2", "BothHigh_3", "ExtremeIdentity")

# Interpretation choices that resolve notation left open by the source
# formulas; echoed into every report.
INTERPRETATION_NOTES = (
    "eigenvalue index i is matched to quantile index j = i",
    "the zeta >= 2 surrogate branch condition is read as zeta_1 >= 2",
    "K_1 branches on zeta_1 and evaluates the shifts at tau_1",
)


@dataclass(frozen=True)
class RegimeThresholds:
    """Regime label plus every exclusion count and rate exponent it implies."""

    regime: str
    zeta1: float
    zeta2: float
    T: int | None
    S: int | None
    R: int | None
    e1: float | None
    e2: float | None
    d1_frak: int | None
    d2_frak: int | None
    s1: int
    s2: int
    C: float
    delta: float | None
    rate: float | None
    extreme: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def classify(zeta1: float, zeta2: float, n: int, policy: BandwidthPolicy | None = None,
             *, C: float = 2.0, s1: int = 4, s2: int = 4,
             delta: float | None = None) -> RegimeThresholds:
    """Regime label and thresholds for an exponent pair at sample size n.

    Inputs are symmetrized so zeta1 >= zeta2. Unspecified constants default
    to C = 2 and s_k = 4 (the lower bound of the admissible range).
    """
    if zeta1 < 0 or zeta2 < 0:
        raise ConfigurationError("SNR exponents must be nonnegative")
    if n < 2:
        raise ConfigurationError("n must be >= 2")
    policy = policy or BandwidthPolicy()
    z1, z2 = max(zeta1, zeta2), min(zeta1, zeta2)

    d1f = frak_depth(z1) if z1 < 1 else None
    d2f = frak_depth(z2) if z2 < 1 else None
    e1 = error_exponent(z1) if z1 < 1 else None
    e2 = error_exponent(z2) if z2 < 1 else None

    T = S = R = None
    delta_out = delta
    extreme = False
    if z1 < 1:
        regime = "BothLow"
        if z1 < 0.5:
            T = 8
        elif z2 < 0.5:
            T = s1 + 8
        else:
            T = s1 + s2 + 8
        rate = max((z1 - 1.0) / 2.0, e1)
    elif z2 < 1:
        regime = "Mixed"
        S = 4 if z2 < 0.5 else s2 + 4
        rate = max((z2 - 1.0) / 2.0, e2)
        if delta_out is None and z1 > 1.0:
            cand = 1.05 * 2.0 / (z1 - 1.0)
            delta_out = cand if cand < 1.0 else None
        extreme = delta_out is not None and z1 > 2.0 / delta_out + 1.0
    else:
        if policy.kind == "percentile":
            R = math.ceil(C * math.log(n))
        elif z2 == 1.0:
            R = math.ceil(C * math.log(n))
        elif z2 < 2.0:
            R = math.ceil(C * n ** (z2 - 1.0))
        if z1 < 2.0:
            regime, rate = "BothHigh_1", -0.5
        elif z2 < 2.0:
            regime, rate = "BothHigh_2", -0.5
        else:
            regime, rate = "BothHigh_3", max(-1.5, -z2 / 2.0)
            if delta_out is None and z2 > 1.0:
                cand = 1.05 * 2.0 / (z2 - 1.0)
                delta_out = cand if cand < 1.0 else None
            if delta_out is not None and z2 > 2.0 / delta_out + 1.0:
                regime = "ExtremeIdentity"
                rate = None
                extreme = True
        if policy.kind == "percentile" and z2 > 1.0:
            rate = max(-0.5, 1.0 - z2)

    return RegimeThresholds(
        regime=regime, zeta1=z1, zeta2=z2, T=T, S=S, R=R, e1=e1, e2=e2,
        d1_frak=d1f, d2_frak=d2f, s1=s1, s2=s2, C=C, delta=delta_out,
        rate=rate, extreme=extreme,
    )


# -- experiment runner ---------------------------------------------------------

@dataclass
class RegimeReport:
    """Predicted-vs-empirical comparison for one config/policy/matrix run."""

    matrix: str
    thresholds: RegimeThresholds
    config: dict
    policy: dict
    trials: int
    seeds: list
    h1: list
    h2: list
    scale_power: int
    indices: np.ndarray            # compared eigenvalue indices (1-based)
    empirical_mean: np.ndarray     # trial-averaged eigenvalues at `indices`
    predicted_mean: np.ndarray     # trial-averaged targets at `indices`
    per_index_error: np.ndarray    # trial-averaged |relative error| at `indices`
    per_trial: list                # per-trial comparison rows for spectra.csv
    summary: dict
    norm_errors: dict
    tail: dict
    eigen_imag_max: float
    swapped: bool
    notes: tuple = INTERPRETATION_NOTES

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix,
            "thresholds": self.thresholds.to_dict(),
            "config": self.config,
            "policy": self.policy,
            "trials": self.trials,
            "seeds": self.seeds,
            "h1": self.h1,
            "h2": self.h2,
            "scale_power": self.scale_power,
            "indices": self.indices.tolist(),
            "empirical_mean": self.empirical_mean.tolist(),
            "predicted_mean": self.predicted_mean.tolist(),
            "per_index_error": self.per_index_error.tolist(),
            "summary": self.summary,
            "norm_errors": self.norm_errors,
            "tail": self.tail,
            "eigen_imag_max": self.eigen_imag_max,
            "swapped": self.swapped,
            "notes": list(self.notes),
        }


def _needs_swap(config: ModelConfig) -> bool:
    z1 = max(config.zeta1, default=0.0)
    z2 = max(config.zeta2, default=0.0)
    return z1 < z2


def _bulk_slice(n: int, excl: int) -> tuple[int, int]:
    """Compared index range (excl, 0.95 n] as half-open 0-based [lo, hi)."""
    return excl, int(math.floor(0.95 * n))


def _one_trial(config: ModelConfig, policy: BandwidthPolicy, th: RegimeThresholds,
               matrix: str, seed: int, solver_opts: dict) -> dict:
    """Generate one pair and produce the regime's empirical/reference payload."""
    cfg = config.with_seed(seed)
    pair = generate(cfg)
    h1, h2 = bandwidths_for(pair.X, pair.Y, policy)
    ups = cfg.upsilon
    w1 = affinity(pairwise_sq_dists(pair.X), h1, ups)
    w2 = affinity(pairwise_sq_dists(pair.Y), h2, ups)
    stack = fuse(w1, w2, h1, h2)
    fused = stack.N if matrix == "ncca" else stack.A_fused
    out: dict = {"seed": seed, "h1": h1, "h2": h2}

    regime = th.regime
    if regime == "BothLow":
        sp = spectrum(fused, power=2)
        out["empirical"] = sp.eigen_real
        out["imag_max"] = sp.eigen_imag_max
        out["predicted"] = _bothlow_prediction(cfg, h1, h2, solver_opts)
    elif regime == "Mixed":
        sp = spectrum(fused, power=1, with_singular=False)
        out["empirical"] = sp.eigen_real
        out["imag_max"] = sp.eigen_imag_max
        ref = build_reference(pair, cfg, h1, h2)
        # The N~ surrogate is shared by NCCA and AD: the transposed factor is
        # symmetric to leading order, so the product limit is the same.
        out["predicted"] = spectrum(ref.N_tilde, power=0, with_singular=False).eigen_real
        if th.extreme:
            out["predicted_quantiles"] = _mixed_extreme_prediction(cfg, h1, h2)
    elif regime.startswith("BothHigh") or regime == "ExtremeIdentity":
        sp = spectrum(fused, power=0, with_singular=False)
        out["empirical"] = sp.eigen_real
        out["imag_max"] = sp.eigen_imag_max
        ref = build_reference(pair, cfg, h1, h2)
        a1t, a2t = ref.A_tilde_s
        a1c, a2c = ref.A_tilde_c
        a1p, a2p = ref.A_s
        z1, z2 = th.zeta1, th.zeta2
        if policy.kind == "percentile":
            ref_prod = _product(a1t, a2t, matrix)
            norms = {"fused_vs_tilde_signal": operator_norm(fused - ref_prod)}
            if z2 > 1.0:
                plain = _product(a1p, a2p, matrix)
                norms["fused_vs_plain_signal"] = operator_norm(fused - plain)
        else:
            if regime == "BothHigh_1":
                ref_prod = _product(a1t, a2t, matrix)
                norms = {"fused_vs_tilde_signal": operator_norm(fused - ref_prod)}
            elif regime == "BothHigh_2":
                ref_prod = _product(a1c, a2t, matrix)
                norms = {"fused_vs_cross_signal": operator_norm(fused - ref_prod)}
            else:
                ref_prod = _product(a1c, a2c, matrix)
                norms = {"fused_vs_cross_cross": operator_norm(fused - ref_prod)}
        if regime == "ExtremeIdentity":
            norms["fused_vs_identity"] = operator_norm(fused - np.eye(cfg.n))
            # realized clean-signal separation, the event the identity bound
            # conditions on; tiny gaps explain large norms
            umin = _min_clean_gap_ratio(pair, cfg, h1, h2)
            out["min_clean_gap_exponent"] = umin
        out["predicted"] = spectrum(ref_prod, power=0, with_singular=False).eigen_real
        out["norms"] = norms
    else:  # pragma: no cover
        raise ConfigurationError(f"unknown regime {regime}")
    return out


def _product(a: np.ndarray, b: np.ndarray, matrix: str) -> np.ndarray:
    return a @ b.T if matrix == "ncca" else a @ b


def _min_clean_gap_ratio(pair, cfg, h1, h2) -> float:
    d1 = pairwise_sq_dists(pair.U_x)
    d2 = pairwise_sq_dists(pair.U_y)
    off = ~np.eye(cfg.n, dtype=bool)
    return float(min((d1[off] / h1).min(), (d2[off] / h2).min()))


_PRED_CACHE: dict = {}


def _bothlow_prediction(cfg: ModelConfig, h1: float, h2: float, solver_opts: dict) -> np.ndarray:
    """exp(4 ups p1 p2/(h1 h2)) * quantiles of the free convolution of the
    two sensor noise laws at the given bandwidths."""
    key = ("bl", cfg.n, cfg.p1, cfg.p2, cfg.upsilon, round(h1, 9), round(h2, 9),
           cfg.zeta1, cfg.zeta2)
    if key not in _PRED_CACHE:
        nu1, nu2 = noise_measures(cfg, h1, h2)
        conv = free_multiplicative_convolution(nu1, nu2, cfg.n, **(solver_opts or {}))
        front = math.exp(4.0 * cfg.upsilon * cfg.p1 * cfg.p2 / (h1 * h2))
        _PRED_CACHE[key] = front * conv.quantiles
    return _PRED_CACHE[key]


def _mixed_extreme_prediction(cfg: ModelConfig, h1: float, h2: float) -> np.ndarray:
    """exp(2 ups p2/h2) * quantiles of the sensor-2 noise law."""
    key = ("mx", cfg.n, cfg.p2, cfg.upsilon, round(h2, 9), cfg.zeta2)
    if key not in _PRED_CACHE:
        _, nu2 = noise_measures(cfg, h1, h2)
        front = math.exp(2.0 * cfg.upsilon * cfg.p2 / h2)
        _PRED_CACHE[key] = front * nu2.quantiles_upper(cfg.n)
    return _PRED_CACHE[key]


def run_experiment(config: ModelConfig, policy: BandwidthPolicy, trials: int = 1,
                   *, matrix: str = "ncca", jobs: int = 1,
                   C: float = 2.0, s1: int = 4, s2: int = 4,
                   delta: float | None = None,
                   solver_opts: dict | None = None) -> RegimeReport:
    """Run the full pipeline for one configuration and aggregate across trials.

    Per-trial seeds derive from ``config.seed`` by the splitmix jump; trial
    aggregation is order-independent, so ``jobs > 1`` distributes trials over
    a process pool without changing the report.
    """
    if matrix not in ("ncca", "ad"):
        raise ConfigurationError(f"matrix must be 'ncca' or 'ad', got {matrix}")
    if trials < 1:
        raise ConfigurationError("need at least one trial")
    swapped = _needs_swap(config)
    cfg = config.swapped() if swapped else config
    z1 = max(cfg.zeta1, default=0.0)
    z2 = max(cfg.zeta2, default=0.0)
    th = classify(z1, z2, cfg.n, policy, C=C, s1=s1, s2=s2, delta=delta)
    if th.regime == "BothLow" and cfg.noise_kind != "gaussian":
        log.info("BothLow quantile targets assume Haar noise eigenvectors; "
                 "sub-Gaussian noise run is exploratory")

    seeds = [trial_seed(cfg.seed, t) for t in range(trials)]
    opts = solver_opts or {}
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, trials)) as pool:
            results = list(pool.map(
                _one_trial,
                [cfg] * trials, [policy] * trials, [th] * trials,
                [matrix] * trials, seeds, [opts] * trials,
            ))
    else:
        results = [_one_trial(cfg, policy, th, matrix, s, opts) for s in seeds]
    return _aggregate(cfg, policy, th, matrix, trials, results, swapped)


def ad_variant(config: ModelConfig, policy: BandwidthPolicy, trials: int = 1,
               **kwargs) -> RegimeReport:
    """The identical pipeline on the alternating-diffusion matrix A1 A2."""
    kwargs.pop("matrix", None)
    return run_experiment(config, policy, trials, matrix="ad", **kwargs)


def _aggregate(cfg, policy, th, matrix, trials, results, swapped) -> RegimeReport:
    n = cfg.n
    regime = th.regime
    excl = {"BothLow": th.T, "Mixed": th.S}.get(regime)
    if excl is None:
        excl = th.R if th.R is not None else 0
    lo, hi = _bulk_slice(n, excl)
    scale_power = {"BothLow": 2, "Mixed": 1}.get(regime, 0)

    emp = np.mean([r["empirical"] for r in results], axis=0)
    if regime == "Mixed" and th.extreme:
        pred_rows = [r["predicted_quantiles"] for r in results]
    else:
        pred_rows = [r["predicted"] for r in results]
    pred = np.mean(pred_rows, axis=0)

    indices = np.arange(lo + 1, hi + 1)  # 1-based compared indices
    sel = slice(lo, hi)
    per_trial_rel = []
    per_trial_abs = []
    for r, p_row in zip(results, pred_rows):
        e = r["empirical"][sel]
        p = p_row[sel]
        per_trial_abs.append(np.abs(e - p))
        per_trial_rel.append(np.abs(e - p) / np.where(np.abs(p) > 0, np.abs(p), 1.0))
    rel_mean = np.mean(per_trial_rel, axis=0)
    abs_mean = np.mean(per_trial_abs, axis=0)

    bulk_lo = max(excl, int(math.ceil(0.05 * n)))
    bulk_sel = indices > bulk_lo
    summary = {
        "compared_lo": int(lo + 1),
        "compared_hi": int(hi),
        "compared_count": int(hi - lo),
        "excluded": int(excl),
        "median_rel_bulk": float(np.median(rel_mean[bulk_sel])) if bulk_sel.any() else None,
        "max_rel_bulk": float(np.max(rel_mean[bulk_sel])) if bulk_sel.any() else None,
        "median_abs": float(np.median(abs_mean)),
        "trial_median_rel": [float(np.median(r)) for r in per_trial_rel],
        "trial_median_abs": [float(np.median(a)) for a in per_trial_abs],
        "mean_of_trial_median_rel": float(np.mean([np.median(r) for r in per_trial_rel])),
        "mean_of_trial_median_abs": float(np.mean([np.median(a) for a in per_trial_abs])),
    }

    norm_errors: dict = {}
    for r in results:
        for k, v in r.get("norms", {}).items():
            norm_errors.setdefault(k, []).append(float(v))
    if "min_clean_gap_exponent" in results[0]:
        norm_errors["min_clean_gap_exponent"] = [
            float(r["min_clean_gap_exponent"]) for r in results
        ]

    tail: dict = {}
    if th.R is not None and regime.startswith("BothHigh"):
        cutoff = int(th.R)
        if cutoff < n:
            ref_tail = pred[cutoff:]
            if policy.kind == "percentile":
                bound = 10.0 / n
            else:
                bound = 10.0 * float(n) ** ((th.zeta2 - 3.0) / 2.0)
            tail = {
                "cutoff": cutoff,
                "max_beyond": float(np.max(ref_tail)),
                "bound_value": bound,
            }

    per_trial_rows = []
    for t, (r, p_row) in enumerate(zip(results, pred_rows)):
        per_trial_rows.append({
            "trial": t,
            "empirical": r["empirical"],
            "predicted": p_row,
            "compared": (lo, hi),
        })

    return RegimeReport(
        matrix=matrix,
        thresholds=th,
        config=cfg.to_dict(),
        policy=policy.to_dict(),
        trials=trials,
        seeds=[r["seed"] for r in results],
        h1=[float(r["h1"]) for r in results],
        h2=[float(r["h2"]) for r in results],
        scale_power=scale_power,
        indices=indices,
        empirical_mean=emp[sel],
        predicted_mean=pred[sel],
        per_index_error=rel_mean,
        per_trial=per_trial_rows,
        summary=summary,
        norm_errors=norm_errors,
        tail=tail,
        eigen_imag_max=float(max(r["imag_max"] for r in results)),
        swapped=swapped,
    )


def fit_rate(ns, values) -> float:
    """Log-log slope of ``values`` against ``ns`` (least squares)."""
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(values, dtype=float)
    if ns.size != vals.size or ns.size < 2:
        raise ConfigurationError("rate fit needs at least two (n, value) pairs")
    if np.any(vals <= 0):
        raise ConfigurationError("rate fit needs positive values")
    return float(np.polyfit(np.log(ns), np.log(vals), 1)[0])
