"""Command-line entry point: generate, predict, simulate, compare, sweep.

Every command writes a run manifest next to its outputs: config echo, tool
version, seeds used, wall-clock per stage, and sha256 of each file written.
All randomness flows from one root seed. Exit codes: 0 success, 2
configuration error, 3 numerical/solver error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import BandwidthPolicy
from .errors import ConfigurationError, FusionSpectraError, NumericalError
from .freeconv import free_multiplicative_convolution, noise_measures
from .harness import RegimeReport, fit_rate, run_experiment
from .model import ModelConfig, dump_pair, generate

log = logging.getLogger("fusion_spectra")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("FUSION_SPECTRA_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Manifest:
    def __init__(self, command: str, args_echo: dict, seed):
        args_echo = {k: v for k, v in args_echo.items()
                     if k != "func" and isinstance(v, (str, int, float, bool, list, type(None)))}
        self.data = {
            "tool": f"fusion-spectra {__version__}",
            "command": command,
            "arguments": args_echo,
            "seed": seed,
            "seeds_used": [],
            "wall_clock_s": {},
            "outputs": [],
        }
        self._t0 = time.perf_counter()

    def stage(self, name: str):
        now = time.perf_counter()
        self.data["wall_clock_s"][name] = round(now - self._t0, 6)
        self._t0 = now

    def add_output(self, path: Path):
        self.data["outputs"].append({"path": path.name, "sha256": _sha256(path)})

    def write(self, out_dir: Path, name: str = "manifest.json") -> Path:
        path = out_dir / name
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True))
        return path


def _load_config(path: str):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}")
    if "model" not in raw:
        raise ConfigurationError("config must have a 'model' section")
    model = dict(raw["model"])
    if "seed" in raw:
        model["seed"] = raw["seed"]
    config = ModelConfig.from_dict(model)
    policy = BandwidthPolicy.from_dict(raw.get("bandwidth", {}))
    regime = raw.get("regime", {})
    trials = int(raw.get("trials", 1))
    return config, policy, regime, trials


def _apply_overrides(args, config: ModelConfig, policy: BandwidthPolicy, trials: int):
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "trials", None) is not None:
        trials = args.trials
    kind = getattr(args, "bandwidth", None) or policy.kind
    omega1, omega2 = policy.omega1, policy.omega2
    if getattr(args, "omega", None) is not None:
        omega1 = omega2 = args.omega
    if getattr(args, "omega1", None) is not None:
        omega1 = args.omega1
    if getattr(args, "omega2", None) is not None:
        omega2 = args.omega2
    policy = BandwidthPolicy(kind=kind, omega1=omega1, omega2=omega2)
    return config, policy, trials


def _write_spectra_csv(path: Path, report: RegimeReport):
    n = len(report.per_trial[0]["empirical"])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "index", "empirical", "predicted", "abs_err", "rel_err"])
        for row in report.per_trial:
            lo, hi = row["compared"]
            emp = row["empirical"]
            pred = row["predicted"]
            for i in range(n):
                if lo <= i < hi:
                    p = pred[i]
                    a = abs(emp[i] - p)
                    r = a / abs(p) if p != 0 else ""
                    writer.writerow([row["trial"], i + 1, _fmt(float(emp[i])),
                                     _fmt(float(p)), _fmt(float(a)),
                                     _fmt(float(r)) if r != "" else ""])
                else:
                    writer.writerow([row["trial"], i + 1, _fmt(float(emp[i])), "", "", ""])


def _write_report_json(path: Path, report: RegimeReport):
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))


# -- subcommands ----------------------------------------------------------------

def _cmd_generate(args) -> int:
    config, _, _, _ = _load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest("generate", {"config": args.config}, config.seed)
    pair = generate(config)
    manifest.stage("generate")
    dump_pair(pair, out, config)
    for name in ("X", "Y", "U_x", "U_y", "Z", "W_noise"):
        manifest.add_output(out / f"{name}.bin")
    manifest.add_output(out / "manifest.json")
    manifest.stage("write")
    manifest.write(out, "run_manifest.json")
    print(f"wrote point-cloud pair to {out}")
    return 0


def _cmd_predict(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.n
    p1 = int(round(n / args.c1))
    p2 = int(round(n / args.c2))
    config = ModelConfig(
        n=n, p1=p1, p2=p2, d1=1, d2=1,
        zeta1=(args.zeta1,), zeta2=(args.zeta2,),
        upsilon=args.upsilon, seed=args.seed or 0,
    )
    h1 = args.h1 if args.h1 is not None else float(p1)
    h2 = args.h2 if args.h2 is not None else float(p2)
    manifest = _Manifest("predict", vars(args).copy(), config.seed)
    nu1, nu2 = noise_measures(config, h1, h2)
    conv = free_multiplicative_convolution(nu1, nu2, n)
    front = math.exp(4.0 * args.upsilon * p1 * p2 / (h1 * h2))
    manifest.stage("solve")

    qpath = out / "quantiles.csv"
    with qpath.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "gamma"])
        for j, g in enumerate(conv.quantiles, start=1):
            writer.writerow([j, _fmt(float(front * g))])
    dpath = out / "density.csv"
    with dpath.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "density"])
        for x, d in zip(conv.grid, conv.density_values):
            writer.writerow([_fmt(float(x)), _fmt(float(d))])
    manifest.add_output(qpath)
    manifest.add_output(dpath)
    manifest.stage("write")
    manifest.write(out)
    print(f"wrote {qpath} ({n} rows) and {dpath}")
    return 0


def _matrices_for(arg: str) -> list:
    return ["ncca", "ad"] if arg == "both" else [arg]


def _cmd_simulate(args) -> int:
    config, policy, regime, trials = _load_config(args.config)
    config, policy, trials = _apply_overrides(args, config, policy, trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest("simulate", {"config": args.config, "matrix": args.matrix},
                         config.seed)
    for matrix in _matrices_for(args.matrix):
        report = run_experiment(
            config, policy, trials, matrix=matrix, jobs=args.jobs,
            C=regime.get("C", 2.0), s1=regime.get("s1", 4), s2=regime.get("s2", 4),
            delta=regime.get("delta"),
        )
        manifest.data["seeds_used"].extend(report.seeds)
        manifest.stage(f"run_{matrix}")
        suffix = "" if args.matrix != "both" else f"_{matrix}"
        rpath = out / f"report{suffix}.json"
        spath = out / f"spectra{suffix}.csv"
        _write_report_json(rpath, report)
        _write_spectra_csv(spath, report)
        manifest.add_output(rpath)
        manifest.add_output(spath)
        summary = report.summary.get("mean_of_trial_median_rel")
        print(f"{matrix}: regime={report.thresholds.regime} "
              f"median-rel={summary if summary is None else round(summary, 6)} "
              f"norms={ {k: round(float(np.mean(v)), 6) for k, v in report.norm_errors.items()} }")
    manifest.stage("write")
    manifest.write(out)
    return 0


def _cmd_compare(args) -> int:
    spath = Path(args.infile)
    if not spath.exists():
        raise ConfigurationError(f"no such spectra file: {spath}")
    with spath.open() as fh:
        reader = csv.DictReader(fh)
        required = {"trial", "index", "empirical", "predicted", "abs_err", "rel_err"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise ConfigurationError(f"spectra file missing columns: {sorted(missing)}")
        rows = [r for r in reader]
    if not rows:
        raise ConfigurationError("spectra file has no data rows")
    per_trial: dict = {}
    for r in rows:
        if r["predicted"] == "":
            continue
        t = int(r["trial"])
        per_trial.setdefault(t, []).append(
            (int(r["index"]), float(r["empirical"]), float(r["predicted"]))
        )
    if not per_trial:
        raise ConfigurationError("spectra file has no compared rows")
    medians_rel, medians_abs = [], []
    for t, triples in sorted(per_trial.items()):
        emp = np.array([e for _, e, _ in triples])
        pred = np.array([p for _, _, p in triples])
        err = np.abs(emp - pred)
        medians_abs.append(float(np.median(err)))
        nz = np.abs(pred) > 0
        medians_rel.append(float(np.median(err[nz] / np.abs(pred[nz]))))
    summary = {
        "trials": len(per_trial),
        "compared_per_trial": len(next(iter(per_trial.values()))),
        "mean_of_trial_median_abs": float(np.mean(medians_abs)),
        "mean_of_trial_median_rel": float(np.mean(medians_rel)),
        "trial_median_abs": medians_abs,
        "trial_median_rel": medians_rel,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest("compare", {"infile": str(spath)}, None)
    cpath = out / "comparison.json"
    cpath.write_text(json.dumps(summary, indent=2, sort_keys=True))
    manifest.add_output(cpath)
    manifest.stage("compare")
    manifest.write(out, "compare_manifest.json")
    print(f"compared {summary['trials']} trials: "
          f"median rel err = {summary['mean_of_trial_median_rel']:.6f}")
    return 0


def _cmd_sweep(args) -> int:
    config, policy, regime, trials = _load_config(args.config)
    config, policy, trials = _apply_overrides(args, config, policy, trials)
    ns = [int(s) for s in args.ns.split(",") if s]
    if len(ns) < 2:
        raise ConfigurationError("sweep needs at least two n values")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest("sweep", {"config": args.config, "ns": ns}, config.seed)
    base_n = config.n
    metrics: dict = {}
    for n in ns:
        scaled = ModelConfig.from_dict({
            **config.to_dict(),
            "n": n,
            "p1": int(round(config.p1 * n / base_n)),
            "p2": int(round(config.p2 * n / base_n)),
        })
        for matrix in _matrices_for(args.matrix):
            report = run_experiment(
                scaled, policy, trials, matrix=matrix, jobs=args.jobs,
                C=regime.get("C", 2.0), s1=regime.get("s1", 4),
                s2=regime.get("s2", 4), delta=regime.get("delta"),
            )
            manifest.data["seeds_used"].extend(report.seeds)
            suffix = f"_{matrix}" if args.matrix == "both" else ""
            rpath = out / f"report{suffix}_n{n}.json"
            spath = out / f"spectra{suffix}_n{n}.csv"
            _write_report_json(rpath, report)
            _write_spectra_csv(spath, report)
            manifest.add_output(rpath)
            manifest.add_output(spath)
            med = report.summary.get("mean_of_trial_median_rel")
            if med is not None and med > 0:
                metrics.setdefault((matrix, "median_rel_bulk"), []).append((n, med))
            for k, v in report.norm_errors.items():
                if k.startswith("fused_vs"):
                    metrics.setdefault((matrix, k), []).append((n, float(np.mean(v))))
        manifest.stage(f"n{n}")

    rpath = out / "rates.csv"
    with rpath.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["matrix", "metric", "n", "value", "slope"])
        for (matrix, metric), pairs in sorted(metrics.items()):
            pairs.sort()
            slope = fit_rate([p[0] for p in pairs], [p[1] for p in pairs]) \
                if len(pairs) >= 2 and all(p[1] > 0 for p in pairs) else ""
            for n, v in pairs:
                writer.writerow([matrix, metric, n, _fmt(float(v)),
                                 _fmt(float(slope)) if slope != "" else ""])
            if slope != "":
                print(f"{matrix} {metric}: slope = {slope:.4f}")
    manifest.add_output(rpath)
    manifest.stage("write")
    manifest.write(out)
    return 0


# -- argument parsing -------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusion-spectra",
        description="Kernel sensor-fusion spectra under high-dimensional noise: "
                    "simulation and random-matrix predictions.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="root RNG seed override")

    run_common = argparse.ArgumentParser(add_help=False)
    run_common.add_argument("--config", required=True, help="JSON config file")
    run_common.add_argument("--trials", type=int, default=None)
    run_common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                            help="worker pool size for trials")
    run_common.add_argument("--matrix", choices=("ncca", "ad", "both"), default="ncca")
    run_common.add_argument("--bandwidth", choices=("classic", "percentile"), default=None)
    run_common.add_argument("--omega", type=float, default=None)
    run_common.add_argument("--omega1", type=float, default=None)
    run_common.add_argument("--omega2", type=float, default=None)

    p = sub.add_parser("generate", parents=[common],
                       help="draw one synthetic pair and dump raw matrices")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("predict", parents=[common],
                       help="free-convolution quantiles and density for a noise model")
    p.add_argument("--c1", type=float, required=True, help="aspect ratio n/p1")
    p.add_argument("--c2", type=float, required=True, help="aspect ratio n/p2")
    p.add_argument("--upsilon", type=float, default=1.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--zeta1", type=float, default=0.0)
    p.add_argument("--zeta2", type=float, default=0.0)
    p.add_argument("--h1", type=float, default=None, help="bandwidth 1 (default p1)")
    p.add_argument("--h2", type=float, default=None, help="bandwidth 2 (default p2)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("simulate", parents=[common, run_common],
                       help="run the regime pipeline and write report + spectra")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", parents=[common],
                       help="summarize errors from an existing spectra.csv")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", parents=[common, run_common],
                       help="repeat a simulation over several n and fit rates")
    p.add_argument("--ns", required=True, help="comma-separated n values")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except FusionSpectraError as exc:  # pragma: no cover - catch-all
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
