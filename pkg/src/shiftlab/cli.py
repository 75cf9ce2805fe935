"""Command-line laboratory: deterministic runs, JSON reports, CSV plot data.

Every command echoes its full configuration into the report and derives
all randomness from the --seed flag, so a fixed command line is
byte-reproducible.  Exit codes: 0 all checks passed, 1 a check failed,
2 bad configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import factor as factor_mod
from . import markers, matching, measures, speedups, typeiii
from .sampling import SeedStream, sample_window, window_to_csv

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_SEED = 7


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = DEFAULT_SEED
    out_dir: Path = field(default_factory=lambda: Path(
        os.environ.get("SHIFTLAB_OUT", ".")))


@dataclass
class Report:
    version: str
    config: dict
    metrics: list
    artifacts: list

    def to_json(self) -> str:
        return json.dumps(
            {"version": self.version, "config": self.config,
             "metrics": self.metrics, "artifacts": self.artifacts},
            sort_keys=True, indent=2) + "\n"

    @property
    def all_passed(self) -> bool:
        return all(m.get("pass", True) for m in self.metrics)


def emit_plot_data(series: dict[str, list[tuple[float, float]]],
                   path: Path) -> Path:
    """Write named (x, y) series as CSV with header ``series,x,y``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "x", "y"])
        for name in sorted(series):
            for x, y in series[name]:
                writer.writerow([name, repr(float(x)), repr(float(y))])
    return path


def parse_plot_data(path: Path) -> dict[str, list[tuple[float, float]]]:
    out: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["series", "x", "y"]:
            raise ValueError(f"unexpected plot-data header {header!r}")
        for name, x, y in reader:
            out.setdefault(name, []).append((float(x), float(y)))
    return out


def _measure_from_params(params: dict) -> measures.FiniteProductMeasure:
    if params.get("measure"):
        return measures.parse_measure(params["measure"])
    family = params.get("family")
    if family == "nu_c":
        return measures.make_nu_c(params["c"])
    if family == "iid":
        return measures.iid_binary(params["p0"])
    if family == "mu":
        return measures.make_mu_pc(
            measures.SequenceSpec(params["p"], measures.inverse_sqrt),
            params["c"])
    raise ValueError(f"no measure specified (family={family!r})")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_measure(cfg: RunConfig) -> Report:
    m = _measure_from_params(cfg.params)
    n = cfg.params["n"]
    ks = cfg.params.get("ks") or [1, 2, 4, 8]
    metrics = []
    delta = measures.doeblin_delta(m, (-n, n))
    metrics.append({"name": "doeblin_delta", "value": delta,
                    "pass": delta > 0.0})
    series = {}
    for k in ks:
        rec = measures.shift_sum_report(m, k, n)
        small = abs(rec["tail_increment"]) <= max(1e-4 * rec["value"], 1e-15)
        metrics.append({"name": f"kakutani_shift_sum_k{k}",
                        "value": rec["value"],
                        "tail_increment": rec["tail_increment"],
                        "pass": small})
        decades = [10 ** e for e in range(1, int(math.log10(n)) + 1)]
        series[f"kakutani_k{k}"] = [
            (dn, measures.kakutani_shift_sum(m, k, dn)) for dn in decades]
    if len(m.alphabet) == 2:
        rec = factor_mod.bias_square_report(m, n)
        metrics.append({"name": "bias_square_sum", "value": rec["value"],
                        "tail_increment": rec["tail_increment"],
                        "pass": abs(rec["tail_increment"])
                        <= max(1e-4 * rec["value"], 1e-15)})
    art = emit_plot_data(series, cfg.out_dir / "measure_check.csv")
    return _finish(cfg, metrics, [art])


def _cmd_factor(cfg: RunConfig) -> Report:
    m = _measure_from_params(cfg.params)
    n = cfg.params["n"]
    seeds = SeedStream(cfg.seed)
    result = factor_mod.run_iid_factor(m, (0, n - 1), seeds,
                                       radius=cfg.params.get("radius", 64))
    diag = result.diagnostics
    metrics = [
        {"name": "q", "value": diag["q"], "pass": diag["q"] > 0},
        {"name": "d", "value": diag["d"], "pass": True},
        {"name": "beta0", "value": diag["beta0"], "pass": True},
        {"name": "censor_fraction", "value": diag["censor_fraction"],
         "tolerance": 0.05, "pass": diag["censor_fraction"] < 0.05},
    ]
    for t in diag["tests"]:
        metrics.append({"name": t["name"], "statistic": t["statistic"],
                        "p_value": t["p_value"], "pass": t["pass"]})
    return _finish(cfg, metrics, [])


def _cmd_match(cfg: RunConfig) -> Report:
    m = _measure_from_params(cfg.params)
    n = cfg.params["n"]
    seeds = SeedStream(cfg.seed)
    w = sample_window(m, (0, n - 1), seeds, label="match-input")
    artifacts = []
    if cfg.params.get("dump_window"):
        dump = cfg.out_dir / str(cfg.params["dump_window"])
        dump.parent.mkdir(parents=True, exist_ok=True)
        window_to_csv(w, dump)
        artifacts.append(dump)
    zprime, _ = matching.good_to_ab(w)
    q = markers.good_prob_lower(m, (0, n - 1))
    d = matching.required_d(q)
    assignment = matching.meshalkin_match(zprime, d)
    assignment.check_capacity()

    out_rows = cfg.out_dir / "matching_assignment.csv"
    out_rows.parent.mkdir(parents=True, exist_ok=True)
    with open(out_rows, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["b_index", "a_index", "round"])
        for b, a, r in zip(assignment.b_indices, assignment.a_indices,
                           assignment.rounds):
            writer.writerow([int(b), int(a), int(r)])

    dist = assignment.a_indices - assignment.b_indices
    hist = np.bincount(dist.astype(np.int64)) if len(dist) else np.zeros(1, int)
    art2 = emit_plot_data(
        {"radius_histogram": [(k, int(c)) for k, c in enumerate(hist) if c]},
        cfg.out_dir / "radius_histogram.csv")
    frac_censored = len(assignment.unmatched) / max(1, int((~zprime.isa).sum()))
    metrics = [
        {"name": "q", "value": q, "pass": q > 0},
        {"name": "d", "value": d, "pass": True},
        {"name": "matched_pairs", "value": int(len(assignment.b_indices)),
         "pass": True},
        {"name": "censored_b_fraction", "value": frac_censored,
         "tolerance": 0.25, "pass": frac_censored < 0.25},
    ]
    return _finish(cfg, metrics, [out_rows, art2, *artifacts])


def _cmd_typeiii(cfg: RunConfig) -> Report:
    lam = cfg.params["lam"]
    lam_prime = cfg.params["lam_prime"]
    n_max = cfg.params["n"]
    samples = cfg.params["samples"]
    spec = typeiii.TypeIIISpec(lam)
    hspec = typeiii.HMapSpec(lam, lam_prime)
    rng = SeedStream(cfg.seed).generator("typeiii-ratios")

    log_lp = math.log(lam_prime)
    values = []
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(0, n_max))
        pieces = hspec.support_pieces()
        lo, hi = pieces[int(rng.integers(0, len(pieces)))]
        v = float(rng.uniform(lo, hi))
        try:
            r = typeiii.ratio_profile(spec, hspec, n, v)
        except ValueError:
            continue
        lr = math.log(r)
        values.append(lr)
        j = round(lr / log_lp)
        worst = max(worst, abs(lr - j * log_lp))
    hist, edges = np.histogram(values, bins=41)
    centers = 0.5 * (edges[:-1] + edges[1:])
    art = emit_plot_data(
        {"log_rn_histogram": list(zip(centers.tolist(), hist.tolist()))},
        cfg.out_dir / "typeiii_log_rn.csv")
    metrics = [
        {"name": "lattice_deviation", "value": worst, "tolerance": 1e-9,
         "pass": worst <= 1e-9},
        {"name": "sampled_ratios", "value": len(values), "pass": True},
    ]
    return _finish(cfg, metrics, [art])


def _cmd_index(cfg: RunConfig) -> Report:
    rep = speedups.index_report(cfg.params["c"], cfg.params["d_assumed"],
                                cfg.params["kmax"])
    rows_path = cfg.out_dir / "index_scan.csv"
    rows_path.parent.mkdir(parents=True, exist_ok=True)
    with open(rows_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "c_scaled", "S", "partial_dissip",
                         "tail_slope", "classification"])
        for row in rep.rows:
            writer.writerow([
                row.k, repr(row.c_scaled), repr(row.hellinger),
                repr(row.dissipativity_partial), repr(row.tail_slope),
                "conservative-proxy" if row.conservative_proxy
                else "dissipative-proxy"])
    metrics = [
        {"name": "implied_index", "value": rep.implied_index, "pass": True},
        {"name": "kmax", "value": cfg.params["kmax"], "pass": True},
    ]
    return _finish(cfg, metrics, [rows_path])


def _finish(cfg: RunConfig, metrics: list, artifacts: list) -> Report:
    report = Report(
        version=__version__,
        config={"command": cfg.command, "seed": cfg.seed,
                "params": {k: (str(v) if isinstance(v, Path) else v)
                           for k, v in cfg.params.items()},
                "out_dir": str(cfg.out_dir)},
        metrics=metrics,
        artifacts=[str(a) for a in artifacts],
    )
    out = cfg.params.get("out")
    path = Path(out) if out else cfg.out_dir / f"{cfg.command}_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json())
    report.artifacts.append(str(path))
    return report


_DISPATCH = {
    "measure": _cmd_measure,
    "factor": _cmd_factor,
    "match": _cmd_match,
    "typeiii": _cmd_typeiii,
    "index": _cmd_index,
}


def run(config: RunConfig) -> Report:
    """Dispatch a validated configuration to its command."""
    return _DISPATCH[config.command](config)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shiftlab",
        description="nonsingular Bernoulli shift laboratory")
    ap.add_argument("--config", type=Path,
                    help="JSON file of defaults; flags override")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out-dir", type=Path, default=None)
        p.add_argument("--out", type=Path, default=None,
                       help="report path (default <out-dir>/<cmd>_report.json)")

    pm = sub.add_parser("measure").add_subparsers(dest="sub", required=True) \
        .add_parser("check")
    pm.add_argument("--family", choices=["iid", "nu_c", "mu"])
    pm.add_argument("--measure", help="compact spec, e.g. iid:0.3")
    pm.add_argument("--c", type=float)
    pm.add_argument("--p0", type=float)
    pm.add_argument("--p", type=float)
    pm.add_argument("--n", type=int, required=True)
    pm.add_argument("--k", type=int, action="append", dest="ks")
    common(pm)

    pf = sub.add_parser("factor").add_subparsers(dest="sub", required=True) \
        .add_parser("run")
    pf.add_argument("--measure", required=True)
    pf.add_argument("--n", type=int, required=True)
    pf.add_argument("--radius", type=int, default=64,
                    help="fair-bit half-window of the split code")
    common(pf)

    pma = sub.add_parser("match").add_subparsers(dest="sub", required=True) \
        .add_parser("run")
    pma.add_argument("--measure", required=True)
    pma.add_argument("--n", type=int, required=True)
    pma.add_argument("--dump-window", dest="dump_window",
                     help="also export the sampled window as index,value CSV")
    common(pma)

    pt = sub.add_parser("typeiii").add_subparsers(dest="sub", required=True) \
        .add_parser("ratios")
    pt.add_argument("--lambda", dest="lam", type=float, required=True)
    pt.add_argument("--lambda-prime", dest="lam_prime", type=float,
                    required=True)
    pt.add_argument("--n", type=int, default=40)
    pt.add_argument("--samples", type=int, default=10000)
    common(pt)

    pi = sub.add_parser("index").add_subparsers(dest="sub", required=True) \
        .add_parser("scan")
    pi.add_argument("--c", type=float, required=True)
    pi.add_argument("--d-assumed", dest="d_assumed", type=float, required=True)
    pi.add_argument("--kmax", type=int, required=True)
    common(pi)
    return ap


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items()
              if k not in {"command", "sub", "seed", "out_dir", "config"}
              and v is not None}
    if args.config:
        defaults = json.loads(Path(args.config).read_text())
        for k, v in defaults.items():
            params.setdefault(k, v)
    out_dir = args.out_dir or Path(os.environ.get("SHIFTLAB_OUT", "."))
    if "out" in params:
        params["out"] = str(params["out"])
    return RunConfig(command=args.command, params=params, seed=args.seed,
                     out_dir=out_dir)


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        config = _config_from_args(args)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    except (ValueError, OSError, json.JSONDecodeError):
        return EXIT_CONFIG
    try:
        report = run(config)
    except (ValueError, KeyError) as exc:
        print(f"shiftlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001  (distinct exit code contract)
        print(f"shiftlab: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(report.to_json(), end="")
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
