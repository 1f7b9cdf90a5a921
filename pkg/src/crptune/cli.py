"""Experiment runner: tune trees, tabulate rates, simulate, check bounds.

Every subcommand reads an optional JSON config (flags override it), writes
its outputs into one directory, and embeds the fully resolved config in
each output file.  Exit codes: 0 ok, 2 bad config or input, 3 numeric
degeneracy (collapsed partition, missing root).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .crp import collision_rate_fixed_n, mc_collision_rate
from .distributions import StationDistribution, make_power_law
from .macsim import PROTOCOL_KINDS, PhyTimings, ProtocolConfig, simulate
from .optimizer import (
    DEFAULT_GRID_SIZE,
    DegeneratePartitionError,
    RootNotFoundError,
    asymptotic_collision,
    lower_bound_collision,
    quantile_partition,
    rho_by_pieces,
    success_probability,
    tune,
)
from .tree import Word, conti_tree

ENV_OUT_DIR = "CRPTUNE_OUTDIR"
DEFAULT_OUT_DIR = "crptune-out"
_TREE_CHOICES = ("tuned", "conti")


@dataclass
class ExperimentConfig:
    """Resolved parameters shared by the subcommands."""

    distribution: StationDistribution
    k: int = 6
    grid_size: int = DEFAULT_GRID_SIZE
    method: str = "quantile"
    protocols: list[str] = field(default_factory=lambda: list(PROTOCOL_KINDS))
    n_sweep: list[int] = field(default_factory=lambda: [5, 10, 20, 50, 100])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    target_successes: int = 10000
    trees: list[str] = field(default_factory=lambda: list(_TREE_CHOICES))
    trials: int = 20000
    n_min: int = 2
    n_rate_max: int = 100
    k_min: int = 1
    k_max: int = 8
    timings: PhyTimings = field(default_factory=PhyTimings)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.method not in ("quantile", "dp", "uniform"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.protocols:
            raise ValueError("protocol list is empty")
        for p in self.protocols:
            if p not in PROTOCOL_KINDS:
                raise ValueError(f"unknown protocol {p!r}")
        if not self.n_sweep or any(n < 2 for n in self.n_sweep):
            raise ValueError("n_sweep must be nonempty with all n >= 2")
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.target_successes < 1:
            raise ValueError("target_successes must be >= 1")
        if not self.trees or any(t not in _TREE_CHOICES for t in self.trees):
            raise ValueError(f"trees must be a nonempty subset of {_TREE_CHOICES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 1 <= self.n_min <= self.n_rate_max:
            raise ValueError("need 1 <= n_min <= n_rate_max")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValueError(f"empty k range [{self.k_min}, {self.k_max}]")

    def to_dict(self) -> dict:
        return {
            "scenario": self.distribution.to_json_dict(),
            "k": self.k,
            "grid_size": self.grid_size,
            "method": self.method,
            "protocols": list(self.protocols),
            "n_sweep": list(self.n_sweep),
            "seeds": list(self.seeds),
            "target_successes": self.target_successes,
            "trees": list(self.trees),
            "trials": self.trials,
            "n_min": self.n_min,
            "n_rate_max": self.n_rate_max,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "timings": asdict(self.timings),
        }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _write_csv(path: Path, resolved: dict, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(resolved, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _tuned_tree(cfg: ExperimentConfig):
    return tune(cfg.distribution.gf(), cfg.k, cfg.method, cfg.grid_size)


def cmd_tune(cfg: ExperimentConfig, out: Path, args) -> int:
    report = _tuned_tree(cfg)
    resolved = cfg.to_dict()
    _write_json(out / "tree.json", report.tree.to_json_dict())
    _write_json(out / "partition.json", report.partition.to_json_dict())
    payload = {"config": resolved}
    payload.update(report.to_json_dict())
    _write_json(out / "tuning_report.json", payload)

    print(f"method={report.method} k={report.k} grid_size={report.grid_size}")
    print(f"rho={report.rho:.6f} collision_rate={report.collision_rate:.6f} "
          f"asymptotic={report.asymptotic_bound:.6f}")
    print("level word    p")
    for l in range(report.k):
        for v in range(1 << l):
            w = Word.from_index(l, v)
            print(f"{l:<5d} {str(w):<7s} {report.tree.probs[(l, v)]:.6f}")

    written = [out / "tree.json", out / "partition.json", out / "tuning_report.json"]
    if not args.no_plot:
        from . import plots

        written.append(plots.plot_tuning(
            cfg.distribution.gf(), report.partition, report.rho, out / "tuning.png"))
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_rates(cfg: ExperimentConfig, out: Path, args) -> int:
    resolved = cfg.to_dict()
    ns = list(range(cfg.n_min, cfg.n_rate_max + 1))
    trees = {}
    if "tuned" in cfg.trees:
        trees["tuned"] = _tuned_tree(cfg).tree
    if "conti" in cfg.trees:
        trees["conti"] = conti_tree()

    written = []
    analytic_series: dict[str, list[float]] = {}
    stderr_series: dict[str, list[float]] = {}
    for label, tr in trees.items():
        part = tr.to_partition()
        gen = np.random.default_rng(cfg.seeds[0])
        rows = []
        analytic_series[label] = []
        stderr_series[label] = []
        for n in ns:
            exact = collision_rate_fixed_n(part, n)
            mc, se = mc_collision_rate(tr, n, cfg.trials, gen)
            rows.append([n, repr(exact), repr(mc), repr(se)])
            analytic_series[label].append(exact)
            stderr_series[label].append(se)
        path = out / f"rates_{label}.csv"
        _write_csv(path, resolved, ["n", "analytic_collision", "mc_collision", "mc_stderr"], rows)
        written.append(path)
        print(f"{label}: analytic collision "
              f"min {min(analytic_series[label]):.4f} "
              f"max {max(analytic_series[label]):.4f} over n in [{ns[0]}, {ns[-1]}]")

    if not args.no_plot:
        from . import plots

        written.append(plots.plot_rates(ns, analytic_series, out / "rates.png",
                                        stderr=stderr_series))
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_simulate(cfg: ExperimentConfig, out: Path, args) -> int:
    resolved = cfg.to_dict()
    configs = {}
    for kind in cfg.protocols:
        if kind == "tree_crp":
            configs[kind] = ProtocolConfig(kind=kind, tree=_tuned_tree(cfg).tree)
        else:
            configs[kind] = ProtocolConfig.from_kind(kind)

    rows = []
    results = []
    for kind in cfg.protocols:
        for n in cfg.n_sweep:
            cell = []
            for seed in cfg.seeds:
                res = simulate(configs[kind], n, cfg.target_successes, cfg.timings, seed)
                results.append(res)
                cell.append(res)
                rows.append([res.protocol, res.n, res.seed,
                             repr(res.throughput_mbps), repr(res.collision_rate),
                             repr(res.jain)])
            mean_tput = float(np.mean([r.throughput_mbps for r in cell]))
            print(f"{kind} n={n}: mean throughput {mean_tput:.3f} Mbit/s "
                  f"over {len(cell)} seeds")

    path_csv = out / "simulate.csv"
    _write_csv(path_csv, resolved,
               ["protocol", "n", "seed", "throughput_mbps", "collision_rate", "jain"],
               rows)

    cells = {}
    for res in results:
        cells.setdefault((res.protocol, res.n), []).append(res)
    summary_rows = []
    for kind in cfg.protocols:
        for n in cfg.n_sweep:
            group = cells[(kind, n)]
            pooled = np.sum([r.per_station for r in group], axis=0)
            summary_rows.append({
                "protocol": kind,
                "n": n,
                "mean_throughput_mbps": float(np.mean([r.throughput_mbps for r in group])),
                "mean_collision_rate": float(np.mean([r.collision_rate for r in group])),
                "mean_jain": float(np.mean([r.jain for r in group])),
                "per_station_successes": [int(x) for x in pooled],
            })
    path_json = out / "simulate_summary.json"
    _write_json(path_json, {"config": resolved, "cells": summary_rows})

    written = [path_csv, path_json]
    if not args.no_plot:
        from . import plots

        dict_rows = [
            {"protocol": r.protocol, "n": r.n,
             "throughput_mbps": r.throughput_mbps, "jain": r.jain}
            for r in results
        ]
        written.append(plots.plot_throughput(dict_rows, out / "throughput.png"))
        written.append(plots.plot_jain(dict_rows, out / "jain.png"))
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_bounds(cfg: ExperimentConfig, out: Path, args) -> int:
    resolved = cfg.to_dict()
    f = cfg.distribution.gf()
    m_max = 1 << cfg.k_max
    best = rho_by_pieces(f, m_max, cfg.grid_size)

    ks, measured, asymptotic, lower = [], [], [], []
    rows_json = []
    for k in range(cfg.k_min, cfg.k_max + 1):
        m = 1 << k
        meas = 1.0 - float(best[m - 1])
        if cfg.grid_size >= 64 * m:
            zq = quantile_partition(f, k, cfg.grid_size)
            quant = 1.0 - success_probability(f, zq)
        else:
            quant = None  # quantile heuristic needs a finer grid at this depth
        asym = asymptotic_collision(f, k)
        lob = lower_bound_collision(f, m)
        ks.append(k)
        measured.append(meas)
        asymptotic.append(asym)
        lower.append(lob)
        rows_json.append({
            "k": k,
            "m": m,
            "collision_dp": meas,
            "collision_quantile": quant,
            "asymptotic": asym,
            "lower_bound": lob,
            "ratio_dp_to_asymptotic": meas / asym if asym > 0 else None,
            "ratio_quantile_to_asymptotic":
                quant / asym if (quant is not None and asym > 0) else None,
        })
        qtxt = f"{quant:.3e}" if quant is not None else "n/a"
        print(f"k={k:2d} m={m:5d}  1-rho(dp)={meas:.3e}  1-rho(quantile)={qtxt}  "
              f"asymptotic={asym:.3e}  lower={lob:.3e}")

    path_json = out / "bounds.json"
    _write_json(path_json, {"config": resolved, "rows": rows_json})
    path_csv = out / "bounds.csv"
    _write_csv(path_csv, resolved,
               ["k", "m", "collision_dp", "collision_quantile", "asymptotic",
                "lower_bound"],
               [[r["k"], r["m"], repr(r["collision_dp"]),
                 "" if r["collision_quantile"] is None else repr(r["collision_quantile"]),
                 repr(r["asymptotic"]), repr(r["lower_bound"])] for r in rows_json])

    written = [path_json, path_csv]
    if not args.no_plot:
        from . import plots

        written.append(plots.plot_bounds(ks, measured, asymptotic, lower,
                                         out / "bounds.png"))
    for p in written:
        print(f"wrote {p}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crptune",
        description="Tune, analyze, and simulate tree-based contention resolution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--out", type=Path, help=f"output directory (default ${ENV_OUT_DIR} or ./{DEFAULT_OUT_DIR})")
    common.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    common.add_argument("--alpha", type=float, help="power-law exponent of the scenario")
    common.add_argument("--n-max", type=int, dest="n_max", help="largest station count")
    common.add_argument("--weights-file", type=Path, help="explicit distribution JSON")
    common.add_argument("--k", type=int, help="tree depth")
    common.add_argument("--grid-size", type=int, dest="grid_size")
    common.add_argument("--seeds", type=_int_list, help="comma-separated seed list")

    p = sub.add_parser("tune", parents=[common], help="tune a tree for the scenario")
    p.add_argument("--method", choices=("quantile", "dp", "uniform"))
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("rates", parents=[common], help="collision rates over station counts")
    p.add_argument("--trees", type=_str_list, help="subset of: tuned,conti")
    p.add_argument("--n-min", type=int, dest="n_min")
    p.add_argument("--n-rate-max", type=int, dest="n_rate_max")
    p.add_argument("--trials", type=int, help="Monte Carlo resolutions per n")
    p.add_argument("--method", choices=("quantile", "dp", "uniform"))
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("simulate", parents=[common], help="saturated MAC simulation sweep")
    p.add_argument("--protocols", type=_str_list, help=f"subset of: {','.join(PROTOCOL_KINDS)}")
    p.add_argument("--n-sweep", type=_int_list, dest="n_sweep")
    p.add_argument("--target-successes", type=int, dest="target_successes")
    p.add_argument("--method", choices=("quantile", "dp", "uniform"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", parents=[common], help="optimal collision rate vs depth")
    p.add_argument("--k-min", type=int, dest="k_min")
    p.add_argument("--k-max", type=int, dest="k_max")
    p.set_defaults(func=cmd_bounds)

    return parser


def _build_config(args) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        raw = json.loads(Path(args.config).read_text())

    scenario = raw.get("scenario", {})
    if getattr(args, "weights_file", None) is not None:
        dist = StationDistribution.from_json_dict(json.loads(args.weights_file.read_text()))
    elif "weights" in scenario and args.alpha is None and args.n_max is None:
        dist = StationDistribution.from_json_dict(scenario)
    else:
        alpha = args.alpha if args.alpha is not None else scenario.get("alpha", 0.7)
        n_max = args.n_max if args.n_max is not None else scenario.get("n_max", 100)
        dist = make_power_law(float(alpha), int(n_max))

    def pick(name, default):
        cli = getattr(args, name, None)
        if cli is not None:
            return cli
        return raw.get(name, default)

    timings = PhyTimings(**raw.get("timings", {}))
    return ExperimentConfig(
        distribution=dist,
        k=pick("k", 6),
        grid_size=pick("grid_size", DEFAULT_GRID_SIZE),
        method=pick("method", "quantile"),
        protocols=pick("protocols", list(PROTOCOL_KINDS)),
        n_sweep=pick("n_sweep", [5, 10, 20, 50, 100]),
        seeds=pick("seeds", list(range(10))),
        target_successes=pick("target_successes", 10000),
        trees=pick("trees", list(_TREE_CHOICES)),
        trials=pick("trials", 20000),
        n_min=pick("n_min", 2),
        n_rate_max=pick("n_rate_max", 100),
        k_min=pick("k_min", 1),
        k_max=pick("k_max", 8),
        timings=timings,
    )


def _resolve_outdir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    env = os.environ.get(ENV_OUT_DIR)
    return Path(env) if env else Path(DEFAULT_OUT_DIR)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        out = _resolve_outdir(args)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, out, args)
    except (DegeneratePartitionError, RootNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
