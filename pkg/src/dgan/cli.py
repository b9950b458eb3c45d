"""Command-line experiment runner.

    dgan run --config exp.cfg --out runs/a
    dgan compare --config exp.cfg --frameworks proposed_serial,fedgan --seeds 0,1,2 --out runs/cmp
    dgan sweep --config exp.cfg --axis scheduler.ratio --values 0.2,0.5,1.0 --out runs/ratio
    dgan gradcheck
    dgan selftest

``DGAN_SEED`` in the environment overrides ``run.master_seed``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from dgan import config as config_mod
from dgan.orchestrator import PHASES, ExperimentResult, TrainingDiverged, run_experiment, time_to_threshold

log = logging.getLogger("dgan")

ROUND_COLUMNS = [
    "round_index", "scheduled", "excluded", "aborted",
    *(f"{p}_s" for p in PHASES),
    "round_duration_s", "cumulative_sim_time_s", "uplink_bits", "downlink_bits",
    "metric_value", "mode_coverage", "high_quality_fraction", "disc_real_mean",
]
SUMMARY_COLUMNS = [
    "framework", "master_seed", "rounds", "initial_metric", "final_metric", "final_mode_coverage",
    "final_high_quality_fraction", "total_sim_time_s", "total_uplink_bits", "total_downlink_bits",
    "total_bits", "rounds_to_target", "time_to_target_s",
]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return ";".join(str(v) for v in value)
    return str(value)


def round_rows(result: ExperimentResult):
    for l in result.logs:
        yield [
            l.round_index, l.scheduled, l.excluded, l.aborted,
            *(float(l.phase_durations_s[p]) for p in PHASES),
            float(l.round_duration_s), float(l.cumulative_sim_time_s), l.uplink_bits, l.downlink_bits,
            l.metric_value, l.mode_coverage, l.high_quality_fraction, l.disc_real_mean,
        ]


def summary_row(result: ExperimentResult) -> dict:
    cfg = result.config
    target = cfg.run.target_metric
    return {
        "framework": cfg.framework,
        "master_seed": cfg.run.master_seed,
        "rounds": len(result.logs),
        "initial_metric": result.initial_report.frechet_gaussian,
        "final_metric": result.final_report.frechet_gaussian,
        "final_mode_coverage": result.final_report.mode_coverage,
        "final_high_quality_fraction": result.final_report.high_quality_fraction,
        "total_sim_time_s": float(result.total_time_s),
        "total_uplink_bits": sum(l.uplink_bits for l in result.logs),
        "total_downlink_bits": sum(l.downlink_bits for l in result.logs),
        "total_bits": result.total_bits,
        "rounds_to_target": result.rounds_to_target,
        "time_to_target_s": None if target is None else time_to_threshold(result.logs, target),
    }


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_outputs(result: ExperimentResult, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "rounds.csv", ROUND_COLUMNS, round_rows(result))
    summary = summary_row(result)
    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, [[summary[c] for c in SUMMARY_COLUMNS]])
    _write_csv(out_dir / "samples.csv", ["x", "y"], ([float(x), float(y)] for x, y in result.samples))
    (out_dir / "config.resolved").write_text(config_mod.to_text(result.config))
    return summary


def load_config(path: str | None) -> config_mod.ExperimentConfig:
    cfg = config_mod.parse_config(path) if path else config_mod.ExperimentConfig()
    seed = os.environ.get("DGAN_SEED")
    if seed is not None:
        cfg = config_mod.override(cfg, "run.master_seed", seed)
    return cfg


def run(cfg: config_mod.ExperimentConfig, out_dir: str | Path) -> int:
    """Run one experiment and write its CSVs; returns the process exit code."""
    out_dir = Path(out_dir)
    try:
        result = run_experiment(cfg)
    except TrainingDiverged as exc:
        log.error("%s", exc)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "FAILED").write_text(f"round {exc.round_index}: {exc}\n")
        return 2
    summary = write_outputs(result, out_dir)
    log.info(
        "%s seed=%d rounds=%d final_metric=%.4g sim_time=%.4gs",
        cfg.framework, cfg.run.master_seed, summary["rounds"], summary["final_metric"], summary["total_sim_time_s"],
    )
    return 0


def _run_job(job) -> tuple[int, dict | None]:
    cfg, out_dir = job
    code = run(cfg, out_dir)
    summary = None
    if code == 0:
        with open(Path(out_dir) / "summary.csv") as fh:
            summary = next(csv.DictReader(fh))
    return code, summary


def _run_jobs(jobs, n_procs: int):
    if n_procs > 1:
        with ProcessPoolExecutor(n_procs) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def compare(cfg, frameworks: list[str], seeds: list[int], out_dir, n_procs: int = 1) -> int:
    """Paired runs: every framework sees the same datasets, placements and schedules per seed."""
    out_dir = Path(out_dir)
    jobs, keys = [], []
    for seed in seeds:
        for fw in frameworks:
            c = config_mod.override(config_mod.override(cfg, "framework", fw), "run.master_seed", str(seed))
            jobs.append((c, out_dir / f"{fw}_seed{seed}"))
            keys.append((fw, seed))
    results = _run_jobs(jobs, n_procs)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for (fw, seed), (code, summary) in zip(keys, results):
        summary = summary or {"framework": fw, "master_seed": seed}
        rows.append(["ok" if code == 0 else "failed", *(summary.get(c) for c in SUMMARY_COLUMNS)])
    _write_csv(out_dir / "comparison.csv", ["status", *SUMMARY_COLUMNS], rows)
    return 0 if all(code == 0 for code, _ in results) else 2


def sweep(cfg, axis: str, values: list[str], out_dir, n_procs: int = 1) -> int:
    if not values:
        raise config_mod.ConfigError("sweep needs at least one value")
    if axis not in config_mod.field_paths():
        raise config_mod.ConfigError(f"{axis}: unknown config key")
    out_dir = Path(out_dir)
    jobs = [(config_mod.override(cfg, axis, v), out_dir / f"{axis}={v}") for v in values]
    results = _run_jobs(jobs, n_procs)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "sweep.csv",
        [axis, "status", *SUMMARY_COLUMNS],
        ([v, "ok" if code == 0 else "failed", *((s or {}).get(c) for c in SUMMARY_COLUMNS)]
         for v, (code, s) in zip(values, results)),
    )
    return 0 if all(code == 0 for code, _ in results) else 2


def _csv_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dgan", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="paired runs of several frameworks over several seeds")
    p.add_argument("--config")
    p.add_argument("--frameworks", default="proposed_serial,fedgan")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="one run per value of a config field")
    p.add_argument("--config")
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gradcheck", help="finite-difference check of the GAN gradients")
    p.add_argument("--cases", type=int, default=100)

    sub.add_parser("selftest", help="run the built-in invariant checks")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.command == "run":
            return run(load_config(args.config), args.out)
        if args.command == "compare":
            seeds = [int(s) for s in _csv_list(args.seeds)]
            return compare(load_config(args.config), _csv_list(args.frameworks), seeds, args.out, args.jobs)
        if args.command == "sweep":
            return sweep(load_config(args.config), args.axis, _csv_list(args.values), args.out, args.jobs)
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    from dgan import checks

    if args.command == "gradcheck":
        errs = checks.gradcheck(args.cases)
        for name, err in errs.items():
            print(f"{name}: max relative error {err:.3e}")
        return 0 if max(errs.values()) < 1e-4 else 1
    results = checks.selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    return 0 if all(ok for _, ok, _ in results) else 1


if __name__ == "__main__":
    sys.exit(main())
