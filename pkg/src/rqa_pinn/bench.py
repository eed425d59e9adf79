"""Experiment runner: single solves, seed sweeps over strategy grids, CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import multiprocessing
import os
import statistics
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from rqa_pinn import config as cfgmod
from rqa_pinn import network
from rqa_pinn.trainer import IterationInfo, RunRecord, TrainConfig, train

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("strategy", "p", "q_cut", "q_target", "seed", "final_l2", "final_max")
AGG_COLUMNS = ("strategy", "p", "q_cut", "q_target", "n_seeds", "mean_l2", "std_l2", "mean_max", "std_max")
CELL_KEYS = ("strategy", "p", "q_cut", "q_target")


def fmt(value) -> str:
    """Round-trip decimal text: integers as-is, floats with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _digest(arr) -> str:
    if arr is None:
        return ""
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()[:16]


def batch_checksum(batch) -> str:
    return _digest(np.column_stack([batch.x, batch.times()]))


def weight_rows(info: IterationInfo, role: str = "interior"):
    batch = info.batches[role]
    raw = info.raw_weights[role].weights
    adjusted = info.weights[role].weights
    for i in range(len(batch)):
        row = [i, *batch.x[i]]
        if batch.t is not None:
            row.append(batch.t[i])
        row += [info.residuals[role][i], raw[i], adjusted[i]]
        yield row


def weight_header(d: int, time_dependent: bool) -> list[str]:
    cols = ["index"] + [f"x{i + 1}" for i in range(d)]
    if time_dependent:
        cols.append("t")
    return cols + ["residual", "weight_raw", "weight_adjusted"]


def dump_weights(info: IterationInfo, out_dir) -> Path:
    """Write ``weights_iter<k>.csv`` for the interior batch of one iteration."""
    batch = info.batches["interior"]
    path = Path(out_dir) / f"weights_iter{info.iteration}.csv"
    write_csv(path, weight_header(batch.d, batch.t is not None), weight_rows(info))
    return path


def run_single(
    config: TrainConfig,
    out_dir,
    dump_iters=(),
    dump_batches: bool = False,
    save_params: bool = True,
) -> RunRecord:
    """Train one configuration and write ``history.csv`` (plus optional dumps) to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = set(dump_iters)
    checksums = []

    def on_iteration(info: IterationInfo) -> None:
        if info.iteration in wanted:
            dump_weights(info, out_dir)
        if dump_batches:
            checksums.append(
                [info.iteration] + [batch_checksum(info.batches[r]) if r in info.batches else "" for r in ("interior", "boundary", "initial")]
            )

    hook = on_iteration if (wanted or dump_batches) else None
    params, record = train(config, on_iteration=hook)
    write_csv(out_dir / "history.csv", RunRecord.COLUMNS, record.rows)
    if dump_batches:
        write_csv(out_dir / "batches.csv", ("iter", "interior", "boundary", "initial"), checksums)
    if save_params:
        network.save(params, out_dir / "params.bin")
    (out_dir / "config.cfg").write_text(cfgmod.dump(config))
    return record


def cell_name(config: TrainConfig) -> str:
    return f"{config.strategy}_p{config.p:g}_qc{config.q_cut:g}_qt{config.q_target:g}_seed{config.seed}"


def _sweep_job(args):
    config, out_dir, dump_iters, dump_batches = args
    record = run_single(config, out_dir, dump_iters, dump_batches, save_params=False)
    return record.summary()


def aggregate(rows: list[dict]) -> list[list]:
    """Mean and sample standard deviation (n-1) of final errors per grid cell."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in CELL_KEYS), []).append(row)
    out = []
    for key, members in groups.items():
        l2 = [float(m["final_l2"]) for m in members]
        mx = [float(m["final_max"]) for m in members]
        std = statistics.stdev if len(members) > 1 else (lambda _: float("nan"))
        out.append([*key, len(members), statistics.fmean(l2), std(l2), statistics.fmean(mx), std(mx)])
    return out


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("RQA_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(experiment: cfgmod.ExperimentConfig, out_dir, seeds=None) -> list[dict]:
    """Run every (grid cell, seed) pair and write ``summary.csv`` and ``summary_agg.csv``.

    Cells sharing a seed draw identical training batches and test sets. Up
    to ``RQA_THREADS`` cells run in parallel worker processes; row order is
    fixed by the grid and seed order either way.
    """
    out_dir = Path(out_dir)
    seeds = list(seeds if seeds is not None else experiment.seeds) or [experiment.base.seed]
    jobs = []
    for cell in experiment.cells():
        for seed in seeds:
            run = replace(cell, seed=seed)
            jobs.append((run, out_dir / "runs" / cell_name(run), experiment.dump_weights, experiment.dump_batches))

    workers = min(worker_count(), len(jobs))
    if workers > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            summaries = list(pool.map(_sweep_job, jobs))
    else:
        summaries = []
        for job in jobs:
            log.info("running %s", job[1].name)
            summaries.append(_sweep_job(job))

    write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, ([s[k] for k in SUMMARY_COLUMNS] for s in summaries))
    write_csv(out_dir / "summary_agg.csv", AGG_COLUMNS, aggregate(summaries))
    return summaries
