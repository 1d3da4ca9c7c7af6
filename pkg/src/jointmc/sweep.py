"""Monte-Carlo sweep over observation counts ``(k1, k2)``.

The ground truth is drawn once per configuration and replaced by its
rank-``r`` truncation. Each ``(k1, k2, trial)`` work item then draws fresh
noise and masks from its own derived seed and runs every enabled algorithm,
so records do not depend on execution order, worker count, or on how many
other trials are requested.
"""

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import groupby

import numpy as np

from jointmc.acquisition import acquire, snr_to_sigma
from jointmc.bsvt import BsvtParams, bsvt_recover
from jointmc.covariance_model import (
    calibrate_joint,
    covariance_from_parameters,
    make_pair,
    sample_columns,
)
from jointmc.errors import OutputError
from jointmc.limits import ProblemDims, classify_region, threshold_lines
from jointmc.matrix_ops import nmse, truncate
from jointmc.seeding import derive_seed
from jointmc.svt import SvtParams, svt_recover

log = logging.getLogger(__name__)

CSV_HEADER = ("k1", "k2", "algorithm", "mean_nmse", "std_nmse", "region_flags")
OVERLAY_HEADER = ("line", "k1", "k2")


@dataclass(frozen=True)
class SweepRecord:
    k1: int
    k2: int
    trial_index: int
    algorithm: str
    nmse: float
    iterations: int
    converged: bool
    final_tau: float
    wall_time_seconds: float
    region_flags: str


@dataclass(frozen=True)
class AggregateRow:
    k1: int
    k2: int
    algorithm: str
    mean_nmse: float
    std_nmse: float
    region_flags: str


@dataclass(frozen=True, eq=False)
class Model:
    """Resolved covariance, ground truth and problem dimensions for a config."""

    spec: object
    truth: object
    dims: ProblemDims
    truth_seed: int


def truth_seed(config, trial=None):
    if trial is None:
        return derive_seed(config.master_seed, "truth")
    return derive_seed(config.master_seed, "truth", trial)


def trial_seed(config, k1, k2, trial):
    return derive_seed(config.master_seed, k1, k2, trial)


def build_spec(config):
    if config.uses_calibration:
        cal = calibrate_joint(
            config.m,
            config.n,
            config.target_r1,
            config.target_r2,
            config.target_r,
            truth_seed(config),
        )
        log.info(
            "calibrated upsilon11=%.6f upsilon22=%.6f psi=%.6f cross_block=%d",
            cal.upsilon11, cal.upsilon22, cal.psi, cal.cross_block,
        )
        return cal.spec(config.m)
    return covariance_from_parameters(
        config.m, config.upsilon11, config.upsilon22, config.psi, config.cross_block
    )


def draw_truth(spec, n, seed):
    """Sample the model and keep the best rank-``r`` approximation of the stack."""
    raw = sample_columns(spec, n, seed)
    truth = make_pair(truncate(raw.stacked, raw.r))
    dims = ProblemDims(spec.size, n, raw.r1, raw.r2, raw.r)
    return truth, dims


def build_model(config):
    spec = build_spec(config)
    seed = truth_seed(config)
    truth, dims = draw_truth(spec, config.n, seed)
    return Model(spec, truth, dims, seed)


def _run_item(config, model, k1, k2, trial):
    spec, truth = model.spec, model.truth
    if config.regenerate_truth_per_trial:
        truth, _ = draw_truth(spec, config.n, truth_seed(config, trial))
    flags = classify_region(k1, k2, model.dims).flag_string
    sigma1 = snr_to_sigma(spec.block1, config.snr_db_1)
    sigma2 = snr_to_sigma(spec.block2, config.snr_db_2)
    records = []
    if k1 + k2 == 0:
        # nothing observed: both algorithms return the zero matrix
        for algorithm in sorted(config.algorithms):
            records.append(
                SweepRecord(k1, k2, trial, algorithm, 1.0, 0, False, math.nan, 0.0, flags)
            )
        return records
    obs = acquire(truth, k1, k2, sigma1, sigma2, trial_seed(config, k1, k2, trial))
    for algorithm in sorted(config.algorithms):
        start = time.perf_counter()
        if algorithm == "svt":
            params = SvtParams.defaults(
                obs,
                tau=config.svt_tau,
                step=config.svt_step,
                tolerance=config.epsilon,
                max_iterations=config.kmax,
            )
            result = svt_recover(obs, params)
        else:
            params = BsvtParams(
                step=config.bsvt_step, tolerance=config.epsilon, max_iterations=config.kmax
            )
            result = bsvt_recover(obs, spec, params)
        elapsed = time.perf_counter() - start
        records.append(
            SweepRecord(
                k1,
                k2,
                trial,
                algorithm,
                nmse(truth.stacked, result.estimate),
                result.iterations,
                result.converged,
                result.final_tau,
                elapsed,
                flags,
            )
        )
    return records


_WORKER = {}


def _init_worker(config, model):
    _WORKER["config"] = config
    _WORKER["model"] = model


def _run_in_worker(item):
    return _run_item(_WORKER["config"], _WORKER["model"], *item)


def work_items(config):
    return [
        (k1, k2, trial)
        for k1 in sorted(set(config.k1_values))
        for k2 in sorted(set(config.k2_values))
        for trial in range(config.trials)
    ]


def run_sweep(config, threads=1, model=None, progress=None):
    """Run every ``(k1, k2, trial, algorithm)`` combination of the config's grid.

    With ``threads > 1`` work items are spread over a process pool. Records
    come back sorted by ``(k1, k2, trial, algorithm)`` either way.
    """
    config.validate()
    return run_items(config, work_items(config), threads, model, progress)


def run_points(config, points, threads=1, model=None):
    """Like :func:`run_sweep` but for an explicit list of ``(k1, k2)`` points."""
    config.validate()
    items = [(k1, k2, t) for k1, k2 in points for t in range(config.trials)]
    return run_items(config, items, threads, model)


def run_items(config, items, threads=1, model=None, progress=None):
    model = model or build_model(config)
    records = []
    if threads <= 1:
        for i, item in enumerate(items):
            records.extend(_run_item(config, model, *item))
            if progress:
                progress(i + 1, len(items))
    else:
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_init_worker, initargs=(config, model)
        ) as pool:
            for i, chunk in enumerate(pool.map(_run_in_worker, items)):
                records.extend(chunk)
                if progress:
                    progress(i + 1, len(items))
    records.sort(key=lambda r: (r.k1, r.k2, r.trial_index, r.algorithm))
    return records


def aggregate(records):
    """Mean and sample standard deviation of NMSE per ``(k1, k2, algorithm)``."""
    key = lambda r: (r.k1, r.k2, r.algorithm)  # noqa: E731
    rows = []
    for (k1, k2, algorithm), group in groupby(sorted(records, key=key), key=key):
        group = list(group)
        values = np.array([r.nmse for r in group])
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        rows.append(
            AggregateRow(k1, k2, algorithm, float(values.mean()), std, group[0].region_flags)
        )
    return rows


def _fmt(value):
    return f"{value:.10g}"


def format_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [row.k1, row.k2, row.algorithm, _fmt(row.mean_nmse), _fmt(row.std_nmse), row.region_flags]
        )
    return buf.getvalue()


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None


def emit_csv(rows, path):
    _write(path, format_csv(rows))


def parse_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    return [
        AggregateRow(int(k1), int(k2), alg, float(mean), float(std), flags)
        for k1, k2, alg, mean, std, flags in reader
    ]


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read())


def format_overlay(dims, samples=101):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OVERLAY_HEADER)
    writer.writerows(threshold_lines(dims, samples))
    return buf.getvalue()


def emit_region_overlay(dims, path, samples=101):
    _write(path, format_overlay(dims, samples))
