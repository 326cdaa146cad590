"""Inference-time benchmark over the (time-steps, features) grid.

Each setting times single-slice reconstruction ``reps`` times on a monotonic
clock after discarding warm-up runs; the CS baseline is timed once since it
has no (t, F) dependence.
"""

import csv
import time

import numpy as np

from ..cs import CsConfig, cs_reconstruct
from ..mri import forward_op, synth_sensitivities
from ..rim import RimConfig, RimModel, reconstruct
from ..sampling import gaussian_mask
from .phantom import gen_phantom

CELL_LABELS = {"GRU": "GRIM", "MGU": "MRIM", "IndRNN": "IRIM"}

T_GRID = (6, 8, 10, 12, 14, 16)
F_GRID = (16, 32, 64, 128, 256)


def _timed(fn, reps, warmup):
    for _ in range(warmup):
        fn()
    samples = np.empty(reps)
    for i in range(reps):
        start = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - start
    return float(samples.mean()), float(samples.std())


def bench_inference(t_grid=T_GRID, f_grid=F_GRID, reps=300, warmup=5, size=64,
                    accel=4.0, coil_count=4, seed=0, include_cs=True, log=None):
    """Returns benchmark rows: method, time_steps, features, mean_s, std_s."""
    ref = gen_phantom("textured", size, seed)
    coils = synth_sensitivities(ref.shape, coil_count, seed)
    mask = gaussian_mask(size, size, accel, seed)
    coils = coils.with_measurements(forward_op(ref, coils, mask.pattern))

    rows = []
    for features in f_grid:
        for steps in t_grid:
            for kind, label in CELL_LABELS.items():
                model = RimModel.initialize(RimConfig(features, steps, kind), seed)
                mean, std = _timed(lambda: reconstruct(model, coils, mask.pattern), reps, warmup)
                rows.append({
                    "method": label, "time_steps": steps, "features": features,
                    "mean_s": mean, "std_s": std, "reps": reps,
                })
                if log:
                    log(f"{label} t={steps} F={features}: {mean * 1e3:.2f} ms")
    if include_cs:
        config = CsConfig()
        mean, std = _timed(lambda: cs_reconstruct(coils, mask.pattern, config), reps, warmup)
        rows.append({
            "method": "CS", "time_steps": 0, "features": 0,
            "mean_s": mean, "std_s": std, "reps": reps,
        })
        if log:
            log(f"CS: {mean * 1e3:.2f} ms")
    return rows


def write_bench_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["method", "time_steps", "features", "mean_s", "std_s", "reps"]
        )
        writer.writeheader()
        writer.writerows(rows)


def spearman_rho(x, y):
    """Spearman rank correlation (no tie correction needed for distinct grids)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rx = np.argsort(np.argsort(x)).astype(np.float64)
    ry = np.argsort(np.argsort(y)).astype(np.float64)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx**2).sum() * (ry**2).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0
