"""Generalization evaluation: every (model x dataset x acceleration) cell gets
SSIM/PSNR records plus distribution quantiles for box plots.

A zero-filled baseline column is always present; a missing model checkpoint
produces an explicit gap row rather than a silent skip.
"""

import csv
import math

import numpy as np

from ..cs import CsConfig, cs_reconstruct
from ..metrics import MetricsRecord, psnr, ssim
from ..mri import CoilSet, forward_op, adjoint_op, synth_sensitivities
from ..rim import reconstruct
from ..sampling import gaussian_mask
from . import worker_map

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def make_eval_samples(references, coil_count=4, seed=0):
    """Pair reference images with synthesized sensitivities."""
    samples = []
    for i, ref in enumerate(references):
        coils = synth_sensitivities(ref.shape, coil_count, seed + i)
        samples.append({"reference": np.asarray(ref), "sensitivities": coils.sensitivities})
    return samples


def _reconstructors(models, cs_config):
    recon = {"zero-filled": lambda coils, mask: adjoint_op(coils.measurements, coils, mask)}
    if cs_config is not None:
        recon["CS"] = lambda coils, mask, cfg=cs_config: cs_reconstruct(coils, mask, cfg)
    for name, model in models.items():
        if model is None:
            recon[name] = None
        else:
            recon[name] = lambda coils, mask, m=model: reconstruct(m, coils, mask)
    return recon


def eval_generalization(models, datasets, accelerations, cs_config=CsConfig(),
                        mask_seed_base=5000, log=None):
    """Returns (records, quantile_rows).

    ``models`` maps display name to a RimModel (or None for a missing
    checkpoint); ``datasets`` maps name to a list of samples (dicts with
    ``reference`` and ``sensitivities``).
    """
    recon_map = _reconstructors(models, cs_config)
    records = []
    quantile_rows = []
    for ds_name, samples in datasets.items():
        for accel in accelerations:
            per_method = {name: {"ssim": [], "psnr": []} for name in recon_map}

            def eval_one(item, ds_name=ds_name, accel=accel):
                idx, sample = item
                ref = sample["reference"]
                coils = CoilSet(sample["sensitivities"])
                mask = gaussian_mask(ref.shape[0], ref.shape[1], accel,
                                     mask_seed_base + 131 * idx)
                coils = coils.with_measurements(forward_op(ref, coils, mask.pattern))
                ref_mag = np.abs(ref)
                peak = ref_mag.max() if ref_mag.max() > 0 else 1.0
                out = []
                for name, fn in recon_map.items():
                    if fn is None:
                        out.append((name, MetricsRecord(
                            ssim=math.nan, psnr=math.nan, model=name, dataset=ds_name,
                            acceleration=accel, slice_index=idx, seed=mask.seed,
                        )))
                        continue
                    rec_mag = np.abs(fn(coils, mask.pattern))
                    s = ssim(rec_mag, ref_mag, dynamic_range=peak)
                    p = psnr(rec_mag, ref_mag, peak=peak)
                    out.append((name, MetricsRecord(
                        ssim=s, psnr=p, model=name, dataset=ds_name,
                        acceleration=accel, slice_index=idx, seed=mask.seed,
                    )))
                return out

            for sample_results in worker_map(eval_one, enumerate(samples)):
                for name, record in sample_results:
                    records.append(record)
                    if math.isfinite(record.ssim):
                        per_method[name]["ssim"].append(record.ssim)
                        per_method[name]["psnr"].append(record.psnr)
            for name, vals in per_method.items():
                if not vals["ssim"]:
                    continue
                row = {"model": name, "dataset": ds_name, "acceleration": accel}
                for metric in ("ssim", "psnr"):
                    arr = np.asarray(vals[metric])
                    for q in QUANTILES:
                        row[f"{metric}_q{int(q * 100):02d}"] = float(np.quantile(arr, q))
                    row[f"{metric}_mean"] = float(arr.mean())
                quantile_rows.append(row)
            if log:
                log(f"dataset {ds_name} at {accel:g}x done")
    return records, quantile_rows


def write_quantiles(rows, path):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
