"""Command-line interface.

Subcommands: mask, phantom, train, reconstruct, bench, eval, lesion-sim,
metrics.  Every run writes a manifest with the full effective configuration
next to its outputs; `--config manifest.json` reruns a command with the
recorded parameters (explicit flags still win).

Exit codes: 0 success, 2 usage error, 3 invalid configuration or missing
input, 4 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from ..cs import CsConfig, cs_reconstruct
from ..errors import ConfigError, NumericalFailure, ParseError, RimError
from ..metrics import MetricsRecord, psnr, snr_estimate, ssim, write_records
from ..mri import CoilSet, NoiseSpec, add_noise, adjoint_op, forward_op, synth_sensitivities
from ..numcore import fft2_centered
from ..rim import RimConfig, RimModel, load_checkpoint, reconstruct, save_checkpoint
from ..sampling import gaussian_mask, load_mask, save_mask
from ..training import LossSpec, TrainConfig, train
from . import bench as bench_mod
from . import evalgen, lesion, plots
from .manifest import read_manifest, write_manifest
from .phantom import gen_phantom
from .volume import DOMAIN_IMAGE, save_volume, slice_ingest

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4


def _load_config_params(path):
    if path is None:
        return {}
    try:
        if path.endswith(".json"):
            payload = read_manifest(path)
            return payload.get("params", payload)
        params = {}
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"expected 'key = value' in {path}, got {line!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                params[key] = value
        return params
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")


def _merge(args, defaults, config_params):
    """Effective parameters: CLI flag > config file > builtin default."""
    params = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key.replace("-", "_"), None)
        if cli_value is not None:
            params[key] = cli_value
        elif key in config_params:
            value = config_params[key]
            if default is not None and not isinstance(value, type(default)):
                if isinstance(default, bool):
                    value = str(value).lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    value = int(value)
                elif isinstance(default, float):
                    value = float(value)
                elif isinstance(default, (list, tuple)):
                    value = list(value) if isinstance(value, (list, tuple)) else [
                        type(default[0])(tok) for tok in str(value).split(",") if tok.strip()
                    ]
            params[key] = value
        else:
            params[key] = default
    return params


def _int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def _float_list(text):
    return [float(tok) for tok in str(text).split(",") if tok.strip()]


def _require(params, *keys):
    for key in keys:
        if params[key] is None:
            raise ConfigError(f"missing required parameter --{key}")


def _out_dir(params):
    out = params["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _sidecar_manifest(out_path, command, params):
    """Manifest next to a single-file output, named after it."""
    out_dir = os.path.dirname(os.path.abspath(out_path)) or "."
    write_manifest(out_dir, command, params,
                   filename=os.path.basename(out_path) + ".manifest.json")


# ---------------------------------------------------------------------------
# subcommands


def cmd_mask(params):
    _require(params, "out", "accel", "seed")
    h, w = params["size"]
    mask = gaussian_mask(h, w, params["accel"], params["seed"],
                         params["fwhm"], params["ellipse"])
    save_mask(mask, params["out"])
    _sidecar_manifest(params["out"], "mask", params)
    return 0


def cmd_phantom(params):
    _require(params, "out", "seed")
    img = gen_phantom(params["kind"], params["size"], params["seed"])
    save_volume(img.astype(np.complex64), params["out"], DOMAIN_IMAGE,
                meta={"modality": f"phantom-{params['kind']}", "normalization": 1.0,
                      "provenance": f"seed={params['seed']}"})
    _sidecar_manifest(params["out"], "phantom", params)
    return 0


def make_phantom_dataset(kind, size, count, coil_count, seed_base):
    samples = []
    for i in range(count):
        ref = gen_phantom(kind, size, seed_base + i)
        coils = synth_sensitivities(ref.shape, coil_count, seed_base + 100_000 + i)
        samples.append({"reference": ref, "sensitivities": coils.sensitivities})
    return samples


def cmd_train(params, log=print):
    _require(params, "out")
    out = _out_dir(params)
    config = TrainConfig(
        learning_rate=params["learning-rate"],
        epochs=params["epochs"],
        patch=params["patch"],
        acceleration=params["accel"],
        accel_choices=tuple(params["accel-choices"] or ()),
        noise_sigma=params["noise"],
        augment=params["augment"],
        seed=params["seed"],
    )
    model = RimModel.initialize(
        RimConfig(params["features"], params["time-steps"], params["cell"]),
        params["seed"],
    )
    train_set = make_phantom_dataset(params["kind"], params["size"], params["num-phantoms"],
                                     params["coils"], params["seed"] + 1)
    val_set = make_phantom_dataset(params["kind"], params["size"], params["val-phantoms"],
                                   params["coils"], params["seed"] + 900_000)
    loss_spec = LossSpec(params["loss"], params["time-steps"])
    ckpt = os.path.join(out, "checkpoint.rim")
    result = train(model, [train_set], loss_spec, config, val_samples=val_set,
                   log=log if params["verbose"] else None, checkpoint_path=ckpt,
                   sidecar={"dataset": f"{params['kind']}x{params['num-phantoms']}",
                            "loss": params["loss"], "seed": params["seed"],
                            "epochs": params["epochs"],
                            "learning_rate": params["learning-rate"]})
    from ..training import write_curve

    write_curve(result.curve, os.path.join(out, "loss_curve.csv"))
    plots.plot_loss_curve(result.curve, os.path.join(out, "loss_curve.png"))
    write_manifest(out, "train", params)
    return 0


def _reconstruct_volume(params, log=print):
    _require(params, "out", "volume")
    method = params["method"]
    model = None
    if method == "rim":
        if params["checkpoint"] is None or not os.path.exists(params["checkpoint"]):
            raise ConfigError(f"checkpoint not found: {params['checkpoint']}")
        model = load_checkpoint(params["checkpoint"])
    if not os.path.exists(params["volume"]):
        raise ConfigError(f"volume not found: {params['volume']}")
    out = _out_dir(params)

    recs = []
    recon_slices = []
    for idx, coil_slices in slice_ingest(params["volume"]):
        if coil_slices.shape[0] == 1:
            # single-coil image: simulate the acquisition, then reconstruct
            ref = coil_slices[0]
            coils = synth_sensitivities(ref.shape, params["coils"], params["seed"] + idx)
            if params["mask"] is not None:
                mask = load_mask(params["mask"], expect_shape=ref.shape)
            else:
                mask = gaussian_mask(ref.shape[0], ref.shape[1], params["accel"],
                                     params["seed"] + 31 * idx)
            y = forward_op(ref, coils, mask.pattern)
            if params["noise"] > 0:
                y = add_noise(y, NoiseSpec(params["noise"] * float(np.abs(ref).mean()),
                                           params["seed"] + idx), mask.pattern)
            coils = coils.with_measurements(y)
        else:
            raise ConfigError("multi-coil volumes need externally supplied "
                              "sensitivities; provide a single-coil image volume")
        if method == "rim":
            recon = reconstruct(model, coils, mask.pattern, params["sigma"])
        elif method == "cs":
            recon = cs_reconstruct(coils, mask.pattern,
                                   CsConfig(params["cs-lambda"], params["cs-iters"]))
        else:
            recon = adjoint_op(coils.measurements, coils, mask.pattern)
        recon_slices.append(recon)
        ref_mag = np.abs(ref)
        peak = ref_mag.max() if ref_mag.max() > 0 else 1.0
        recs.append(MetricsRecord(
            ssim=ssim(np.abs(recon), ref_mag, dynamic_range=peak),
            psnr=psnr(np.abs(recon), ref_mag, peak=peak),
            snr=snr_estimate(np.abs(recon), fft2_centered(recon)),
            model=method, dataset=os.path.basename(params["volume"]),
            acceleration=mask.acceleration, slice_index=idx, seed=mask.seed,
        ))
        plots.save_grayscale_png(recon, os.path.join(out, f"slice{idx:03d}.png"))
        np.save(os.path.join(out, f"slice{idx:03d}.npy"), recon)
    save_volume(np.stack(recon_slices)[None].astype(np.complex64),
                os.path.join(out, "reconstruction.rimv"), DOMAIN_IMAGE,
                meta={"modality": "reconstruction", "provenance": params["volume"]})
    write_records(recs, os.path.join(out, "metrics.csv"))
    write_manifest(out, "reconstruct", params)
    return 0


def cmd_bench(params, log=print):
    _require(params, "out")
    out = _out_dir(params)
    rows = bench_mod.bench_inference(
        t_grid=tuple(params["t-grid"]), f_grid=tuple(params["f-grid"]),
        reps=params["reps"], warmup=params["warmup"], size=params["size"],
        accel=params["accel"], seed=params["seed"], include_cs=params["with-cs"],
        log=log if params["verbose"] else None,
    )
    bench_mod.write_bench_csv(rows, os.path.join(out, "timings.csv"))
    model_rows = [r for r in rows if r["method"] != "CS"]
    f_fix = max(params["f-grid"])
    t_fix = 8 if 8 in params["t-grid"] else params["t-grid"][0]
    plots.plot_timing([r for r in model_rows if r["features"] == f_fix],
                      os.path.join(out, "time_vs_steps.png"), "time_steps", f"F={f_fix}")
    plots.plot_timing([r for r in model_rows if r["time_steps"] == t_fix],
                      os.path.join(out, "time_vs_features.png"), "features", f"t={t_fix}")
    write_manifest(out, "bench", params)
    return 0


def cmd_eval(params, log=print):
    _require(params, "out")
    out = _out_dir(params)
    models = {}
    for spec in params["checkpoints"] or []:
        name, _, path = spec.partition("=")
        if not path:
            raise ConfigError(f"--checkpoints entries must be NAME=PATH, got {spec!r}")
        models[name] = load_checkpoint(path) if os.path.exists(path) else None
    datasets = {}
    for family in params["families"]:
        datasets[family] = evalgen.make_eval_samples(
            [gen_phantom(family, params["size"], params["seed"] + 500_000 + i)
             for i in range(params["num-phantoms"])],
            coil_count=params["coils"], seed=params["seed"],
        )
    cs_config = CsConfig(params["cs-lambda"], params["cs-iters"]) if params["with-cs"] else None
    records, quantiles = evalgen.eval_generalization(
        models, datasets, params["accels"], cs_config,
        log=log if params["verbose"] else None,
    )
    write_records(records, os.path.join(out, "metrics.csv"))
    evalgen.write_quantiles(quantiles, os.path.join(out, "quantiles.csv"))
    for metric in ("ssim", "psnr"):
        groups = {}
        for rec in records:
            if np.isfinite(getattr(rec, metric)):
                key = f"{rec.model}\n{rec.dataset}@{rec.acceleration:g}x"
                groups.setdefault(key, []).append(getattr(rec, metric))
        if groups:
            plots.plot_metric_boxes(groups, os.path.join(out, f"{metric}_boxes.png"), metric)
    write_manifest(out, "eval", params)
    return 0


def cmd_lesion_sim(params, log=print):
    _require(params, "out")
    out = _out_dir(params)
    base = gen_phantom(params["kind"], params["size"], params["seed"])
    center = tuple(params["center"]) if params["center"] else (
        params["size"] // 2 + params["size"] // 8, params["size"] // 2)
    spec = lesion.LesionSpec(
        center=center, sigma=params["lesion-sigma"],
        factors=tuple(params["factors"]), noise_fraction=params["noise"],
        accelerations=tuple(params["accels"]), mask_seeds=params["mask-seeds"],
        coil_count=params["coils"],
    )
    methods = {"zero-filled": lambda coils, mask: adjoint_op(coils.measurements, coils, mask)}
    if params["checkpoint"]:
        if not os.path.exists(params["checkpoint"]):
            raise ConfigError(f"checkpoint not found: {params['checkpoint']}")
        model = load_checkpoint(params["checkpoint"])
        methods["IRIM" if model.config.cell_kind == "IndRNN" else model.config.cell_kind] = (
            lambda coils, mask: reconstruct(model, coils, mask, params["sigma"]))
    if params["with-cs"]:
        cs_config = CsConfig(params["cs-lambda"], params["cs-iters"])
        methods["CS"] = lambda coils, mask: cs_reconstruct(coils, mask, cs_config)
    rows = lesion.lesion_study(base, spec, methods, seed=params["seed"],
                               log=log if params["verbose"] else None)
    lesion.write_lesion_csv(rows, os.path.join(out, "lesion_bias.csv"))
    plots.plot_lesion_bias(rows, os.path.join(out, "lesion_bias.png"))
    # reconstruction panels at the largest factor
    factor = spec.factors[-1]
    lesioned = lesion.insert_lesion(base, center, factor, spec.sigma)
    coils0 = synth_sensitivities(base.shape, spec.coil_count, params["seed"])
    mask = gaussian_mask(base.shape[0], base.shape[1], spec.accelerations[-1],
                         params["seed"] + 17)
    y = forward_op(lesioned, coils0, mask.pattern)
    coils0 = coils0.with_measurements(y)
    plots.save_grayscale_png(lesioned, os.path.join(out, "panel_reference.png"))
    np.save(os.path.join(out, "panel_reference.npy"), lesioned)
    for name, fn in methods.items():
        recon = fn(coils0, mask.pattern)
        tag = name.replace(" ", "_")
        plots.save_grayscale_png(recon, os.path.join(out, f"panel_{tag}.png"))
        np.save(os.path.join(out, f"panel_{tag}.npy"), recon)
    write_manifest(out, "lesion-sim", params)
    return 0


def cmd_metrics(params):
    _require(params, "out", "recon", "reference")
    for key in ("recon", "reference"):
        if not os.path.exists(params[key]):
            raise ConfigError(f"{key} volume not found: {params[key]}")
    recs = []
    recon_slices = dict(slice_ingest(params["recon"]))
    for idx, ref in slice_ingest(params["reference"]):
        if idx not in recon_slices:
            raise ConfigError(f"slice {idx} missing from reconstruction volume")
        rec = recon_slices[idx][0]
        ref2 = ref[0]
        ref_mag = np.abs(ref2)
        peak = ref_mag.max() if ref_mag.max() > 0 else 1.0
        recs.append(MetricsRecord(
            ssim=ssim(np.abs(rec), ref_mag, dynamic_range=peak),
            psnr=psnr(np.abs(rec), ref_mag, peak=peak),
            snr=snr_estimate(np.abs(rec), fft2_centered(rec.astype(np.complex128))),
            model="supplied", dataset=os.path.basename(params["reference"]),
            slice_index=idx,
        ))
    write_records(recs, params["out"])
    _sidecar_manifest(params["out"], "metrics", params)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

_DEFAULTS = {
    "mask": {"size": [64, 64], "accel": None, "seed": None, "out": None,
             "fwhm": 0.7, "ellipse": 0.02},
    "phantom": {"kind": "textured", "size": 64, "seed": None, "out": None},
    "train": {"out": None, "cell": "IndRNN", "features": 16, "time-steps": 8,
              "loss": "L1", "kind": "textured", "size": 64, "coils": 4,
              "num-phantoms": 200, "val-phantoms": 8, "epochs": 2,
              "learning-rate": 1e-3, "patch": 64, "accel": 4.0,
              "accel-choices": [], "noise": 0.0, "augment": True, "seed": 0,
              "verbose": False},
    "reconstruct": {"out": None, "volume": None, "checkpoint": None,
                    "method": "rim", "mask": None, "accel": 4.0, "seed": 0,
                    "coils": 4, "noise": 0.0, "sigma": 1.0,
                    "cs-lambda": 0.005, "cs-iters": 60, "verbose": False},
    "bench": {"out": None, "t-grid": list(bench_mod.T_GRID),
              "f-grid": list(bench_mod.F_GRID), "reps": 300, "warmup": 5,
              "size": 64, "accel": 4.0, "seed": 0, "with-cs": True,
              "verbose": False},
    "eval": {"out": None, "checkpoints": [], "families": ["textured", "shepp"],
             "accels": [4.0, 10.0], "num-phantoms": 8, "size": 64, "coils": 4,
             "seed": 0, "with-cs": True, "cs-lambda": 0.005, "cs-iters": 60,
             "verbose": False},
    "lesion-sim": {"out": None, "checkpoint": None, "kind": "shepp",
                   "size": 64, "center": [], "lesion-sigma": 1.0,
                   "factors": [0.0, 0.5, 1.0, 1.5, 2.0], "noise": 0.05,
                   "accels": [4.0, 6.0, 8.0], "mask-seeds": 10, "coils": 4,
                   "sigma": 1.0, "with-cs": False, "cs-lambda": 0.005,
                   "cs-iters": 60, "seed": 0, "verbose": False},
    "metrics": {"out": None, "recon": None, "reference": None},
}

_HANDLERS = {
    "mask": cmd_mask,
    "phantom": cmd_phantom,
    "train": cmd_train,
    "reconstruct": _reconstruct_volume,
    "bench": cmd_bench,
    "eval": cmd_eval,
    "lesion-sim": cmd_lesion_sim,
    "metrics": cmd_metrics,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="rimrecon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", default=None, help="config file or manifest.json")
        return p

    p = add("mask", help="generate a variable-density sampling mask")
    p.add_argument("--size", type=int, nargs=2, default=None, metavar=("H", "W"))
    p.add_argument("--accel", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--fwhm", type=float, default=None)
    p.add_argument("--ellipse", type=float, default=None)

    p = add("phantom", help="generate a synthetic reference volume")
    p.add_argument("--kind", choices=["shepp", "textured"], default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = add("train", help="train a model on synthetic phantoms")
    p.add_argument("--out", default=None)
    p.add_argument("--cell", choices=["GRU", "MGU", "IndRNN"], default=None)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--time-steps", type=int, default=None)
    p.add_argument("--loss", choices=["L1", "L2"], default=None)
    p.add_argument("--kind", choices=["shepp", "textured"], default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--coils", type=int, default=None)
    p.add_argument("--num-phantoms", type=int, default=None)
    p.add_argument("--val-phantoms", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--patch", type=int, default=None)
    p.add_argument("--accel", type=float, default=None)
    p.add_argument("--accel-choices", type=_float_list, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--verbose", action="store_const", const=True, default=None)

    p = add("reconstruct", help="reconstruct a volume file")
    p.add_argument("--out", default=None)
    p.add_argument("--volume", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--method", choices=["rim", "cs", "zero-filled"], default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--accel", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--coils", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--cs-lambda", type=float, default=None)
    p.add_argument("--cs-iters", type=int, default=None)

    p = add("bench", help="inference timing benchmark")
    p.add_argument("--out", default=None)
    p.add_argument("--t-grid", type=_int_list, default=None)
    p.add_argument("--f-grid", type=_int_list, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--accel", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-cs", dest="with_cs", action="store_const", const=False, default=None)
    p.add_argument("--verbose", action="store_const", const=True, default=None)

    p = add("eval", help="generalization evaluation grid")
    p.add_argument("--out", default=None)
    p.add_argument("--checkpoints", nargs="*", default=None, metavar="NAME=PATH")
    p.add_argument("--families", type=lambda s: s.split(","), default=None)
    p.add_argument("--accels", type=_float_list, default=None)
    p.add_argument("--num-phantoms", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--coils", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-cs", dest="with_cs", action="store_const", const=False, default=None)
    p.add_argument("--cs-lambda", type=float, default=None)
    p.add_argument("--cs-iters", type=int, default=None)
    p.add_argument("--verbose", action="store_const", const=True, default=None)

    p = add("lesion-sim", help="lesion intensity-bias study")
    p.add_argument("--out", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--kind", choices=["shepp", "textured"], default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--center", type=int, nargs=2, default=None, metavar=("ROW", "COL"))
    p.add_argument("--lesion-sigma", type=float, default=None)
    p.add_argument("--factors", type=_float_list, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--accels", type=_float_list, default=None)
    p.add_argument("--mask-seeds", type=int, default=None)
    p.add_argument("--coils", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--with-cs", action="store_const", const=True, default=None)
    p.add_argument("--cs-lambda", type=float, default=None)
    p.add_argument("--cs-iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--verbose", action="store_const", const=True, default=None)

    p = add("metrics", help="metrics between reconstruction and reference volumes")
    p.add_argument("--out", default=None)
    p.add_argument("--recon", default=None)
    p.add_argument("--reference", default=None)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        config_params = _load_config_params(args.config)
        params = _merge(args, _DEFAULTS[command], config_params)
        return _HANDLERS[command](params)
    except (ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
