"""Multi-step weighted losses, ADAM, augmentation, sampling, and the training
loop for the unrolled network.

The per-step loss weights follow ``w_tau = 10**(-(t - tau) / (t - 1))`` so the
final estimate always carries weight 1 and the first carries weight 0.1.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import metrics as _metrics
from .errors import ConfigError, NumericalFailure, ShapeError
from .mri import CoilSet, NoiseSpec, add_noise, forward_op
from .numcore import tape
from .numcore.tape import Var, value_of
from .rim import RimModel, rim_forward, save_checkpoint
from .sampling import gaussian_mask


def loss_weights(time_steps):
    """Geometric step weights; w_t = 1 exactly, w_1 = 0.1 for t > 1."""
    if time_steps < 1:
        raise ConfigError(f"time_steps must be >= 1, got {time_steps}")
    if time_steps == 1:
        return np.array([1.0])
    tau = np.arange(1, time_steps + 1, dtype=np.float64)
    return 10.0 ** (-(time_steps - tau) / (time_steps - 1))


@dataclass
class LossSpec:
    norm: str = "L1"  # "L1" or "L2"
    time_steps: int = 8
    weights: np.ndarray = None

    def __post_init__(self):
        if self.norm not in ("L1", "L2"):
            raise ConfigError(f"norm must be L1 or L2, got {self.norm!r}")
        if self.weights is None:
            self.weights = loss_weights(self.time_steps)

    def __call__(self, estimates, reference):
        fn = loss_l1 if self.norm == "L1" else loss_l2
        return fn(estimates, reference, self.weights)


def _check_estimates(estimates, reference, weights):
    if len(estimates) != len(weights):
        raise ShapeError(f"{len(estimates)} estimates vs {len(weights)} weights")
    ref_shape = np.asarray(reference).shape
    for est in estimates:
        if value_of(est).shape != ref_shape:
            raise ShapeError(f"estimate shape {value_of(est).shape} != reference {ref_shape}")


def loss_l2(estimates, reference, weights):
    """(1 / (n t)) * sum_tau w_tau * ||x_tau - x||_2^2."""
    _check_estimates(estimates, reference, weights)
    n = np.asarray(reference).size
    t = len(estimates)
    acc = None
    for est, w in zip(estimates, weights):
        term = tape.scale(tape.sumsq(tape.sub(est, reference)), float(w))
        acc = term if acc is None else tape.add(acc, term)
    return tape.scale(acc, 1.0 / (n * t))


def loss_l1(estimates, reference, weights):
    """(1 / (n t)) * sum_tau w_tau * sum |x_tau - x| with complex modulus."""
    _check_estimates(estimates, reference, weights)
    n = np.asarray(reference).size
    t = len(estimates)
    acc = None
    for est, w in zip(estimates, weights):
        term = tape.scale(tape.sumabs(tape.sub(est, reference)), float(w))
        acc = term if acc is None else tape.add(acc, term)
    return tape.scale(acc, 1.0 / (n * t))


# ---------------------------------------------------------------------------
# ADAM


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(
            m={k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()},
            v={k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()},
        )


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected ADAM update; mutates ``params`` and ``state``."""
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for key, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        state.m[key] = beta1 * state.m[key] + (1 - beta1) * g
        state.v[key] = beta2 * state.v[key] + (1 - beta2) * g * g
        m_hat = state.m[key] / bc1
        v_hat = state.v[key] / bc2
        params[key] = params[key] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


# ---------------------------------------------------------------------------
# augmentation and sampling


@dataclass
class AugmentToggles:
    crop: bool = True
    rotate: bool = True
    flip: bool = True


def augment(sample, seed, toggles=AugmentToggles(), patch=None):
    """Random crop / 90-degree rotation / flips, applied identically to the
    reference image and the sensitivity maps.  Deterministic under ``seed``.
    """
    rng = np.random.default_rng(seed)
    ref = np.asarray(sample["reference"])
    sens = np.asarray(sample["sensitivities"])
    h, w = ref.shape
    if patch is not None:
        ph, pw = min(patch, h), min(patch, w)
        if toggles.crop:
            top = rng.integers(0, h - ph + 1)
            left = rng.integers(0, w - pw + 1)
        else:
            top, left = (h - ph) // 2, (w - pw) // 2
        ref = ref[top : top + ph, left : left + pw]
        sens = sens[:, top : top + ph, left : left + pw]
    if toggles.rotate:
        k = int(rng.integers(0, 4))
        ref = np.rot90(ref, k)
        sens = np.rot90(sens, k, axes=(1, 2))
    if toggles.flip:
        if rng.integers(0, 2):
            ref = ref[::-1]
            sens = sens[:, ::-1]
    return {"reference": np.ascontiguousarray(ref), "sensitivities": np.ascontiguousarray(sens)}


def weighted_sampler(datasets, weights, seed):
    """Infinite stream of (dataset_index, sample): dataset by weight, sample
    uniform within it."""
    weights = np.asarray(weights, dtype=np.float64)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ConfigError(f"weights must sum to 1, got {weights.sum()}")
    for ds, w in zip(datasets, weights):
        if w > 0 and len(ds) == 0:
            raise ConfigError("empty dataset with nonzero weight")
    rng = np.random.default_rng(seed)
    while True:
        i = int(rng.choice(len(datasets), p=weights))
        j = int(rng.integers(0, len(datasets[i])))
        yield i, datasets[i][j]


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 2
    patch: int = 64
    paper_patch: int = 190
    acceleration: float = 4.0
    accel_choices: tuple = ()  # nonempty: draw acceleration per sample
    noise_sigma: float = 0.0
    augment: bool = True
    seed: int = 0
    lr_decay: float = 0.1
    plateau_patience: int = 5
    dataset_weights: tuple = (1.0,)

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs < 1 or self.patch < 1:
            raise ConfigError(f"invalid training configuration: {self}")
        if abs(sum(self.dataset_weights) - 1.0) > 1e-9:
            raise ConfigError(f"dataset weights must sum to 1, got {self.dataset_weights}")


def parse_train_config(path):
    """Key = value text configuration; unknown keys are rejected."""
    values = {}
    valid = set(TrainConfig.__dataclass_fields__)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in valid:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = raw
    kwargs = {}
    for key, raw in values.items():
        kind = TrainConfig.__dataclass_fields__[key].type
        if key in ("accel_choices", "dataset_weights"):
            kwargs[key] = tuple(float(tok) for tok in raw.split(",") if tok.strip())
        elif kind in (int, "int"):
            kwargs[key] = int(raw)
        elif kind in (float, "float"):
            kwargs[key] = float(raw)
        elif kind in (bool, "bool"):
            kwargs[key] = raw.lower() in ("1", "true", "yes")
        else:
            kwargs[key] = raw
    return TrainConfig(**kwargs)


def _synthesize_measurement(sample, accel, mask_seed, noise_sigma, sigma_seed):
    ref = sample["reference"]
    coils = CoilSet(sample["sensitivities"])
    mask = gaussian_mask(ref.shape[0], ref.shape[1], accel, mask_seed)
    y = forward_op(ref, coils, mask.pattern)
    if noise_sigma > 0:
        scale = noise_sigma * float(np.abs(ref).mean())
        y = add_noise(y, NoiseSpec(scale, sigma_seed), mask.pattern)
    return coils.with_measurements(y), mask


def train_step(model_vars, param_vars, sample, accel, mask_seed, loss_spec,
               adam_state, lr, noise_sigma=0.0):
    """One optimization step on a single sample; returns the loss value."""
    coils, mask = _synthesize_measurement(sample, accel, mask_seed, noise_sigma, mask_seed + 1)
    estimates = rim_forward(model_vars, coils, mask.pattern)
    loss = loss_spec(estimates, sample["reference"])
    grads = tape.backward(loss, list(param_vars.values()))
    grad_map = {k: g for k, g in zip(param_vars, grads)}
    new_params = {k: v.value for k, v in param_vars.items()}
    adam_step(new_params, grad_map, adam_state, lr)
    for k, var in param_vars.items():
        var.value = new_params[k]
        var.grad = None
    return float(loss.value)


@dataclass
class TrainResult:
    model: RimModel
    best_model: RimModel
    curve: list  # rows of (epoch, train_loss, val_loss, val_ssim, val_psnr)
    final_lr: float


def write_curve(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_ssim", "val_psnr"])
        writer.writerows(curve)


def evaluate(model, samples, loss_spec, accel, seed_base=10_000):
    """Validation pass with fixed per-sample mask seeds."""
    losses, ssims, psnrs = [], [], []
    for i, sample in enumerate(samples):
        coils, mask = _synthesize_measurement(sample, accel, seed_base + i, 0.0, 0)
        estimates = rim_forward(model, coils, mask.pattern)
        losses.append(float(value_of(loss_spec(estimates, sample["reference"]))))
        rec = np.abs(value_of(estimates[-1]))
        ref = np.abs(sample["reference"])
        peak = ref.max() if ref.max() > 0 else 1.0
        ssims.append(_metrics.ssim(rec, ref, dynamic_range=peak))
        psnrs.append(_metrics.psnr(rec, ref, peak=peak))
    return float(np.mean(losses)), float(np.mean(ssims)), float(np.mean(psnrs))


def train(model, datasets, loss_spec, config, val_samples=(), log=None,
          checkpoint_path=None, sidecar=None):
    """Deterministic single-threaded training over phantom-style samples.

    ``datasets`` is a list of sample lists; draws follow ``dataset_weights``.
    The best-validation model is retained; a NaN loss aborts with a diagnostic
    checkpoint (when a checkpoint path is given).
    """
    if len(datasets) != len(config.dataset_weights):
        raise ConfigError(
            f"{len(datasets)} datasets vs {len(config.dataset_weights)} weights"
        )
    rng = np.random.default_rng(config.seed)
    sampler = weighted_sampler(datasets, config.dataset_weights, config.seed + 1)
    steps_per_epoch = sum(len(ds) for ds in datasets)
    param_vars = {k: Var(np.array(v)) for k, v in model.params.items()}
    model_vars = RimModel(model.config, param_vars)
    adam_state = AdamState.for_params(model.params)
    lr = config.learning_rate
    toggles = AugmentToggles(crop=config.augment, rotate=config.augment, flip=config.augment)

    curve = []
    best = (math.inf, model.copy())
    since_best = 0
    for epoch in range(config.epochs):
        epoch_losses = []
        for _ in range(steps_per_epoch):
            _, sample = next(sampler)
            aug_seed = int(rng.integers(0, 2**63 - 1))
            mask_seed = int(rng.integers(0, 2**63 - 1))
            sample = augment(sample, aug_seed, toggles, patch=min(config.patch, sample["reference"].shape[0]))
            accel = config.acceleration
            if config.accel_choices:
                accel = float(rng.choice(np.asarray(config.accel_choices)))
            loss_val = train_step(model_vars, param_vars, sample, accel, mask_seed,
                                  loss_spec, adam_state, lr, config.noise_sigma)
            if not math.isfinite(loss_val):
                snapshot = RimModel(model.config, {k: v.value for k, v in param_vars.items()})
                if checkpoint_path is not None:
                    save_checkpoint(snapshot, str(checkpoint_path) + ".diverged")
                raise NumericalFailure(f"training loss became {loss_val} at epoch {epoch}")
            epoch_losses.append(loss_val)
        current = RimModel(model.config, {k: np.array(v.value) for k, v in param_vars.items()})
        if val_samples:
            val_loss, val_ssim, val_psnr = evaluate(current, val_samples, loss_spec, config.acceleration)
        else:
            val_loss, val_ssim, val_psnr = float(np.mean(epoch_losses)), math.nan, math.nan
        curve.append((epoch, float(np.mean(epoch_losses)), val_loss, val_ssim, val_psnr))
        if log:
            log(f"epoch {epoch}: train {np.mean(epoch_losses):.3e} val {val_loss:.3e} "
                f"ssim {val_ssim:.4f} psnr {val_psnr:.2f}")
        if val_loss < best[0]:
            best = (val_loss, current.copy())
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.plateau_patience:
                lr *= config.lr_decay
                since_best = 0

    final = RimModel(model.config, {k: np.array(v.value) for k, v in param_vars.items()})
    if checkpoint_path is not None:
        save_checkpoint(best[1], checkpoint_path, sidecar=sidecar)
    return TrainResult(final, best[1], curve, lr)
