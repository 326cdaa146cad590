"""Multi-coil SENSE forward model, adjoint, and likelihood gradient.

Conventions: the forward operator applies the sensitivity map directly
(``mask * F(S_i * x)`` per coil) and the adjoint applies its conjugate, so the
pair is an exact transpose.  The likelihood gradient omits the conventional
factor 2 from differentiating the squared residual; the network learns its own
step scaling, so the constant is absorbed into ``1 / sigma**2``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, ShapeError
from .numcore import tape
from .numcore.tape import value_of


@dataclass
class NoiseSpec:
    """Per-component Gaussian noise level and the seed that realizes it."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ContractError(f"sigma must be >= 0, got {self.sigma}")


@dataclass
class CoilSet:
    """Per-coil sensitivity maps and, optionally, k-space measurements."""

    sensitivities: np.ndarray  # (c, H, W) complex
    measurements: Optional[np.ndarray] = None  # (c, H, W) complex k-space

    def __post_init__(self):
        self.sensitivities = np.asarray(self.sensitivities, dtype=np.complex128)
        if self.sensitivities.ndim != 3 or self.sensitivities.shape[0] < 1:
            raise ShapeError(f"sensitivities must be (c,H,W), got {self.sensitivities.shape}")
        if self.measurements is not None:
            self.measurements = np.asarray(self.measurements, dtype=np.complex128)
            if self.measurements.shape != self.sensitivities.shape:
                raise ShapeError(
                    f"measurements shape {self.measurements.shape} != "
                    f"sensitivities shape {self.sensitivities.shape}"
                )

    @property
    def coil_count(self):
        return self.sensitivities.shape[0]

    @property
    def image_shape(self):
        return self.sensitivities.shape[1:]

    def with_measurements(self, y):
        return CoilSet(self.sensitivities, y)


def _check_image(x, coils, mask):
    shape = value_of(x).shape
    if shape != coils.image_shape:
        raise ShapeError(f"image shape {shape} != coil shape {coils.image_shape}")
    if mask.shape != coils.image_shape:
        raise ShapeError(f"mask shape {mask.shape} != coil shape {coils.image_shape}")


def forward_op(x, coils, mask):
    """Per-coil measurement synthesis: ``y_i = mask * F(S_i * x)``."""
    _check_image(x, coils, mask)
    coil_imgs = tape.coil_expand(x, coils.sensitivities)
    k = tape.fft2c(coil_imgs)
    return tape.cmul_const(k, np.asarray(mask, dtype=np.float64)[None])


def adjoint_op(y, coils, mask):
    """Exact adjoint of :func:`forward_op`: ``sum_i conj(S_i) * F^-1(mask * y_i)``."""
    yshape = value_of(y).shape
    if yshape != coils.sensitivities.shape:
        raise ShapeError(f"k-space shape {yshape} != coil shape {coils.sensitivities.shape}")
    if mask.shape != coils.image_shape:
        raise ShapeError(f"mask shape {mask.shape} != coil shape {coils.image_shape}")
    masked = tape.cmul_const(y, np.asarray(mask, dtype=np.float64)[None])
    imgs = tape.ifft2c(masked)
    return tape.coil_reduce(imgs, coils.sensitivities)


def loglik_gradient(x, coils, mask, sigma=1.0):
    """Data-fidelity gradient ``(1/sigma^2) A^H (A x - y)`` at the estimate ``x``."""
    if coils.measurements is None:
        raise ContractError("coils carry no measurements")
    if sigma <= 0:
        raise ContractError(f"sigma must be > 0, got {sigma}")
    residual = tape.sub(forward_op(x, coils, mask), coils.measurements)
    return tape.scale(adjoint_op(residual, coils, mask), 1.0 / sigma**2)


def data_fidelity(x, coils, mask, sigma=1.0):
    """Scalar ``(1/(2 sigma^2)) * sum_i ||mask F S_i x - y_i||^2``.

    Chosen so its exact gradient equals :func:`loglik_gradient` under the
    declared factor-2-free convention.
    """
    if coils.measurements is None:
        raise ContractError("coils carry no measurements")
    residual = tape.sub(forward_op(x, coils, mask), coils.measurements)
    return tape.scale(tape.sumsq(residual), 0.5 / sigma**2)


def synth_sensitivities(shape, coil_count, seed=0):
    """Smooth synthetic coil sensitivities, normalized to sum(|S|^2) = 1.

    Each coil gets a broad Gaussian magnitude lobe centered on a point around
    the image border plus a linear phase ramp; small seeded perturbations keep
    distinct seeds distinct.
    """
    if coil_count < 1:
        raise ContractError(f"coil_count must be >= 1, got {coil_count}")
    h, w = shape
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    yc, xc = (h - 1) / 2.0, (w - 1) / 2.0
    radius = 0.6 * max(h, w)
    width = 0.7 * max(h, w)
    offset = rng.uniform(0, 2 * np.pi)
    maps = np.empty((coil_count, h, w), dtype=np.complex128)
    for i in range(coil_count):
        ang = offset + 2 * np.pi * i / coil_count + rng.normal(0, 0.05)
        cy = yc + radius * np.sin(ang)
        cx = xc + radius * np.cos(ang)
        mag = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * (width * rng.uniform(0.9, 1.1)) ** 2)))
        ramp = (rng.uniform(-1, 1) * (yy - yc) + rng.uniform(-1, 1) * (xx - xc)) * (np.pi / max(h, w))
        maps[i] = mag * np.exp(1j * (ramp + rng.uniform(0, 2 * np.pi)))
    combined = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    support = combined > 1e-8
    maps = np.where(support[None], maps / np.where(support, combined, 1.0)[None], 0.0)
    return CoilSet(maps)


def add_noise(y, spec, mask=None):
    """Add i.i.d. Gaussian noise to real and imaginary parts of k-space.

    With a mask given, noise is injected at sampled positions only and
    mask-zero positions stay exactly zero.
    """
    y = np.asarray(y, dtype=np.complex128)
    if spec.sigma == 0:
        return y.copy()
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0, spec.sigma, y.shape) + 1j * rng.normal(0, spec.sigma, y.shape)
    if mask is not None:
        noise = noise * np.asarray(mask, dtype=np.float64)
    return y + noise
