"""Synthetic reference images: ellipse phantoms and a textured variant.

Both kinds carry a smooth synthetic phase map and are normalized so the
magnitude peaks at 1.  The textured variant adds seeded smooth ellipses and
bandlimited noise texture on top, raising the high-frequency k-space content.
"""

import numpy as np

from ..errors import ContractError
from ..numcore import fft2_centered, ifft2_centered

# modified Shepp-Logan ellipses: (value, a, b, x0, y0, phi_degrees)
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def _ellipse_sum(size, ellipses, jitter_rng=None, jitter=0.0):
    ys, xs = np.mgrid[0:size, 0:size]
    y = (ys - (size - 1) / 2.0) / (size / 2.0)
    x = (xs - (size - 1) / 2.0) / (size / 2.0)
    img = np.zeros((size, size))
    for value, a, b, x0, y0, phi in ellipses:
        if jitter_rng is not None and jitter > 0:
            a *= 1 + jitter_rng.normal(0, jitter)
            b *= 1 + jitter_rng.normal(0, jitter)
            x0 += jitter_rng.normal(0, jitter / 2)
            y0 += jitter_rng.normal(0, jitter / 2)
            phi += jitter_rng.normal(0, 5 * jitter)
        rad = np.deg2rad(phi)
        xr = (x - x0) * np.cos(rad) + (y - y0) * np.sin(rad)
        yr = -(x - x0) * np.sin(rad) + (y - y0) * np.cos(rad)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    return img


def _smooth_phase(size, rng):
    ys, xs = np.mgrid[0:size, 0:size]
    y = (ys - size / 2.0) / (size / 2.0)
    x = (xs - size / 2.0) / (size / 2.0)
    coeffs = rng.normal(0, 0.4, 5)
    return coeffs[0] + coeffs[1] * x + coeffs[2] * y + coeffs[3] * x * y + coeffs[4] * (x**2 - y**2)


def _bandlimited_texture(size, rng, cutoff=0.85, amplitude=0.3):
    noise = rng.normal(size=(size, size))
    k = fft2_centered(noise.astype(np.complex128))
    fy = (np.arange(size) - size // 2) / (size / 2.0)
    r2 = fy[:, None] ** 2 + fy[None, :] ** 2
    window = np.exp(-((r2 / (2 * cutoff**2)) ** 2))
    # suppress the lower band so the texture is genuinely mid/high frequency
    band = window * (1 - np.exp(-r2 / (2 * 0.35**2)))
    tex = ifft2_centered(k * band).real
    tex /= max(np.abs(tex).max(), 1e-12)
    return amplitude * tex


def gen_phantom(kind, size, seed=0):
    """Deterministic complex-valued reference image, magnitude in [0, 1]."""
    if size < 32:
        raise ContractError(f"size must be >= 32, got {size}")
    if kind not in ("shepp", "textured"):
        raise ContractError(f"unknown phantom kind {kind!r}")
    rng = np.random.default_rng(seed)
    mag = _ellipse_sum(size, _SHEPP_LOGAN, jitter_rng=rng, jitter=0.03)
    if kind == "textured":
        extra = []
        for _ in range(rng.integers(4, 9)):
            extra.append((
                rng.uniform(-0.12, 0.15),
                rng.uniform(0.05, 0.35),
                rng.uniform(0.05, 0.35),
                rng.uniform(-0.45, 0.45),
                rng.uniform(-0.45, 0.45),
                rng.uniform(0, 180),
            ))
        mag = mag + _ellipse_sum(size, extra)
        support = mag > 0.02
        mag = mag + _bandlimited_texture(size, rng) * support
    mag = np.clip(mag, 0.0, None)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    phase = _smooth_phase(size, rng)
    return mag * np.exp(1j * phase)


def highfreq_energy_fraction(img, cutoff=0.25):
    """Fraction of spectral energy outside a centered low-frequency square."""
    k = fft2_centered(np.asarray(img, dtype=np.complex128))
    h, w = k.shape
    hy, hx = int(cutoff * h), int(cutoff * w)
    total = float(np.sum(np.abs(k) ** 2))
    cy, cx = h // 2, w // 2
    low = float(np.sum(np.abs(k[cy - hy : cy + hy + 1, cx - hx : cx + hx + 1]) ** 2))
    return (total - low) / total
