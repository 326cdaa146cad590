"""Variable-density Gaussian undersampling masks.

Points are drawn without replacement from a centered 2-D Gaussian whose
per-axis FWHM is a fixed fraction (default 0.7) of the axis length, on top of
a fully sampled calibration ellipse around DC.  Cardinality is exact:
``round(H * W / R)`` ones for acceleration ``R``.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InfeasibleMaskError, ParseError, ShapeError

FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))  # approx 2.355

_MAGIC = b"RIMK"
_VERSION = 1
_HEADER = struct.Struct("<4sBIId Q")


@dataclass
class SamplingMask:
    pattern: np.ndarray  # (H, W) float 0/1
    acceleration: float
    seed: int
    fwhm_fraction: float = 0.7
    ellipse_fraction: float = 0.02

    def __post_init__(self):
        self.pattern = np.asarray(self.pattern, dtype=np.float64)
        if self.pattern.ndim != 2:
            raise ShapeError(f"mask pattern must be 2-D, got {self.pattern.shape}")

    @property
    def shape(self):
        return self.pattern.shape

    def ones_count(self):
        return int(self.pattern.sum())


def _ellipse(height, width, ellipse_fraction):
    """Boolean calibration region around the DC sample at (H//2, W//2).

    Half-axes are the given fraction of each half-axis of the grid, floored at
    sqrt(2) so the full 3x3 neighborhood of DC is always retained.
    """
    a = max(ellipse_fraction * height / 2.0, np.sqrt(2.0))
    b = max(ellipse_fraction * width / 2.0, np.sqrt(2.0))
    dy = np.arange(height) - height // 2
    dx = np.arange(width) - width // 2
    return (dy[:, None] / a) ** 2 + (dx[None, :] / b) ** 2 <= 1.0 + 1e-12


def gaussian_mask(height, width, acceleration, seed, fwhm_fraction=0.7, ellipse_fraction=0.02):
    """Variable-density random mask with exact cardinality round(H*W/R)."""
    if height < 1 or width < 1:
        raise ShapeError(f"invalid mask shape {height}x{width}")
    if acceleration <= 1:
        raise ContractError(f"acceleration must be > 1, got {acceleration}")
    budget = int(round(height * width / acceleration))
    ellipse = _ellipse(height, width, ellipse_fraction)
    n_ellipse = int(ellipse.sum())
    if budget < n_ellipse:
        raise InfeasibleMaskError(
            f"budget {budget} below calibration region size {n_ellipse} "
            f"(acceleration {acceleration} too high for {height}x{width})"
        )

    dy = (np.arange(height) - height // 2)[:, None]
    dx = (np.arange(width) - width // 2)[None, :]
    sig_y = fwhm_fraction * height / FWHM_TO_SIGMA
    sig_x = fwhm_fraction * width / FWHM_TO_SIGMA
    density = np.exp(-0.5 * ((dy / sig_y) ** 2 + (dx / sig_x) ** 2))
    density[ellipse] = 0.0  # already sampled

    pattern = ellipse.astype(np.float64)
    n_rest = budget - n_ellipse
    if n_rest > 0:
        flat = density.ravel()
        p = flat / flat.sum()
        rng = np.random.default_rng(seed)
        # sampling without replacement from the Gaussian density, equivalent
        # to redrawing on collision until the budget is met
        chosen = rng.choice(height * width, size=n_rest, replace=False, p=p)
        pattern.ravel()[chosen] = 1.0

    return SamplingMask(pattern, float(acceleration), int(seed), fwhm_fraction, ellipse_fraction)


def save_mask(mask, path):
    """Write the binary mask format: magic, version, dims, R, seed, packed bits."""
    header = _HEADER.pack(
        _MAGIC, _VERSION, mask.shape[0], mask.shape[1], mask.acceleration, mask.seed
    )
    bits = np.packbits(mask.pattern.astype(np.uint8).ravel())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(bits.tobytes())


def load_mask(path, expect_shape=None):
    """Read a mask file; raises :class:`ParseError` with the failing byte offset."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParseError("truncated header", len(raw))
    magic, version, height, width, acceleration, seed = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}", 0)
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}", 4)
    n_bytes = (height * width + 7) // 8
    if len(raw) != _HEADER.size + n_bytes:
        raise ParseError(
            f"payload length {len(raw) - _HEADER.size} != expected {n_bytes}",
            min(len(raw), _HEADER.size + n_bytes),
        )
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size))
    pattern = bits[: height * width].reshape(height, width).astype(np.float64)
    if expect_shape is not None and (height, width) != tuple(expect_shape):
        raise ShapeError(f"mask is {height}x{width}, data expects {expect_shape}")
    return SamplingMask(pattern, acceleration, seed)
