"""Image quality metrics over normalized magnitude images.

SSIM uses 7x7 uniform windows with population statistics; both choices are
frozen here so the loop-oracle tests stay stable.  PSNR reports infinity for
exact equality.  The SNR estimator thresholds the magnitude image with Otsu's
method for the signal level and takes the median k-space magnitude in a
corner square for the noise level.
"""

import csv
import math
from dataclasses import dataclass, asdict, fields

import numpy as np

from .errors import ContractError, ShapeError

SSIM_WINDOW = 7


@dataclass
class MetricsRecord:
    ssim: float
    psnr: float
    snr: float = math.nan
    model: str = ""
    dataset: str = ""
    acceleration: float = 0.0
    slice_index: int = 0
    seed: int = 0


CSV_HEADER = [f.name for f in fields(MetricsRecord)]


def write_records(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
        writer.writeheader()
        for rec in records:
            writer.writerow(asdict(rec))


def ssim(a, b, dynamic_range=1.0, window=SSIM_WINDOW):
    """Mean local SSIM with C1=(0.01 L)^2, C2=(0.03 L)^2 over sliding windows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if dynamic_range <= 0:
        raise ContractError(f"dynamic range must be > 0, got {dynamic_range}")
    if min(a.shape) < window:
        raise ShapeError(f"image {a.shape} smaller than {window}x{window} window")
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    wa = np.lib.stride_tricks.sliding_window_view(a, (window, window))
    wb = np.lib.stride_tricks.sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa**2).mean(axis=(-2, -1)) - mu_a**2
    var_b = (wb**2).mean(axis=(-2, -1)) - mu_b**2
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def psnr(a, b, peak=1.0):
    """10 log10(peak^2 / MSE); infinity sentinel for exact equality."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return math.inf
    return float(10.0 * np.log10(peak**2 / mse))


def otsu_threshold(values, bins=256):
    """Histogram threshold maximizing between-class variance."""
    values = np.asarray(values, dtype=np.float64).ravel()
    hist, edges = np.histogram(values, bins=bins)
    centers = (edges[:-1] + edges[1:]) / 2.0
    weight = hist.astype(np.float64)
    total = weight.sum()
    w0 = np.cumsum(weight)
    w1 = total - w0
    cum = np.cumsum(weight * centers)
    mean0 = np.where(w0 > 0, cum / np.where(w0 > 0, w0, 1), 0.0)
    mean1 = np.where(w1 > 0, (cum[-1] - cum) / np.where(w1 > 0, w1, 1), 0.0)
    between = w0 * w1 * (mean0 - mean1) ** 2
    return float(centers[int(np.argmax(between[:-1]))])


def snr_estimate(volume, kspace, patch=32):
    """Signal mean over the Otsu foreground divided by peripheral k-space noise."""
    volume = np.abs(np.asarray(volume))
    kspace = np.asarray(kspace)
    if not volume.any():
        raise ContractError("all-zero input has undefined SNR")
    if kspace.shape[0] < 2 * patch or kspace.shape[1] < 2 * patch:
        patch = min(kspace.shape[0], kspace.shape[1]) // 2
        if patch < 1:
            raise ContractError("k-space too small for a noise patch")
    threshold = otsu_threshold(volume)
    foreground = volume[volume > threshold]
    if foreground.size == 0:
        raise ContractError("empty foreground after thresholding")
    signal = float(foreground.mean())
    noise = float(np.median(np.abs(kspace[:patch, :patch])))
    if noise == 0:
        raise ContractError("zero peripheral noise level, SNR undefined")
    return signal / noise
