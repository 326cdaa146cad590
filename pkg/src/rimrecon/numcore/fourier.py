"""Centered, orthonormal 2-D Fourier transforms.

The DC component sits at ``(H // 2, W // 2)``; shifts are applied before and
after the transform so the convention holds in both domains.  Orthonormal
scaling makes the inverse equal the adjoint, so SENSE-style operators built on
top are exact transposes of each other.
"""

import numpy as np

from ..errors import ShapeError


def _check_2d(x):
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise ShapeError(f"expected at least 2-D with nonzero axes, got shape {x.shape}")
    return x


def fft2_centered(img):
    """Unitary 2-D DFT over the last two axes, centered in both domains."""
    img = _check_2d(img)
    shifted = np.fft.ifftshift(img, axes=(-2, -1))
    k = np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(k, axes=(-2, -1))


def ifft2_centered(kspace):
    """Inverse (and adjoint) of :func:`fft2_centered`."""
    kspace = _check_2d(kspace)
    shifted = np.fft.ifftshift(kspace, axes=(-2, -1))
    img = np.fft.ifft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(img, axes=(-2, -1))
