"""Zero-padded 2-D convolution kernels over channel stacks.

Spatial sizes are preserved by padding (k - 1) / 2 on each side; kernel side
lengths must be odd.  The transpose operation is exposed separately because
the backward pass and the adjoint property tests both need it.
"""

import numpy as np

from ..errors import ShapeError


def _check(x, w, b):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError(f"expected input (C,H,W) and kernels (O,C,kh,kw), got {x.shape}, {w.shape}")
    o, c, kh, kw = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"kernel sides must be odd, got {kh}x{kw}")
    if x.shape[0] != c:
        raise ShapeError(f"channel mismatch: input has {x.shape[0]}, kernels expect {c}")
    if b is not None:
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (o,):
            raise ShapeError(f"bias shape {b.shape} does not match {o} output channels")
    return x, w, b


def im2col(x, kh, kw):
    """Patch matrix of shape (C*kh*kw, H*W) from a zero-padded (C,H,W) stack."""
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, shape=(c, kh, kw, h, w), strides=(s[0], s[1], s[2], s[1], s[2])
    )
    return view.reshape(c * kh * kw, h * w)


def col2im(cols, c, h, w, kh, kw):
    """Adjoint of :func:`im2col`: scatter-add patches back onto the grid."""
    cols = cols.reshape(c, kh, kw, h, w)
    xp = np.zeros((c, h + kh - 1, w + kw - 1))
    for i in range(kh):
        for j in range(kw):
            xp[:, i : i + h, j : j + w] += cols[:, i, j]
    return xp[:, kh // 2 : kh // 2 + h, kw // 2 : kw // 2 + w]


def conv2d(x, w, b=None):
    """Same-size convolution of a (C,H,W) stack with (O,C,kh,kw) kernels."""
    x, w, b = _check(x, w, b)
    o, c, kh, kw = w.shape
    _, h, wd = x.shape
    out = w.reshape(o, -1) @ im2col(x, kh, kw)
    if b is not None:
        out += b[:, None]
    return out.reshape(o, h, wd)


def conv2d_transpose(g, w):
    """Transpose of :func:`conv2d` in its input argument (bias excluded)."""
    g = np.asarray(g, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    o, c, kh, kw = w.shape
    if g.shape[0] != o:
        raise ShapeError(f"channel mismatch: got {g.shape[0]}, kernels produce {o}")
    _, h, wd = g.shape
    cols = w.reshape(o, -1).T @ g.reshape(o, -1)
    return col2im(cols, c, h, wd, kh, kw)


def conv2d_weight_grad(x, g, kh, kw):
    """Gradient of a scalar loss w.r.t. the kernels, given input and cotangent."""
    c = x.shape[0]
    o = g.shape[0]
    cols = im2col(np.asarray(x, dtype=np.float64), kh, kw)
    return (g.reshape(o, -1) @ cols.T).reshape(o, c, kh, kw)
