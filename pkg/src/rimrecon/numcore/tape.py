"""Minimal reverse-mode differentiation tape.

Every operation below accepts plain ndarrays or :class:`Var` nodes.  With
ndarray inputs it just computes; with at least one ``Var`` input it records
the vector-Jacobian product needed for the backward pass, so the same network
code serves both fast inference and training.

Complex-valued nodes use the packed-cotangent convention: for a real scalar
loss ``L`` the gradient stored on a complex node ``z`` is
``dL/dRe(z) + 1j * dL/dIm(z)``.  Under this convention the VJP of any
complex-linear map ``A`` is ``A^H``, and gradients on real-valued nodes reduce
to ordinary real gradients.
"""

import numpy as np

from ..errors import ContractError, ShapeError
from . import conv as _conv
from . import fourier as _fourier


class Var:
    """A tape node: a value plus VJP links to its parents."""

    __slots__ = ("value", "parents", "grad")

    def __init__(self, value, parents=()):
        self.value = np.asarray(value)
        self.parents = parents
        self.grad = None

    @property
    def shape(self):
        return self.value.shape


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x)


def _recorded(*xs):
    return any(isinstance(x, Var) for x in xs)


def _node(out, *links):
    """Build a Var keeping only links whose source is itself a Var."""
    parents = tuple((x, vjp) for x, vjp in links if isinstance(x, Var))
    return Var(out, parents)


def backward(loss, params):
    """Accumulate gradients of a scalar ``loss`` into each Var in ``params``.

    Visits each reachable node exactly once in reverse topological order and
    returns one gradient array per parameter; parameters the loss does not
    depend on get exact zeros.
    """
    if not isinstance(loss, Var):
        raise ContractError("loss is not a recorded tape node")
    lval = np.asarray(loss.value)
    if lval.size != 1:
        raise ContractError(f"loss must be scalar, got shape {lval.shape}")
    if np.iscomplexobj(lval):
        raise ContractError("loss must be real-valued")

    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    for node in order:
        node.grad = None
    loss.grad = np.ones_like(lval, dtype=np.float64).reshape(lval.shape)

    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, vjp in node.parents:
            contrib = np.asarray(vjp(node.grad))
            if not np.iscomplexobj(parent.value):
                # real nodes carry real cotangents; drop any packed imaginary part
                contrib = np.real(contrib)
            if parent.grad is None:
                parent.grad = contrib.astype(np.complex128 if np.iscomplexobj(parent.value) else np.float64)
            else:
                parent.grad = parent.grad + contrib

    grads = []
    for p in params:
        if p.grad is None:
            dtype = np.complex128 if np.iscomplexobj(p.value) else np.float64
            grads.append(np.zeros(p.value.shape, dtype=dtype))
        else:
            grads.append(p.grad)
    return grads


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    out = value_of(a) + value_of(b)
    if not _recorded(a, b):
        return out
    return _node(out, (a, lambda g: g), (b, lambda g: g))


def sub(a, b):
    out = value_of(a) - value_of(b)
    if not _recorded(a, b):
        return out
    return _node(out, (a, lambda g: g), (b, lambda g: -g))


def mul(a, b):
    """Elementwise product; both factors must be real if both are recorded."""
    av, bv = value_of(a), value_of(b)
    out = av * bv
    if not _recorded(a, b):
        return out
    if isinstance(a, Var) and isinstance(b, Var) and (np.iscomplexobj(av) or np.iscomplexobj(bv)):
        raise ContractError("recorded complex*complex products are not supported")
    return _node(out, (a, lambda g: _unbroadcast(g * np.conj(bv), av.shape)),
                 (b, lambda g: _unbroadcast(g * np.conj(av), bv.shape)))


def scale(a, c):
    """Multiply by a real scalar constant."""
    out = value_of(a) * c
    if not _recorded(a):
        return out
    return _node(out, (a, lambda g: g * c))


def _unbroadcast(g, shape):
    """Sum a cotangent back down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# activations (real-valued)


def sigmoid(x):
    out = 1.0 / (1.0 + np.exp(-value_of(x)))
    if not _recorded(x):
        return out
    return _node(out, (x, lambda g: g * out * (1.0 - out)))


def tanh(x):
    out = np.tanh(value_of(x))
    if not _recorded(x):
        return out
    return _node(out, (x, lambda g: g * (1.0 - out * out)))


def relu(x):
    xv = value_of(x)
    out = np.maximum(xv, 0.0)
    if not _recorded(x):
        return out
    mask = (xv > 0).astype(np.float64)
    return _node(out, (x, lambda g: g * mask))


# ---------------------------------------------------------------------------
# structural ops


def stack_channels(items):
    """Stack equal-shaped 2-D fields into a (C,H,W) block."""
    vals = [value_of(it) for it in items]
    out = np.stack(vals, axis=0)
    if not _recorded(*items):
        return out
    links = [(it, (lambda i: lambda g: g[i])(i)) for i, it in enumerate(items)]
    return _node(out, *links)


def channel(x, i):
    out = value_of(x)[i]
    if not _recorded(x):
        return out

    def vjp(g):
        full = np.zeros(value_of(x).shape, dtype=g.dtype)
        full[i] = g
        return full

    return _node(out, (x, vjp))


def real(z):
    out = value_of(z).real.copy()
    if not _recorded(z):
        return out
    return _node(out, (z, lambda g: g.astype(np.complex128)))


def imag(z):
    out = value_of(z).imag.copy()
    if not _recorded(z):
        return out
    return _node(out, (z, lambda g: 1j * g))


def make_complex(a, b):
    out = value_of(a) + 1j * value_of(b)
    if not _recorded(a, b):
        return out
    return _node(out, (a, lambda g: g.real.copy()), (b, lambda g: g.imag.copy()))


# ---------------------------------------------------------------------------
# linear maps


def dense_pixelwise(w, x, b=None):
    """Per-pixel dense map: (O,I) weights applied to an (I,H,W) field."""
    wv, xv = value_of(w), value_of(x)
    if wv.ndim != 2 or xv.ndim != 3 or wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"dense map {wv.shape} incompatible with field {xv.shape}")
    out = np.einsum("oi,ihw->ohw", wv, xv)
    if b is not None:
        out = out + value_of(b)[:, None, None]
    if not _recorded(w, x, b):
        return out
    links = [
        (w, lambda g: np.einsum("ohw,ihw->oi", g, xv)),
        (x, lambda g: np.einsum("oi,ohw->ihw", wv, g)),
    ]
    if b is not None:
        links.append((b, lambda g: g.sum(axis=(1, 2))))
    return _node(out, *links)


def conv2d(x, w, b=None):
    """Recorded wrapper around :func:`rimrecon.numcore.conv.conv2d`."""
    xv, wv = value_of(x), value_of(w)
    bv = None if b is None else value_of(b)
    out = _conv.conv2d(xv, wv, bv)
    if not _recorded(x, w, b):
        return out
    o, c, kh, kw = wv.shape
    links = [
        (x, lambda g: _conv.conv2d_transpose(g, wv)),
        (w, lambda g: _conv.conv2d_weight_grad(xv, g, kh, kw)),
    ]
    if b is not None:
        links.append((b, lambda g: g.sum(axis=(1, 2))))
    return _node(out, *links)


def fft2c(z):
    out = _fourier.fft2_centered(value_of(z))
    if not _recorded(z):
        return out
    return _node(out, (z, lambda g: _fourier.ifft2_centered(g)))


def ifft2c(z):
    out = _fourier.ifft2_centered(value_of(z))
    if not _recorded(z):
        return out
    return _node(out, (z, lambda g: _fourier.fft2_centered(g)))


def cmul_const(z, s):
    """Multiply a (possibly recorded) array by a constant complex field."""
    s = np.asarray(s)
    out = value_of(z) * s
    if not _recorded(z):
        return out
    return _node(out, (z, lambda g: _unbroadcast(g * np.conj(s), value_of(z).shape)))


def coil_expand(x, sens):
    """Per-coil weighting: (H,W) image times (c,H,W) sensitivities."""
    sens = np.asarray(sens)
    out = value_of(x)[None] * sens
    if not _recorded(x):
        return out
    return _node(out, (x, lambda g: np.sum(np.conj(sens) * g, axis=0)))


def coil_reduce(y, sens):
    """Adjoint of :func:`coil_expand`: sum of conjugate-weighted coil images."""
    sens = np.asarray(sens)
    out = np.sum(np.conj(sens) * value_of(y), axis=0)
    if not _recorded(y):
        return out
    return _node(out, (y, lambda g: g[None] * sens))


# ---------------------------------------------------------------------------
# reductions


def sumsq(z):
    """Sum of squared moduli (squared l2 norm); real scalar output."""
    zv = value_of(z)
    out = np.asarray(np.sum(zv.real**2 + zv.imag**2) if np.iscomplexobj(zv) else np.sum(zv**2))
    if not _recorded(z):
        return out
    return _node(out, (z, lambda g: g * 2.0 * zv))


def sumabs(z):
    """Sum of moduli; the derivative at exactly zero is defined as zero."""
    zv = value_of(z)
    mag = np.abs(zv)
    out = np.asarray(mag.sum())
    if not _recorded(z):
        return out

    def vjp(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            phase = np.where(mag > 0, zv / np.where(mag > 0, mag, 1.0), 0.0)
        return g * phase

    return _node(out, (z, vjp))


def total(x):
    """Plain sum of a real array to a scalar."""
    out = np.asarray(value_of(x).sum())
    if not _recorded(x):
        return out
    return _node(out, (x, lambda g: g * np.ones(value_of(x).shape)))
