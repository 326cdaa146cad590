"""Numerical-core tests: centered FFT, zero-padded convolution, and the
reverse-mode tape, each checked against independent oracles."""

import numpy as np
import pytest

from rimrecon.errors import ContractError, ShapeError
from rimrecon.numcore import conv2d, conv2d_transpose, fft2_centered, ifft2_centered
from rimrecon.numcore import tape
from rimrecon.numcore.conv import conv2d_weight_grad
from rimrecon.numcore.tape import Var, backward


def naive_dft2_centered(img):
    """O(n^2) direct summation of the centered orthonormal 2-D DFT."""
    h, w = img.shape
    ys = np.arange(h) - h // 2
    xs = np.arange(w) - w // 2
    out = np.zeros((h, w), dtype=np.complex128)
    for ki, ky in enumerate(ys):
        for kj, kx in enumerate(xs):
            phase = np.exp(-2j * np.pi * (np.outer(ys * ky / h, np.ones(w))
                                          + np.outer(np.ones(h), xs * kx / w)))
            out[ki, kj] = (img * phase).sum()
    return out / np.sqrt(h * w)


def naive_conv2d(x, w, b):
    """Direct nested-loop zero-padded convolution."""
    c_out, c_in, kh, kw = w.shape
    _, h, wid = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.zeros((c_in, h + 2 * ph, wid + 2 * pw))
    xp[:, ph : ph + h, pw : pw + wid] = x
    out = np.zeros((c_out, h, wid))
    for o in range(c_out):
        for i in range(h):
            for j in range(wid):
                acc = 0.0
                for ci in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            acc += w[o, ci, u, v] * xp[ci, i + u, j + v]
                out[o, i, j] = acc + b[o]
    return out


class TestFFT:
    def test_impulse_to_constant(self):
        img = np.zeros((4, 4), dtype=np.complex128)
        img[2, 2] = 1.0  # grid center for even sizes
        out = fft2_centered(img)
        assert np.allclose(out, 0.25, atol=1e-12)

    def test_constant_to_impulse(self):
        img = np.full((4, 4), 0.25, dtype=np.complex128)
        out = ifft2_centered(img)
        expected = np.zeros((4, 4), dtype=np.complex128)
        expected[2, 2] = 1.0
        assert np.allclose(out, expected, atol=1e-12)

    def test_inverse_identity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(9, 7)) + 1j * rng.normal(size=(9, 7))
        rt = ifft2_centered(fft2_centered(x))
        assert np.linalg.norm(rt - x) / np.linalg.norm(x) < 1e-10

    def test_matches_naive_dft(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert np.linalg.norm(fft2_centered(x) - naive_dft2_centered(x)) < 1e-9

    def test_inverse_matches_naive(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        # inverse = conjugate trick on the forward oracle
        expected = np.conj(naive_dft2_centered(np.conj(x)))
        assert np.linalg.norm(ifft2_centered(x) - expected) < 1e-9

    def test_unitarity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.normal(size=(16, 12)) + 1j * rng.normal(size=(16, 12))
            rel = abs(np.linalg.norm(fft2_centered(x)) - np.linalg.norm(x))
            assert rel / np.linalg.norm(x) < 1e-10

    def test_parseval_inner_product(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        y = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        lhs = np.vdot(y, fft2_centered(x))
        rhs = np.vdot(ifft2_centered(y), x)
        assert abs(lhs - rhs) < 1e-10


class TestConv:
    def test_identity_kernel(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 6, 6))
        w = np.zeros((2, 2, 1, 1))
        w[0, 0, 0, 0] = 1.0
        w[1, 1, 0, 0] = 1.0
        out = conv2d(x, w, np.zeros(2))
        assert np.allclose(out, x)

    def test_impulse_response(self):
        x = np.zeros((1, 7, 7))
        x[0, 3, 3] = 1.0
        w = np.ones((1, 1, 3, 3))
        out = conv2d(x, w, np.zeros(1))
        expected = np.zeros((7, 7))
        expected[2:5, 2:5] = 1.0
        assert np.allclose(out[0], expected)

    def test_matches_nested_loop(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(3, 5, 5))
        w = rng.normal(size=(2, 3, 3, 3))
        b = rng.normal(size=2)
        assert np.max(np.abs(conv2d(x, w, b) - naive_conv2d(x, w, b))) < 1e-10

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((1, 4, 4)), np.zeros((1, 1, 2, 2)), np.zeros(1))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))

    def test_adjoint_property(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(3, 6, 5))
        w = rng.normal(size=(2, 3, 5, 5))
        y = rng.normal(size=(2, 6, 5))
        lhs = np.sum(conv2d(x, w, np.zeros(2)) * y)
        rhs = np.sum(x * conv2d_transpose(y, w))
        assert abs(lhs - rhs) < 1e-9

    def test_weight_grad_matches_fd(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(2, 5, 5))
        w = rng.normal(size=(1, 2, 3, 3))
        g = rng.normal(size=(1, 5, 5))
        grad = conv2d_weight_grad(x, g, w.shape[2], w.shape[3])
        eps = 1e-6
        for idx in [(0, 0, 0, 0), (0, 1, 2, 1), (0, 0, 1, 2)]:
            wp = w.copy(); wp[idx] += eps
            wm = w.copy(); wm[idx] -= eps
            fd = np.sum((conv2d(x, wp, np.zeros(1)) - conv2d(x, wm, np.zeros(1))) * g) / (2 * eps)
            assert abs(grad[idx] - fd) < 1e-6


def fd_check(build, var, rel_tol=1e-4, eps=1e-6, coords=4, seed=0):
    """Central-difference check of d(build())/d(var.value) on random coords."""
    loss = build()
    grad = backward(loss, [var])[0]
    rng = np.random.default_rng(seed)
    arr = var.value
    for _ in range(coords):
        idx = tuple(rng.integers(0, s) for s in np.shape(arr)) if np.shape(arr) else ()
        orig = arr[idx] if np.shape(arr) else arr
        if np.iscomplexobj(arr):
            for direction, part in ((1.0, np.real), (1j, np.imag)):
                arr[idx] = orig + eps * direction
                lp = build().value
                arr[idx] = orig - eps * direction
                lm = build().value
                arr[idx] = orig
                fd = (lp - lm) / (2 * eps)
                ad = part(grad[idx])
                assert abs(fd - ad) <= rel_tol * max(abs(fd), abs(ad), 1e-8)
        else:
            if np.shape(arr):
                arr[idx] = orig + eps
                lp = build().value
                arr[idx] = orig - eps
                lm = build().value
                arr[idx] = orig
            else:
                var.value = orig + eps
                lp = build().value
                var.value = orig - eps
                lm = build().value
                var.value = orig
            fd = (lp - lm) / (2 * eps)
            ad = grad[idx] if np.shape(arr) else grad
            assert abs(fd - ad) <= rel_tol * max(abs(fd), abs(ad), 1e-8)


class TestTape:
    def test_sum_of_squares_gradient(self):
        x = Var(np.array([1.0, 2.0]))
        loss = tape.total(tape.mul(x, x))
        grad = backward(loss, [x])[0]
        assert np.allclose(grad, [2.0, 4.0])

    def test_unused_parameter_zero_gradient(self):
        x = Var(np.array([1.0, 2.0]))
        p = Var(np.array([5.0]))
        loss = tape.total(tape.mul(x, x))
        grad = backward(loss, [x, p])[1]
        assert np.allclose(grad, 0.0)

    def test_nonscalar_root_rejected(self):
        x = Var(np.array([1.0, 2.0]))
        with pytest.raises(ContractError):
            backward(tape.mul(x, x), [x])

    def test_complex_root_rejected(self):
        x = Var(np.array(1.0 + 2.0j))
        with pytest.raises(ContractError):
            backward(x, [x])

    def test_linearity(self):
        rng = np.random.default_rng(9)
        x0 = rng.normal(size=(3, 3))
        a, b = 1.7, -0.4

        def f(v):
            return tape.total(tape.mul(v, v))

        def g(v):
            return tape.total(tape.relu(v))

        x = Var(x0.copy())
        combined = tape.add(tape.scale(f(x), a), tape.scale(g(x), b))
        grad = backward(combined, [x])[0]
        xf = Var(x0.copy())
        gf = backward(f(xf), [xf])[0]
        xg = Var(x0.copy())
        gg = backward(g(xg), [xg])[0]
        assert np.allclose(grad, a * gf + b * gg, atol=1e-12)

    @pytest.mark.parametrize("op_name", [
        "sigmoid", "tanh", "relu", "fft2c", "ifft2c", "sumsq", "sumabs",
    ])
    def test_primitive_fd(self, op_name):
        rng = np.random.default_rng(hash(op_name) % 2**32)
        if op_name in ("fft2c", "ifft2c", "sumsq", "sumabs"):
            x = Var(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        else:
            x = Var(rng.normal(size=(4, 4)))
        op = getattr(tape, op_name)

        def build():
            y = op(x)
            if op_name in ("sumsq", "sumabs"):
                return y
            if np.iscomplexobj(tape.value_of(y)):
                return tape.add(tape.sumsq(y), tape.total(tape.relu(tape.real(y))))
            return tape.total(tape.mul(y, y))

        fd_check(build, x)

    def test_mul_fd(self):
        rng = np.random.default_rng(11)
        x = Var(rng.normal(size=(3, 3)))
        c = rng.normal(size=(3, 3))

        def build():
            return tape.total(tape.mul(tape.mul(x, c), x))

        fd_check(build, x)

    def test_conv2d_fd(self):
        rng = np.random.default_rng(12)
        x = Var(rng.normal(size=(2, 4, 4)))
        w = Var(rng.normal(size=(1, 2, 3, 3)))
        b = Var(rng.normal(size=1))

        def build():
            y = tape.conv2d(x, w, b)
            return tape.total(tape.mul(y, y))

        for var in (x, w, b):
            fd_check(build, var)

    def test_dense_pixelwise_fd(self):
        rng = np.random.default_rng(13)
        w = Var(rng.normal(size=(3, 3)))
        x = Var(rng.normal(size=(3, 4, 4)))
        b = Var(rng.normal(size=3))

        def build():
            y = tape.dense_pixelwise(w, x, b)
            return tape.total(tape.mul(y, y))

        for var in (w, x, b):
            fd_check(build, var)

    def test_make_complex_and_parts_fd(self):
        rng = np.random.default_rng(14)
        a = Var(rng.normal(size=(4, 4)))
        b = Var(rng.normal(size=(4, 4)))

        def build():
            z = tape.make_complex(a, b)
            return tape.add(tape.sumsq(tape.fft2c(z)),
                            tape.total(tape.mul(tape.imag(z), tape.real(z))))

        for var in (a, b):
            fd_check(build, var)

    def test_stack_channels_fd(self):
        rng = np.random.default_rng(15)
        a = Var(rng.normal(size=(4, 4)))
        b = Var(rng.normal(size=(4, 4)))

        def build():
            s = tape.stack_channels([a, b])
            return tape.total(tape.mul(tape.channel(s, 0), tape.channel(s, 1)))

        for var in (a, b):
            fd_check(build, var)

    def test_sumabs_zero_residual_subgradient(self):
        x = Var(np.zeros((3, 3), dtype=np.complex128))
        grad = backward(tape.sumabs(x), [x])[0]
        assert np.allclose(grad, 0.0)
