"""Compressed-sensing baseline tests: wavelet transform properties,
soft-thresholding, regularization limits, and phantom-level quality."""

import numpy as np
import pytest

from rimrecon.cs import (
    CsConfig,
    cs_reconstruct,
    dwt2,
    estimate_lipschitz,
    idwt2,
    soft_threshold,
)
from rimrecon.errors import ConfigError
from rimrecon.harness.phantom import gen_phantom
from rimrecon.metrics import psnr
from rimrecon.mri import adjoint_op, forward_op, synth_sensitivities
from rimrecon.sampling import gaussian_mask


def make_problem(seed=0, size=64, coils=4, accel=4.0):
    ref = gen_phantom("textured", size, seed)
    cs = synth_sensitivities(ref.shape, coils, seed + 1)
    mask = gaussian_mask(size, size, accel, seed + 2).pattern
    return ref, cs.with_measurements(forward_op(ref, cs, mask)), mask


class TestWavelet:
    def test_perfect_reconstruction(self):
        rng = np.random.default_rng(0)
        for shape in ((32, 32), (40, 48), (33, 35)):
            x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
            rt = idwt2(dwt2(x, 3), 3, shape)
            assert np.max(np.abs(rt - x)) < 1e-10

    def test_orthonormality(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
        c = dwt2(x, 3)
        assert abs(np.linalg.norm(c) - np.linalg.norm(x)) < 1e-10

    def test_constant_image_vanishing_details(self):
        c = dwt2(np.full((16, 16), 2.3), 1)
        assert np.max(np.abs(c[8:, :])) < 1e-12
        assert np.max(np.abs(c[:, 8:])) < 1e-12

    def test_levels_nest(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(16, 16))
        one = dwt2(x, 1)
        two = dwt2(x, 2)
        # second level re-transforms only the approximation block
        assert np.allclose(two[8:, :], one[8:, :])
        assert np.allclose(two[:8, 8:], one[:8, 8:])


class TestSoftThreshold:
    def test_real_values(self):
        c = np.array([3.0, -2.0, 0.5, 0.0])
        out = soft_threshold(c, 1.0)
        assert np.allclose(out, [2.0, -1.0, 0.0, 0.0])

    def test_complex_phase_preserved(self):
        c = np.array([3.0 * np.exp(1j * 0.7)])
        out = soft_threshold(c, 1.0)
        assert abs(np.abs(out[0]) - 2.0) < 1e-12
        assert abs(np.angle(out[0]) - 0.7) < 1e-12

    def test_magnitudes_below_threshold_zeroed(self):
        rng = np.random.default_rng(3)
        c = 0.1 * (rng.normal(size=10) + 1j * rng.normal(size=10))
        assert np.all(soft_threshold(c, 1.0) == 0)


class TestReconstruction:
    def test_config_validation(self):
        with pytest.raises(ConfigError):
            CsConfig(lam=0.0)
        with pytest.raises(ConfigError):
            CsConfig(max_iters=0)

    def test_lipschitz_near_one_for_normalized_coils(self):
        _, coils, mask = make_problem(seed=4, size=32, coils=2)
        lam = estimate_lipschitz(coils, mask)
        assert 0.5 < lam <= 1.0 + 1e-9

    def test_full_sampling_tiny_lambda_recovers_adjoint(self):
        ref, coils, _ = make_problem(seed=5, size=32, coils=2)
        mask = np.ones(ref.shape)
        coils = coils.with_measurements(forward_op(ref, coils, mask))
        out = cs_reconstruct(coils, mask, CsConfig(lam=1e-12, max_iters=10))
        x0 = adjoint_op(coils.measurements, coils, mask)
        assert np.linalg.norm(out - x0) / np.linalg.norm(x0) < 1e-4

    def test_huge_lambda_kills_image(self):
        ref, coils, mask = make_problem(seed=6, size=32, coils=2)
        out = cs_reconstruct(coils, mask, CsConfig(lam=1e6, max_iters=10))
        assert np.max(np.abs(out)) < 1e-3 * np.max(np.abs(ref))

    def test_objective_monotone_20_instances(self):
        # the accepted iterate's objective must never increase
        for seed in range(20):
            ref, coils, mask = make_problem(seed=seed, size=32, coils=2,
                                            accel=3.0 + (seed % 4))
            config = CsConfig(max_iters=20)
            x0 = adjoint_op(coils.measurements, coils, mask)
            norm = np.abs(x0).max()
            y = coils.measurements / norm
            cn = coils.with_measurements(y)

            def objective(x):
                resid = forward_op(x, cn, mask) - y
                return (0.5 * np.sum(np.abs(resid) ** 2)
                        + config.lam * np.abs(dwt2(x, config.levels)).sum())

            objs = []
            for iters in range(1, 15, 3):
                cfg = CsConfig(max_iters=iters)
                out = cs_reconstruct(coils, mask, cfg) / norm
                objs.append(objective(out))
            assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))

    def test_data_consistency_improves(self):
        ref, coils, mask = make_problem(seed=7, size=48)
        out = cs_reconstruct(coils, mask, CsConfig(max_iters=30))
        x0 = adjoint_op(coils.measurements, coils, mask)
        r_cs = np.linalg.norm(forward_op(out, coils, mask) - coils.measurements)
        r_zf = np.linalg.norm(forward_op(x0, coils, mask) - coils.measurements)
        assert r_cs < r_zf

    def test_beats_zero_filled_by_2db(self):
        ref, coils, mask = make_problem(seed=8, size=64, accel=4.0)
        out = cs_reconstruct(coils, mask, CsConfig())
        x0 = adjoint_op(coils.measurements, coils, mask)
        peak = np.abs(ref).max()
        gain = (psnr(np.abs(out), np.abs(ref), peak=peak)
                - psnr(np.abs(x0), np.abs(ref), peak=peak))
        assert gain >= 2.0

    def test_missing_measurements_rejected(self):
        cs = synth_sensitivities((32, 32), 2, 0)
        with pytest.raises(ConfigError):
            cs_reconstruct(cs, np.ones((32, 32)))
