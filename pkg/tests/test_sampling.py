"""Variable-density sampling mask tests: cardinality, calibration region,
radial statistics, determinism, and file round-trips."""

import numpy as np
import pytest

from rimrecon.errors import InfeasibleMaskError, ParseError, ShapeError
from rimrecon.sampling import FWHM_TO_SIGMA, gaussian_mask, load_mask, save_mask


def radial_mean(pattern):
    h, w = pattern.shape
    ys, xs = np.mgrid[0:h, 0:w]
    r = np.sqrt((ys - h // 2) ** 2 + (xs - w // 2) ** 2)
    return float(r[pattern > 0].mean())


class TestGeneration:
    def test_fwhm_constant(self):
        assert abs(FWHM_TO_SIGMA - 2 * np.sqrt(2 * np.log(2))) < 1e-15

    @pytest.mark.parametrize("accel", [4.0, 6.0, 8.0, 10.0])
    def test_exact_cardinality(self, accel):
        for seed in range(5):
            mask = gaussian_mask(64, 64, accel, seed)
            assert int(mask.pattern.sum()) == round(64 * 64 / accel)

    def test_center_region_fully_sampled(self):
        for seed in range(20):
            mask = gaussian_mask(64, 64, 4.0, seed)
            assert mask.pattern[31:34, 31:34].all()

    def test_degenerate_full_sampling(self):
        mask = gaussian_mask(16, 16, 1.0000001, 0)
        assert int(mask.pattern.sum()) == 256
        assert mask.pattern.all()

    def test_infeasible_acceleration(self):
        with pytest.raises(InfeasibleMaskError):
            gaussian_mask(64, 64, 4096.0, 0)

    def test_determinism(self):
        a = gaussian_mask(48, 40, 6.0, 123)
        b = gaussian_mask(48, 40, 6.0, 123)
        assert np.array_equal(a.pattern, b.pattern)

    def test_denser_than_uniform_at_center(self):
        rng = np.random.default_rng(0)
        n = round(64 * 64 / 4)
        vd, uni = [], []
        for seed in range(20):
            vd.append(radial_mean(gaussian_mask(64, 64, 4.0, seed).pattern))
            flat = np.zeros(64 * 64)
            flat[rng.choice(64 * 64, size=n, replace=False)] = 1
            uni.append(radial_mean(flat.reshape(64, 64)))
        assert np.mean(vd) < np.mean(uni)

    def test_radial_density_monotone(self):
        # binned sampling frequency decreases with radius outside the ellipse,
        # within 3-sigma counting noise, aggregated over 1000 seeds
        h = w = 32
        counts = np.zeros((h, w))
        n_seeds = 1000
        for seed in range(n_seeds):
            counts += gaussian_mask(h, w, 4.0, seed).pattern
        ys, xs = np.mgrid[0:h, 0:w]
        r = np.sqrt((ys - h // 2) ** 2 + (xs - w // 2) ** 2)
        edges = np.arange(3.0, 16.0, 2.0)
        means, sigmas = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            ring = (r >= lo) & (r < hi)
            p = counts[ring].mean() / n_seeds
            means.append(p)
            sigmas.append(np.sqrt(p * (1 - p) / (ring.sum() * n_seeds)))
        for i in range(len(means) - 1):
            noise = 3 * np.sqrt(sigmas[i] ** 2 + sigmas[i + 1] ** 2)
            assert means[i + 1] <= means[i] + noise


class TestIO:
    def test_round_trip(self, tmp_path):
        mask = gaussian_mask(40, 56, 5.0, 9)
        path = tmp_path / "m.rimk"
        save_mask(mask, path)
        loaded = load_mask(path)
        assert np.array_equal(mask.pattern, loaded.pattern)
        assert loaded.acceleration == mask.acceleration
        assert loaded.seed == mask.seed

    def test_truncated_file_rejected(self, tmp_path):
        mask = gaussian_mask(32, 32, 4.0, 0)
        path = tmp_path / "m.rimk"
        save_mask(mask, path)
        raw = path.read_bytes()
        for cut in (3, len(raw) - 5):
            path.write_bytes(raw[:cut])
            with pytest.raises(ParseError):
                load_mask(path)

    def test_bad_magic_rejected_with_offset(self, tmp_path):
        mask = gaussian_mask(32, 32, 4.0, 0)
        path = tmp_path / "m.rimk"
        save_mask(mask, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(ParseError) as err:
            load_mask(path)
        assert err.value.offset == 0

    def test_shape_check_rejects_other_grid(self, tmp_path):
        mask = gaussian_mask(32, 32, 4.0, 0)
        path = tmp_path / "m.rimk"
        save_mask(mask, path)
        with pytest.raises(ShapeError):
            load_mask(path, expect_shape=(64, 64))
