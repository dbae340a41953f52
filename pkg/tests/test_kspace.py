"""Degradation pipeline against a direct O(N^2) DFT oracle."""

import numpy as np
import pytest

from mcsr.kspace import (
    ComplexGrid,
    DegradeSpec,
    degrade,
    fft2_centered,
    ifft2_centered,
    lowpass,
    normalize01,
    patchify,
    reassemble,
    window_bounds,
)


def dft2_centered_ref(img):
    """Brute-force unitary DFT with the DC bin moved to (H//2, W//2)."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.complex128)
    ys, xs = np.arange(h), np.arange(w)
    for u in range(h):
        fu = u - h // 2
        row = np.exp(-2j * np.pi * fu * ys / h)
        for v in range(w):
            fv = v - w // 2
            col = np.exp(-2j * np.pi * fv * xs / w)
            out[u, v] = np.sum(img * np.outer(row, col))
    return out / np.sqrt(h * w)


def cosine_image(n, fy, fx):
    y, x = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    img = 0.5 + 0.5 * np.cos(2 * np.pi * (fy * y + fx * x) / n)
    return img


class TestCenteredFFT:
    def test_constant_image_single_dc_bin(self):
        c = 0.37
        grid = fft2_centered(np.full((8, 8), c))
        z = grid.to_complex()
        assert abs(z[4, 4] - c * 8.0) < 1e-12
        z[4, 4] = 0.0
        assert np.max(np.abs(z)) < 1e-12

    def test_matches_direct_dft(self, rng):
        img = rng.random((8, 8))
        z = fft2_centered(img).to_complex()
        ref = dft2_centered_ref(img)
        assert np.max(np.abs(z - ref)) < 1e-10

    def test_round_trip(self, rng):
        img = rng.random((8, 8))
        back = ifft2_centered(fft2_centered(img))
        assert np.max(np.abs(back - img)) < 1e-10

    def test_parseval(self, rng):
        img = rng.random((16, 16))
        z = fft2_centered(img).to_complex()
        assert abs(np.sum(img**2) - np.sum(np.abs(z) ** 2)) < 1e-10

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            fft2_centered(np.zeros((0, 4)))

    def test_rejects_uncentered_grid(self):
        grid = ComplexGrid(4, 4, np.zeros((4, 4)), np.zeros((4, 4)), dc_centered=False)
        with pytest.raises(ValueError, match="centered"):
            ifft2_centered(grid)


class TestWindowGeometry:
    def test_retained_fractions_on_256(self):
        for s, frac in [(2, 0.25), (3, 0.111), (4, 0.0625)]:
            k = DegradeSpec(s).resolve(256)
            assert abs((k * k) / 256**2 - frac) < 2e-3

    def test_factor_three_keeps_85(self):
        assert DegradeSpec(3).resolve(256) == 85

    def test_odd_kept_on_even_side_is_symmetric(self):
        lo, hi = window_bounds(256, 85)
        # DC bin at 128: 42 bins below, 42 above
        assert (lo, hi) == (86, 171)

    def test_even_kept_biases_toward_positive(self):
        lo, hi = window_bounds(256, 128)
        assert (lo, hi) == (65, 193)  # freqs -63 .. +64

    def test_full_window_is_whole_axis(self):
        assert window_bounds(256, 256) == (0, 256)

    def test_invalid_factor_rejected(self):
        with pytest.raises(ValueError, match="factor"):
            DegradeSpec(5)


class TestDegrade:
    def test_constant_image_fixed_point(self):
        img = np.full((64, 64), 0.42)
        out = degrade(img, DegradeSpec(2))
        # constant maps through the window untouched, then normalizes to zero
        assert np.max(np.abs(out - normalize01(img))) == 0.0
        pre = lowpass(img, DegradeSpec(2))
        assert np.max(np.abs(pre - img)) < 1e-12

    def test_in_band_cosine_preserved(self):
        img = cosine_image(64, fy=3, fx=2)  # bins inside the 32x32 window
        out = degrade(img, DegradeSpec(2))
        assert np.max(np.abs(out - normalize01(img))) < 1e-8

    def test_out_of_band_cosine_flattened(self):
        img = cosine_image(64, fy=20, fx=17)  # outside the 16x16 window
        out = degrade(img, DegradeSpec(4))
        assert np.max(np.abs(out)) < 1e-10  # constant normalizes to zeros

    def test_projection_idempotent_before_normalization(self, rng):
        img = rng.random((64, 64))
        spec = DegradeSpec(3)
        once = lowpass(img, spec)
        twice = lowpass(once, spec)
        assert np.max(np.abs(twice - once)) < 1e-12

    def test_energy_never_increases(self, rng):
        for _ in range(5):
            img = rng.random((32, 32))
            for s in (2, 3, 4):
                out = lowpass(img, DegradeSpec(s))
                assert np.sum(out**2) <= np.sum(img**2) + 1e-10

    def test_full_window_identity(self, rng):
        img = rng.random((32, 32))
        out = lowpass(img, DegradeSpec(2, kept_side=32))
        assert np.max(np.abs(out - img)) < 1e-10

    def test_output_size_unchanged(self, rng):
        img = rng.random((48, 48))
        assert degrade(img, DegradeSpec(4)).shape == (48, 48)

    def test_noise_hook(self, rng):
        img = rng.random((32, 32))
        spec = DegradeSpec(2, noise_std=0.05)
        with pytest.raises(ValueError, match="generator"):
            degrade(img, spec)
        out = degrade(img, spec, rng=np.random.default_rng(3))
        assert out.shape == img.shape and out.min() >= 0.0 and out.max() <= 1.0


class TestNormalize01:
    def test_two_point(self):
        np.testing.assert_array_equal(normalize01(np.array([2.0, 4.0])), [0.0, 1.0])

    def test_already_normalized_unchanged(self, rng):
        img = rng.random((8, 8))
        img.flat[0], img.flat[1] = 0.0, 1.0
        np.testing.assert_allclose(normalize01(img), img, atol=1e-15)

    def test_constant_maps_to_zeros(self):
        np.testing.assert_array_equal(normalize01(np.full((4, 4), 3.3)), np.zeros((4, 4)))

    def test_idempotent(self, rng):
        for _ in range(10):
            img = rng.standard_normal((6, 6)) * rng.uniform(0.1, 9)
            once = normalize01(img)
            np.testing.assert_allclose(normalize01(once), once, atol=1e-15)


class TestPatchify:
    def test_256_gives_16_patches(self, rng):
        img = rng.random((256, 256))
        patches = patchify(img)
        assert patches.shape == (16, 64, 64)

    def test_reassemble_bit_exact(self, rng):
        img = rng.random((256, 256))
        np.testing.assert_array_equal(reassemble(patchify(img), 256, 256), img)

    def test_first_patch_is_top_left(self, rng):
        img = rng.random((256, 256))
        np.testing.assert_array_equal(patchify(img)[0], img[:64, :64])

    def test_row_major_order(self, rng):
        img = rng.random((128, 128))
        patches = patchify(img)
        np.testing.assert_array_equal(patches[1], img[:64, 64:128])
        np.testing.assert_array_equal(patches[2], img[64:128, :64])

    def test_indivisible_side_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            patchify(np.zeros((100, 64)))
