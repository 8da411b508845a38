"""Classical enhancement baselines."""

import numpy as np
import pytest

import oracles
from tide.baselines import (
    BASELINES,
    apply_baseline,
    clahe,
    dark_channel,
    dcp,
    gamma_correction,
    histogram_equalization,
    rcp,
    udcp,
    white_balance,
)
from tide.core import BadParamsError, UnknownMethodError


def rand_img(seed, h=16, w=16):
    return np.random.default_rng(seed).random((3, h, w))


def tinted(seed, h=32, w=32):
    """Blue-green cast typical of the inputs these baselines target."""
    img = np.random.default_rng(seed).random((3, h, w))
    img[0] *= 0.3
    img[2] = 0.4 + 0.6 * img[2]
    return img


class TestWhiteBalance:
    def test_channel_means_equalized(self):
        img = tinted(0)
        out = white_balance(img)
        means = out.mean(axis=(1, 2))
        assert np.all(np.abs(means - means.mean()) < 1e-3)

    def test_matches_gray_world_oracle(self):
        img = tinted(1)
        assert np.abs(white_balance(img) - oracles.gray_world_oracle(img)).max() < 1e-6

    def test_balanced_image_unchanged_up_to_rounding(self):
        img = np.stack([rand_img(2)[0]] * 3)
        out = white_balance(img)
        assert np.abs(out - img).max() < 1e-6


class TestGamma:
    def test_documented_midpoint_value(self):
        img = np.full((3, 4, 4), 0.5)
        out = gamma_correction(img, gamma=1.5)
        # 0.5 ** (1 / 1.5)
        assert np.abs(out - 0.62996).max() < 1e-5

    def test_endpoints_fixed(self):
        img = np.zeros((3, 2, 2))
        img[:, 0, 0] = 1.0
        out = gamma_correction(img)
        assert out[0, 0, 0] == 1.0
        assert out[0, 1, 1] == 0.0

    def test_brightens_midtones(self):
        img = rand_img(3) * 0.5
        assert gamma_correction(img).mean() > img.mean()

    def test_rejects_non_positive_gamma(self):
        with pytest.raises(BadParamsError):
            gamma_correction(rand_img(4), gamma=0.0)


class TestHistogramEqualization:
    def test_flattens_luma_distribution(self):
        # A heavily skewed image should cover much more of the range after.
        img = rand_img(5, 32, 32) * 0.2
        out = histogram_equalization(img)
        assert out.max() > 0.8

    def test_output_in_range(self):
        out = histogram_equalization(tinted(6))
        assert out.min() >= 0.0
        assert out.max() <= 1.0

    def test_chroma_ratios_preserved_where_unclipped(self):
        img = tinted(7) * 0.5
        out = histogram_equalization(img).astype(np.float64)
        keep = np.all(out < 0.999, axis=0) & (img.min(axis=0) > 1e-3)
        r = out[:, keep] / img[:, keep]
        # One shared per-pixel gain across channels.
        assert np.abs(r - r.mean(axis=0, keepdims=True)).max() < 1e-5


class TestClahe:
    def test_output_contract(self):
        out = clahe(tinted(8))
        assert out.shape == (3, 32, 32)
        assert out.min() >= 0.0
        assert out.max() <= 1.0

    def test_raises_local_contrast_of_murky_images(self):
        img = 0.3 + 0.1 * rand_img(9, 32, 32)
        out = clahe(img)
        assert out.std() > img.std()

    def test_parameter_validation(self):
        with pytest.raises(BadParamsError):
            clahe(rand_img(10), clip=0.0)
        with pytest.raises(BadParamsError):
            clahe(rand_img(10), tiles=0)


class TestDarkChannel:
    def test_matches_brute_force_exactly(self):
        stack = np.random.default_rng(11).random((3, 16, 16))
        ours = dark_channel(stack, 15)
        brute = oracles.dark_channel_oracle(stack, 15)
        assert np.array_equal(ours, brute)

    def test_matches_brute_force_small_patch(self):
        stack = np.random.default_rng(12).random((2, 9, 13))
        assert np.array_equal(dark_channel(stack, 5), oracles.dark_channel_oracle(stack, 5))

    def test_never_above_pixel_minimum(self):
        stack = np.random.default_rng(13).random((3, 12, 12))
        assert np.all(dark_channel(stack, 7) <= stack.min(axis=0))

    def test_even_patch_rejected(self):
        with pytest.raises(BadParamsError):
            dark_channel(np.zeros((3, 8, 8)), 4)


class TestDehazingFamily:
    @pytest.mark.parametrize("method", [dcp, udcp, rcp])
    def test_output_contract(self, method):
        out = method(tinted(14))
        assert out.shape == (3, 32, 32)
        assert out.dtype == np.float32
        assert out.min() >= 0.0
        assert out.max() <= 1.0

    def test_haze_free_image_nearly_unchanged(self):
        # With a dark channel of ~0 transmission stays ~1 everywhere.
        img = rand_img(15, 32, 32) * 0.8
        img[0, ::2, ::2] = 0.0
        img[1, 1::2, ::2] = 0.0
        img[2, ::2, 1::2] = 0.0
        img[1, 1::2, 1::2] = 0.0
        out = dcp(img, patch=3)
        assert np.abs(out - img).max() < 0.05

    def test_udcp_ignores_red_channel(self):
        """A dead red channel zeroes the three-channel dark channel, so dcp
        sees no haze; udcp reads haze from the bright green/blue channels."""
        img = np.random.default_rng(16).random((3, 32, 32))
        img[0] = 0.0
        img[1:] = 0.5 + 0.5 * img[1:]
        assert np.abs(dcp(img) - img).max() < 1e-6
        assert np.abs(udcp(img) - img).max() > 0.1

    def test_parameter_validation(self):
        with pytest.raises(BadParamsError):
            dcp(rand_img(17), omega=0.0)
        with pytest.raises(BadParamsError):
            dcp(rand_img(17), t0=2.0)


class TestRegistry:
    def test_seven_methods_registered(self):
        assert sorted(BASELINES) == [
            "clahe", "dcp", "gamma", "he", "rcp", "udcp", "wb",
        ]

    def test_dispatch_with_parameters(self):
        img = rand_img(18)
        direct = gamma_correction(img, gamma=2.0)
        via_registry = apply_baseline("GAMMA", img, gamma=2.0)
        assert np.array_equal(direct, via_registry)

    def test_unknown_method_rejected(self):
        with pytest.raises(UnknownMethodError):
            apply_baseline("retinex", rand_img(19))
