from __future__ import annotations

import numpy as np
import pytest

from ifdkit.raster import Raster
from ifdkit.synth import ghost_fixture, noise_texture
from ifdkit.toolbox import crop, enhance, highpass_filter, jpeg_ghost, local_correlation, median_trace, sobel_edges
from ifdkit.toolbox.artifacts import quality_grid
from ifdkit.toolbox.statistics import local_shift_correlation

from builders import upsample_mask


class TestSobel:
    def test_constant(self, constant_image):
        assert sobel_edges(constant_image).stats == {"mean_mag": 0.0, "p99_mag": 0.0}

    def test_unit_step(self):
        plane = np.zeros((16, 16))
        plane[:, 8:] = 1.0
        mag = sobel_edges(Raster(plane)).primary().data.values
        np.testing.assert_allclose(mag[:, 7], 4.0)
        np.testing.assert_allclose(mag[:, 8], 4.0)
        assert not mag[:, :7].any() and not mag[:, 9:].any()

    def test_rot90_equivariance(self, rng):
        plane = rng.random((24, 24))
        a = sobel_edges(Raster(np.rot90(plane).copy())).primary().data.values
        b = np.rot90(sobel_edges(Raster(plane)).primary().data.values)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestHighpass:
    def test_impulse(self):
        plane = np.zeros((9, 9))
        plane[4, 4] = 0.5
        hm = highpass_filter(Raster(plane)).primary().data.values
        assert hm[4, 4] == pytest.approx(2.0)
        for y, x in ((3, 4), (5, 4), (4, 3), (4, 5)):
            assert hm[y, x] == pytest.approx(0.5)
        assert hm.sum() == pytest.approx(4.0)

    def test_ramp_interior_zero(self):
        plane = np.tile(np.linspace(0, 1, 20), (20, 1))
        hm = highpass_filter(Raster(plane)).primary().data.values
        assert hm[1:-1, 1:-1].max() < 1e-12


class TestJpegGhost:
    def test_constant_image(self, constant_image):
        rep = jpeg_ghost(constant_image)
        assert rep.ok and rep.stats["ghost_fraction"] == 0.0

    def test_single_quality_grid_is_legal(self):
        rep = jpeg_ghost(noise_texture(0, 64), q_min=80, q_max=80)
        assert rep.ok and rep.stats["ghost_fraction"] == 0.0
        assert rep.stats["mode_quality"] == 80.0

    @pytest.mark.parametrize("kw", [{"q_min": 90, "q_max": 50}, {"q_max": 101}, {"q_step": 0}, {"block": 0},
                                    {"dip_threshold": 0.0}])
    def test_bad_parameters_fail(self, kw):
        rep = jpeg_ghost(noise_texture(0, 32), **kw)
        assert rep.status == "failed" and rep.artifacts == ()

    def test_grid(self):
        assert quality_grid(50, 95, 5) == list(range(50, 96, 5))
        assert quality_grid(50, 52, 5) == [50]

    def test_artifact_layout(self):
        rep = jpeg_ghost(noise_texture(1, 64), q_min=70, q_max=90, q_step=10)
        names = [a.name for a in rep.artifacts]
        assert names == ["mode_deviation", "argmin_quality", "diff_q70", "diff_q80", "diff_q90"]
        assert all(a.data.block == 16 and a.data.values.shape == (4, 4) for a in rep.artifacts)

    def test_localizes_recompressed_patch(self):
        fx = ghost_fixture(0, size=256, patch=128)
        rep = jpeg_ghost(fx.image)
        assert rep.stats["mode_quality"] == 90.0
        argmin = rep.artifacts[1].data.values
        inside = upsample_mask(fx.mask, argmin.shape, 16)
        assert np.mean(argmin[inside] == 60) >= 0.7
        assert "q=60" in rep.summary_text or "[60]" in rep.summary_text


class TestMedianTrace:
    def test_constant(self, constant_image):
        assert median_trace(constant_image).stats == {"rho_global": 1.0, "max_block_rho": 1.0}

    def test_raw_noise_is_quiet(self):
        rep = median_trace(noise_texture(0))
        assert rep.stats["rho_global"] < 0.05
        assert "no median-filtering" in rep.summary_text

    def test_median_filtered_noise(self):
        from scipy import ndimage

        raw = noise_texture(0).plane
        rho_raw = median_trace(Raster(raw)).stats["rho_global"]
        rho_med = median_trace(Raster(ndimage.median_filter(raw, size=3))).stats["rho_global"]
        # measured ~0.22 on 8-bit uniform noise, against ~0.004 unfiltered
        assert rho_med > 0.2 and rho_med > 20 * rho_raw

    def test_threshold_flag(self):
        rep = median_trace(Raster(np.full((8, 8), 0.5)))
        assert "suspicious" in rep.summary_text

    def test_too_narrow(self):
        assert median_trace(Raster(np.zeros((4, 1)))).status == "failed"


class TestLocalCorrelation:
    def test_constant(self, constant_image):
        assert not local_correlation(constant_image).primary().data.values.any()

    def test_horizontal_ramp(self):
        plane = np.tile(np.linspace(0, 1, 32), (32, 1))
        np.testing.assert_allclose(local_correlation(Raster(plane)).primary().data.values, 1.0)

    def test_noise_low(self):
        assert local_correlation(noise_texture(2, 128)).stats["mean_corr"] < 0.2

    @pytest.mark.parametrize("window", [1, 2, 4, 3.5, True])
    def test_bad_window(self, window):
        assert local_correlation(noise_texture(0, 32), window=window).status == "failed"

    def test_pearson_oracle(self, rng):
        plane = rng.random((12, 14))
        corr = local_shift_correlation(plane, 5)
        y, x = 6, 7
        a = plane[y - 2:y + 3, x - 2:x + 3].ravel()
        b = plane[y - 2:y + 3, x - 1:x + 4].ravel()
        assert corr[y, x] == pytest.approx(np.corrcoef(a, b)[0, 1], abs=1e-10)
        assert corr.shape == plane.shape


class TestBasicTools:
    def test_crop_report(self):
        rep = crop(noise_texture(0, 64), x=0, y=0, w=32, h=32)
        assert rep.ok and rep.stats == {"width": 32.0, "height": 32.0}
        assert rep.primary().kind == "raster"

    def test_crop_empty_fails(self):
        rep = crop(noise_texture(0, 64), x=100, y=100, w=5, h=5)
        assert rep.status == "failed" and rep.artifacts == ()

    def test_crop_type_check(self):
        assert crop(noise_texture(0, 64), x=1.5, y=0, w=4, h=4).status == "failed"

    def test_enhance_gamma(self):
        rep = enhance(Raster(np.full((4, 4), 0.25)), mode="gamma", param=0.5)
        assert rep.stats["mean_after"] == pytest.approx(0.5)

    def test_enhance_unknown_mode(self):
        assert enhance(noise_texture(0, 16), mode="sharpen").status == "failed"
