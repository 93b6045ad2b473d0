import numpy as np
import pytest

from headfield.errors import DimensionError, ParameterError
from headfield.gradcheck import check_gradients
from headfield.latents import LatentState
from headfield.losses import (
    LossWeights,
    PerceptualExtractor,
    disentangled_loss,
    fitting_loss,
    metrics,
    perceptual_loss,
    photometric_loss,
    psnr_value,
    total_loss,
)
from headfield.tensor import Tensor


def rand_img(rng, size=16, channels=3, dtype=np.float32):
    return rng.uniform(0, 1, (channels, size, size)).astype(dtype)


class TestPhotometric:
    def test_zero_at_equality(self):
        rng = np.random.default_rng(0)
        img = rand_img(rng)
        mask = np.ones(img.shape[1:], dtype=np.float32)
        assert photometric_loss(Tensor(img), img, mask).item() == 0.0

    def test_zero_under_empty_mask(self):
        rng = np.random.default_rng(1)
        pred, gt = rand_img(rng), rand_img(rng)
        mask = np.zeros(pred.shape[1:], dtype=np.float32)
        assert photometric_loss(Tensor(pred), gt, mask).item() == 0.0

    def test_mean_normalized_example(self):
        pred = np.zeros((1, 2, 2), dtype=np.float64)
        gt = -np.eye(2, dtype=np.float64)[None]
        mask = np.ones((2, 2))
        loss = photometric_loss(Tensor(pred, dtype=np.float64), gt, mask)
        assert loss.item() == pytest.approx(0.5)

    def test_invariant_to_unmasked_pixels(self):
        rng = np.random.default_rng(2)
        pred, gt = rand_img(rng), rand_img(rng)
        mask = (rng.random(pred.shape[1:]) > 0.5).astype(np.float32)
        base = photometric_loss(Tensor(pred), gt, mask).item()
        vandalized = pred.copy()
        vandalized[:, mask == 0] = 99.0
        assert photometric_loss(Tensor(vandalized), gt, mask).item() == pytest.approx(base)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            photometric_loss(Tensor(np.zeros((3, 4, 4))), np.zeros((3, 5, 5)),
                             np.ones((4, 4)))

    def test_mask_values_validated(self):
        with pytest.raises(ParameterError):
            photometric_loss(Tensor(np.zeros((3, 4, 4))), np.zeros((3, 4, 4)),
                             np.full((4, 4), 0.5))

    def test_gradient_wrt_prediction(self):
        rng = np.random.default_rng(3)
        gt = rand_img(rng, 8).astype(np.float64)
        mask = (rng.random((8, 8)) > 0.3).astype(np.float64)

        def loss(ts):
            return photometric_loss(ts[0], gt.astype(ts[0].dtype), mask)

        assert check_gradients(loss, [rand_img(rng, 8).astype(np.float64)],
                               dtype=np.float32) < 1e-3


class TestPerceptual:
    def test_zero_at_equality(self):
        rng = np.random.default_rng(4)
        img = rand_img(rng)
        ext = PerceptualExtractor.random_pyramid(0, levels=2)
        assert perceptual_loss(Tensor(img), img, ext).item() == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a, b = rand_img(rng), rand_img(rng)
        ext = PerceptualExtractor.random_pyramid(0, levels=2)
        lab = perceptual_loss(Tensor(a), b, ext).item()
        lba = perceptual_loss(Tensor(b), a, ext).item()
        assert lab == pytest.approx(lba, rel=1e-5)

    def test_identity_extractor_reduces_to_mse(self):
        rng = np.random.default_rng(6)
        a, b = rand_img(rng), rand_img(rng)
        loss = perceptual_loss(Tensor(a), b, PerceptualExtractor.identity()).item()
        assert loss == pytest.approx(float(np.mean((a - b) ** 2)), rel=1e-6)

    def test_pyramid_level_count_and_scales(self):
        ext = PerceptualExtractor.random_pyramid(0, levels=4)
        feats = ext(Tensor(rand_img(np.random.default_rng(7), 32)))
        assert len(feats) == 4
        assert [f.shape[1] for f in feats] == [16, 8, 4, 2]

    def test_save_load_round_trip(self, tmp_path):
        ext = PerceptualExtractor.random_pyramid(3, levels=2)
        path = str(tmp_path / "extractor.hnrf")
        ext.save(path)
        back = PerceptualExtractor.load(path)
        rng = np.random.default_rng(8)
        img = rand_img(rng)
        a = perceptual_loss(Tensor(img), np.zeros_like(img), ext).item()
        b = perceptual_loss(Tensor(img), np.zeros_like(img), back).item()
        assert a == b

    def test_gradient_wrt_prediction(self):
        rng = np.random.default_rng(9)
        gt = rand_img(rng, 8).astype(np.float64)
        ext64 = PerceptualExtractor.random_pyramid(1, levels=2, dtype=np.float64)

        def loss(ts):
            ext = ext64 if ts[0].dtype == np.float64 else ext64.astype(np.float32)
            return perceptual_loss(ts[0], gt.astype(ts[0].dtype), ext)

        assert check_gradients(loss, [rand_img(rng, 8).astype(np.float64)],
                               dtype=np.float32) < 1e-3


class TestDisentangled:
    def _states(self, dims=(5, 4, 3, 2)):
        names = ("id", "exp", "alb", "ill")
        codes = LatentState(*(Tensor(np.zeros(d)) for d in dims))
        init = LatentState(*(Tensor(np.zeros(d)) for d in dims))
        return codes, init, dict(zip(names, dims))

    def test_zero_at_init(self):
        codes, init, _ = self._states()
        assert disentangled_loss(codes, init, LossWeights()).item() == 0.0

    def test_unit_exp_deviation_exact(self):
        codes, init, dims = self._states()
        bump = np.zeros(dims["exp"])
        bump[1] = 1.0
        codes = codes.replace("exp", Tensor(bump))
        assert disentangled_loss(codes, init, LossWeights()).item() == pytest.approx(0.1)

    @pytest.mark.parametrize("attr", ["id", "alb", "ill"])
    def test_unit_other_deviation_exact(self, attr):
        codes, init, dims = self._states()
        bump = np.zeros(dims[attr])
        bump[0] = 1.0
        codes = codes.replace(attr, Tensor(bump))
        assert disentangled_loss(codes, init, LossWeights()).item() == pytest.approx(0.001)

    def test_dim_mismatch(self):
        codes, init, _ = self._states()
        bad = LatentState(Tensor(np.zeros(6)), init.z_exp, init.z_alb, init.z_ill)
        with pytest.raises(ParameterError):
            disentangled_loss(bad, init, LossWeights())

    def test_gradient_wrt_codes(self):
        rng = np.random.default_rng(10)
        init_arr = rng.standard_normal(5)

        def loss(ts):
            codes = LatentState(ts[0], Tensor(np.zeros(4, ts[0].dtype)),
                                Tensor(np.zeros(3, ts[0].dtype)),
                                Tensor(np.zeros(2, ts[0].dtype)))
            init = LatentState(Tensor(init_arr.astype(ts[0].dtype)),
                               Tensor(np.zeros(4, ts[0].dtype)),
                               Tensor(np.zeros(3, ts[0].dtype)),
                               Tensor(np.zeros(2, ts[0].dtype)))
            return disentangled_loss(codes, init, LossWeights())

        assert check_gradients(loss, [rng.standard_normal(5)], dtype=np.float64) < 1e-5


class TestCompositions:
    def test_total_is_sum_of_parts(self):
        rng = np.random.default_rng(11)
        pred, gt = rand_img(rng), rand_img(rng)
        mask = np.ones(pred.shape[1:], dtype=np.float32)
        codes = LatentState(*(Tensor(rng.standard_normal(d).astype(np.float32))
                              for d in (5, 4, 3, 2)))
        init = LatentState(*(Tensor(np.zeros(d, np.float32)) for d in (5, 4, 3, 2)))
        ext = PerceptualExtractor.random_pyramid(0, levels=2)
        report = total_loss(Tensor(pred), gt, mask, codes, init, LossWeights(), ext)
        parts = (report.data.item() + report.perceptual.item()
                 + report.disentangled.item())
        assert report.total.item() == pytest.approx(parts, rel=1e-6)

    def test_perfect_reconstruction_at_init_is_zero(self):
        rng = np.random.default_rng(12)
        img = rand_img(rng)
        mask = np.ones(img.shape[1:], dtype=np.float32)
        codes = LatentState(*(Tensor(np.zeros(d, np.float32)) for d in (5, 4, 3, 2)))
        init = LatentState(*(Tensor(np.zeros(d, np.float32)) for d in (5, 4, 3, 2)))
        ext = PerceptualExtractor.random_pyramid(0, levels=2)
        report = total_loss(Tensor(img), img, mask, codes, init, LossWeights(), ext)
        assert report.total.item() == 0.0

    def test_fitting_equals_total_minus_disentangled(self):
        rng = np.random.default_rng(13)
        pred, gt = rand_img(rng), rand_img(rng)
        mask = np.ones(pred.shape[1:], dtype=np.float32)
        codes = LatentState(*(Tensor(rng.standard_normal(d).astype(np.float32))
                              for d in (5, 4, 3, 2)))
        init = LatentState(*(Tensor(np.zeros(d, np.float32)) for d in (5, 4, 3, 2)))
        ext = PerceptualExtractor.random_pyramid(0, levels=2)
        full = total_loss(Tensor(pred), gt, mask, codes, init, LossWeights(), ext)
        fit = fitting_loss(Tensor(pred), gt, mask, ext)
        assert fit.disentangled is None
        assert fit.total.item() == pytest.approx(
            full.total.item() - full.disentangled.item(), rel=1e-5
        )


class TestMetrics:
    def test_identical_images(self):
        rng = np.random.default_rng(14)
        img = rand_img(rng, 16)
        m = metrics(img, img)
        assert m == {"l1": 0.0, "psnr": 100.0, "ssim": 1.0}

    def test_psnr_analytic(self):
        gt = np.zeros((1, 32, 32))
        pred = np.full((1, 32, 32), 0.1)  # MSE = 0.01
        assert metrics(pred, gt)["psnr"] == pytest.approx(20.0)

    def test_l1_extremes(self):
        assert metrics(np.ones((3, 16, 16)), np.zeros((3, 16, 16)))["l1"] == 1.0

    def test_ssim_against_skimage_oracle(self):
        skimage = pytest.importorskip("skimage.metrics")
        rng = np.random.default_rng(15)
        a = rng.uniform(0, 1, (32, 32))
        b = np.clip(a + 0.1 * rng.standard_normal((32, 32)), 0, 1)
        ours = metrics(a, b)["ssim"]
        theirs = skimage.structural_similarity(
            a, b, win_size=11, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=1.0,
        )
        assert ours == pytest.approx(theirs, abs=2e-3)

    def test_psnr_value_matches_metrics(self):
        rng = np.random.default_rng(16)
        a, b = rand_img(rng, 16), rand_img(rng, 16)
        assert psnr_value(a, b) == pytest.approx(metrics(a, b)["psnr"])
