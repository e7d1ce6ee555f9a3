import numpy as np
import pytest

from rfseg.errors import ValidationError
from rfseg.guidance import ClickEvent
from rfseg.train.clicks import simulate_click
from rfseg.train.metrics import EvalReport, ViewMetrics, foreground_iou, pixel_accuracy, psnr, ssim

from reference import farthest_interior_pixels, iou_reference


def disc_mask(h, w, cv, cu, r):
    vv, uu = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return (vv - cv) ** 2 + (uu - cu) ** 2 <= r ** 2


class TestSimulateClick:
    def test_perfect_prediction_returns_none(self, rng):
        gt = disc_mask(16, 16, 8, 8, 4)
        assert simulate_click(gt, gt, rng) is None

    def test_empty_pred_clicks_positive_at_disc_center(self, rng):
        gt = disc_mask(21, 21, 10, 10, 6)
        pred = np.zeros_like(gt)
        click = simulate_click(pred, gt, rng)
        assert click is not None and click.positive
        centers, _ = farthest_interior_pixels(gt)
        assert (click.v, click.u) in centers

    def test_overprediction_clicks_negative_far_from_boundary(self, rng):
        pred = np.ones((18, 18), dtype=bool)
        gt = np.zeros((18, 18), dtype=bool)
        gt[6:9, 6:9] = True
        click = simulate_click(pred, gt, rng)
        assert click is not None and not click.positive
        region = pred ^ gt
        centers, best = farthest_interior_pixels(region)
        assert (click.v, click.u) in centers

    def test_largest_component_chosen(self, rng):
        gt = np.zeros((20, 20), dtype=bool)
        gt[2:4, 2:4] = True     # small missed region
        gt[10:17, 10:17] = True  # large missed region
        pred = np.zeros_like(gt)
        click = simulate_click(pred, gt, rng)
        assert 10 <= click.v < 17 and 10 <= click.u < 17

    def test_click_lands_on_mispredicted_pixel(self, rng):
        for _ in range(20):
            pred = rng.random((12, 12)) > 0.6
            gt = rng.random((12, 12)) > 0.6
            click = simulate_click(pred, gt, rng)
            if click is None:
                assert np.array_equal(pred, gt)
            else:
                assert pred[click.v, click.u] != gt[click.v, click.u]
                # polarity matches the error type
                assert click.positive == bool(gt[click.v, click.u])

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValidationError):
            simulate_click(np.zeros((4, 4)), np.zeros((5, 4)), rng)

    def test_tie_break_uses_rng_deterministically(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[2:4, 2:6] = True  # two equally-deep interior pixels
        pred = np.zeros_like(gt)
        a = simulate_click(pred, gt, np.random.default_rng(0))
        b = simulate_click(pred, gt, np.random.default_rng(0))
        assert (a.u, a.v) == (b.u, b.v)


class TestClickEventJson:
    def test_round_trip(self):
        c = ClickEvent(view=2, u=10, v=20, positive=False, t=3)
        assert ClickEvent.from_json(c.to_json()) == c

    def test_bad_polarity_rejected(self):
        with pytest.raises(ValidationError):
            ClickEvent.from_json({"view": 0, "u": 0, "v": 0, "polarity": "maybe", "t": 1})


class TestMetrics:
    def test_perfect_mask(self, rng):
        m = rng.random((9, 9)) > 0.5
        assert pixel_accuracy(m, m) == 1.0
        assert foreground_iou(m, m) == 1.0

    def test_empty_pred_nonempty_gt(self):
        gt = np.zeros((6, 6), dtype=bool)
        gt[2:4, 2:4] = True
        assert foreground_iou(np.zeros_like(gt), gt) == 0.0

    def test_both_empty(self):
        z = np.zeros((4, 4), dtype=bool)
        assert foreground_iou(z, z) == 1.0

    def test_iou_matches_pixel_count_oracle(self, rng):
        for _ in range(25):
            pred = rng.random((10, 10)) > 0.5
            gt = rng.random((10, 10)) > 0.5
            assert foreground_iou(pred, gt) == pytest.approx(iou_reference(pred, gt))

    def test_acc_matches_direct_count(self, rng):
        pred = rng.random((8, 8)) > 0.5
        gt = rng.random((8, 8)) > 0.5
        assert pixel_accuracy(pred, gt) == pytest.approx((pred == gt).mean())

    def test_psnr_identical_capped(self, rng):
        img = rng.random((16, 16, 3))
        assert psnr(img, img) == 99.0

    def test_psnr_known_mse(self):
        a = np.zeros((8, 8))
        b = np.full((8, 8), 0.5)
        assert psnr(a, b) == pytest.approx(-10 * np.log10(0.25), abs=1e-9)

    def test_ssim_identical_is_one(self, rng):
        img = rng.random((16, 16, 3))
        assert ssim(img, img) == pytest.approx(1.0)

    def test_ssim_degrades_with_noise(self, rng):
        img = rng.random((32, 32, 3))
        noisy = np.clip(img + rng.normal(0, 0.3, img.shape), 0, 1)
        assert ssim(img, noisy) < 0.9


class TestEvalReport:
    def test_aggregation_and_csv(self, tmp_path):
        rep = EvalReport(scene="s", clicks_used=3)
        rep.per_view = [ViewMetrics(0, 0.9, 0.8, 20.0, 0.9),
                        ViewMetrics(1, 0.7, 0.6, 30.0, 0.7)]
        rep.iou_curve = [(1, 0.5), (2, 0.6), (3, 0.7)]
        rep.finalize()
        assert rep.mean_acc == pytest.approx(0.8)
        assert rep.mean_iou == pytest.approx(0.7)
        assert rep.mean_psnr == pytest.approx(25.0)
        csv = rep.curve_csv()
        assert csv.splitlines()[0] == "clicks,mean_iou"
        assert len(csv.splitlines()) == 4
        rep.save(tmp_path / "rep.json")
        import json
        data = json.loads((tmp_path / "rep.json").read_text())
        assert data["mean_iou"] == pytest.approx(0.7)
