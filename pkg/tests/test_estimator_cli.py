import json

import numpy as np
import pytest

from rfseg.cli import main as cli_main
from rfseg.errors import NotFittedError
from rfseg.estimator import ClickSegmenter
from rfseg.guidance import ClickEvent
from rfseg.sceneio import save_scene


def fast_params():
    return dict(iterations=3, clicks_per_episode=2, depth=1, base_channels=2,
                transformer_layers=1, model_width=8, heads=2, token_cap=90,
                n_samples=24, seed=7)


class TestClickSegmenter:
    def test_sklearn_param_protocol(self):
        est = ClickSegmenter(**fast_params())
        params = est.get_params()
        assert params["iterations"] == 3
        est.set_params(iterations=5)
        assert est.iterations == 5

    def test_clone_compatible(self):
        from sklearn.base import clone
        est = ClickSegmenter(**fast_params())
        c = clone(est)
        assert c.get_params() == est.get_params()

    def test_predict_before_fit_rejected(self, tiny_scene):
        est = ClickSegmenter(**fast_params())
        with pytest.raises(NotFittedError):
            est.predict(tiny_scene, clicks=[ClickEvent(0, 16, 16, True, 1)])

    def test_fit_predict_score(self, tiny_scene):
        est = ClickSegmenter(**fast_params())
        est.fit([tiny_scene])
        assert hasattr(est, "model_")
        assert len(est.history_) == 3
        prob = est.predict(tiny_scene, clicks=[ClickEvent(0, 16, 16, True, 1)])
        assert prob.shape == (32, 32, 32)
        assert prob.min() >= 0.0 and prob.max() <= 1.0
        score = est.score([tiny_scene], click_budget=1)
        assert 0.0 <= score <= 1.0

    def test_predict_accepts_json_clicks(self, tiny_scene):
        est = ClickSegmenter(**fast_params()).fit([tiny_scene])
        prob = est.predict(
            tiny_scene,
            clicks=[{"view": 0, "u": 16, "v": 16, "polarity": "positive", "t": 1}],
        )
        assert prob.shape == (32, 32, 32)


class TestCli:
    def test_gen_train_eval_segment(self, tmp_path, tiny_scene):
        scenes_dir = tmp_path / "scenes"
        scenes_dir.mkdir()
        # gen from an explicit spec file
        spec = {
            "dims": [16, 16, 16],
            "primitives": [{"kind": "sphere", "center": [8, 8, 8], "size": 3.5,
                            "density": 4.0, "color": [0.9, 0.2, 0.2],
                            "foreground": True}],
            "background": [],
            "seed": 0, "voxel_size": 1.0, "n_views": 3, "image_size": 24,
            "camera_distance": None, "camera_elevation_deg": 28.0,
            "density_noise": 0.0,
        }
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        assert cli_main(["gen", str(spec_path), "-o", str(scenes_dir), "--seed", "1"]) == 0
        scene_file = scenes_dir / "spec.rfs"
        assert scene_file.exists()

        # random generation
        assert cli_main(["gen", "--random-count", "1", "--dims", "16",
                         "--views", "2", "--image-size", "16",
                         "-o", str(scenes_dir), "--seed", "2"]) == 0
        assert (scenes_dir / "scene000.rfs").exists()

        # train a tiny checkpoint
        net_cfg = tmp_path / "net.json"
        net_cfg.write_text(json.dumps({
            "depth": 1, "base_channels": 2, "transformer_layers": 1,
            "model_width": 8, "heads": 2, "tau": 0.15, "quota": 0.1,
            "token_cap": 90, "in_channels": 4,
        }))
        ckpt = tmp_path / "model.ckpt"
        log = tmp_path / "train.jsonl"
        assert cli_main(["train", str(scene_file), "-o", str(ckpt),
                         "--iterations", "2", "--clicks", "1",
                         "--net-config", str(net_cfg), "--log", str(log),
                         "--seed", "3"]) == 0
        assert ckpt.exists()
        assert len(log.read_text().splitlines()) == 2

        # eval emits report + curve
        report = tmp_path / "report.json"
        curve = tmp_path / "curve.csv"
        assert cli_main(["eval", "--scene", str(scene_file),
                         "--checkpoint", str(ckpt), "--clicks", "2",
                         "--report", str(report), "--curve", str(curve),
                         "--seed", "4"]) == 0
        rep = json.loads(report.read_text())
        assert "mean_iou" in rep and "iou_curve" in rep
        assert curve.read_text().startswith("clicks,mean_iou")

        # batch segmentation from a click log
        click_log = tmp_path / "clicks.jsonl"
        click_log.write_text(
            '{"view": 0, "u": 12, "v": 12, "polarity": "positive", "t": 1}\n'
        )
        out_dir = tmp_path / "masks"
        assert cli_main(["segment", "--scene", str(scene_file),
                         "--checkpoint", str(ckpt),
                         "--click-log", str(click_log),
                         "-o", str(out_dir), "--seed", "5"]) == 0
        assert (out_dir / "mask3d.raw").exists()
        assert (out_dir / "mask_view0.png").exists()
        raw = np.fromfile(out_dir / "mask3d.raw", dtype="<f4")
        assert raw.size == 32 ** 3
