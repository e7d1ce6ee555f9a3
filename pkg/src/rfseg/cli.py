"""Command-line interface: scene generation, training, evaluation, batch
segmentation and the HTTP server."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .guidance import ClickEvent
from .model import NetConfig, build_seg_input
from .render import write_png, write_raw_f32
from .sceneio import load_scene, save_scene
from .synth import SyntheticSpec, make_synthetic_scene, random_spec
from .train import LossConfig, TrainConfig, evaluate, train
from .train.workspace import SceneWorkspace

log = logging.getLogger("rfseg")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")


def cmd_gen(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = []
    if args.spec:
        for path in args.spec:
            specs.append((Path(path).stem, SyntheticSpec.load(path)))
    if args.random_count:
        rng = np.random.default_rng(args.seed)
        for i in range(args.random_count):
            spec = random_spec(rng, dims=(args.dims,) * 3, n_views=args.views,
                               image_size=args.image_size)
            specs.append((f"scene{i:03d}", spec))
    if not specs:
        log.error("nothing to generate: pass spec files or --random-count")
        return 2
    for name, spec in specs:
        scene = make_synthetic_scene(spec)
        path = out_dir / f"{name}.rfs"
        save_scene(scene, path)
        log.info("wrote %s (%d views, %d foreground voxels)",
                 path, scene.n_views, int(scene.gt_mask3d.sum()))
    return 0


def _net_config(args) -> NetConfig:
    if args.net_config:
        return NetConfig.load(args.net_config)
    return NetConfig()


def cmd_train(args) -> int:
    scenes = [load_scene(p) for p in args.scenes]
    net_cfg = _net_config(args)
    train_cfg = TrainConfig(
        iterations=args.iterations, clicks_per_episode=args.clicks,
        interaction_views=args.interaction_views, lr=args.lr, seed=args.seed,
        target_iou=args.target_iou,
        holdout_views=args.holdout_views or [],
    )
    loss_cfg = LossConfig(lam=args.lam, lam1=args.lam1, lam2=args.lam2,
                          rays_per_step=args.rays)
    model, opt, records = train(scenes, train_cfg, loss_cfg, net_cfg,
                                log_path=args.log)
    save_checkpoint(model, args.out, optimizer=opt,
                    extra={"iterations": len(records), "seed": args.seed})
    log.info("checkpoint written to %s after %d iterations", args.out, len(records))
    return 0


def cmd_eval(args) -> int:
    scene = load_scene(args.scene)
    model, _ = load_checkpoint(args.checkpoint)
    rep = evaluate(scene, model, click_budget=args.clicks,
                   rng=np.random.default_rng(args.seed),
                   name=Path(args.scene).stem)
    rep.save(args.report)
    if args.curve:
        Path(args.curve).write_text(rep.curve_csv())
    log.info("mean Acc %.4f IoU %.4f (report: %s)", rep.mean_acc, rep.mean_iou, args.report)
    return 0


def cmd_segment(args) -> int:
    scene = load_scene(args.scene)
    model, _ = load_checkpoint(args.checkpoint)
    ws = SceneWorkspace(scene)
    clicks = []
    with open(args.click_log) as f:
        for line in f:
            line = line.strip()
            if line:
                clicks.append(ClickEvent.from_json(json.loads(line)))
    m_prev = None
    prob_high = np.full(ws.high_dims, 0.5, dtype=np.float64)
    for click in clicks:
        ws.guidance.add_click(click)
        fw = model.forward(scene, build_seg_input(scene, ws.guidance.field(), m_prev))
        m_prev = fw.state.prob_low
        prob_high = fw.state.prob_high
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_raw_f32(np.ascontiguousarray(prob_high.transpose(2, 1, 0)), out_dir / "mask3d.raw")
    for v in range(scene.n_views):
        mask = ws.render_mask2d(v, prob_high)
        write_png(mask, out_dir / f"mask_view{v}.png")
        write_raw_f32(mask, out_dir / f"mask_view{v}.f32")
    log.info("wrote masks for %d views to %s", scene.n_views, out_dir)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(args.data_dir, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfseg",
                                     description="interactive 3D segmentation of voxel radiance fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic scenes")
    p.add_argument("spec", nargs="*", help="scene spec JSON files")
    p.add_argument("--random-count", type=int, default=0, help="additionally generate N random scenes")
    p.add_argument("--dims", type=int, default=32)
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("-o", "--out-dir", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a segmentation checkpoint")
    p.add_argument("scenes", nargs="+", help="scene container files")
    p.add_argument("-o", "--out", required=True, help="output checkpoint path")
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--clicks", type=int, default=3, help="clicks per training episode")
    p.add_argument("--interaction-views", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--lam1", type=float, default=1.0)
    p.add_argument("--lam2", type=float, default=1.0)
    p.add_argument("--rays", type=int, default=1024)
    p.add_argument("--net-config", help="NetConfig JSON file")
    p.add_argument("--log", help="JSONL training log path")
    p.add_argument("--target-iou", type=float, default=None, help="early stop threshold")
    p.add_argument("--holdout-views", type=int, nargs="*", default=None)
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="interactive evaluation with simulated clicks")
    p.add_argument("--scene", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clicks", type=int, default=5)
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--curve", help="output IoU-vs-clicks CSV")
    _add_seed(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("segment", help="batch segmentation from a click log")
    p.add_argument("--scene", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--click-log", required=True, help="JSON-lines click events")
    p.add_argument("-o", "--out-dir", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--data-dir", required=True, help="directory with scenes/ and checkpoints/")
    p.add_argument("--frontend", default=None, help="directory with built UI assets")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    _add_seed(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
