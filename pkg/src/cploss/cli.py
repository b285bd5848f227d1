"""Command-line entry point: ``cploss <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors. Every
subcommand that produces outputs also writes the fully resolved run
configuration next to them; passing that file back with ``--config``
reproduces the outputs.
"""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__, grid, losses, metrics, model
from .dataset import Annotation, rasterize_polylines
from .synth import SceneConfig, write_dataset
from .trainer import TrainConfig, TrainingDiverged, load_manifest, train

log = logging.getLogger("cploss")


class UsageError(Exception):
    pass


@dataclass
class EvalConfig:
    tau: float = 0.5
    delta: float = 3.0
    tau_grid: str = "0.05:0.95:0.05"


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("command", None)
        d.pop("paths", None)
        unknown = set(d) - {"train", "scene", "eval"}
        if unknown:
            raise UsageError(f"unknown config sections: {sorted(unknown)}")
        parts = {}
        for name, typ in (("train", TrainConfig), ("scene", SceneConfig), ("eval", EvalConfig)):
            sub = d.get(name, {})
            bad = set(sub) - {f.name for f in fields(typ)}
            if bad:
                raise UsageError(f"unknown keys in [{name}]: {sorted(bad)}")
            try:
                parts[name] = typ(**sub)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"invalid [{name}] config: {exc}") from exc
        return cls(**parts)

    @classmethod
    def load(cls, path):
        if path is None:
            return cls()
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from exc

    def dump(self, path, command, paths):
        d = {"command": command, "paths": paths, **asdict(self)}
        Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")


def parse_tau_grid(text):
    """``start:stop:step``; both ends included when ``step`` divides the span."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"tau grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"invalid tau grid {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9))
    taus = [round(start + i * step, 10) for i in range(n + 1)]
    if not taus or taus[0] <= 0 or taus[-1] >= 1:
        raise UsageError(f"tau grid {text!r} must lie inside (0, 1)")
    return taus


def _sibling(path, suffix):
    path = Path(path)
    return path.with_name(path.name + suffix)


def heatmap(values):
    """Linear ramp, minimum blue to maximum red."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    t = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    rgb = np.stack([t, np.zeros_like(t), 1.0 - t], axis=-1)
    return Image.fromarray(np.round(rgb * 255).astype(np.uint8), mode="RGB")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_synth(args, cfg):
    scene = cfg.scene
    if args.seed is not None:
        scene = scene.with_seed(args.seed)
    cfg.scene = scene
    out = Path(args.out_dir)
    write_dataset(scene, out, args.count)
    cfg.dump(out / "run_config.json", "synth", {"out_dir": str(out), "count": args.count})


def cmd_rasterize(args, cfg):
    mask = rasterize_polylines(Annotation.load(args.annotations), args.height, args.width)
    grid.save_mask(mask, args.out)


def cmd_train(args, cfg):
    tc = cfg.train
    if args.loss is not None:
        tc.loss = args.loss
    if args.epochs is not None:
        tc.epochs = args.epochs
    if args.seed is not None:
        tc.seed = args.seed
    if args.pretrained is not None:
        tc.pretrained = args.pretrained
    TrainConfig.from_dict(asdict(tc))  # re-validate after overrides
    init = model.load_checkpoint(tc.pretrained) if tc.pretrained else None
    samples = load_manifest(args.data)
    ckpt, history = train(tc, samples, init=init)
    model.save_checkpoint(ckpt, args.out)
    _sibling(args.out, ".log.json").write_text(json.dumps(history, indent=2) + "\n")
    cfg.dump(_sibling(args.out, ".config.json"), "train", {"data": str(args.data), "out": str(args.out)})


def cmd_predict(args, cfg):
    ckpt = model.load_checkpoint(args.checkpoint)
    image = grid.load_gray(args.image)
    grid.save_prob(model.predict(ckpt.params, image), args.out)


def cmd_eval(args, cfg):
    ec = cfg.eval
    if args.tau is not None:
        ec.tau = args.tau
    if args.delta is not None:
        ec.delta = args.delta
    prob = grid.load_prob(args.pred)
    gt = grid.load_mask(args.gt)
    grid.check_same_shape(prob, gt)
    report = metrics.evaluate_prob(prob, gt, ec.tau, ec.delta)
    Path(args.out).write_text(report.to_json() + "\n")
    cfg.dump(_sibling(args.out, ".config.json"), "eval",
             {"pred": str(args.pred), "gt": str(args.gt), "out": str(args.out)})


def cmd_curves(args, cfg):
    ec = cfg.eval
    if args.tau_grid is not None:
        ec.tau_grid = args.tau_grid
    if args.delta is not None:
        ec.delta = args.delta
    taus = parse_tau_grid(ec.tau_grid)
    preds = sorted(Path(args.pred_dir).glob("*.cplr"))
    gts = sorted(Path(args.gt_dir).glob("*.png"))
    if not preds or len(preds) != len(gts):
        raise ValueError(f"found {len(preds)} predictions and {len(gts)} ground-truth masks")

    def one(pair):
        pp, gp = pair
        return metrics.curve_rows(metrics.sweep_curves(grid.load_prob(pp), grid.load_mask(gp),
                                                       taus, ec.delta))

    # map() keeps the sorted file order regardless of completion order
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        tables = list(pool.map(one, zip(preds, gts)))
    metrics.write_curves_csv(metrics.aggregate(tables), args.out)
    cfg.dump(_sibling(args.out, ".config.json"), "curves",
             {"pred_dir": str(args.pred_dir), "gt_dir": str(args.gt_dir), "out": str(args.out)})


def cmd_weights(args, cfg):
    tc = cfg.train
    for name in ("sigma", "delta", "tau_bin"):
        if getattr(args, name) is not None:
            setattr(tc, name, getattr(args, name))
    prob = grid.load_prob(args.prob)
    gt = grid.load_mask(args.gt)
    w = losses.cp_weights(prob, gt, tc.sigma, tc.delta, tc.tau_bin)
    prefix = args.out_prefix
    for name in ("u", "v", "beta"):
        arr = getattr(w, name)
        grid.save_prob(arr, f"{prefix}_{name}.cplr")
        heatmap(arr).save(f"{prefix}_{name}.png")
    cfg.dump(f"{prefix}_config.json", "weights", {"prob": str(args.prob), "gt": str(args.gt)})


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="cploss", description="Connectivity-preserving segmentation loss toolkit")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="generate synthetic curb scenes")
    s.add_argument("--config")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("rasterize", help="rasterize polyline annotations")
    s.add_argument("--annotations", required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_rasterize)

    s = sub.add_parser("train", help="train the segmentation model")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--pretrained")
    s.add_argument("--loss", choices=losses.LOSS_KINDS)
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="write a probability map (CPLR)")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--image", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="threshold, skeletonize and score one prediction")
    s.add_argument("--config")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--tau", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("curves", help="threshold sweep over a directory of predictions")
    s.add_argument("--config")
    s.add_argument("--pred-dir", required=True)
    s.add_argument("--gt-dir", required=True)
    s.add_argument("--tau-grid")
    s.add_argument("--delta", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_curves)

    s = sub.add_parser("weights", help="dump CP-loss weight maps")
    s.add_argument("--config")
    s.add_argument("--prob", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--sigma", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--tau-bin", type=float)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_weights)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cfg = RunConfig.load(getattr(args, "config", None))
        args.func(args, cfg)
    except UsageError as exc:
        print(f"cploss: usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, TrainingDiverged) as exc:
        print(f"cploss: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
