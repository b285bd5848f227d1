"""Desk-scale loss comparison on synthetic occluded curb scenes.

One run: pretrain with BCE, then from that same checkpoint continue with BCE
and fine-tune with each CP-loss variant; evaluate every model with a
threshold sweep on held-out scenes.
"""
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics, model
from .synth import SceneConfig, gen_scene
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

DEFAULT_TAUS = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2).tolist())


@dataclass
class ExperimentConfig:
    n_train: int = 200
    n_test: int = 50
    size: int = 128
    pretrain_epochs: int = 30
    finetune_epochs: int = 10
    variants: tuple = ("bce", "cp", "cp_no_weights")
    taus: tuple = DEFAULT_TAUS
    delta: float = 3.0
    train: TrainConfig = field(default_factory=TrainConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)


def make_split(cfg, seed):
    scene = replace(cfg.scene, size=cfg.size)
    base = 1_000_003 * (seed + 1)
    train_set = [gen_scene(scene.with_seed(base + i)) for i in range(cfg.n_train)]
    test_set = [gen_scene(scene.with_seed(base + 500_000 + i)) for i in range(cfg.n_test)]
    return train_set, test_set


def evaluate_model(params, samples, taus, delta):
    """Per-tau mean of ``(tau, P, R, F1, SCM)`` over ``samples``."""
    tables = [metrics.curve_rows(metrics.sweep_curves(model.predict(params, img), gt, taus, delta))
              for img, gt in samples]
    return metrics.aggregate(tables)


def best_of(table):
    """Best-threshold F1 and SCM of an aggregated curve table."""
    return {"f1": float(table[:, 3].max()), "scm": float(table[:, 4].max()),
            "tau_f1": float(table[np.argmax(table[:, 3]), 0]),
            "tau_scm": float(table[np.argmax(table[:, 4]), 0])}


def run(cfg, seed):
    train_set, test_set = make_split(cfg, seed)
    base_cfg = replace(cfg.train, seed=seed, loss="bce", epochs=cfg.pretrain_epochs)
    pre, _ = train(base_cfg, train_set)
    results = {}
    for kind in cfg.variants:
        tc = replace(cfg.train, seed=seed + 7919, loss=kind, epochs=cfg.finetune_epochs)
        ckpt, hist = train(tc, train_set, init=pre)
        table = evaluate_model(ckpt.params, test_set, cfg.taus, cfg.delta)
        results[kind] = {"table": table, "best": best_of(table), "history": hist}
        log.info("seed %d %s: %s", seed, kind, results[kind]["best"])
    return results


def summarize(runs):
    """Mean best-threshold metrics per variant across seeds."""
    out = {}
    for kind in runs[0]:
        out[kind] = {k: float(np.mean([r[kind]["best"][k] for r in runs]))
                     for k in ("f1", "scm")}
    return out


def config_dict(cfg):
    d = asdict(cfg)
    d["taus"] = list(cfg.taus)
    d["variants"] = list(cfg.variants)
    return d
