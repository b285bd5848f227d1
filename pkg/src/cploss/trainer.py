"""Training loop: Adam, inverse-time lr decay, seeded epoch shuffling."""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import model
from .grid import load_gray, load_mask
from .losses import CP_VARIANTS, LOSS_KINDS, compute_loss, distance_terms, weights_from_terms

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    loss: str = "bce"
    sigma: float = 100.0
    delta: float = 3.0
    tau_bin: float = 0.5
    gamma: float = 2.0
    eps: float = 1e-7
    smooth: float = 1e-7
    lr: float = 1e-4
    lr_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    seed: int = 0
    weight_every: int = 1
    pretrained: Optional[str] = None
    # drop the Adam moments of the init checkpoint (keeps weights and counters)
    reset_moments: bool = False

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss!r}")
        if self.sigma <= 0 or self.lr <= 0 or self.epochs < 0 or self.weight_every < 1:
            raise ValueError("invalid training configuration")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self):
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).digest()


class TrainingDiverged(RuntimeError):
    pass


def load_manifest(path):
    """Return ``[(image, gt), ...]`` from a ``manifest.json`` written by ``synth``."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    meta = json.loads(path.read_text())
    samples = []
    for pair in meta["pairs"]:
        samples.append((load_gray(path.parent / pair["image"]), load_mask(path.parent / pair["gt"])))
    if not samples:
        raise ValueError(f"{path}: manifest lists no samples")
    return samples


def adam_step(ckpt, grads, lr, cfg):
    ckpt.step += 1
    t = ckpt.step
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for k, g in grads.items():
        g = g.astype(np.float32)
        m, v = ckpt.adam_m[k], ckpt.adam_v[k]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
        ckpt.params[k] -= update.astype(np.float32)


def train(cfg, samples, init=None, on_epoch=None):
    """Train for ``cfg.epochs`` epochs and return ``(checkpoint, log)``.

    ``init`` resumes from a checkpoint (params, Adam moments, counters). The
    CP-loss family refuses to start from random weights. ``log`` holds one
    dict per epoch with the mean per-image loss.
    """
    if cfg.loss in CP_VARIANTS and init is None:
        raise ValueError(f"loss {cfg.loss!r} must start from a pretrained checkpoint")
    if not samples:
        raise ValueError("no training samples")
    if init is None:
        ckpt = model.Checkpoint.fresh(model.init_params(cfg.seed))
    else:
        ckpt = model.Checkpoint({k: v.copy() for k, v in init.params.items()},
                                {k: v.copy() for k, v in init.adam_m.items()},
                                {k: v.copy() for k, v in init.adam_v.items()},
                                step=init.step, epoch=init.epoch)
        if cfg.reset_moments:
            ckpt.adam_m, ckpt.adam_v = model.zero_params(), model.zero_params()
    ckpt.config_digest = cfg.digest()
    rng = np.random.default_rng(cfg.seed)
    cached_terms = {}
    history = []
    for _ in range(cfg.epochs):
        lr = cfg.lr / (1.0 + cfg.lr_decay * ckpt.epoch)
        total = 0.0
        for idx in rng.permutation(len(samples)):
            image, gt = samples[idx]
            prob, cache = model.forward(ckpt.params, image)
            weights = None
            if cfg.loss in CP_VARIANTS and cfg.loss != "cp_no_weights":
                # skeleton terms are refreshed every ``weight_every`` visits of an image
                hit = cached_terms.get(idx)
                if hit is None or ckpt.epoch - hit[0] >= cfg.weight_every:
                    hit = (ckpt.epoch, distance_terms(prob, gt, cfg.sigma, cfg.delta, cfg.tau_bin))
                    cached_terms[idx] = hit
                weights = weights_from_terms(prob, hit[1], cfg.sigma, cfg.delta)
            res = compute_loss(cfg.loss, prob, gt, sigma=cfg.sigma, delta=cfg.delta,
                               tau_bin=cfg.tau_bin, gamma=cfg.gamma, eps=cfg.eps,
                               smooth=cfg.smooth, weights=weights)
            if not np.isfinite(res.value) or not np.all(np.isfinite(res.grad)):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {ckpt.epoch}, step {ckpt.step}, sample {idx}")
            grads = model.backward(ckpt.params, image, res.grad, cache)
            adam_step(ckpt, grads, lr, cfg)
            total += res.value
        ckpt.epoch += 1
        entry = {"epoch": ckpt.epoch, "loss": cfg.loss, "lr": lr, "mean_loss": total / len(samples)}
        history.append(entry)
        log.info("epoch %d  %s  mean loss %.6f", ckpt.epoch, cfg.loss, entry["mean_loss"])
        if on_epoch is not None:
            on_epoch(entry)
    return ckpt, history
