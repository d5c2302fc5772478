"""Dual-branch training over frequency-slice pairs, baselines, prediction and evaluation.

Every training loop here shares one schedule: per epoch a seeded permutation
of the samples, mini-batches of ``batch_size``, one Adam step per batch, and
cosine annealing over ``epochs * ceil(N / batch_size)`` steps.
"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import spectrum
from .netcore import autograd as ag
from .netcore.losses import LossBreakdown, total_loss
from .netcore.model import DualModel, SingleModel
from .netcore.optim import Adam, TrainConfig, alpha_at

log = logging.getLogger(__name__)

__all__ = [
    "LossBreakdown", "RunRecord", "TrainConfig", "SliceSet", "make_slices",
    "dual_loss", "train_step", "train_dual", "train_single", "train_erm",
    "predict", "predict_batch", "evaluate",
]

EVAL_CHUNK = 256


@dataclass
class RunRecord:
    config: dict
    seed: int
    epochs: list = field(default_factory=list)
    eval: dict = field(default_factory=dict)
    wall_seconds: float = 0.0

    def to_dict(self):
        return {
            "config": self.config,
            "seed": int(self.seed),
            "epochs": self.epochs,
            "eval": {k: float(v) for k, v in self.eval.items()},
            "wall_seconds": float(self.wall_seconds),
        }

    def __eq__(self, other):
        # wall-clock time is the only field allowed to differ between identical runs
        if not isinstance(other, RunRecord):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        a.pop("wall_seconds")
        b.pop("wall_seconds")
        return a == b


@dataclass
class SliceSet:
    """Precomputed pass/stop slices, each shaped ``(N, K, C, H, W)``."""

    passes: np.ndarray
    stops: np.ndarray

    @property
    def k(self):
        return self.passes.shape[1]


def _check_grid(images, bank):
    if tuple(images.shape[-2:]) != bank.shape:
        raise ValueError(f"bank grid {bank.shape} does not match image grid {tuple(images.shape[-2:])}")


def make_slices(images, bank):
    """Pass and stop slices of every image for every band of ``bank``."""
    images = np.asarray(images, dtype=np.float64)
    _check_grid(images, bank)
    if bank.k < 2:
        raise ValueError("dual-branch training needs K >= 2 bands")
    passes = np.moveaxis(spectrum.band_slices(images, bank.pass_responses), 0, 1)
    stops = np.moveaxis(spectrum.band_slices(images, bank.stop_responses), 0, 1)
    return SliceSet(np.ascontiguousarray(passes), np.ascontiguousarray(stops))


def _flatten_views(views):
    # (P, B, C, H, W) -> (P*B, C, H, W)
    return views.reshape((-1,) + views.shape[2:])


def dual_loss(model, images, labels, pass_slices, stop_slices, alpha, original_pair_loss="both"):
    """Loss over the original pair plus every band pair, as one graph.

    ``pass_slices``/``stop_slices``: ``(B, K, C, H, W)``. Returns a
    :class:`LossBreakdown` whose ``tensor`` is ready for ``backward()``.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    b, k = pass_slices.shape[:2]
    use_original = original_pair_loss != "none"
    pass_views = np.moveaxis(pass_slices, 1, 0)
    stop_views = np.moveaxis(stop_slices, 1, 0)
    if use_original:
        pass_views = np.concatenate([images[None], pass_views])
        stop_views = np.concatenate([images[None], stop_views])
    p = pass_views.shape[0]

    logits, z_pass, z_stop = model.forward(_flatten_views(pass_views), _flatten_views(stop_views))
    ce = ag.reshape(ag.cross_entropy(logits, np.tile(labels, p)), (p, b))
    cons = ag.reshape(ag.cosine_consistency(z_pass, z_stop), (p, b))
    ce = ag.mean(ce, axis=1)
    cons = ag.mean(cons, axis=1)

    offset = 1 if use_original else 0
    per_band = [(i, ce[i + offset], cons[i + offset]) for i in range(k)]
    original = None
    if use_original:
        original = (ce[0], cons[0] if original_pair_loss == "both" else 0.0)
    return total_loss(per_band, alpha, original_pair=original)


def _epoch_batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _total_steps(n, config):
    return config.epochs * math.ceil(n / config.batch_size)


def train_step(model, bank, batch, config, optimizer, slices=None, alpha=None):
    """One optimizer step of the dual-branch objective on ``batch = (images, labels)``.

    ``slices`` may carry precomputed ``(passes, stops)`` for the batch;
    otherwise they are computed from ``bank``. ``alpha`` overrides
    ``config.alpha`` (used by the warm-up schedule).
    """
    images, labels = batch
    images = np.asarray(images, dtype=np.float64)
    _check_grid(images, bank)
    if bank.k < 2:
        raise ValueError("dual-branch training needs K >= 2 bands")
    if slices is None:
        s = make_slices(images, bank)
        slices = (s.passes, s.stops)
    breakdown = dual_loss(model, images, labels, slices[0], slices[1],
                          config.alpha if alpha is None else alpha, config.original_pair_loss)
    optimizer.zero_grad()
    breakdown.tensor.backward()
    optimizer.step()
    return breakdown


def _config_dict(config, **extra):
    d = dataclasses.asdict(config)
    d.update(extra)
    return d


def train_dual(model, bank, images, labels, config, slices=None, callback=None):
    """Train a :class:`DualModel` for ``config.epochs``; returns a :class:`RunRecord`."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if slices is None:
        slices = make_slices(images, bank)
    n = len(images)
    total = _total_steps(n, config)
    opt = Adam(model.parameters(), config, total)
    rng = np.random.default_rng(config.seed)
    record = RunRecord(config=_config_dict(config, model="dual", shared=model.shared, k=bank.k), seed=config.seed)
    t0 = time.perf_counter()
    step = 0
    for epoch in range(config.epochs):
        losses, correct = [], 0
        for idx in _epoch_batches(n, config.batch_size, rng):
            step += 1
            br = train_step(model, bank, (images[idx], labels[idx]), config, opt,
                            slices=(slices.passes[idx], slices.stops[idx]), alpha=alpha_at(config, step, total))
            losses.append(br.total * len(idx))
            correct += int(np.sum(predict_batch(model, images[idx]) == labels[idx]))
        record.epochs.append({"epoch": epoch + 1, "loss": sum(losses) / n, "train_acc": correct / n})
        if callback is not None:
            callback(epoch, record)
    record.wall_seconds = time.perf_counter() - t0
    return record


def train_single(model, views, labels, config, callback=None, tag="single"):
    """Cross-entropy training of a :class:`SingleModel`.

    ``views`` is ``(N, C, H, W)`` or ``(N, P, C, H, W)``: every sample
    contributes all of its P views (same label) to each step, and the
    per-view losses are summed.
    """
    views = np.asarray(views, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if views.ndim == 4:
        views = views[:, None]
    n, p = views.shape[:2]
    opt = Adam(model.parameters(), config, _total_steps(n, config))
    rng = np.random.default_rng(config.seed)
    record = RunRecord(config=_config_dict(config, model=tag, views=p), seed=config.seed)
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        total, correct = 0.0, 0
        for idx in _epoch_batches(n, config.batch_size, rng):
            batch = _flatten_views(np.moveaxis(views[idx], 1, 0))
            logits, _ = model.forward(batch)
            ce = ag.mean(ag.reshape(ag.cross_entropy(logits, np.tile(labels[idx], p)), (p, len(idx))), axis=1)
            loss = ag.sum_(ce)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            pred = np.argmax(logits.value[: len(idx)], axis=1)
            correct += int(np.sum(pred == labels[idx]))
        record.epochs.append({"epoch": epoch + 1, "loss": total / n, "train_acc": correct / n})
        if callback is not None:
            callback(epoch, record)
    record.wall_seconds = time.perf_counter() - t0
    return record


def train_erm(images, labels, config, num_classes=7, encoder=None, model_seed=None):
    """ERM baseline: one encoder and a d-wide head on unfiltered images.

    Returns ``(model, record)``.
    """
    from .netcore.model import EncoderConfig

    model = SingleModel(num_classes, encoder or EncoderConfig(),
                        seed=config.seed if model_seed is None else model_seed)
    record = train_single(model, images, labels, config, tag="erm")
    return model, record


def predict_batch(model, images):
    """Labels for a batch ``(N, C, H, W)``; no filtering is applied."""
    images = np.asarray(images, dtype=np.float64)
    out = []
    for i in range(0, len(images), EVAL_CHUNK):
        out.append(np.argmax(model.predict_logits(images[i:i + EVAL_CHUNK]), axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def predict(model, image):
    """Class label for one ``(C, H, W)`` image: argmax of the logits, lowest index on ties."""
    return int(predict_batch(model, np.asarray(image)[None])[0])


def evaluate(model, images, labels):
    """Fraction of ``images`` whose prediction equals ``labels``."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(predict_batch(model, images) == labels))
