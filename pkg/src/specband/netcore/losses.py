"""Classification and consistency losses, and their weighted sum."""

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag


def cross_entropy(logits, label):
    """Batch-mean cross entropy. ``logits`` (N, C) or (C,); ``label`` int or (N,)."""
    logits = ag.as_tensor(logits)
    if len(logits.shape) == 1:
        logits = ag.reshape(logits, (1, -1))
    labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
    c = logits.shape[-1]
    if np.any(labels < 0) or np.any(labels >= c):
        raise ValueError(f"labels must lie in [0, {c})")
    return ag.mean(ag.cross_entropy(logits, labels))


def cosine_consistency(z1, z2, eps=1e-8):
    """Batch-mean ``1 - cos(z1, z2)``; lies in [0, 2]."""
    z1, z2 = ag.as_tensor(z1), ag.as_tensor(z2)
    if z1.shape != z2.shape:
        raise ValueError(f"feature shapes differ: {z1.shape} vs {z2.shape}")
    if len(z1.shape) == 1:
        z1 = ag.reshape(z1, (1, -1))
        z2 = ag.reshape(z2, (1, -1))
    return ag.mean(ag.cosine_consistency(z1, z2, eps))


@dataclass
class LossBreakdown:
    """Per-pair loss terms and the weighted total.

    ``per_band`` holds ``(band, cls, cons)`` for the filtered pairs; the
    original-image pair, when it contributes, is kept separately in
    ``original_pair``. Band indices are 0-based.
    """

    per_band: list
    original_pair: tuple = None
    alpha: float = 5.0
    total: float = 0.0
    tensor: object = field(default=None, repr=False, compare=False)

    def recomputed_total(self):
        terms = [(c, s) for _, c, s in self.per_band]
        if self.original_pair is not None:
            terms.append(self.original_pair)
        return float(sum(c + self.alpha * s for c, s in terms))

    def to_dict(self):
        return {
            "per_band": [{"band": int(i), "cls": float(c), "cons": float(s)} for i, c, s in self.per_band],
            "original_pair": None if self.original_pair is None else
            {"cls": float(self.original_pair[0]), "cons": float(self.original_pair[1])},
            "alpha": float(self.alpha),
            "total": float(self.total),
        }


def total_loss(per_band, alpha, original_pair=None):
    """Sum of ``cls_i + alpha * cons_i`` over all pairs.

    Items of ``per_band`` are ``(cls, cons)`` or ``(band, cls, cons)``; each
    term may be a float or a scalar Tensor. Tensor terms keep the graph, and
    the summed Tensor is attached as ``.tensor`` for backward.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    items = list(per_band)
    if not items and original_pair is None:
        raise ValueError("no loss terms given")
    rows = []
    for j, item in enumerate(items):
        band, cls, cons = item if len(item) == 3 else (j, *item)
        rows.append((band, cls, cons))
    terms = [(c, s) for _, c, s in rows]
    if original_pair is not None:
        terms.append(original_pair)

    acc = None
    for cls, cons in terms:
        term = cls if alpha == 0 else cls + alpha * cons
        acc = term if acc is None else acc + term

    def val(t):
        return t.item() if isinstance(t, ag.Tensor) else float(t)

    return LossBreakdown(
        per_band=[(int(b), val(c), val(s)) for b, c, s in rows],
        original_pair=None if original_pair is None else (val(original_pair[0]), val(original_pair[1])),
        alpha=float(alpha),
        total=val(acc),
        tensor=acc if isinstance(acc, ag.Tensor) else None,
    )
