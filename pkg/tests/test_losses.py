import math

import numpy as np
import pytest

from specband.netcore import autograd as ag
from specband.netcore.losses import cosine_consistency, cross_entropy, total_loss


def test_cross_entropy_examples():
    assert cross_entropy(np.zeros(7), 3).item() == pytest.approx(math.log(7))
    z = np.zeros(7)
    z[2] = 1000
    assert cross_entropy(z, 2).item() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        cross_entropy(np.zeros(7), 7)


def test_cross_entropy_gradient_fd(rng):
    z = rng.normal(size=(4, 7))
    y = np.array([0, 6, 3, 3])
    p = ag.parameter(z)
    cross_entropy(p, y).backward()
    h = 1e-5
    num = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += h
        zm[idx] -= h
        num[idx] = (cross_entropy(zp, y).item() - cross_entropy(zm, y).item()) / (2 * h)
    rel = np.abs(num - p.grad) / np.maximum(np.abs(num), 1e-6)
    assert rel.max() < 1e-4


def test_cosine_examples():
    v = np.array([1.0, -2.0, 0.5])
    assert cosine_consistency(v, v).item() == pytest.approx(0.0, abs=1e-15)
    assert cosine_consistency(np.array([1.0, 0]), np.array([0, 1.0])).item() == pytest.approx(1.0)
    assert cosine_consistency(v, -v).item() == pytest.approx(2.0)
    assert cosine_consistency(np.zeros(3), v).item() == 1.0
    with pytest.raises(ValueError):
        cosine_consistency(np.zeros(3), np.zeros(4))


def test_total_loss_examples():
    assert total_loss([(2.0, 0.5)], 5).total == pytest.approx(4.5)
    b = total_loss([(1.0, 0.3), (2.0, 0.7)], 0)
    assert b.total == pytest.approx(3.0)
    assert total_loss([(0.0, 0.0), (0.0, 0.0)], 5).total == 0.0
    with pytest.raises(ValueError):
        total_loss([(1.0, 1.0)], -1)


def test_breakdown_bookkeeping(rng):
    terms = [(i, float(rng.random() * 3), float(rng.random() * 2)) for i in range(6)]
    b = total_loss(terms, 5.0, original_pair=(0.7, 0.2))
    assert abs(b.total - b.recomputed_total()) <= 1e-12
    d = b.to_dict()
    assert [r["band"] for r in d["per_band"]] == list(range(6))
    assert d["original_pair"]["cls"] == 0.7


def test_total_loss_keeps_graph(rng):
    p = ag.parameter(rng.normal(size=(2, 4)))
    q = ag.parameter(rng.normal(size=(2, 4)))
    b = total_loss([(cross_entropy(p, [0, 1]), cosine_consistency(p, q))], 2.0)
    b.tensor.backward()
    assert np.any(p.grad) and np.any(q.grad)


def test_non_negativity(rng):
    for _ in range(20):
        a, c = rng.normal(size=(3, 5)), rng.normal(size=(3, 5))
        assert cross_entropy(a, [0, 1, 2]).item() >= 0
        assert 0 <= cosine_consistency(a, c).item() <= 2
