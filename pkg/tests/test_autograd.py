import numpy as np
import pytest

from specband.netcore import autograd as ag


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def check(build, *shapes, rng, tol=1e-6, positive=False):
    """Compare the analytic gradient of sum(build(*params) * weights) to central differences."""
    params = [ag.parameter(rng.normal(size=s) if not positive else rng.random(s) + 0.5) for s in shapes]
    out_shape = build(*params).shape
    weights = rng.normal(size=out_shape)

    def f():
        return float(np.sum(build(*[ag.Tensor(p.value) for p in params]).value * weights))

    loss = ag.sum_(ag.mul(build(*params), weights))
    loss.backward()
    for p in params:
        num = numeric_grad(f, p.value)
        err = np.max(np.abs(num - p.grad)) / max(1.0, np.max(np.abs(num)))
        assert err < tol, err


def test_elementwise(rng):
    check(ag.add, (3, 4), (4,), rng=rng)
    check(ag.mul, (3, 4), (3, 1), rng=rng)
    check(ag.square, (5,), rng=rng)
    check(lambda a, b: a - b, (2, 3), (2, 3), rng=rng)


def test_relu_away_from_kink(rng):
    p = ag.parameter(np.array([-1.5, -0.2, 0.3, 2.0]))
    ag.sum_(ag.relu(p)).backward()
    np.testing.assert_array_equal(p.grad, [0, 0, 1, 1])


def test_reductions_and_shapes(rng):
    check(lambda a: ag.sum_(a, axis=1), (3, 4), rng=rng)
    check(lambda a: ag.mean(a, axis=0), (3, 4), rng=rng)
    check(lambda a: ag.reshape(a, (2, 6)), (3, 4), rng=rng)
    check(lambda a: a[1:, ::2], (3, 4), rng=rng)
    check(lambda a, b: ag.concat([a, b], axis=1), (2, 3), (2, 5), rng=rng)


def test_linear(rng):
    check(ag.linear, (4, 5), (5, 3), (3,), rng=rng)


def test_conv3x3(rng):
    check(ag.conv3x3, (2, 5, 6, 3), (3, 3, 3, 4), (4,), rng=rng)


def test_conv3x3_against_direct_loop(rng):
    x = rng.normal(size=(1, 4, 5, 2))
    w = rng.normal(size=(3, 3, 2, 3))
    b = rng.normal(size=3)
    out = ag.conv3x3(ag.Tensor(x), ag.Tensor(w), ag.Tensor(b)).value
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    for i in range(4):
        for j in range(5):
            patch = xp[0, i:i + 3, j:j + 3, :]
            ref = np.einsum("abc,abcd->d", patch, w) + b
            np.testing.assert_allclose(out[0, i, j], ref, atol=1e-12)


def test_pools(rng):
    check(ag.avg_pool2, (2, 4, 6, 3), rng=rng)
    check(ag.avg_pool2, (1, 5, 5, 2), rng=rng)  # odd edge dropped
    check(ag.global_avg_pool, (2, 3, 5, 4), rng=rng)


def test_cross_entropy_grad(rng):
    labels = np.array([0, 3, 1])
    check(lambda z: ag.cross_entropy(z, labels), (3, 4), rng=rng, tol=1e-4)
    z = rng.normal(size=(3, 4))
    p = ag.parameter(z)
    ag.sum_(ag.cross_entropy(p, labels)).backward()
    expected = ag.softmax(z)
    expected[np.arange(3), labels] -= 1
    np.testing.assert_allclose(p.grad, expected, atol=1e-14)


def test_cosine_grad(rng):
    check(ag.cosine_consistency, (4, 6), (4, 6), rng=rng)


def test_cosine_clamped_rows_are_finite():
    a = ag.parameter(np.zeros((1, 3)))
    b = ag.parameter(np.array([[1.0, 2.0, 3.0]]))
    out = ag.cosine_consistency(a, b)
    assert out.value[0] == 1.0
    ag.sum_(out).backward()
    assert np.all(np.isfinite(a.grad)) and np.all(np.isfinite(b.grad))


def test_softmax_normalized(rng):
    p = ag.softmax(rng.normal(size=(10, 7)) * 50)
    assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-12


def test_sum_of_squares_gradient(rng):
    ps = [ag.parameter(rng.normal(size=s)) for s in [(3,), (2, 2)]]
    loss = ag.add(ag.sum_(ag.square(ps[0])), ag.sum_(ag.square(ps[1])))
    loss.backward()
    for p in ps:
        np.testing.assert_allclose(p.grad, 2 * p.value)


def test_double_backward_raises(rng):
    p = ag.parameter(rng.normal(size=3))
    loss = ag.sum_(ag.square(p))
    loss.backward()
    with pytest.raises(ag.DoubleBackwardError):
        loss.backward()


def test_unreachable_parameter_keeps_zero_grad(rng):
    p, q = ag.parameter(rng.normal(size=3)), ag.parameter(rng.normal(size=3))
    ag.sum_(p).backward()
    assert not np.any(q.grad)


def test_shared_subgraph_accumulates(rng):
    p = ag.parameter(np.array([2.0]))
    y = ag.square(p)
    ag.sum_(ag.add(y, y)).backward()
    np.testing.assert_allclose(p.grad, [8.0])


def test_zero_grad_resets():
    p = ag.parameter(np.array([1.0, 2.0]))
    ag.sum_(p).backward()
    p.zero_grad()
    assert not np.any(p.grad)
