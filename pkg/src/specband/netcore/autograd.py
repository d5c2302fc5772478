"""A small reverse-mode autodiff engine over numpy arrays.

Only the operations the branch encoders and losses need are provided. Every
op builds a node holding its parents and a closure that maps the node's
gradient to parent gradients. ``Tensor.backward`` walks the graph once in
reverse topological order.

Image tensors inside the engine use NHWC layout.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DTYPE = np.float64


class DoubleBackwardError(RuntimeError):
    """backward() was called on a graph whose gradients were already accumulated."""


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "_consumed", "name")

    def __init__(self, value, requires_grad=False, name=None, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad and not _parents else None
        self._parents = _parents
        self._backward = _backward
        self._consumed = False
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def item(self):
        return float(self.value)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self._consumed:
            raise DoubleBackwardError("backward() already ran on this graph; rebuild it or reset first")
        if grad is None:
            if self.value.size != 1:
                raise ValueError("grad must be given for non-scalar outputs")
            grad = np.ones_like(self.value)

        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node.grad += g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        self._consumed = True

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, idx):
        return take(self, idx)


def _topo_order(root):
    """Nodes reachable from ``root``, root first, parents after all their children."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value, name=None):
    return Tensor(np.array(value, dtype=DTYPE), requires_grad=True, name=name)


def _node(value, parents, backward):
    parents = tuple(parents)
    return Tensor(value, requires_grad=any(p.requires_grad for p in parents),
                  _parents=parents, _backward=backward)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# elementwise ------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.value + b.value, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _node(a.value * b.value, (a, b), backward)


def relu(x):
    mask = x.value > 0

    def backward(g):
        return (g * mask,)

    return _node(x.value * mask, (x,), backward)


def square(x):
    def backward(g):
        return (2.0 * x.value * g,)

    return _node(x.value * x.value, (x,), backward)


# reductions and reshaping ------------------------------------------------

def sum_(x, axis=None):
    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(np.sum(x.value, axis=axis), (x,), backward)


def mean(x, axis=None):
    n = x.value.size if axis is None else x.value.shape[axis]
    return mul(sum_(x, axis), 1.0 / n)


def reshape(x, shape):
    def backward(g):
        return (g.reshape(x.shape),)

    return _node(x.value.reshape(shape), (x,), backward)


def take(x, idx):
    """Basic (slice/int) indexing."""
    def backward(g):
        out = np.zeros_like(x.value)
        out[idx] = g
        return (out,)

    return _node(x.value[idx], (x,), backward)


def concat(xs, axis=-1):
    xs = list(xs)
    sizes = [t.shape[axis] for t in xs]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([t.value for t in xs], axis=axis), xs, backward)


# layers -------------------------------------------------------------------

def linear(x, w, b=None):
    """``x @ w + b`` with ``x`` of shape (N, in) and ``w`` of shape (in, out)."""
    out = x.value @ w.value
    if b is not None:
        out = out + b.value

    def backward(g):
        gx = g @ w.value.T if x.requires_grad else None
        gw = x.value.T @ g
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, backward)


def _im2col(xp, h, w):
    """(N, h+2, w+2, C) padded input -> (N*h*w, 9*C) patches in (ki, kj, c) order."""
    n, c = xp.shape[0], xp.shape[-1]
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # N, h, w, C, 3, 3
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * h * w, 9 * c)


def conv3x3(x, w, b):
    """Same-padded 3x3 convolution, stride 1.

    ``x``: (N, H, W, Cin); ``w``: (3, 3, Cin, Cout); ``b``: (Cout,).
    """
    n, h, wd, cin = x.shape
    cout = w.shape[-1]
    cols = _im2col(np.pad(x.value, ((0, 0), (1, 1), (1, 1), (0, 0))), h, wd)
    out = (cols @ w.value.reshape(9 * cin, cout)).reshape(n, h, wd, cout) + b.value

    def backward(g):
        g2 = g.reshape(n * h * wd, cout)
        gw = (cols.T @ g2).reshape(w.shape)
        gb = g2.sum(axis=0)
        gx = None
        if x.requires_grad:
            # col2im: scatter each patch gradient back onto the padded input
            gcols = (g2 @ w.value.reshape(9 * cin, cout).T).reshape(n, h, wd, 3, 3, cin)
            gp = np.zeros((n, h + 2, wd + 2, cin))
            for ki in range(3):
                for kj in range(3):
                    gp[:, ki:ki + h, kj:kj + wd] += gcols[:, :, :, ki, kj]
            gx = gp[:, 1:-1, 1:-1]
        return gx, gw, gb

    return _node(out, (x, w, b), backward)


def avg_pool2(x):
    """2x2 average pooling, stride 2; a trailing odd row/column is dropped."""
    n, h, wd, c = x.shape
    h2, w2 = h // 2, wd // 2
    v = x.value
    out = (v[:, 0:2 * h2:2, 0:2 * w2:2] + v[:, 1:2 * h2:2, 0:2 * w2:2]
           + v[:, 0:2 * h2:2, 1:2 * w2:2] + v[:, 1:2 * h2:2, 1:2 * w2:2]) * 0.25

    def backward(g):
        gx = np.zeros_like(x.value)
        q = g * 0.25
        for i in (0, 1):
            for j in (0, 1):
                gx[:, i:2 * h2:2, j:2 * w2:2] = q
        return (gx,)

    return _node(out, (x,), backward)


def global_avg_pool(x):
    """(N, H, W, C) -> (N, C)."""
    n, h, wd, c = x.shape

    def backward(g):
        return (np.broadcast_to(g[:, None, None, :] / (h * wd), x.shape).copy(),)

    return _node(x.value.mean(axis=(1, 2)), (x,), backward)


# losses -------------------------------------------------------------------

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels):
    """Per-row ``-log softmax(logits)[label]``; returns shape (N,)."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.value - logits.value.max(axis=-1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=-1))
    rows = np.arange(len(labels))
    out = logsum - z[rows, labels]

    def backward(g):
        p = softmax(logits.value)
        p[rows, labels] -= 1.0
        return (p * g[:, None],)

    return _node(out, (logits,), backward)


def cosine_consistency(a, b, eps=1e-8):
    """Per-row ``1 - <a, b> / max(|a||b|, eps)``; returns shape (N,)."""
    av, bv = a.value, b.value
    dot = np.sum(av * bv, axis=-1)
    na = np.linalg.norm(av, axis=-1)
    nb = np.linalg.norm(bv, axis=-1)
    denom_raw = na * nb
    clamped = denom_raw < eps
    denom = np.where(clamped, eps, denom_raw)
    out = 1.0 - dot / denom

    def backward(g):
        # d(dot/denom)/da = b/denom - dot * (|b|/|a|) a / denom^2   (unclamped)
        s = (-g / denom)[:, None]
        ga = s * bv
        gb = s * av
        active = ~clamped
        if np.any(active):
            coef = (g * dot / denom ** 2)[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                ra = np.where(active[:, None], (nb / na)[:, None] * av, 0.0)
                rb = np.where(active[:, None], (na / nb)[:, None] * bv, 0.0)
            ga = ga + coef * ra
            gb = gb + coef * rb
        return ga, gb

    return _node(out, (a, b), backward)
