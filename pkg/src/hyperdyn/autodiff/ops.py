"""Differentiable operations on Nodes.

Only the ops the model zoo needs: elementwise arithmetic, matmul (shared
weights), bmm (per-sample weights), slicing/reshape/concat for weight
vectors, activations, reductions, 2x2 max-pool, and same-padding conv2d.
Broadcasting is limited to trailing-axis bias patterns.
"""

import numpy as np

from .node import Node, as_node, grad_enabled


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == tuple(shape):
        return grad
    g = grad
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    val = a.value + b.value
    if not grad_enabled():
        return Node(val, op="add")

    def vjp(g):
        return ((a, _unbroadcast(g, a.value.shape)),
                (b, _unbroadcast(g, b.value.shape)))

    return Node(val, (a, b), "add", vjp)


def sub(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    val = a.value - b.value
    if not grad_enabled():
        return Node(val, op="sub")

    def vjp(g):
        return ((a, _unbroadcast(g, a.value.shape)),
                (b, _unbroadcast(-g, b.value.shape)))

    return Node(val, (a, b), "sub", vjp)


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    val = a.value * b.value
    if not grad_enabled():
        return Node(val, op="mul")

    def vjp(g):
        return ((a, _unbroadcast(g * b.value, a.value.shape)),
                (b, _unbroadcast(g * a.value, b.value.shape)))

    return Node(val, (a, b), "mul", vjp)


def neg(a) -> Node:
    a = as_node(a)
    if not grad_enabled():
        return Node(-a.value, op="neg")
    return Node(-a.value, (a,), "neg", lambda g: ((a, -g),))


def matmul(x, w) -> Node:
    """x @ w with shared weights: x is [n] or [B, n], w is [n, m]."""
    x, w = as_node(x), as_node(w)
    if w.value.ndim != 2:
        raise ValueError(f"matmul weight must be 2-D, got {w.value.shape}")
    val = x.value @ w.value
    if not grad_enabled():
        return Node(val, op="matmul")

    def vjp(g):
        gx = g @ w.value.T
        if x.value.ndim == 1:
            gw = np.outer(x.value, g)
        else:
            gw = x.value.T @ g
        return ((x, gx), (w, gw))

    return Node(val, (x, w), "matmul", vjp)


def bmm(x, w) -> Node:
    """Per-sample matmul: x is [B, n], w is [B, n, m] -> [B, m]."""
    x, w = as_node(x), as_node(w)
    if x.value.ndim != 2 or w.value.ndim != 3:
        raise ValueError(f"bmm expects [B,n] and [B,n,m], got {x.value.shape}, {w.value.shape}")
    val = np.einsum("bn,bnm->bm", x.value, w.value)
    if not grad_enabled():
        return Node(val, op="bmm")

    def vjp(g):
        gx = np.einsum("bm,bnm->bn", g, w.value)
        gw = np.einsum("bn,bm->bnm", x.value, g)
        return ((x, gx), (w, gw))

    return Node(val, (x, w), "bmm", vjp)


def slice_last(a, start: int, stop: int) -> Node:
    a = as_node(a)
    val = a.value[..., start:stop]
    if not grad_enabled():
        return Node(val, op="slice")

    def vjp(g):
        full = np.zeros_like(a.value)
        full[..., start:stop] = g
        return ((a, full),)

    return Node(val, (a,), "slice", vjp)


def reshape(a, shape) -> Node:
    a = as_node(a)
    val = a.value.reshape(shape)
    if not grad_enabled():
        return Node(val, op="reshape")
    return Node(val, (a,), "reshape", lambda g: ((a, g.reshape(a.value.shape)),))


def concat_last(parts) -> Node:
    parts = [as_node(p) for p in parts]
    val = np.concatenate([p.value for p in parts], axis=-1)
    if not grad_enabled():
        return Node(val, op="concat")
    sizes = [p.value.shape[-1] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            (p, g[..., offsets[i]:offsets[i + 1]]) for i, p in enumerate(parts)
        )

    return Node(val, tuple(parts), "concat", vjp)


LEAKY_SLOPE = 0.01


def leaky_relu(a, alpha: float = LEAKY_SLOPE) -> Node:
    a = as_node(a)
    pos = a.value > 0
    val = np.where(pos, a.value, alpha * a.value)
    if not grad_enabled():
        return Node(val, op="leaky_relu")
    return Node(val, (a,), "leaky_relu",
                lambda g: ((a, g * np.where(pos, 1.0, alpha)),))


def tanh(a) -> Node:
    a = as_node(a)
    val = np.tanh(a.value)
    if not grad_enabled():
        return Node(val, op="tanh")
    return Node(val, (a,), "tanh", lambda g: ((a, g * (1.0 - val * val)),))


def sigmoid(a) -> Node:
    a = as_node(a)
    val = 1.0 / (1.0 + np.exp(-a.value))
    if not grad_enabled():
        return Node(val, op="sigmoid")
    return Node(val, (a,), "sigmoid", lambda g: ((a, g * val * (1.0 - val)),))


def square(a) -> Node:
    a = as_node(a)
    val = a.value * a.value
    if not grad_enabled():
        return Node(val, op="square")
    return Node(val, (a,), "square", lambda g: ((a, 2.0 * a.value * g),))


def sqrt(a) -> Node:
    a = as_node(a)
    val = np.sqrt(a.value)
    if not grad_enabled():
        return Node(val, op="sqrt")
    # clamp keeps the vjp finite at exactly-zero inputs (subgradient 0 there
    # would be wrong for the L2 objective; callers add a floor when needed)
    return Node(val, (a,), "sqrt",
                lambda g: ((a, g * 0.5 / np.maximum(val, 1e-150)),))


def sum_all(a) -> Node:
    a = as_node(a)
    val = np.asarray(a.value.sum())
    if not grad_enabled():
        return Node(val, op="sum")
    return Node(val, (a,), "sum",
                lambda g: ((a, np.broadcast_to(g, a.value.shape).copy()),))


def mean_all(a) -> Node:
    a = as_node(a)
    n = a.value.size
    val = np.asarray(a.value.mean())
    if not grad_enabled():
        return Node(val, op="mean")
    return Node(val, (a,), "mean",
                lambda g: ((a, np.broadcast_to(g / n, a.value.shape).copy()),))


def sum_last(a) -> Node:
    a = as_node(a)
    val = a.value.sum(axis=-1)
    if not grad_enabled():
        return Node(val, op="sum_last")

    def vjp(g):
        return ((a, np.broadcast_to(g[..., None], a.value.shape).copy()),)

    return Node(val, (a,), "sum_last", vjp)


def max_pool2(a) -> Node:
    """2x2 max pooling on [B, C, H, W]; H and W must be even."""
    a = as_node(a)
    b, c, h, w = a.value.shape
    if h % 2 or w % 2:
        raise ValueError(f"max_pool2 needs even spatial dims, got {h}x{w}")
    win = a.value.reshape(b, c, h // 2, 2, w // 2, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    val = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    if not grad_enabled():
        return Node(val, op="max_pool2")

    def vjp(g):
        gwin = np.zeros_like(win)
        np.put_along_axis(gwin, idx[..., None], g[..., None], axis=-1)
        full = gwin.reshape(b, c, h // 2, w // 2, 2, 2)
        full = full.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)
        return ((a, full),)

    return Node(val, (a,), "max_pool2", vjp)


def conv2d(x, k, bias, padding: int) -> Node:
    """Stride-1 2-D convolution: x [B,Cin,H,W], k [Cout,Cin,kh,kw], bias [Cout]."""
    x, k, bias = as_node(x), as_node(k), as_node(bias)
    bsz, cin, h, w = x.value.shape
    cout, cin_k, kh, kw = k.value.shape
    if cin != cin_k:
        raise ValueError(f"conv2d channel mismatch: input {cin}, kernel {cin_k}")
    xp = np.pad(x.value, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh, ow = h + 2 * padding - kh + 1, w + 2 * padding - kw + 1
    # [B, Cin, oh, ow, kh, kw] -> [B, oh, ow, Cin*kh*kw]
    cols = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(bsz, oh, ow, cin * kh * kw)
    kmat = k.value.reshape(cout, cin * kh * kw)
    val = cols @ kmat.T + bias.value
    val = val.transpose(0, 3, 1, 2)
    if not grad_enabled():
        return Node(val, op="conv2d")

    def vjp(g):
        gout = g.transpose(0, 2, 3, 1)  # [B, oh, ow, Cout]
        gb = gout.sum(axis=(0, 1, 2))
        gk = np.einsum("bijo,bijn->on", gout, cols).reshape(k.value.shape)
        gcols = gout @ kmat  # [B, oh, ow, Cin*kh*kw]
        gcols = gcols.reshape(bsz, oh, ow, cin, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + oh, j:j + ow] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return ((x, gx), (k, gk), (bias, gb))

    return Node(val, (x, k, bias), "conv2d", vjp)
