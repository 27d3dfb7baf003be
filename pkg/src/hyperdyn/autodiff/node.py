"""Reverse-mode autodiff over dense numpy tensors.

Each op records a Node holding the forward value, its parents, and a
vector-Jacobian closure. `backward` walks the DAG once in reverse
topological order and accumulates gradients. Graph construction is
single-threaded within a training step; evaluation-only code wraps calls
in `no_grad()` so no graph is retained.
"""

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure forward evaluation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Node:
    """One vertex of the differentiation graph.

    value : np.ndarray (float64)
    grad  : np.ndarray of the same shape, allocated lazily by backward
    op    : short tag naming the producing operation
    parents / _vjp : predecessor nodes and the closure mapping the output
        gradient to per-parent gradient contributions.
    """

    __slots__ = ("value", "grad", "op", "parents", "_vjp")

    def __init__(self, value, parents=(), op="leaf", vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.op = op
        self.parents = tuple(parents) if _GRAD_ENABLED else ()
        self._vjp = vjp if _GRAD_ENABLED else None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape})"

    # arithmetic sugar; the heavy lifting lives in ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.neg(self)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(np.asarray(x, dtype=np.float64))


def _toposort(root: Node):
    """Iterative DFS post-order; each node appears exactly once."""
    order = []
    seen = set()
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
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(out: Node):
    """Accumulate d(out)/d(node) into .grad for every reachable node.

    `out` must be scalar. Existing .grad buffers are accumulated into, so
    zero them (see zero_graph_grads / ParamSet.zero_grad) between steps.
    """
    if out.value.size != 1:
        raise ValueError(f"backward needs a scalar output, got shape {out.value.shape}")
    order = _toposort(out)
    if out.grad is None:
        out.grad = np.zeros_like(out.value)
    out.grad = out.grad + np.ones_like(out.value)
    for node in reversed(order):
        if node._vjp is None or node.grad is None:
            continue
        for parent, contrib in node._vjp(node.grad):
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.value)
            parent.grad += contrib


def zero_graph_grads(out: Node):
    """Zero the grad buffers of every node reachable from `out`."""
    for node in _toposort(out):
        node.grad = None
