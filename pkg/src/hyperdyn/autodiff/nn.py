"""Parameter containers and network building blocks.

Flat weight layout (used by checkpoints and by the weight-generating
network alike): layers in order; within a layer the weight matrix W of
shape [d_in, d_out] in row-major order, then the bias b of length d_out.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .node import Node
from .tensor import TensorError

ACTIVATIONS = ("leaky_relu", "tanh", "identity")


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected architecture: sizes [d_in, h_1, ..., d_out] and the
    activation applied after every layer except the last."""

    layer_sizes: tuple
    activation: str = "leaky_relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise TensorError(f"MlpSpec needs >= 2 layer sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise TensorError(f"MlpSpec sizes must be >= 1, got {sizes}")
        if self.activation not in ACTIVATIONS:
            raise TensorError(f"unknown activation {self.activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


def param_count(spec: MlpSpec) -> int:
    sizes = spec.layer_sizes
    return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


class ParamSet:
    """Named map of parameter Nodes with deterministic iteration order."""

    def __init__(self):
        self._params: dict[str, Node] = {}

    def add(self, name: str, value: np.ndarray) -> Node:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        node = Node(np.asarray(value, dtype=np.float64))
        node.op = "param"
        self._params[name] = node
        return node

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def total_count(self) -> int:
        return sum(p.value.size for _, p in self)

    def zero_grad(self):
        for _, p in self:
            p.grad = None

    def state_dict(self) -> dict:
        return {name: p.value.copy() for name, p in self}

    def load_state_dict(self, state: dict):
        for name, p in self:
            if name not in state:
                raise KeyError(f"missing parameter {name!r} in state dict")
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.value.shape:
                raise TensorError(
                    f"parameter {name!r} shape {arr.shape} != expected {p.value.shape}")
            p.value = arr.copy()


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator, params: ParamSet,
                    prefix: str = "", out_scale: float = 1.0):
    """Add W_i/b_i for every layer. `out_scale` shrinks the final layer's
    init (used by the weight-generating network so freshly generated
    target weights start small)."""
    sizes = spec.layer_sizes
    for i in range(spec.n_layers):
        din, dout = sizes[i], sizes[i + 1]
        w = glorot_uniform(rng, din, dout, (din, dout))
        if i == spec.n_layers - 1 and out_scale != 1.0:
            w = w * out_scale
        params.add(f"{prefix}W{i}", w)
        params.add(f"{prefix}b{i}", np.zeros(dout))
    return params


def _apply_activation(x: Node, activation: str) -> Node:
    if activation == "leaky_relu":
        return ops.leaky_relu(x)
    if activation == "tanh":
        return ops.tanh(x)
    return x


def mlp_forward(spec: MlpSpec, params: ParamSet, x, prefix: str = "") -> Node:
    """Evaluate the MLP on x ([d_in] or [B, d_in]) with named parameters."""
    h = ops.as_node(x)
    if h.value.shape[-1] != spec.layer_sizes[0]:
        raise TensorError(
            f"input width {h.value.shape[-1]} != spec d_in {spec.layer_sizes[0]}")
    for i in range(spec.n_layers):
        name_w, name_b = f"{prefix}W{i}", f"{prefix}b{i}"
        if name_w not in params or name_b not in params:
            raise TensorError(f"missing parameters for layer {i} (prefix {prefix!r})")
        w, b = params[name_w], params[name_b]
        din, dout = spec.layer_sizes[i], spec.layer_sizes[i + 1]
        if w.value.shape != (din, dout) or b.value.shape != (dout,):
            raise TensorError(
                f"layer {i}: weight shape {w.value.shape} / bias {b.value.shape}"
                f" do not match spec ({din}, {dout})")
        h = ops.add(ops.matmul(h, w), b)
        if i < spec.n_layers - 1:
            h = _apply_activation(h, spec.activation)
    return h


def mlp_forward_external(spec: MlpSpec, flat_weights, x) -> Node:
    """Evaluate the MLP with weights taken from a flat vector.

    flat_weights may be [P] (one weight vector, shared across the batch;
    this path is arithmetic-identical to mlp_forward) or [B, P]
    (per-sample weights, evaluated with batched matmuls). Gradients flow
    into flat_weights.
    """
    flat = ops.as_node(flat_weights)
    expected = param_count(spec)
    actual = flat.value.shape[-1]
    if actual != expected:
        raise TensorError(
            f"flat weight length {actual} != param count {expected} for {spec.layer_sizes}")
    h = ops.as_node(x)
    if h.value.shape[-1] != spec.layer_sizes[0]:
        raise TensorError(
            f"input width {h.value.shape[-1]} != spec d_in {spec.layer_sizes[0]}")
    batched = flat.value.ndim == 2
    if batched and (h.value.ndim != 2 or h.value.shape[0] != flat.value.shape[0]):
        raise TensorError(
            f"batched weights {flat.value.shape} need matching inputs, got {h.value.shape}")
    off = 0
    sizes = spec.layer_sizes
    for i in range(spec.n_layers):
        din, dout = sizes[i], sizes[i + 1]
        w_flat = ops.slice_last(flat, off, off + din * dout)
        off += din * dout
        b = ops.slice_last(flat, off, off + dout)
        off += dout
        if batched:
            w = ops.reshape(w_flat, (-1, din, dout))
            h = ops.add(ops.bmm(h, w), b)
        else:
            w = ops.reshape(w_flat, (din, dout))
            h = ops.add(ops.matmul(h, w), b)
        if i < spec.n_layers - 1:
            h = _apply_activation(h, spec.activation)
    return h


def flatten_params(spec: MlpSpec, params: ParamSet, prefix: str = "") -> np.ndarray:
    chunks = []
    for i in range(spec.n_layers):
        chunks.append(params[f"{prefix}W{i}"].value.ravel())
        chunks.append(params[f"{prefix}b{i}"].value)
    return np.concatenate(chunks)


def unflatten_params(spec: MlpSpec, flat: np.ndarray):
    """Split a flat weight vector into [(W, b), ...] numpy views."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (param_count(spec),):
        raise TensorError(
            f"flat weight shape {flat.shape} != ({param_count(spec)},)")
    layers = []
    off = 0
    sizes = spec.layer_sizes
    for i in range(spec.n_layers):
        din, dout = sizes[i], sizes[i + 1]
        w = flat[off:off + din * dout].reshape(din, dout)
        off += din * dout
        b = flat[off:off + dout]
        off += dout
        layers.append((w, b))
    return layers


def mlp_eval(spec: MlpSpec, layers, x: np.ndarray) -> np.ndarray:
    """Graph-free forward pass over [(W, b), ...]; mirrors mlp_forward."""
    h = np.asarray(x, dtype=np.float64)
    alpha = ops.LEAKY_SLOPE
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            if spec.activation == "leaky_relu":
                h = np.where(h > 0, h, alpha * h)
            elif spec.activation == "tanh":
                h = np.tanh(h)
    return h


def mlp_eval_external(spec: MlpSpec, flat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Graph-free external-weight forward; flat is [P] or [B, P]."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.ndim == 1:
        return mlp_eval(spec, unflatten_params(spec, flat), x)
    h = np.asarray(x, dtype=np.float64)
    alpha = ops.LEAKY_SLOPE
    off = 0
    sizes = spec.layer_sizes
    for i in range(spec.n_layers):
        din, dout = sizes[i], sizes[i + 1]
        w = flat[:, off:off + din * dout].reshape(-1, din, dout)
        off += din * dout
        b = flat[:, off:off + dout]
        off += dout
        h = np.einsum("bn,bnm->bm", h, w) + b
        if i < spec.n_layers - 1:
            if spec.activation == "leaky_relu":
                h = np.where(h > 0, h, alpha * h)
            elif spec.activation == "tanh":
                h = np.tanh(h)
    return h


# --- convolutional grid encoder -------------------------------------------

CONV_CHANNELS = (2, 4, 8)
CONV_KERNELS = (5, 3, 3)


@dataclass(frozen=True)
class ConvSpec:
    """3 conv layers (kernel sizes 5/3/3, channels 2/4/8), each followed by
    a 2x2 max-pool, then one dense layer to `out_dim`."""

    in_hw: int = 16
    out_dim: int = 8
    channels: tuple = CONV_CHANNELS
    kernels: tuple = CONV_KERNELS

    @property
    def flat_dim(self) -> int:
        hw = self.in_hw // (2 ** len(self.channels))
        return self.channels[-1] * hw * hw


def init_conv_params(spec: ConvSpec, rng: np.random.Generator, params: ParamSet,
                     prefix: str = ""):
    cin = 1
    for i, (cout, k) in enumerate(zip(spec.channels, spec.kernels)):
        fan_in, fan_out = cin * k * k, cout * k * k
        params.add(f"{prefix}K{i}", glorot_uniform(rng, fan_in, fan_out, (cout, cin, k, k)))
        params.add(f"{prefix}kb{i}", np.zeros(cout))
        cin = cout
    params.add(f"{prefix}Wd", glorot_uniform(rng, spec.flat_dim, spec.out_dim,
                                             (spec.flat_dim, spec.out_dim)))
    params.add(f"{prefix}bd", np.zeros(spec.out_dim))
    return params


def conv2d_forward(spec: ConvSpec, params: ParamSet, grid, prefix: str = "") -> Node:
    """Encode occupancy grids [B, H, W] (or [H, W]) into [B, out_dim]."""
    g = ops.as_node(grid)
    if g.value.ndim == 2:
        g = ops.reshape(g, (1, 1) + g.value.shape)
        squeeze = True
    elif g.value.ndim == 3:
        g = ops.reshape(g, (g.value.shape[0], 1) + g.value.shape[1:])
        squeeze = False
    else:
        raise TensorError(f"grid must be [H,W] or [B,H,W], got {g.value.shape}")
    if g.value.shape[-1] != spec.in_hw or g.value.shape[-2] != spec.in_hw:
        raise TensorError(
            f"grid resolution {g.value.shape[-2:]} != expected {spec.in_hw}x{spec.in_hw}")
    h = g
    for i, k in enumerate(spec.kernels):
        h = ops.conv2d(h, params[f"{prefix}K{i}"], params[f"{prefix}kb{i}"],
                       padding=k // 2)
        h = ops.leaky_relu(h)
        h = ops.max_pool2(h)
    h = ops.reshape(h, (h.value.shape[0], spec.flat_dim))
    out = ops.add(ops.matmul(h, params[f"{prefix}Wd"]), params[f"{prefix}bd"])
    if squeeze:
        out = ops.reshape(out, (spec.out_dim,))
    return out


# --- GRU cell ---------------------------------------------------------------

def init_gru_params(input_dim: int, hidden_dim: int, rng: np.random.Generator,
                    params: ParamSet, prefix: str = ""):
    for gate in ("z", "r", "h"):
        params.add(f"{prefix}W{gate}",
                   glorot_uniform(rng, input_dim, hidden_dim, (input_dim, hidden_dim)))
        params.add(f"{prefix}U{gate}",
                   glorot_uniform(rng, hidden_dim, hidden_dim, (hidden_dim, hidden_dim)))
        params.add(f"{prefix}b{gate}", np.zeros(hidden_dim))
    return params


def gru_cell_step(params: ParamSet, h, x, prefix: str = "") -> Node:
    """Standard GRU update:
    z = sigma(x Wz + h Uz + bz), r = sigma(x Wr + h Ur + br),
    cand = tanh(x Wh + (r*h) Uh + bh), h' = (1-z)*h + z*cand.
    """
    h, x = ops.as_node(h), ops.as_node(x)
    if h.value.shape[-1] != params[f"{prefix}Uz"].value.shape[0]:
        raise TensorError(
            f"hidden width {h.value.shape[-1]} != GRU hidden "
            f"{params[f'{prefix}Uz'].value.shape[0]}")
    if x.value.shape[-1] != params[f"{prefix}Wz"].value.shape[0]:
        raise TensorError(
            f"input width {x.value.shape[-1]} != GRU input "
            f"{params[f'{prefix}Wz'].value.shape[0]}")
    z = ops.sigmoid(ops.add(ops.add(ops.matmul(x, params[f"{prefix}Wz"]),
                                    ops.matmul(h, params[f"{prefix}Uz"])),
                            params[f"{prefix}bz"]))
    r = ops.sigmoid(ops.add(ops.add(ops.matmul(x, params[f"{prefix}Wr"]),
                                    ops.matmul(h, params[f"{prefix}Ur"])),
                            params[f"{prefix}br"]))
    cand = ops.tanh(ops.add(ops.add(ops.matmul(x, params[f"{prefix}Wh"]),
                                    ops.matmul(ops.mul(r, h), params[f"{prefix}Uh"])),
                            params[f"{prefix}bh"]))
    one_minus_z = ops.sub(1.0, z)
    return ops.add(ops.mul(one_minus_z, h), ops.mul(z, cand))


def gru_encode(params: ParamSet, xs, hidden_dim: int, prefix: str = "") -> Node:
    """Run the GRU over a sequence of inputs; xs is [T, d] or [B, T, d].

    Returns the final hidden state ([hidden_dim] or [B, hidden_dim]).
    """
    xs = ops.as_node(xs)
    if xs.value.ndim == 2:
        steps = xs.value.shape[0]
        h = ops.as_node(np.zeros(hidden_dim))
        get = lambda t: ops.reshape(ops.slice_last(ops.reshape(xs, (1, -1)),
                                                   t * xs.value.shape[1],
                                                   (t + 1) * xs.value.shape[1]),
                                    (xs.value.shape[1],))
    elif xs.value.ndim == 3:
        bsz, steps, d = xs.value.shape
        h = ops.as_node(np.zeros((bsz, hidden_dim)))
        flat = ops.reshape(xs, (bsz, steps * d))
        get = lambda t: ops.slice_last(flat, t * d, (t + 1) * d)
    else:
        raise TensorError(f"gru_encode expects [T,d] or [B,T,d], got {xs.value.shape}")
    if steps == 0:
        raise TensorError("gru_encode needs a non-empty history")
    for t in range(steps):
        h = gru_cell_step(params, h, get(t), prefix=prefix)
    return h
