import numpy as np
import pytest

from hyperdyn.autodiff import (AdamState, ConvSpec, MlpSpec, ParamSet,
                               TensorError, adam_step, backward, conv2d_forward,
                               finite_diff_check, flatten_params, gru_cell_step,
                               gru_encode, init_conv_params, init_gru_params,
                               init_mlp_params, mlp_eval, mlp_forward,
                               mlp_forward_external, no_grad, ops, param_count,
                               unflatten_params)


def manual_mlp(layers, x, alpha=0.01, activation="leaky_relu"):
    # independent straight-line re-evaluation with plain loops
    h = np.array(x, dtype=np.float64)
    for i, (w, b) in enumerate(layers):
        out = np.zeros(w.shape[1])
        for j in range(w.shape[1]):
            acc = 0.0
            for k in range(w.shape[0]):
                acc += h[k] * w[k, j]
            out[j] = acc + b[j]
        if i < len(layers) - 1:
            if activation == "leaky_relu":
                out = np.where(out > 0, out, alpha * out)
            elif activation == "tanh":
                out = np.tanh(out)
        h = out
    return h


def build_params(spec, seed=0):
    params = ParamSet()
    init_mlp_params(spec, np.random.default_rng(seed), params)
    return params


def test_mlp_identity_1x1():
    spec = MlpSpec((1, 1), "identity")
    params = ParamSet()
    params.add("W0", np.array([[1.0]]))
    params.add("b0", np.array([0.0]))
    out = mlp_forward(spec, params, np.array([3.5]))
    assert np.array_equal(out.value, [3.5])


def test_mlp_affine_2to1():
    spec = MlpSpec((2, 1), "identity")
    params = ParamSet()
    params.add("W0", np.array([[1.0], [1.0]]))
    params.add("b0", np.array([0.5]))
    out = mlp_forward(spec, params, np.array([1.0, 2.0]))
    assert np.array_equal(out.value, [3.5])


def test_mlp_matches_hand_rolled_two_layer():
    spec = MlpSpec((2, 3, 1), "leaky_relu")
    params = build_params(spec, seed=42)
    x = np.array([0.3, -1.2])
    got = mlp_forward(spec, params, x).value
    layers = [(params["W0"].value, params["b0"].value),
              (params["W1"].value, params["b1"].value)]
    want = manual_mlp(layers, x)
    assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_mlp_shape_mismatch_names_layer():
    spec = MlpSpec((2, 3), "identity")
    params = ParamSet()
    params.add("W0", np.zeros((3, 3)))  # wrong d_in
    params.add("b0", np.zeros(3))
    with pytest.raises(TensorError, match="layer 0"):
        mlp_forward(spec, params, np.zeros(2))


def test_param_counts():
    assert param_count(MlpSpec((1, 1))) == 2
    assert param_count(MlpSpec((9, 32, 32, 32, 8))) == 2696
    assert param_count(MlpSpec((3, 128, 128, 2))) == 17282


def test_external_affine_trivial():
    spec = MlpSpec((1, 1), "identity")
    out = mlp_forward_external(spec, np.array([2.0, 1.0]), np.array([3.0]))
    assert np.array_equal(out.value, [7.0])


def test_external_equivalence_oracle_is_mlp_forward():
    # oracle: unflatten into a ParamSet and run mlp_forward; 100 random inputs
    spec = MlpSpec((4, 7, 3), "leaky_relu")
    rng = np.random.default_rng(7)
    params = build_params(spec, seed=7)
    flat = flatten_params(spec, params)
    for _ in range(100):
        x = rng.normal(size=4)
        via_params = mlp_forward(spec, params, x).value
        via_flat = mlp_forward_external(spec, flat, x).value
        assert np.array_equal(via_params, via_flat)  # bitwise


def test_external_batched_matches_per_sample():
    spec = MlpSpec((3, 5, 2), "tanh")
    rng = np.random.default_rng(9)
    flats = rng.normal(size=(6, param_count(spec)))
    xs = rng.normal(size=(6, 3))
    batched = mlp_forward_external(spec, flats, xs).value
    for i in range(6):
        single = mlp_forward_external(spec, flats[i], xs[i]).value
        assert np.allclose(batched[i], single, rtol=0, atol=1e-12)


def test_external_length_mismatch_reports_counts():
    spec = MlpSpec((2, 2), "identity")
    with pytest.raises(TensorError, match="6"):
        mlp_forward_external(spec, np.zeros(5), np.zeros(2))


def test_external_gradient_vs_finite_difference():
    spec = MlpSpec((2, 3, 2), "leaky_relu")
    rng = np.random.default_rng(21)
    params = ParamSet()
    flat = params.add("flat", rng.normal(size=param_count(spec)) * 0.7)
    x = rng.normal(size=2)
    tgt = rng.normal(size=2)

    def loss():
        pred = mlp_forward_external(spec, flat, x)
        return ops.mean_all(ops.square(ops.sub(pred, tgt)))

    assert finite_diff_check(loss, params, h=1e-5) < 1e-6


def test_mlp_eval_matches_graph_path_bitwise():
    spec = MlpSpec((5, 8, 3), "leaky_relu")
    params = build_params(spec, seed=3)
    layers = unflatten_params(spec, flatten_params(spec, params))
    rng = np.random.default_rng(4)
    x = rng.normal(size=(10, 5))
    with no_grad():
        graph = mlp_forward(spec, params, x).value
    assert np.array_equal(mlp_eval(spec, layers, x), graph)


def test_conv_zero_grid_is_bias_only():
    spec = ConvSpec(out_dim=4)
    params = ParamSet()
    init_conv_params(spec, np.random.default_rng(0), params)
    out = conv2d_forward(spec, params, np.zeros((16, 16))).value

    # hand-propagate biases: conv on zeros emits constant bias maps
    alpha = 0.01
    h = np.zeros((1, 1, 16, 16))
    for i in range(3):
        bias = params[f"kb{i}"].value
        const = np.where(bias > 0, bias, alpha * bias)
        hw = h.shape[-1]
        h = np.broadcast_to(const[None, :, None, None],
                            (1, bias.size, hw, hw)).copy()
        h = h[:, :, ::2, ::2]  # pooling a constant map keeps the constant
    flat = h.reshape(1, -1)
    want = flat @ params["Wd"].value + params["bd"].value
    assert np.allclose(out, want[0], rtol=0, atol=1e-12)


def test_conv_wrong_resolution_rejected():
    spec = ConvSpec()
    params = ParamSet()
    init_conv_params(spec, np.random.default_rng(0), params)
    with pytest.raises(TensorError):
        conv2d_forward(spec, params, np.zeros((8, 8)))


def test_conv_impulse_position_sensitivity():
    # shifted impulses must produce different features (no global collapse)
    spec = ConvSpec(out_dim=6)
    params = ParamSet()
    init_conv_params(spec, np.random.default_rng(5), params)
    outs = []
    for pos in [(3, 3), (3, 11), (11, 5)]:
        g = np.zeros((16, 16))
        g[pos] = 1.0
        outs.append(conv2d_forward(spec, params, g).value)
    assert np.linalg.norm(outs[0] - outs[1]) > 1e-8
    assert np.linalg.norm(outs[0] - outs[2]) > 1e-8


def test_conv_gradient_vs_finite_difference():
    spec = ConvSpec(in_hw=8, out_dim=3, channels=(2, 3), kernels=(3, 3))
    params = ParamSet()
    init_conv_params(spec, np.random.default_rng(1), params)
    rng = np.random.default_rng(2)
    grid = rng.uniform(size=(2, 8, 8))
    tgt = rng.normal(size=(2, 3))

    def loss():
        out = conv2d_forward(spec, params, grid)
        return ops.mean_all(ops.square(ops.sub(out, tgt)))

    assert finite_diff_check(loss, params, h=1e-5,
                             max_coords_per_tensor=40,
                             rng=np.random.default_rng(0)) < 1e-5


def test_gru_zero_params_halves_hidden():
    params = ParamSet()
    init_gru_params(3, 4, np.random.default_rng(0), params)
    for name, p in params:
        p.value[...] = 0.0
    h = np.array([1.0, -2.0, 0.5, 4.0])
    out = gru_cell_step(params, h, np.zeros(3)).value
    assert np.allclose(out, 0.5 * h, rtol=0, atol=1e-15)


def test_gru_unrolled_equals_composition():
    params = ParamSet()
    init_gru_params(2, 3, np.random.default_rng(8), params)
    rng = np.random.default_rng(9)
    xs = rng.normal(size=(3, 2))
    h = ops.as_node(np.zeros(3))
    for t in range(3):
        h = gru_cell_step(params, h, xs[t])
    assert np.array_equal(gru_encode(params, xs, 3).value, h.value)


def test_gru_gradient_through_recurrence():
    params = ParamSet()
    init_gru_params(2, 3, np.random.default_rng(10), params)
    rng = np.random.default_rng(11)
    xs = rng.normal(size=(4, 2))
    tgt = rng.normal(size=3)

    def loss():
        h = gru_encode(params, xs, 3)
        return ops.mean_all(ops.square(ops.sub(h, tgt)))

    assert finite_diff_check(loss, params, h=1e-5) < 1e-5


def test_adam_zero_gradient_keeps_params():
    spec = MlpSpec((2, 2), "identity")
    params = build_params(spec, seed=1)
    before = params.state_dict()
    state = AdamState(params, lr=0.1)
    params.zero_grad()
    for _, p in params:
        p.grad = np.zeros_like(p.value)
    adam_step(state, params)
    for name, p in params:
        assert np.array_equal(p.value, before[name])
    assert state.t == 1


def test_adam_descends_quadratic():
    params = ParamSet()
    x = params.add("x", np.array([5.0]))
    state = AdamState(params, lr=0.1)
    for _ in range(200):
        params.zero_grad()
        loss = ops.sum_all(ops.square(x))
        backward(loss)
        adam_step(state, params)
    assert abs(x.value[0]) < 1e-2
    assert state.t == 200


def test_paramset_unique_names_and_count():
    params = ParamSet()
    params.add("a", np.zeros((2, 3)))
    with pytest.raises(KeyError):
        params.add("a", np.zeros(1))
    params.add("b", np.zeros(4))
    assert params.total_count() == 10
    assert params.names() == ["a", "b"]
