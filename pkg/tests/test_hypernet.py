import numpy as np
import pytest

from hyperdyn.autodiff import (backward, finite_diff_check, mlp_forward_external,
                               no_grad, ops, param_count)
from hyperdyn.encoders import ENC_INT_PREFIX, ENC_VIS_PREFIX, DECODER_PREFIX
from hyperdyn.envs import compose_push, shape_grid, wrap_angle
from hyperdyn.hypernet import (HYPER_PREFIX, HyperDynamicsConfig,
                               HyperDynamicsModel, euclidean_metric,
                               generate_weights, predict_delta,
                               prediction_objective, push_state_obs,
                               unroll_loco, unroll_loco_batch, unroll_push,
                               unroll_push_batch)


def push_model(seed=0, **overrides):
    cfg = HyperDynamicsConfig(env_kind="push", **overrides)
    return HyperDynamicsModel(cfg, np.random.default_rng(seed))


def tiny_push_model(seed=0, **overrides):
    defaults = dict(k_window=2, z_int_dim=1, z_vis_dim=2, enc_int_hidden=(4,),
                    hyper_hidden=(6,), target_hidden=(4,))
    defaults.update(overrides)
    return push_model(seed=seed, **defaults)


def loco_model(seed=0, **overrides):
    defaults = dict(env_kind="loco_slope", k_window=16, z_vis_dim=0,
                    enc_int_hidden=(32, 32), target_hidden=(16, 16),
                    use_decoder=False)
    defaults.update(overrides)
    cfg = HyperDynamicsConfig(**defaults)
    return HyperDynamicsModel(cfg, np.random.default_rng(seed))


def rand_push_batch(model, rng, n=4):
    cfg = model.cfg
    thetas = rng.uniform(-np.pi, np.pi, size=n)
    grid = shape_grid(("l", 10, 4))
    from hyperdyn.envs import rotate_grid
    return {
        "windows": rng.normal(size=(n, cfg.window_dim)),
        "grids_oriented": np.stack([rotate_grid(grid, t) for t in thetas]),
        "grids_canonical": np.stack([grid] * n),
        "state_full": rng.normal(size=(n, 8)),
        "actions": rng.normal(size=(n, 2)) * 0.05,
        "deltas": rng.normal(size=(n, 8)) * 0.02,
    }


def test_structural_weight_counts():
    assert param_count(push_model().target_spec) == 2696
    m = loco_model(target_hidden=(128, 128))
    assert param_count(m.target_spec) == 17282


def test_generated_length_matches_param_count_across_configs():
    models = [push_model(), tiny_push_model(), loco_model(),
              push_model(z_int_dim=4), push_model(z_vis_dim=16),
              push_model(canonical_shape=True)]
    rng = np.random.default_rng(0)
    for m in models:
        z = rng.normal(size=m.cfg.z_dim)
        w = m.weights_np(z)
        assert w.shape == (param_count(m.target_spec),)


def test_zero_hyper_params_emit_output_bias():
    m = tiny_push_model()
    for name, p in m.params:
        if name.startswith(HYPER_PREFIX):
            p.value[...] = 0.0
    bias = np.random.default_rng(1).normal(size=param_count(m.target_spec))
    m.params[f"{HYPER_PREFIX}b1"].value[...] = bias
    w = m.weights_np(np.ones(m.cfg.z_dim))
    assert np.array_equal(w, bias)


def test_same_z_gives_bitwise_identical_weights():
    m = push_model(seed=3)
    z = np.random.default_rng(2).normal(size=m.cfg.z_dim)
    assert np.array_equal(m.weights_np(z), m.weights_np(z))


def test_zero_weights_predict_zero():
    m = tiny_push_model()
    w = np.zeros(param_count(m.target_spec))
    out = predict_delta(m.target_spec, w, np.ones(m.cfg.state_obs_dim),
                        np.ones(2))
    assert np.array_equal(out.value, np.zeros(8))


def test_expert_determinism_bitwise():
    m = loco_model(seed=5)
    rng = np.random.default_rng(6)
    z = rng.normal(size=m.cfg.z_dim)
    w = m.weights_np(z)
    states = rng.normal(size=(1000, 2))
    actions = rng.uniform(-1, 1, size=(1000, 1))
    a = m.predict_np(w, states, actions)
    b = m.predict_np(w, states, actions)
    assert np.array_equal(a, b)


def test_orientation_changes_generated_weights():
    m = push_model(seed=7)
    grid = shape_grid(("l", 10, 4))
    z_int = np.zeros(2)
    from hyperdyn.hypernet import oriented_latents
    zs = oriented_latents(m, grid, z_int, np.array([0.0, np.pi / 2]))
    assert np.linalg.norm(zs[0] - zs[1]) > 0
    ws = m.weights_np(zs)
    assert np.linalg.norm(ws[0] - ws[1]) > 0


def test_objective_and_metric_arithmetic():
    pred = ops.as_node(np.zeros((1, 8)))
    true = np.zeros((1, 8))
    true[0, 0], true[0, 1] = 3.0, 4.0
    assert prediction_objective(pred, true, "mse").value == pytest.approx(25.0 / 8)
    assert prediction_objective(pred, true, "l2").value == pytest.approx(5.0)
    assert euclidean_metric(np.zeros((1, 8)), true) == pytest.approx(5.0)


def test_perfect_prediction_loss_zero():
    pred = ops.as_node(np.ones((3, 8)))
    assert prediction_objective(pred, np.ones((3, 8)), "mse").value == 0.0
    assert prediction_objective(pred, np.ones((3, 8)), "l2").value == 0.0


def test_batch_mean_equals_mean_of_samples():
    rng = np.random.default_rng(8)
    pred = rng.normal(size=(6, 8))
    true = rng.normal(size=(6, 8))
    batch = prediction_objective(ops.as_node(pred), true, "mse").value
    singles = [prediction_objective(ops.as_node(pred[i:i + 1]), true[i:i + 1],
                                    "mse").value for i in range(6)]
    assert batch == pytest.approx(np.mean(singles))


def test_eq1_loss_zero_model_matches_example():
    m = tiny_push_model()
    for name, p in m.params:
        if name.startswith(HYPER_PREFIX):
            p.value[...] = 0.0  # generated weights all zero -> F == 0
    batch = rand_push_batch(m, np.random.default_rng(9), n=1)
    batch["deltas"] = np.zeros((1, 8))
    batch["deltas"][0, 0], batch["deltas"][0, 1] = 3.0, 4.0
    m.cfg.use_decoder = False
    loss, metric = m.loss(batch, objective="mse")
    assert loss.value == pytest.approx(25.0 / 8)
    assert metric == pytest.approx(5.0)
    loss_l2, _ = m.loss(batch, objective="l2")
    assert loss_l2.value == pytest.approx(5.0)


def test_end_to_end_gradients_all_branches_alive():
    m = tiny_push_model(seed=11)
    batch = rand_push_batch(m, np.random.default_rng(12))
    loss, _ = m.loss(batch)
    m.params.zero_grad()
    backward(loss)
    for prefix in (ENC_INT_PREFIX, ENC_VIS_PREFIX, HYPER_PREFIX, DECODER_PREFIX):
        group = [p for n, p in m.params if n.startswith(prefix)]
        assert group, prefix
        assert any(p.grad is not None and np.abs(p.grad).max() > 0 for p in group), prefix


def test_eq1_finite_difference_miniature_loco():
    # z of size 2 driving a [3,4,2] expert
    m = loco_model(seed=13, k_window=3, enc_int_hidden=(4,), target_hidden=(4,),
                   hyper_hidden=(5,))
    rng = np.random.default_rng(14)
    batch = {
        "windows": rng.normal(size=(3, m.cfg.window_dim)),
        "state_full": rng.normal(size=(3, 2)),
        "actions": rng.uniform(-1, 1, size=(3, 1)),
        "deltas": rng.normal(size=(3, 2)) * 0.1,
    }

    def f():
        loss, _ = m.loss(batch)
        return loss

    assert finite_diff_check(f, m.params, h=1e-5) < 1e-4


def test_eq1_finite_difference_push_all_encoders():
    m = tiny_push_model(seed=15)
    batch = rand_push_batch(m, np.random.default_rng(16), n=2)

    def f():
        loss, _ = m.loss(batch)
        return loss

    err = finite_diff_check(f, m.params, h=1e-5, max_coords_per_tensor=20,
                            rng=np.random.default_rng(0))
    assert err < 1e-4


def test_unroll_push_trivial_cases():
    m = tiny_push_model(seed=17)
    grid = shape_grid(("rect", 10, 6))
    z_int = np.zeros(1)
    s0 = np.random.default_rng(18).normal(size=8)
    s0[2] = wrap_angle(s0[2])
    empty = unroll_push(m, grid, z_int, s0, np.zeros((0, 2)))
    assert empty.shape == (1, 8) and np.array_equal(empty[0], s0)

    actions = np.random.default_rng(19).normal(size=(1, 2)) * 0.05
    one = unroll_push(m, grid, z_int, s0, actions)
    z = np.concatenate([z_int, m.z_vis_np(
        np.stack([__import__("hyperdyn.envs", fromlist=["rotate_grid"])
                  .rotate_grid(grid, s0[2])]))[0]])
    delta = m.predict_np(m.weights_np(z), s0[None], actions[0][None])[0]
    assert np.allclose(one[1], compose_push(s0, delta), rtol=0, atol=0)


def test_unroll_composition_bitwise():
    m = tiny_push_model(seed=20)
    grid = shape_grid(("t", 10, 4))
    z_int = np.array([0.3])
    rng = np.random.default_rng(21)
    s0 = rng.normal(size=8)
    s0[2] = wrap_angle(s0[2])
    actions = rng.normal(size=(5, 2)) * 0.05
    whole = unroll_push(m, grid, z_int, s0, actions)
    first = unroll_push(m, grid, z_int, s0, actions[:2])
    second = unroll_push(m, grid, z_int, first[-1], actions[2:])
    assert np.array_equal(whole[:3], first)
    assert np.array_equal(whole[2:], second)


def test_unroll_loco_fixed_z_and_composition():
    m = loco_model(seed=22)
    rng = np.random.default_rng(23)
    z = rng.normal(size=2)
    s0 = np.array([0.5, 1.0])
    actions = rng.uniform(-1, 1, size=(6, 1))
    whole = unroll_loco(m, z, s0, actions)
    assert whole.shape == (7, 2)
    first = unroll_loco(m, z, s0, actions[:3])
    second = unroll_loco(m, z, first[-1], actions[3:])
    assert np.array_equal(whole[:4], first)
    assert np.array_equal(whole[3:], second)
    # batch path agrees with single path
    batch = unroll_loco_batch(m, z, s0, np.stack([actions, actions]))
    assert np.array_equal(batch[0], whole)


def test_push_state_obs_excludes_theta():
    s = np.arange(8.0)
    assert np.array_equal(push_state_obs(s, include_theta=False),
                          [0, 1, 3, 4, 5, 6, 7])
    assert np.array_equal(push_state_obs(s, include_theta=True), s)
