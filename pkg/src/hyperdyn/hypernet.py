"""Weight generation for per-system dynamics experts.

A fully-connected generator maps the latent system code z to the complete
flat weight vector of the target dynamics MLP in one shot; gradients of
the prediction loss flow through the generated weights back into the
generator and both encoders. Two unrolling regimes: pushing re-orients
the shape grid and regenerates the expert at every predicted step (the
orientation lives in the generated weights, not in the expert's state
input); locomotion generates one expert per replanning step and reuses it
across the horizon.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (MlpSpec, Node, ParamSet, init_mlp_params, mlp_eval,
                       mlp_eval_external, mlp_forward, mlp_forward_external,
                       no_grad, ops, param_count, unflatten_params)
from .encoders import (assemble_latent, decode_shape, encode_interaction,
                       encode_shape, init_interaction_encoder,
                       init_shape_decoder, init_shape_encoder,
                       interaction_encoder_spec, reconstruction_loss,
                       shape_decoder_spec, shape_encoder_spec)
from .envs import (PUSH_ACTION_DIM, PUSH_STATE_DIM, compose_push, rotate_grid,
                   wrap_angle)
from .envs.locomotion import LOCO_ACTION_DIM, LOCO_STATE_DIM
from .normalize import maybe_denorm, maybe_norm

HYPER_PREFIX = "hyper/"
HYPER_OUT_SCALE = 0.1  # small initial generated weights stabilize training

PUSH_OBS_IDX = np.array([0, 1, 3, 4, 5, 6, 7])  # full state minus theta
THETA_IDX = 2


def push_state_obs(states: np.ndarray, include_theta: bool) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    if include_theta:
        return states
    return states[..., PUSH_OBS_IDX]


def target_mlp_spec(state_obs_dim: int, action_dim: int, hidden,
                    out_dim: int) -> MlpSpec:
    return MlpSpec((state_obs_dim + action_dim, *hidden, out_dim))


def hyper_mlp_spec(z_dim: int, hidden, target_spec: MlpSpec) -> MlpSpec:
    return MlpSpec((z_dim, *hidden, param_count(target_spec)))


def generate_weights(hyper_spec: MlpSpec, params: ParamSet, z,
                     prefix: str = HYPER_PREFIX) -> Node:
    """Emit the target net's full flat weight vector from z ([z] or [B, z])."""
    return mlp_forward(hyper_spec, params, z, prefix=prefix)


def predict_delta(target_spec: MlpSpec, weights, state_obs, action) -> Node:
    """delta = F(state_obs, action) with externally supplied weights."""
    x = ops.concat_last([ops.as_node(state_obs), ops.as_node(action)])
    return mlp_forward_external(target_spec, weights, x)


def prediction_objective(pred: Node, true_delta, kind: str) -> Node:
    """Training objective over a batch of residuals.

    'mse' averages squared error over batch and dims; 'l2' averages the
    per-sample Euclidean norm (the evaluation metric, non-smooth at zero).
    """
    resid = ops.sub(pred, ops.as_node(true_delta))
    if kind == "mse":
        return ops.mean_all(ops.square(resid))
    if kind == "l2":
        return ops.mean_all(ops.sqrt(ops.sum_last(ops.square(resid))))
    raise ValueError(f"unknown objective {kind!r}")


def euclidean_metric(pred: np.ndarray, true: np.ndarray) -> float:
    """Mean per-sample Euclidean error (Table-style reporting metric)."""
    resid = np.atleast_2d(np.asarray(pred) - np.asarray(true))
    return float(np.linalg.norm(resid, axis=-1).mean())


@dataclass
class HyperDynamicsConfig:
    env_kind: str = "push"
    k_window: int = 5
    z_int_dim: int = 2
    z_vis_dim: int = 8          # 0 disables the shape branch (locomotion)
    enc_int_hidden: tuple = (8,)
    hyper_hidden: tuple = (16,)
    target_hidden: tuple = (32, 32, 32)
    use_decoder: bool = True
    canonical_shape: bool = False
    aux_weight: float = 0.1
    objective: str = "mse"

    @property
    def is_push(self) -> bool:
        return self.env_kind == "push"

    @property
    def state_dim(self) -> int:
        return PUSH_STATE_DIM if self.is_push else LOCO_STATE_DIM

    @property
    def action_dim(self) -> int:
        return PUSH_ACTION_DIM if self.is_push else LOCO_ACTION_DIM

    @property
    def state_obs_dim(self) -> int:
        if not self.is_push:
            return LOCO_STATE_DIM
        return PUSH_STATE_DIM if self.canonical_shape else PUSH_STATE_DIM - 1

    @property
    def window_dim(self) -> int:
        return self.k_window * (self.state_dim + self.action_dim)

    @property
    def z_dim(self) -> int:
        return self.z_int_dim + (self.z_vis_dim if self.is_push else 0)


class HyperDynamicsModel:
    """End-to-end bundle: interaction encoder, optional shape encoder and
    decoder, and the weight generator for the target dynamics expert."""

    def __init__(self, cfg: HyperDynamicsConfig, rng: np.random.Generator,
                 normalizer=None):
        self.cfg = cfg
        self.normalizer = normalizer
        self.params = ParamSet()
        self.enc_int_spec = interaction_encoder_spec(
            cfg.window_dim, cfg.enc_int_hidden, cfg.z_int_dim)
        init_interaction_encoder(self.enc_int_spec, rng, self.params)
        if cfg.is_push:
            self.enc_vis_spec = shape_encoder_spec(cfg.z_vis_dim)
            init_shape_encoder(self.enc_vis_spec, rng, self.params)
            if cfg.use_decoder:
                self.dec_spec = shape_decoder_spec(cfg.z_vis_dim)
                init_shape_decoder(self.dec_spec, rng, self.params)
        self.target_spec = target_mlp_spec(
            cfg.state_obs_dim, cfg.action_dim, cfg.target_hidden, cfg.state_dim)
        self.hyper_spec = hyper_mlp_spec(cfg.z_dim, cfg.hyper_hidden,
                                         self.target_spec)
        init_mlp_params(self.hyper_spec, rng, self.params, prefix=HYPER_PREFIX,
                        out_scale=HYPER_OUT_SCALE)

    # --- latent code -------------------------------------------------------
    def encode_window(self, windows) -> Node:
        w = maybe_norm(self.normalizer, "window", np.asarray(windows))
        return encode_interaction(self.enc_int_spec, self.params, w)

    def encode_grids(self, grids) -> Node:
        return encode_shape(self.enc_vis_spec, self.params, grids)

    def latent(self, windows, grids=None) -> Node:
        z_int = self.encode_window(windows)
        if not self.cfg.is_push:
            return z_int
        return assemble_latent(z_int, self.encode_grids(grids))

    # --- training loss -----------------------------------------------------
    def loss(self, batch: dict, objective: str | None = None):
        """Prediction objective on one batch plus the weighted shape
        reconstruction auxiliary (pushing with decoder only).

        Returns (loss Node, raw-space Euclidean metric)."""
        kind = objective or self.cfg.objective
        pred = self._predict_node(batch)
        true = maybe_norm(self.normalizer, "delta", batch["deltas"])
        loss = prediction_objective(pred, true, kind)
        if self.cfg.is_push and self.cfg.use_decoder:
            loss = ops.add(loss, ops.mul(self.cfg.aux_weight,
                                         self.aux_loss(self._batch_grids(batch))))
        raw_pred = maybe_denorm(self.normalizer, "delta", pred.value)
        return loss, euclidean_metric(raw_pred, batch["deltas"])

    def aux_loss(self, grids) -> Node:
        z_vis = self.encode_grids(grids)
        decoded = decode_shape(self.dec_spec, self.params, z_vis)
        return reconstruction_loss(decoded, grids)

    def _batch_grids(self, batch):
        return batch["grids_canonical"] if self.cfg.canonical_shape \
            else batch["grids_oriented"]

    def _predict_node(self, batch) -> Node:
        z = self.latent(batch["windows"],
                        self._batch_grids(batch) if self.cfg.is_push else None)
        weights = generate_weights(self.hyper_spec, self.params, z)
        state_obs = push_state_obs(batch["state_full"], self.cfg.canonical_shape) \
            if self.cfg.is_push else batch["state_full"]
        s = maybe_norm(self.normalizer, "state_obs", state_obs)
        a = maybe_norm(self.normalizer, "action", batch["actions"])
        return predict_delta(self.target_spec, weights, s, a)

    # --- numeric fast paths --------------------------------------------------
    def z_int_np(self, window: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.encode_window(window).value

    def z_vis_np(self, grids: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.encode_grids(grids).value

    def weights_np(self, z: np.ndarray) -> np.ndarray:
        with no_grad():
            return generate_weights(self.hyper_spec, self.params, z).value

    def predict_np(self, weights: np.ndarray, state_full: np.ndarray,
                   actions: np.ndarray) -> np.ndarray:
        """Raw-space deltas from raw-space states/actions (numpy only)."""
        state_obs = push_state_obs(state_full, self.cfg.canonical_shape) \
            if self.cfg.is_push else np.asarray(state_full)
        x = np.concatenate([maybe_norm(self.normalizer, "state_obs", state_obs),
                            maybe_norm(self.normalizer, "action", actions)],
                           axis=-1)
        pred = mlp_eval_external(self.target_spec, weights, x)
        return maybe_denorm(self.normalizer, "delta", pred)


# --- unrolling regimes -------------------------------------------------------

def oriented_latents(model: HyperDynamicsModel, canonical_grid: np.ndarray,
                     z_int: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """z vectors for a batch of orientations of one object."""
    if model.cfg.canonical_shape:
        grids = np.broadcast_to(canonical_grid,
                                (len(thetas),) + canonical_grid.shape).copy()
    else:
        grids = np.stack([rotate_grid(canonical_grid, float(t)) for t in thetas])
    z_vis = model.z_vis_np(grids)
    z_int_b = np.broadcast_to(z_int, (len(thetas), z_int.shape[-1]))
    return np.concatenate([z_int_b, z_vis], axis=-1)


def unroll_push(model: HyperDynamicsModel, canonical_grid: np.ndarray,
                z_int: np.ndarray, s0: np.ndarray,
                actions: np.ndarray) -> np.ndarray:
    """Roll the generated experts forward: re-orient the grid at each
    predicted step, regenerate weights, predict, compose. Returns
    [H+1, state_dim] including s0."""
    seqs = np.asarray(actions, dtype=np.float64)[None]
    return unroll_push_batch(model, canonical_grid, z_int, s0, seqs)[0]


def unroll_push_batch(model: HyperDynamicsModel, canonical_grid: np.ndarray,
                      z_int: np.ndarray, s0: np.ndarray,
                      seqs: np.ndarray) -> np.ndarray:
    """Vectorized unroll over N candidate action sequences [N, H, da]."""
    seqs = np.asarray(seqs, dtype=np.float64)
    n, horizon = seqs.shape[0], seqs.shape[1]
    states = np.empty((n, horizon + 1, PUSH_STATE_DIM))
    states[:, 0] = np.asarray(s0, dtype=np.float64)
    for h in range(horizon):
        cur = states[:, h]
        z = oriented_latents(model, canonical_grid, z_int, cur[:, THETA_IDX])
        weights = model.weights_np(z)
        deltas = model.predict_np(weights, cur, seqs[:, h])
        nxt = cur + deltas
        nxt[:, THETA_IDX] = wrap_angle(cur[:, THETA_IDX] + deltas[:, THETA_IDX])
        states[:, h + 1] = nxt
    return states


def unroll_loco(model: HyperDynamicsModel, z: np.ndarray, s0: np.ndarray,
                actions: np.ndarray) -> np.ndarray:
    seqs = np.asarray(actions, dtype=np.float64)[None]
    return unroll_loco_batch(model, z, s0, seqs)[0]


def unroll_loco_batch(model: HyperDynamicsModel, z: np.ndarray, s0: np.ndarray,
                      seqs: np.ndarray) -> np.ndarray:
    """One generated expert (fixed z) reused across the whole horizon."""
    seqs = np.asarray(seqs, dtype=np.float64)
    n, horizon = seqs.shape[0], seqs.shape[1]
    flat = model.weights_np(np.asarray(z, dtype=np.float64))
    layers = unflatten_params(model.target_spec, flat)
    states = np.empty((n, horizon + 1, LOCO_STATE_DIM))
    states[:, 0] = np.asarray(s0, dtype=np.float64)
    norm = model.normalizer
    for h in range(horizon):
        cur = states[:, h]
        x = np.concatenate([maybe_norm(norm, "state_obs", cur),
                            maybe_norm(norm, "action", seqs[:, h])], axis=-1)
        pred = mlp_eval(model.target_spec, layers, x)
        states[:, h + 1] = cur + maybe_denorm(norm, "delta", pred)
    return states
