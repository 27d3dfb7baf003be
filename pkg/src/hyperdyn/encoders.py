"""Observation encoders producing the latent system code z = [z_int, z_vis].

The interaction encoder is a small fully-connected network over a
flattened k-step (state, action) window. The shape encoder is the conv
stack over the object's occupancy grid *oriented at its current angle*;
a dense decoder reconstructs the oriented grid as an auxiliary
regularizer. Locomotion uses the interaction encoder alone.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import (ConvSpec, MlpSpec, Node, ParamSet, conv2d_forward,
                       init_conv_params, init_mlp_params, mlp_forward, ops)
from .envs.shapes import GRID_N

ENC_INT_PREFIX = "enc_int/"
ENC_VIS_PREFIX = "enc_vis/"
DECODER_PREFIX = "dec/"
DECODER_HIDDEN = 64


@dataclass(frozen=True)
class LatentCode:
    """z_int plus the optional z_vis; z is their concatenation."""

    z_int: np.ndarray
    z_vis: np.ndarray | None = None

    @property
    def z(self) -> np.ndarray:
        if self.z_vis is None:
            return self.z_int
        return np.concatenate([self.z_int, self.z_vis], axis=-1)


def interaction_encoder_spec(window_dim: int, hidden, z_int_dim: int) -> MlpSpec:
    return MlpSpec((window_dim, *hidden, z_int_dim))


def init_interaction_encoder(spec: MlpSpec, rng, params: ParamSet):
    return init_mlp_params(spec, rng, params, prefix=ENC_INT_PREFIX)


def encode_interaction(spec: MlpSpec, params: ParamSet, window) -> Node:
    """Map a flattened interaction window ([W] or [B, W]) to z_int."""
    return mlp_forward(spec, params, window, prefix=ENC_INT_PREFIX)


def shape_encoder_spec(z_vis_dim: int) -> ConvSpec:
    return ConvSpec(in_hw=GRID_N, out_dim=z_vis_dim)


def init_shape_encoder(spec: ConvSpec, rng, params: ParamSet):
    return init_conv_params(spec, rng, params, prefix=ENC_VIS_PREFIX)


def encode_shape(spec: ConvSpec, params: ParamSet, oriented_grid) -> Node:
    """Encode oriented occupancy grids ([16,16] or [B,16,16]) to z_vis."""
    return conv2d_forward(spec, params, oriented_grid, prefix=ENC_VIS_PREFIX)


def shape_decoder_spec(z_vis_dim: int) -> MlpSpec:
    return MlpSpec((z_vis_dim, DECODER_HIDDEN, GRID_N * GRID_N))


def init_shape_decoder(spec: MlpSpec, rng, params: ParamSet):
    return init_mlp_params(spec, rng, params, prefix=DECODER_PREFIX)


def decode_shape(spec: MlpSpec, params: ParamSet, z_vis) -> Node:
    """Reconstruct the oriented grid from z_vis; output is unconstrained
    (no final activation), loss is plain MSE against the input grid."""
    flat = mlp_forward(spec, params, z_vis, prefix=DECODER_PREFIX)
    z = ops.as_node(z_vis)
    if z.value.ndim == 1:
        return ops.reshape(flat, (GRID_N, GRID_N))
    return ops.reshape(flat, (-1, GRID_N, GRID_N))


def reconstruction_loss(decoded: Node, grids) -> Node:
    """Mean squared error against the oriented input grids."""
    return ops.mean_all(ops.square(ops.sub(decoded, ops.as_node(grids))))


def assemble_latent(z_int, z_vis=None):
    """Concatenate the latent pieces; locomotion passes z = z_int."""
    if z_vis is None:
        return ops.as_node(z_int) if not isinstance(z_int, Node) else z_int
    return ops.concat_last([z_int, z_vis])
