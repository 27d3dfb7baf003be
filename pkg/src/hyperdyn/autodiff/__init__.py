from . import ops
from .adam import AdamState, adam_step
from .gradcheck import finite_diff_check
from .nn import (ConvSpec, MlpSpec, ParamSet, conv2d_forward, flatten_params,
                 glorot_uniform, gru_cell_step, gru_encode, init_conv_params,
                 init_gru_params, init_mlp_params, mlp_eval, mlp_eval_external, mlp_forward,
                 mlp_forward_external, param_count, unflatten_params)
from .node import Node, as_node, backward, no_grad, zero_graph_grads
from .tensor import TensorError, check_finite, make_tensor

__all__ = [
    "ops", "AdamState", "adam_step", "finite_diff_check",
    "ConvSpec", "MlpSpec", "ParamSet", "conv2d_forward", "flatten_params",
    "glorot_uniform", "gru_cell_step", "gru_encode", "init_conv_params",
    "init_gru_params", "init_mlp_params", "mlp_eval", "mlp_eval_external", "mlp_forward",
    "mlp_forward_external", "param_count", "unflatten_params",
    "Node", "as_node", "backward", "no_grad", "zero_graph_grads",
    "TensorError", "check_finite", "make_tensor",
]
