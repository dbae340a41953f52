"""From-scratch reverse-mode autodiff: tape, ops, Adam, tensor files."""

from .adam import AdamState, adam_step
from .graph import (
    Graph,
    GraphError,
    Node,
    ShapeError,
    Tensor,
    astensor,
    backward,
    grad_wrt_input,
    no_grad,
)
from .ops import (
    add,
    add_chan_bias,
    add_row_bias,
    add_scalar,
    concat_channels,
    conv2d,
    conv_dinput,
    conv_dweight,
    dense,
    gram_matrix,
    matmul,
    maxpool2,
    mean_all,
    mul,
    pow_const,
    relu,
    reshape,
    scale,
    scale_per_sample,
    slice_channels,
    sqrt,
    sum_all,
    sum_axis0,
    sum_chan,
    sum_per_sample,
    transposed_conv2d,
)
from .serial import MAGIC, load_tensors, save_tensors

__all__ = [
    "AdamState", "Graph", "GraphError", "MAGIC", "Node", "ShapeError", "Tensor",
    "adam_step", "add", "add_chan_bias", "add_row_bias", "add_scalar", "astensor",
    "backward", "concat_channels", "conv2d", "conv_dinput", "conv_dweight", "dense",
    "grad_wrt_input", "gram_matrix", "load_tensors", "matmul", "maxpool2",
    "mean_all", "mul", "no_grad", "pow_const", "relu", "reshape", "save_tensors",
    "scale", "scale_per_sample", "slice_channels", "sqrt", "sum_all", "sum_axis0",
    "sum_chan", "sum_per_sample", "transposed_conv2d",
]
