"""Minimal dense-tensor engine with reverse-mode differentiation."""

from .gradcheck import check_gradients, numerical_grad, relative_error
from .nn import (
    BCE_EPS,
    avg_pool2d,
    bce_loss,
    conv2d,
    conv_output_size,
    deconv2d,
    deconv_output_size,
    linear,
    lstm_cell,
)
from .optim import AdamState, adam_step, sgd_step
from .params import CheckpointError, ParamStore
from .tensor import (
    GraphError,
    NonFiniteError,
    Tensor,
    add,
    as_tensor,
    clip,
    concat,
    getitem,
    log,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    stack,
    tanh,
    transpose,
)


def backward(loss: Tensor, params: ParamStore | None = None) -> None:
    """Backpropagate a scalar loss; every parameter in ``params`` ends with a gradient.

    Parameters the loss does not reach get zeros.
    """
    if params is not None:
        params.zero_grad()
    loss.backward()
