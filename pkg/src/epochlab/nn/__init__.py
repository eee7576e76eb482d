from .autograd import Tensor, backward
from .networks import (
    Activation,
    DeepONetRegressor,
    DeepONetSpec,
    DenseNetworkSpec,
    DenseRegressor,
    ShapeError,
    forward_deeponet,
    forward_dense,
    mse,
)
from .optim import DivergenceError, OptimizerParams, ParameterState, adamw_step
