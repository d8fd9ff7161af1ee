from . import tensor as ops
from .params import MLP, LayerNorm, Linear, ParamStore, adamlike_step, clip_grad_norm, sgd_step
from .tensor import ShapeError, Tensor, backward, no_grad

__all__ = [
    "ops",
    "Tensor",
    "ShapeError",
    "backward",
    "no_grad",
    "ParamStore",
    "Linear",
    "MLP",
    "LayerNorm",
    "sgd_step",
    "adamlike_step",
    "clip_grad_norm",
]
