from . import tensor
from .checkpoint import CheckpointError, load_arrays, save_arrays
from .gradcheck import grad_check
from .init import derive_rng, init_embedding, init_linear, init_lstm
from .lstm import LstmWeights, lstm_cell, lstm_layer, lstm_step_np, pack_state, unpack_state
from .optim import Adam, NonFiniteGradient, clip_global_norm
from .tensor import GraphError, Tensor, backward, no_grad

__all__ = [
    "Adam",
    "CheckpointError",
    "GraphError",
    "LstmWeights",
    "NonFiniteGradient",
    "Tensor",
    "backward",
    "clip_global_norm",
    "derive_rng",
    "grad_check",
    "init_embedding",
    "init_linear",
    "init_lstm",
    "load_arrays",
    "lstm_cell",
    "lstm_layer",
    "lstm_step_np",
    "no_grad",
    "pack_state",
    "save_arrays",
    "tensor",
    "unpack_state",
]
