"""Minimal float64 neural-network substrate: tape autodiff, recurrent cells, Adam."""
from .gradcheck import GradCheckResult, gradient_check
from .init import glorot_uniform
from .optim import AdamState, adam_update, sgd_update
from .recurrent import (
    DenseParams,
    LstmParams,
    RnnParams,
    lstm_sequence,
    lstm_step,
    rnn_sequence,
    rnn_step,
    sigmoid,
    softmax,
)
from .tape import GradientTape, Tensor, dense, mse, relu

__all__ = [
    "AdamState",
    "DenseParams",
    "GradCheckResult",
    "GradientTape",
    "LstmParams",
    "RnnParams",
    "Tensor",
    "adam_update",
    "dense",
    "glorot_uniform",
    "gradient_check",
    "lstm_sequence",
    "lstm_step",
    "mse",
    "relu",
    "rnn_sequence",
    "rnn_step",
    "sgd_update",
    "sigmoid",
    "softmax",
]
