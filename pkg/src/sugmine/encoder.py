"""
LSTM sequence encoder with optional self-attention pooling.

Gate layout in every weight matrix and bias is (input, forget, cell, output),
each block ``hidden_size`` rows tall.  Sequences are processed one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, EmptySequenceError
from .tensor import (
    Tensor,
    concat,
    dropout,
    matmul,
    sigmoid,
    softmax,
    stack,
    tanh,
    transpose,
)


@dataclass
class EncoderConfig:
    num_layers: int = 1
    bidirectional: bool = True
    hidden_size: int = 32
    inter_layer_dropout: float = 0.0
    attention: bool = True
    attention_size: int = 32

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.hidden_size < 1:
            raise ConfigError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if self.attention and self.attention_size < 1:
            raise ConfigError(f"attention_size must be >= 1, got {self.attention_size}")
        if not 0.0 <= self.inter_layer_dropout < 1.0:
            raise ConfigError(f"inter_layer_dropout must be in [0, 1), got {self.inter_layer_dropout}")

    @property
    def output_size(self) -> int:
        return self.hidden_size * (2 if self.bidirectional else 1)


@dataclass
class LstmCellParams:
    W_ih: Tensor
    W_hh: Tensor
    b: Tensor

    @property
    def hidden_size(self) -> int:
        return self.W_hh.shape[1]


@dataclass
class LayerParams:
    fwd: LstmCellParams
    bwd: LstmCellParams | None = None


@dataclass
class AttentionParams:
    W_a: Tensor
    v_a: Tensor


@dataclass
class EncoderParams:
    layers: list = field(default_factory=list)
    attention: AttentionParams | None = None

    def named_parameters(self, prefix: str = "encoder"):
        for k, layer in enumerate(self.layers):
            for direction in ("fwd", "bwd"):
                cell = getattr(layer, direction)
                if cell is None:
                    continue
                for pname in ("W_ih", "W_hh", "b"):
                    yield f"{prefix}.layer{k}.{direction}.{pname}", getattr(cell, pname)
        if self.attention is not None:
            yield "attention.W_a", self.attention.W_a
            yield "attention.v_a", self.attention.v_a


def init_lstm_params(d_in: int, hidden: int, rng: np.random.Generator) -> LstmCellParams:
    bound = 1.0 / np.sqrt(hidden)
    W_ih = rng.uniform(-bound, bound, size=(4 * hidden, d_in))
    W_hh = rng.uniform(-bound, bound, size=(4 * hidden, hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    return LstmCellParams(
        Tensor(W_ih, requires_grad=True),
        Tensor(W_hh, requires_grad=True),
        Tensor(b, requires_grad=True),
    )


def init_encoder_params(d_in: int, cfg: EncoderConfig, rng: np.random.Generator) -> EncoderParams:
    params = EncoderParams()
    for k in range(cfg.num_layers):
        layer_in = d_in if k == 0 else cfg.output_size
        fwd = init_lstm_params(layer_in, cfg.hidden_size, rng)
        bwd = init_lstm_params(layer_in, cfg.hidden_size, rng) if cfg.bidirectional else None
        params.layers.append(LayerParams(fwd, bwd))
    if cfg.attention:
        e, a = cfg.output_size, cfg.attention_size
        W_a = rng.uniform(-1 / np.sqrt(e), 1 / np.sqrt(e), size=(a, e))
        v_a = rng.uniform(-1 / np.sqrt(a), 1 / np.sqrt(a), size=a)
        params.attention = AttentionParams(Tensor(W_a, requires_grad=True), Tensor(v_a, requires_grad=True))
    return params


def _step(x_proj: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmCellParams):
    h = p.hidden_size
    z = x_proj + matmul(p.W_hh, h_prev) + p.b
    # one sigmoid over all four blocks; the g block of it is unused
    gates = sigmoid(z)
    i, f, o = gates[0:h], gates[h:2 * h], gates[3 * h:4 * h]
    g = tanh(z[2 * h:3 * h])
    c = f * c_prev + i * g
    return o * tanh(c), c


def lstm_cell(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmCellParams):
    """One LSTM step; returns (h_t, c_t)."""
    h = p.hidden_size
    if x_t.shape != (p.W_ih.shape[1],) or h_prev.shape != (h,) or c_prev.shape != (h,):
        raise DimensionError(
            f"lstm_cell: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"do not fit W_ih {p.W_ih.shape}, W_hh {p.W_hh.shape}"
        )
    return _step(matmul(p.W_ih, x_t), h_prev, c_prev, p)


def run_direction(seq: Tensor, p: LstmCellParams, reverse: bool = False) -> Tensor:
    """Hidden states [T x h] in position order; ``reverse`` scans right-to-left."""
    T = seq.shape[0]
    if T == 0:
        raise EmptySequenceError("cannot run an LSTM over an empty sequence")
    if seq.ndim != 2 or seq.shape[1] != p.W_ih.shape[1]:
        raise DimensionError(f"sequence of shape {seq.shape} does not fit W_ih {p.W_ih.shape}")
    h = p.hidden_size
    x_proj = matmul(seq, transpose(p.W_ih))
    h_t, c_t = Tensor(np.zeros(h)), Tensor(np.zeros(h))
    states = [None] * T
    for t in (range(T - 1, -1, -1) if reverse else range(T)):
        h_t, c_t = _step(x_proj[t], h_t, c_t, p)
        states[t] = h_t
    return stack(states)


def run_layer(seq: Tensor, params: LayerParams) -> Tensor:
    fwd = run_direction(seq, params.fwd)
    if params.bwd is None:
        return fwd
    return concat([fwd, run_direction(seq, params.bwd, reverse=True)], axis=1)


def encode(seq_emb: Tensor, cfg: EncoderConfig, params: EncoderParams, training: bool = False, rng=None) -> Tensor:
    x = seq_emb
    for k, layer in enumerate(params.layers):
        if k > 0:
            x = dropout(x, cfg.inter_layer_dropout, training, rng)
        x = run_layer(x, layer)
    return x


def attend(states: Tensor, p: AttentionParams):
    """Additive self-attention: score_t = v . tanh(W states_t). Returns (sentence, weights)."""
    if states.shape[0] == 0:
        raise EmptySequenceError("cannot attend over an empty sequence")
    scores = matmul(tanh(matmul(states, transpose(p.W_a))), p.v_a)
    weights = softmax(scores)
    return matmul(weights, states), weights


def pool_last(states: Tensor, bidirectional: bool = False) -> Tensor:
    """Terminal state of each direction (forward at T-1, backward at 0)."""
    T = states.shape[0]
    if T == 0:
        raise EmptySequenceError("cannot pool an empty sequence")
    if not bidirectional:
        return states[T - 1]
    h = states.shape[1] // 2
    return concat([states[T - 1, :h], states[0, h:]])
