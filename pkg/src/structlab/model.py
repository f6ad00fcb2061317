"""Pre-layer-norm transformer encoder whose self-attention is constrained by
the dependency distribution induced from its own embeddings.

The parsing network reads the shared word embeddings (no positions), emits
split scores and heights, optionally calibrates the scores, and turns them
into a parent matrix consumed by every layer.  A baseline with standard
softmax attention shares the identical code path (config.attention =
"softmax"), differing only by the parser and relation parameters.
Input and output embeddings are tied; positions are learned and added to
the encoder input only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .attention import (
    RELATION_CHOICES,
    MultiHeadParams,
    init_multi_head_params,
    multi_head_attention,
    relation_mix,
)
from .dependency import parent_distribution
from .errors import DataError
from .parser_net import calibrate, conv_stack, init_parser_params, predict_distances, \
    predict_heights
from .tensor import Tensor

PRECISIONS = {"float32": np.float32, "float64": np.float64}


@dataclass
class ModelConfig:
    vocab_size: int
    layers: int = 8
    d_model: int = 512
    heads: int = 8
    d_ff: int = 2048
    dropout: float = 0.1
    parser_layers: int = 3
    kernel_width: int = 3
    parser_hidden: int = 0          # 0 means d_model
    mask_rate: float = 0.3
    relations: str = "parent+dep"
    calibrate: bool = True
    calibration_target: str = "distance"
    attention: str = "structured"   # "structured" or "softmax" baseline
    train_max_len: int = 64
    eval_max_len: int = 128
    precision: str = "float32"
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "layers", "d_model", "heads", "d_ff",
                     "parser_layers", "kernel_width", "train_max_len",
                     "eval_max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"config: {name} must be positive")
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError("config: mask_rate must lie strictly in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("config: dropout must lie in [0, 1)")
        if self.relations not in RELATION_CHOICES:
            raise ValueError(f"config: unknown relations {self.relations!r}")
        if self.attention not in ("structured", "softmax"):
            raise ValueError(f"config: unknown attention {self.attention!r}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"config: unknown precision {self.precision!r}")
        if self.d_model % self.heads:
            raise ValueError("config: heads must divide d_model")
        if self.kernel_width % 2 == 0:
            raise ValueError("config: kernel_width must be odd")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def hidden(self):
        return self.parser_hidden or self.d_model

    def to_dict(self):
        return asdict(self)


@dataclass
class EncoderOutput:
    logits: Tensor                  # (B, n, vocab)
    tau: Optional[Tensor] = None    # (B, n-1)
    delta: Optional[Tensor] = None  # (B, n)
    parent: Optional[Tensor] = None  # (B, n, n)
    hidden: Tensor = None           # (B, n, d_model) after final norm


@dataclass
class LayerParams:
    ln1_g: Tensor
    ln1_b: Tensor
    attn: MultiHeadParams
    ln2_g: Tensor
    ln2_b: Tensor
    ff1: Tensor
    ff1_b: Tensor
    ff2: Tensor
    ff2_b: Tensor

    def named(self, prefix):
        for n in ("ln1_g", "ln1_b"):
            yield f"{prefix}.{n}", getattr(self, n)
        yield from self.attn.named(f"{prefix}.attn")
        for n in ("ln2_g", "ln2_b", "ff1", "ff1_b", "ff2", "ff2_b"):
            yield f"{prefix}.{n}", getattr(self, n)


class StructuredTransformer:
    """Encoder over token ids; see module docstring."""

    def __init__(self, config: ModelConfig):
        self.config = config
        dt = config.dtype
        rng = np.random.default_rng([config.seed, 0x5eed])

        def normal(*shape, scale=None):
            scale = scale if scale is not None else 1.0 / np.sqrt(shape[-1])
            return Tensor((rng.standard_normal(shape) * scale).astype(dt),
                          requires_grad=True)

        def ones(*shape):
            return Tensor(np.ones(shape, dtype=dt), requires_grad=True)

        def zeros(*shape):
            return Tensor(np.zeros(shape, dtype=dt), requires_grad=True)

        self.embedding = normal(config.vocab_size, config.d_model, scale=0.02)
        max_len = max(config.train_max_len, config.eval_max_len)
        self.positions = normal(max_len, config.d_model, scale=0.02)

        self.structured = config.attention == "structured"
        if self.structured:
            self.parser = init_parser_params(
                rng, config.d_model, self.hidden_size(), config.parser_layers,
                config.kernel_width, dtype=dt)
            raw_one = float(np.log(np.e - 1.0))  # softplus(raw) == 1
            self.mu1_raw = Tensor(np.asarray(raw_one, dtype=dt), requires_grad=True)
            self.mu2_raw = Tensor(np.asarray(raw_one, dtype=dt), requires_grad=True)
        else:
            self.parser = None
            self.mu1_raw = self.mu2_raw = None

        self.blocks = []
        for _ in range(config.layers):
            self.blocks.append(LayerParams(
                ln1_g=ones(config.d_model), ln1_b=zeros(config.d_model),
                attn=init_multi_head_params(rng, config.d_model, config.heads, dtype=dt),
                ln2_g=ones(config.d_model), ln2_b=zeros(config.d_model),
                ff1=normal(config.d_model, config.d_ff),
                ff1_b=zeros(config.d_ff),
                ff2=normal(config.d_ff, config.d_model),
                ff2_b=zeros(config.d_model)))
        self.ln_f_g = ones(config.d_model)
        self.ln_f_b = zeros(config.d_model)

    def hidden_size(self):
        return self.config.hidden

    # -- parameter plumbing -------------------------------------------------

    def named_parameters(self):
        yield "embedding", self.embedding
        yield "positions", self.positions
        if self.structured:
            yield from self.parser.named("parser")
            yield "mu1_raw", self.mu1_raw
            yield "mu2_raw", self.mu2_raw
        for i, blk in enumerate(self.blocks):
            yield from blk.named(f"layer{i}")
        yield "ln_f_g", self.ln_f_g
        yield "ln_f_b", self.ln_f_b

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def parameter_count(self):
        return int(sum(t.data.size for t in self.parameters()))

    def temperatures(self):
        return T.softplus(self.mu1_raw), T.softplus(self.mu2_raw)

    # -- forward ------------------------------------------------------------

    def induce_structure(self, emb, training=False, rng=None):
        """Split scores, heights and parent matrix from word embeddings
        (B, n, d); heights/scores are calibrated per config before the parent
        matrix is formed."""
        cfg = self.config
        s = conv_stack(self.parser, emb, cfg.dropout, rng, training)
        tau = predict_distances(self.parser, s)
        delta = predict_heights(self.parser, s)
        if cfg.calibrate and emb.shape[-2] > 1:
            tau_c, delta_c = calibrate(tau, delta, cfg.calibration_target)
        else:
            tau_c, delta_c = tau, delta
        mu1, mu2 = self.temperatures()
        parent = parent_distribution(tau_c, delta_c, mu1, mu2)
        return tau, delta, parent

    def forward(self, ids, training=False, rng=None, override_parent=None):
        """Run the encoder; ids is (B, n) integer array."""
        cfg = self.config
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise DataError(f"forward: ids must be (batch, length), got {ids.shape}")
        n = ids.shape[1]
        cap = cfg.train_max_len if training else cfg.eval_max_len
        if n > cap:
            raise DataError(f"forward: sentence length {n} exceeds configured cap {cap}")
        if rng is None:
            rng = np.random.default_rng(0)

        emb = T.embedding(self.embedding, ids)
        tau = delta = parent = None
        if self.structured:
            if override_parent is not None:
                parent = T.as_tensor(override_parent)
            else:
                tau, delta, parent = self.induce_structure(emb, training, rng)

        x = T.add(emb, self.positions[:n])
        x = T.dropout(x, cfg.dropout, rng, training)
        for blk in self.blocks:
            a = multi_head_attention(
                blk.attn, T.layer_norm(x, blk.ln1_g, blk.ln1_b),
                p=parent, relations=cfg.relations,
                mode="structured" if self.structured else "softmax")
            x = T.add(x, T.dropout(a, cfg.dropout, rng, training))
            f = T.layer_norm(x, blk.ln2_g, blk.ln2_b)
            f = T.relu(T.add(T.matmul(f, blk.ff1), blk.ff1_b))
            f = T.add(T.matmul(f, blk.ff2), blk.ff2_b)
            x = T.add(x, T.dropout(f, cfg.dropout, rng, training))
        hidden = T.layer_norm(x, self.ln_f_g, self.ln_f_b)
        logits = T.matmul(hidden, T.swapaxes(self.embedding, 0, 1))
        return EncoderOutput(logits=logits, tau=tau, delta=delta,
                             parent=parent, hidden=hidden)

    def relation_summary(self):
        """Learned (p_parent, p_dep) per layer and head, for inspection."""
        out = []
        for blk in self.blocks:
            pp, pd = relation_mix(blk.attn.relation, self.config.relations)
            out.append(np.stack([pp.data, pd.data], axis=-1).tolist())
        return out
