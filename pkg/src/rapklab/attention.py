"""Single-layer attention primitives and a configurable random encoder.

The primitives (scores, row softmax, value mixing, empirical Gram kernel)
are kept separate so the Monte Carlo kernel experiments can drive exactly
the pipeline the closed-form theory describes: scores -> softmax -> apply.
``encoder_forward`` composes them into a post-norm transformer encoder whose
components can be switched off one by one; disabled components are identity
maps, so with every flag false the encoder is the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .initializers import InitScheme, ProjectionSet, init_matrix, make_projection_set
from .seeding import mix_seed
from .sequences import FeatureSequence

__all__ = [
    "AttentionMatrix",
    "EncoderConfig",
    "EncoderWeights",
    "LayerWeights",
    "attention_scores",
    "softmax_rows",
    "attention_apply",
    "empirical_kernel",
    "layer_norm_rows",
    "build_encoder_weights",
    "encoder_forward",
]

LAYERNORM_EPS = 1e-5

# Row sums of a softmax output may drift this far from 1 before we reject.
ROW_SUM_TOL = 1e-9

# Stream tags for the encoder's weight draws.
_ROLE_HEAD = 0x11
_ROLE_OUT = 0x22
_ROLE_FF1 = 0x33
_ROLE_FF2 = 0x44
_ROLE_POS = 0x55


@dataclass(frozen=True)
class AttentionMatrix:
    """A row-stochastic attention matrix (non-negative rows summing to 1)."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.rows, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"attention matrix must be 2-D, got shape {arr.shape}")
        if arr.min() < 0.0:
            raise ValueError("attention weights must be non-negative")
        sums = arr.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
            raise ValueError(f"attention rows must sum to 1 within {ROW_SUM_TOL}")
        object.__setattr__(self, "rows", arr)

    @property
    def t_len(self) -> int:
        return self.rows.shape[0]


def attention_scores(x: FeatureSequence, proj: ProjectionSet) -> np.ndarray:
    """Scaled dot-product logits S = (X W_Q)(X W_K)^T / sqrt(d_k)."""
    if proj.d != x.dim:
        raise ValueError(f"projection expects d={proj.d} features, sequence has d={x.dim}")
    q = x.data @ proj.w_q
    k = x.data @ proj.w_k
    return (q @ k.T) / math.sqrt(proj.d_k)


def softmax_rows(s: np.ndarray) -> AttentionMatrix:
    """Numerically stable row softmax of a score matrix."""
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"scores must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores contain non-finite values")
    z = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(z)
    return AttentionMatrix(e / e.sum(axis=1, keepdims=True))


def attention_apply(a: AttentionMatrix, x: FeatureSequence, w_v: np.ndarray) -> np.ndarray:
    """Mix projected values: O = A (X W_V)."""
    if a.rows.shape != (x.t_len, x.t_len):
        raise ValueError(
            f"attention matrix shape {a.rows.shape} does not match sequence length {x.t_len}"
        )
    if w_v.shape[0] != x.dim:
        raise ValueError(f"w_v expects {w_v.shape[0]} input features, sequence has {x.dim}")
    return a.rows @ (x.data @ w_v)


def empirical_kernel(o: np.ndarray) -> np.ndarray:
    """Gram matrix O O^T of an output sequence, symmetrized."""
    arr = np.asarray(o, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"output must be 2-D, got shape {arr.shape}")
    k = arr @ arr.T
    return 0.5 * (k + k.T)


def layer_norm_rows(h: np.ndarray, eps: float = LAYERNORM_EPS) -> np.ndarray:
    """Per-row layer normalization with unit affine (gamma=1, beta=0)."""
    mean = h.mean(axis=1, keepdims=True)
    var = h.var(axis=1, keepdims=True)
    return (h - mean) / np.sqrt(var + eps)


@dataclass(frozen=True)
class EncoderConfig:
    """Configuration of the frozen random encoder.

    ``window_w`` is the sequence length the encoder is built for (the
    positional table has that many rows); shorter inputs are allowed and use
    the leading rows. When ``use_output_linear`` is true each of the
    ``n_heads`` heads has width ``d_k / n_heads`` and the concatenated heads
    are projected back to the input width; when false, heads keep the full
    ``d_k`` width and are averaged.
    """

    n_heads: int = 8
    n_layers: int = 1
    d_k: int = 512
    use_attention: bool = True
    use_output_linear: bool = True
    use_ffn: bool = True
    use_layernorm: bool = True
    use_residual: bool = True
    use_positional: bool = False
    window_w: int = 10
    init: InitScheme = field(default_factory=lambda: InitScheme("xavier_uniform"))
    seed: int = 111

    def __post_init__(self) -> None:
        for name in ("n_heads", "n_layers", "d_k", "window_w"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.use_attention and self.use_output_linear and self.d_k % self.n_heads != 0:
            raise ValueError(
                f"d_k={self.d_k} must be divisible by n_heads={self.n_heads} "
                "when heads are concatenated for the output linear"
            )


@dataclass(frozen=True)
class LayerWeights:
    heads: tuple[ProjectionSet, ...] | None
    w_out: np.ndarray | None
    w_ff1: np.ndarray | None
    w_ff2: np.ndarray | None


@dataclass(frozen=True)
class EncoderWeights:
    positional: np.ndarray | None
    layers: tuple[LayerWeights, ...]
    d_in: int
    d_out: int


def build_encoder_weights(cfg: EncoderConfig, d: int) -> EncoderWeights:
    """Draw every weight of the encoder for input width ``d``.

    Pure function of (cfg, d): repeated calls return identical weights, which
    is what freezes the encoder across windows and runs.
    """
    if d < 1:
        raise ValueError(f"input width must be >= 1, got {d}")
    width = d
    layers: list[LayerWeights] = []
    for li in range(cfg.n_layers):
        heads: tuple[ProjectionSet, ...] | None = None
        w_out: np.ndarray | None = None
        if cfg.use_attention:
            head_width = cfg.d_k // cfg.n_heads if cfg.use_output_linear else cfg.d_k
            heads = tuple(
                make_projection_set(width, head_width, cfg.init, mix_seed(cfg.seed, _ROLE_HEAD, li, h))
                for h in range(cfg.n_heads)
            )
            if cfg.use_output_linear:
                w_out = init_matrix(cfg.d_k, width, cfg.init, mix_seed(cfg.seed, _ROLE_OUT, li))
                new_width = width
            else:
                if cfg.use_residual and cfg.d_k != width:
                    raise ValueError(
                        f"residual add needs matching widths: input is {width}, "
                        f"attention output is d_k={cfg.d_k} (no output linear)"
                    )
                new_width = cfg.d_k
        else:
            new_width = width
        w_ff1 = w_ff2 = None
        if cfg.use_ffn:
            w_ff1 = init_matrix(new_width, 4 * new_width, cfg.init, mix_seed(cfg.seed, _ROLE_FF1, li))
            w_ff2 = init_matrix(4 * new_width, new_width, cfg.init, mix_seed(cfg.seed, _ROLE_FF2, li))
        layers.append(LayerWeights(heads=heads, w_out=w_out, w_ff1=w_ff1, w_ff2=w_ff2))
        width = new_width
    positional = None
    if cfg.use_positional:
        positional = init_matrix(cfg.window_w, d, cfg.init, mix_seed(cfg.seed, _ROLE_POS))
    return EncoderWeights(positional=positional, layers=tuple(layers), d_in=d, d_out=width)


def encoder_forward(
    x: FeatureSequence, cfg: EncoderConfig, weights: EncoderWeights | None = None
) -> FeatureSequence:
    """Run the frozen random encoder over one window of epochs.

    The input must fit the configured window (``x.t_len <= cfg.window_w``);
    a shorter tail window reuses the leading positional rows. Per layer, in
    order and gated by its flag: multi-head attention, output linear,
    residual add, layer norm, then an FFN block (width -> 4x -> width, ReLU)
    with its own residual and norm.
    """
    if x.t_len > cfg.window_w:
        raise ValueError(f"sequence length {x.t_len} exceeds configured window {cfg.window_w}")
    if weights is None:
        weights = build_encoder_weights(cfg, x.dim)
    elif weights.d_in != x.dim:
        raise ValueError(f"weights were built for d={weights.d_in}, sequence has d={x.dim}")

    h = x.data
    if cfg.use_positional:
        h = h + weights.positional[: x.t_len]
    for lw in weights.layers:
        if cfg.use_attention:
            seq = FeatureSequence(h)
            outs = [
                attention_apply(softmax_rows(attention_scores(seq, ps)), seq, ps.w_v)
                for ps in lw.heads
            ]
            if cfg.use_output_linear:
                att = np.concatenate(outs, axis=1) @ lw.w_out
            else:
                att = np.mean(outs, axis=0)
            if cfg.use_residual:
                att = h + att
            h = att
        if cfg.use_layernorm:
            h = layer_norm_rows(h)
        if cfg.use_ffn:
            f = np.maximum(h @ lw.w_ff1, 0.0) @ lw.w_ff2
            if cfg.use_residual:
                f = h + f
            h = f
            if cfg.use_layernorm:
                h = layer_norm_rows(h)
    return FeatureSequence(h)
