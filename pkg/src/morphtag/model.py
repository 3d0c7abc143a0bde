"""The tagger architecture.

A batch flows through seven stages:

1. token embeddings get rotary positional encoding, with positions
   restarting at 0 inside every word;
2. multi-head dot-product attention runs independently inside each word,
   over that word's subtokens only;
3. a small fully connected network scores each subtoken's contribution
   and a masked softmax turns the scores into weights;
4. subtoken vectors are aggregated into one word vector as the weighted
   sum; on the backward pass gradients flow to every contributing
   subtoken vector;
5. rotary positional encoding is applied again at the word level,
   restarting at 0 for each sentence;
6. four transformer encoder blocks (post-norm, original layout:
   self-attention, add & layer-norm, position-wise feed-forward with relu,
   add & layer-norm) mix information across words;
7. one independent two-layer classifier head per grammatical category
   maps each word vector to label logits, with the reserved NONE label as
   an ordinary class.

A model is immutable during forward passes and may serve several threads;
parameter updates need exclusive access.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .conllu import CategorySchema
from .tensor import Tensor, ShapeError

CHECKPOINT_MAGIC = "MORPHTAG v1"

# Parameter budget of the reference full-scale instance of this
# architecture; full_scale_config() reconstructs a configuration of that
# size from standard transformer width ratios.
FULL_SCALE_TARGET_PARAMS = 48_792_985

_MASK_FILL = -1e9


class CheckpointError(ValueError):
    """Malformed, truncated, or wrong-version checkpoint file."""


@dataclass
class ModelConfig:
    d_model: int
    n_heads_word: int
    n_heads_sent: int
    d_ff: int
    vocab_size: int
    schemas: list[CategorySchema]
    n_layers: int = 4
    max_subtokens: int = 6
    max_words: int = 256
    score_hidden: int = 64
    cls_hidden: int = 128
    rope_base: float = 10000.0
    seed: int = 0

    def __post_init__(self):
        if self.d_model % 2 != 0:
            raise ValueError(f"d_model must be even for rotary encoding, got {self.d_model}")
        for name, heads in (("n_heads_word", self.n_heads_word), ("n_heads_sent", self.n_heads_sent)):
            if heads < 1 or self.d_model % heads != 0:
                raise ValueError(f"d_model={self.d_model} must be divisible by {name}={heads}")
        if min(self.d_ff, self.score_hidden, self.cls_hidden, self.n_layers, self.max_subtokens) < 1:
            raise ValueError("all layer widths and counts must be positive")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must cover at least the special tokens")
        if self.rope_base <= 0:
            raise ValueError("rope_base must be positive")
        if not self.schemas:
            raise ValueError("at least one category schema is required")
        self.schemas = sorted(self.schemas, key=lambda s: s.name)

    def schema_by_name(self, name: str) -> CategorySchema:
        for schema in self.schemas:
            if schema.name == name:
                return schema
        raise KeyError(name)


def _parameter_specs(config: ModelConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Fixed (name, shape, init-kind) order shared by init, count, and checkpoints."""
    d, f, s, h = config.d_model, config.d_ff, config.score_hidden, config.cls_hidden
    specs: list[tuple[str, tuple[int, ...], str]] = [("token_embedding", (config.vocab_size, d), "w")]

    def attn(prefix: str):
        for part in ("q", "k", "v", "o"):
            specs.append((f"{prefix}.w{part}", (d, d), "w"))
            specs.append((f"{prefix}.b{part}", (d,), "b"))

    attn("word_attn")
    specs += [
        ("score.w1", (d, s), "w"),
        ("score.b1", (s,), "b"),
        ("score.w2", (s, 1), "w"),
        ("score.b2", (1,), "b"),
    ]
    for i in range(config.n_layers):
        attn(f"enc{i}.attn")
        specs += [
            (f"enc{i}.ln1.gain", (d,), "gain"),
            (f"enc{i}.ln1.bias", (d,), "b"),
            (f"enc{i}.ff.w1", (d, f), "w"),
            (f"enc{i}.ff.b1", (f,), "b"),
            (f"enc{i}.ff.w2", (f, d), "w"),
            (f"enc{i}.ff.b2", (d,), "b"),
            (f"enc{i}.ln2.gain", (d,), "gain"),
            (f"enc{i}.ln2.bias", (d,), "b"),
        ]
    for schema in config.schemas:
        specs += [
            (f"head.{schema.name}.w1", (d, h), "w"),
            (f"head.{schema.name}.b1", (h,), "b"),
            (f"head.{schema.name}.w2", (h, len(schema.labels)), "w"),
            (f"head.{schema.name}.b2", (len(schema.labels),), "b"),
        ]
    return specs


class TaggerModel:
    """Configuration plus all learned parameters, in a fixed named order."""

    INIT_STD = 0.02

    def __init__(self, config: ModelConfig, init: str = "random"):
        self.config = config
        self.params: dict[str, Tensor] = {}
        dtype = T.get_default_dtype()
        rng = np.random.Generator(np.random.Philox(config.seed)) if init == "random" else None
        for name, shape, kind in _parameter_specs(config):
            if kind == "gain":
                data = np.ones(shape, dtype=dtype)
            elif kind == "w" and rng is not None:
                data = rng.normal(0.0, self.INIT_STD, size=shape).astype(dtype)
            else:
                data = np.zeros(shape, dtype=dtype)
            self.params[name] = Tensor(data, requires_grad=True)

    def named_parameters(self):
        return self.params.items()

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def copy_param_data(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_param_data(self, data: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.data = data[name].astype(p.data.dtype, copy=True)


def parameter_count(config: ModelConfig) -> int:
    """Total learned scalars, as a closed-form function of the config.

    With d = d_model, f = d_ff, s = score_hidden, h = cls_hidden,
    V = vocab_size, N = n_layers and label counts L_c per category:

        V*d                          token embedding
      + 4*(d*d + d)                  intra-word attention (Q, K, V, O + biases)
      + d*s + 2*s + 1                subtoken scoring network
      + N * (4*(d*d + d)             encoder self-attention
             + 2*d*f + f + d        encoder feed-forward
             + 4*d)                 two layer-norm gain/bias pairs
      + sum_c (d*h + h + h*L_c + L_c)   classifier heads
    """
    d, f, s, h = config.d_model, config.d_ff, config.score_hidden, config.cls_hidden
    attn = 4 * (d * d + d)
    score = d * s + 2 * s + 1
    block = attn + 2 * d * f + f + d + 4 * d
    heads = sum(d * h + h + (h + 1) * len(sc.labels) for sc in config.schemas)
    return config.vocab_size * d + attn + score + config.n_layers * block + heads


_ROPE_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _rope_tables(n_positions: int, d: int, base: float, dtype) -> tuple[np.ndarray, np.ndarray]:
    key = (n_positions, d, float(base), np.dtype(dtype).str)
    hit = _ROPE_CACHE.get(key)
    if hit is None:
        pair = np.arange(d // 2, dtype=np.float64)
        inv_freq = float(base) ** (-2.0 * pair / d)
        angles = np.arange(n_positions, dtype=np.float64)[:, None] * inv_freq[None, :]
        hit = (
            np.repeat(np.cos(angles), 2, axis=1).astype(dtype),
            np.repeat(np.sin(angles), 2, axis=1).astype(dtype),
        )
        _ROPE_CACHE[key] = hit
    return hit


def apply_rope(x: Tensor, base: float) -> Tensor:
    """Rotate embedding-dimension pairs by position along axis -2.

    Pair (2i, 2i+1) at position p is rotated by p * base**(-2i/d), so the
    dot product of two rotated vectors depends only on their positional
    difference. Positions count from 0 along the input's own axis, which
    is what restarts them per word (subtoken axis) or per sentence (word
    axis).
    """
    d = x.shape[-1]
    if d % 2 != 0:
        raise ShapeError(f"apply_rope: last dimension must be even, got {d}")
    cos, sin = _rope_tables(x.shape[-2], d, base, x.dtype)
    rot = T.constant(np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=x.dtype))
    pairs = T.reshape(x, (*x.shape[:-1], d // 2, 2))
    half = T.reshape(T.matmul(pairs, rot), x.shape)  # (a, b) -> (-b, a)
    return T.add(T.mul(x, T.constant(cos)), T.mul(half, T.constant(sin)))


def _attention(
    x: Tensor,
    key_mask: np.ndarray | None,
    weights: dict[str, Tensor],
    prefix: str,
    n_heads: int,
    return_weights: bool = False,
):
    """Multi-head scaled dot-product self-attention over axis -2.

    ``key_mask`` marks valid positions; masked positions are excluded as
    keys by filling their pre-softmax scores with a large negative
    constant, which underflows to an exactly-zero attention weight.
    """
    *lead, length, d = x.shape
    dh = d // n_heads

    def proj(part: str) -> Tensor:
        return T.add(T.matmul(x, weights[f"{prefix}.w{part}"]), weights[f"{prefix}.b{part}"])

    def split_heads(t: Tensor) -> Tensor:
        return T.transpose(T.reshape(t, (*lead, length, n_heads, dh)), -3, -2)

    q, k, v = split_heads(proj("q")), split_heads(proj("k")), split_heads(proj("v"))
    scores = T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(dh))
    if key_mask is not None:
        blocked = ~np.asarray(key_mask, dtype=bool)
        scores = T.masked_fill(scores, blocked[..., None, None, :], _MASK_FILL)
    attn = T.softmax(scores, axis=-1)
    ctx = T.reshape(T.transpose(T.matmul(attn, v), -3, -2), (*lead, length, d))
    out = T.add(T.matmul(ctx, weights[f"{prefix}.wo"]), weights[f"{prefix}.bo"])
    return (out, attn) if return_weights else out


def intra_word_attention(model: TaggerModel, tokens: Tensor, mask: np.ndarray | None = None, return_weights: bool = False):
    """Attention among one word's subtokens (or any [..., subtokens, d] stack)."""
    if mask is not None and not np.asarray(mask, dtype=bool).any():
        raise ValueError("intra_word_attention: word has no unmasked subtokens")
    return _attention(tokens, mask, model.params, "word_attn", model.config.n_heads_word, return_weights)


def token_scores(model: TaggerModel, token_vectors: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Per-subtoken contribution weights: scoring network + masked softmax.

    Weights are non-negative, sum to 1 over a word's real subtokens and are
    exactly zero on padding (including rows that are entirely padding).
    """
    p = model.params
    hidden = T.relu(T.add(T.matmul(token_vectors, p["score.w1"]), p["score.b1"]))
    raw = T.add(T.matmul(hidden, p["score.w2"]), p["score.b2"])
    raw = T.reshape(raw, token_vectors.shape[:-1])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        raw = T.masked_fill(raw, ~mask, _MASK_FILL)
    weights = T.softmax(raw, axis=-1)
    if mask is not None:
        weights = T.mul(weights, T.constant(mask.astype(weights.dtype)))
    return weights


def aggregate_word(token_vectors: Tensor, weights: Tensor) -> Tensor:
    """Weighted sum of subtoken vectors along axis -2."""
    expanded = T.reshape(weights, (*weights.shape, 1))
    return T.tsum(T.mul(token_vectors, expanded), axis=-2)


def encoder_stack(model: TaggerModel, word_vectors: Tensor, word_mask: np.ndarray | None = None) -> Tensor:
    """Four (by default) post-norm transformer encoder blocks over words."""
    cfg, p = model.config, model.params
    h = word_vectors
    for i in range(cfg.n_layers):
        attn_out = _attention(h, word_mask, p, f"enc{i}.attn", cfg.n_heads_sent)
        h = T.layer_norm(T.add(h, attn_out), p[f"enc{i}.ln1.gain"], p[f"enc{i}.ln1.bias"])
        ff = T.add(
            T.matmul(T.relu(T.add(T.matmul(h, p[f"enc{i}.ff.w1"]), p[f"enc{i}.ff.b1"])), p[f"enc{i}.ff.w2"]),
            p[f"enc{i}.ff.b2"],
        )
        h = T.layer_norm(T.add(h, ff), p[f"enc{i}.ln2.gain"], p[f"enc{i}.ln2.bias"])
    return h


def classify(model: TaggerModel, word_vectors: Tensor) -> dict[str, Tensor]:
    """Per-category label logits from the shared trunk, one head per schema."""
    p = model.params
    logits = {}
    for schema in model.config.schemas:
        name = schema.name
        hidden = T.relu(T.add(T.matmul(word_vectors, p[f"head.{name}.w1"]), p[f"head.{name}.b1"]))
        logits[name] = T.add(T.matmul(hidden, p[f"head.{name}.w2"]), p[f"head.{name}.b2"])
    return logits


def forward(model: TaggerModel, batch) -> dict[str, Tensor]:
    """Full pipeline on an encoded batch.

    ``batch`` needs ``token_ids`` [B, W, S] int, ``subtoken_mask`` [B, W, S]
    bool, and ``word_mask`` [B, W] bool. Returns one [B, W, labels] logits
    tensor per category. Padded words and subtokens never influence real
    positions.
    """
    cfg = model.config
    ids = np.asarray(batch.token_ids)
    subtoken_mask = np.asarray(batch.subtoken_mask, dtype=bool)
    word_mask = np.asarray(batch.word_mask, dtype=bool)
    if ids.ndim != 3:
        raise ShapeError(f"forward: token_ids must be [batch, words, subtokens], got {ids.shape}")

    x = T.embedding_lookup(model.params["token_embedding"], ids)
    x = apply_rope(x, cfg.rope_base)
    x = _attention(x, subtoken_mask, model.params, "word_attn", cfg.n_heads_word)
    weights = token_scores(model, x, subtoken_mask)
    words = aggregate_word(x, weights)
    words = apply_rope(words, cfg.rope_base)
    encoded = encoder_stack(model, words, word_mask)
    return classify(model, encoded)


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(model: TaggerModel, path: str) -> None:
    """Write config and parameters; text header, then raw little-endian f32.

    The file starts with ``MORPHTAG v1``, followed by ``key=value`` config
    lines (including the init seed and the full schema inventory), then a
    ``#PARAMS`` marker and, per parameter in the fixed order, a descriptor
    line ``<name> <ndim> <dims...>`` followed by the raw values. Writing is
    atomic (temp file + rename).
    """
    cfg = model.config
    lines = [CHECKPOINT_MAGIC]
    for key in (
        "d_model",
        "n_heads_word",
        "n_heads_sent",
        "n_layers",
        "d_ff",
        "max_subtokens",
        "max_words",
        "vocab_size",
        "score_hidden",
        "cls_hidden",
        "rope_base",
        "seed",
    ):
        lines.append(f"{key}={getattr(cfg, key)}")
    for schema in cfg.schemas:
        lines.append(f"schema.{schema.name}=" + ",".join(schema.labels))
    lines.append("#PARAMS")
    header = ("\n".join(lines) + "\n").encode("utf-8")

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            for name, p in model.named_parameters():
                dims = " ".join(str(d) for d in p.data.shape)
                f.write(f"{name} {p.data.ndim} {dims}".rstrip().encode("utf-8") + b"\n")
                f.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> TaggerModel:
    with open(path, "rb") as f:
        magic = f.readline().rstrip(b"\n").decode("utf-8", errors="replace")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        raw: dict[str, str] = {}
        schemas: list[CategorySchema] = []
        while True:
            line = f.readline()
            if not line:
                raise CheckpointError(f"{path}: truncated before #PARAMS")
            line = line.rstrip(b"\n").decode("utf-8")
            if line == "#PARAMS":
                break
            if "=" not in line:
                raise CheckpointError(f"{path}: malformed config line {line!r}")
            key, value = line.split("=", 1)
            if key.startswith("schema."):
                schemas.append(CategorySchema(key[len("schema."):], tuple(value.split(","))))
            else:
                raw[key] = value
        try:
            config = ModelConfig(
                d_model=int(raw["d_model"]),
                n_heads_word=int(raw["n_heads_word"]),
                n_heads_sent=int(raw["n_heads_sent"]),
                n_layers=int(raw["n_layers"]),
                d_ff=int(raw["d_ff"]),
                max_subtokens=int(raw["max_subtokens"]),
                max_words=int(raw["max_words"]),
                vocab_size=int(raw["vocab_size"]),
                score_hidden=int(raw["score_hidden"]),
                cls_hidden=int(raw["cls_hidden"]),
                rope_base=float(raw["rope_base"]),
                seed=int(raw["seed"]),
                schemas=schemas,
            )
        except KeyError as e:
            raise CheckpointError(f"{path}: missing config key {e.args[0]}") from None

        model = TaggerModel(config, init="zeros")
        dtype = T.get_default_dtype()
        for name, p in model.named_parameters():
            desc = f.readline()
            if not desc:
                raise CheckpointError(f"{path}: truncated, missing parameter {name}")
            parts = desc.rstrip(b"\n").decode("utf-8").split(" ")
            if parts[0] != name:
                raise CheckpointError(f"{path}: expected parameter {name}, found {parts[0]!r}")
            ndim = int(parts[1])
            dims = tuple(int(x) for x in parts[2 : 2 + ndim])
            if dims != p.data.shape:
                raise CheckpointError(f"{path}: parameter {name} has shape {dims}, expected {p.data.shape}")
            nbytes = 4 * int(np.prod(dims, dtype=np.int64)) if dims else 4
            buf = f.read(nbytes)
            if len(buf) != nbytes:
                raise CheckpointError(f"{path}: truncated data for parameter {name}")
            p.data = np.frombuffer(buf, dtype="<f4").reshape(dims).astype(dtype)
        if f.read(1):
            raise CheckpointError(f"{path}: trailing bytes after last parameter")
    return model


# --- reference full-scale configuration -------------------------------------

# Label inventory (NONE added automatically) of the 25 grammatical
# categories a merged Russian treebank exposes, used to size the
# full-scale instance.
FULL_SCALE_INVENTORY: dict[str, tuple[str, ...]] = {
    "upos": ("ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
             "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"),
    "Abbr": ("Yes",),
    "Animacy": ("Anim", "Inan"),
    "Aspect": ("Imp", "Perf"),
    "Case": ("Acc", "Dat", "Gen", "Ins", "Loc", "Nom", "Par", "Voc"),
    "Degree": ("Cmp", "Pos", "Sup"),
    "ExtPos": ("ADP", "ADV", "CCONJ", "INTJ", "PART", "PRON", "SCONJ"),
    "Foreign": ("Yes",),
    "Gender": ("Fem", "Masc", "Neut"),
    "InflClass": ("Conjugation", "Ind", "Nominal"),
    "Mood": ("Cnd", "Imp", "Ind"),
    "NameType": ("Com", "Geo", "Giv", "Pat", "Sur"),
    "NumForm": ("Digit", "Roman", "Word"),
    "NumType": ("Card", "Frac", "Mult", "Ord"),
    "Number": ("Plur", "Ptan", "Sing"),
    "Person": ("1", "2", "3"),
    "Polarity": ("Neg",),
    "Poss": ("Yes",),
    "PronType": ("Dem", "Ind", "Int", "Neg", "Prs", "Rel", "Tot"),
    "Reflex": ("Yes",),
    "Tense": ("Fut", "Past", "Pres"),
    "Typo": ("Yes",),
    "Variant": ("Short",),
    "VerbForm": ("Conv", "Fin", "Inf", "Part"),
    "Voice": ("Act", "Mid", "Pass"),
}


def full_scale_config(vocab_size: int = 2198) -> ModelConfig:
    """The full-scale configuration this architecture targets (~48.8M weights).

    The reference instance's exact hidden widths are not recoverable, so
    this reconstruction uses standard transformer ratios (d_ff = 4*d_model,
    scoring and classifier hidden widths equal to d_model). It lands within
    a couple of percent of FULL_SCALE_TARGET_PARAMS; the residual gap
    reflects the unknown exact widths and label inventory.
    """
    schemas = [
        CategorySchema(name, tuple(sorted(set(labels) | {"NONE"})))
        for name, labels in FULL_SCALE_INVENTORY.items()
    ]
    return ModelConfig(
        d_model=768,
        n_heads_word=8,
        n_heads_sent=8,
        d_ff=3072,
        vocab_size=vocab_size,
        schemas=schemas,
        n_layers=4,
        score_hidden=768,
        cls_hidden=768,
    )
