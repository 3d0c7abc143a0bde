"""Batching, the joint multi-head loss, AdamW, and the training loop.

Batches carry a two-level padding scheme: subtoken slots beyond a word's
true length are PAD, word slots beyond a sentence's length are masked out
of attention and loss. Gold tensors hold a label index per (sentence,
word) with the NONE index wherever a feature is absent.

One updater owns the parameters and optimizer state; batch preparation is
pure and could run on other threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .bpe import BpeModel, PAD_ID
from .conllu import CategorySchema, Sentence, NONE_LABEL
from .model import TaggerModel, forward
from .tensor import Tensor


class NumericError(RuntimeError):
    """Training hit a non-finite loss or gradient; aborting loudly."""


@dataclass
class TrainConfig:
    batch_size: int = 96
    epochs: int = 35
    lr_stages: tuple[tuple[int, float], ...] = ((15, 1e-4), (10, 5e-5), (10, 1e-5))
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    max_words: int = 256

    def __post_init__(self):
        self.lr_stages = tuple((int(n), float(lr)) for n, lr in self.lr_stages)
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if any(n < 1 or lr <= 0 for n, lr in self.lr_stages):
            raise ValueError("every stage needs a positive epoch count and learning rate")
        if sum(n for n, _ in self.lr_stages) != self.epochs:
            raise ValueError(
                f"stage epoch counts {[n for n, _ in self.lr_stages]} must sum to epochs={self.epochs}"
            )


@dataclass
class Batch:
    token_ids: np.ndarray  # [B, W, S] int64, PAD on padding
    subtoken_mask: np.ndarray  # [B, W, S] bool
    word_mask: np.ndarray  # [B, W] bool
    gold: dict[str, np.ndarray]  # category -> [B, W] int64 label indices

    @property
    def n_real_words(self) -> int:
        return int(self.word_mask.sum())


def lr_for_epoch(config: TrainConfig, epoch: int) -> float:
    if epoch < 0 or epoch >= config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    passed = 0
    for count, lr in config.lr_stages:
        passed += count
        if epoch < passed:
            return lr
    raise AssertionError("unreachable: stages sum to epochs")


def make_batches(
    sentences: list[Sentence],
    bpe: BpeModel,
    schemas: list[CategorySchema],
    batch_size: int,
    shuffle_seed: int | None = None,
    max_words: int = 256,
    max_subtokens: int = 6,
    strict_labels: bool = True,
):
    """Yield padded batches; deterministic shuffle when a seed is given.

    Sentences longer than ``max_words`` are truncated. With
    ``strict_labels`` a gold label missing from its schema raises; without
    it the gold index becomes -1, which never matches a prediction (used
    for held-out data that may contain unseen labels).
    """
    if not sentences:
        raise ValueError("make_batches requires at least one sentence")
    order = np.arange(len(sentences))
    if shuffle_seed is not None:
        rng = np.random.Generator(np.random.Philox(shuffle_seed))
        order = rng.permutation(order)
    index = {schema.name: {label: i for i, label in enumerate(schema.labels)} for schema in schemas}
    none_index = {schema.name: schema.none_index for schema in schemas}

    for start in range(0, len(order), batch_size):
        chunk = [sentences[i] for i in order[start : start + batch_size]]
        lengths = [min(len(s.words), max_words) for s in chunk]
        b, w = len(chunk), max(lengths)
        token_ids = np.full((b, w, max_subtokens), PAD_ID, dtype=np.int64)
        subtoken_mask = np.zeros((b, w, max_subtokens), dtype=bool)
        word_mask = np.zeros((b, w), dtype=bool)
        gold = {name: np.full((b, w), none_index[name], dtype=np.int64) for name in index}
        for si, (sentence, length) in enumerate(zip(chunk, lengths)):
            for wi in range(length):
                word = sentence.words[wi]
                enc = bpe.encode_word(word.surface, max_subtokens)
                token_ids[si, wi] = enc.ids
                subtoken_mask[si, wi, : enc.true_length] = True
                word_mask[si, wi] = True
                for name, labels in index.items():
                    label = word.labels.get(name, NONE_LABEL)
                    idx = labels.get(label)
                    if idx is None:
                        if strict_labels:
                            raise ValueError(
                                f"label {label!r} of category {name!r} is not in the schema"
                            )
                        idx = -1
                    gold[name][si, wi] = idx
        yield Batch(token_ids, subtoken_mask, word_mask, gold)


def multi_head_loss(logits: dict[str, Tensor], gold: dict[str, np.ndarray], word_mask: np.ndarray) -> Tensor:
    """Mean over categories of the masked mean word cross-entropy."""
    word_mask = np.asarray(word_mask, dtype=bool)
    n_real = int(word_mask.sum())
    if n_real == 0:
        raise ValueError("multi_head_loss: batch contains no unmasked words")
    flat_mask = T.constant(word_mask.reshape(-1).astype(T.get_default_dtype()))
    total: Tensor | None = None
    names = sorted(logits)
    for name in names:
        head = logits[name]
        b, w, n_labels = head.shape
        targets = np.asarray(gold[name]).reshape(-1)
        if targets.min() < 0:
            raise ValueError(f"multi_head_loss: category {name!r} has out-of-schema gold labels")
        per_word = T.cross_entropy(T.reshape(head, (b * w, n_labels)), targets)
        cat_loss = T.scale(T.tsum(T.mul(per_word, flat_mask)), 1.0 / n_real)
        total = cat_loss if total is None else T.add(total, cat_loss)
    return T.scale(total, 1.0 / len(names))


class OptimizerState:
    """First/second moment estimates per parameter plus the step counter."""

    def __init__(self, params: dict[str, Tensor]):
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.step_count = 0


def adamw_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    weight_decay: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One decoupled-weight-decay Adam update, in place.

    Decay is applied directly to the parameters (p *= 1 - lr*wd) and is
    independent of the bias-corrected moment update, so with zero gradients
    parameters shrink by exactly that factor each step.
    """
    for name, g in grads.items():
        if g is None or not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    dev_accuracy: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.lr:.8g}\t{self.train_loss:.6f}\t{self.dev_accuracy:.6f}"


def _shuffle_seed(seed: int, epoch: int) -> int:
    return (seed * 1_000_003 + epoch) % (2**63)


def joint_word_accuracy(model: TaggerModel, sentences: list[Sentence], bpe: BpeModel, config: TrainConfig) -> float:
    """Fraction of words with every category predicted correctly (all schemas)."""
    correct = 0
    total = 0
    for batch in make_batches(
        sentences,
        bpe,
        model.config.schemas,
        config.batch_size,
        shuffle_seed=None,
        max_words=config.max_words,
        max_subtokens=model.config.max_subtokens,
        strict_labels=False,
    ):
        logits = forward(model, batch)
        all_ok = np.ones(batch.word_mask.shape, dtype=bool)
        for name, head in logits.items():
            pred = head.data.argmax(axis=-1)
            all_ok &= pred == batch.gold[name]
        correct += int(all_ok[batch.word_mask].sum())
        total += batch.n_real_words
    return correct / total if total else 0.0


def train_loop(
    model: TaggerModel,
    train_sentences: list[Sentence],
    dev_sentences: list[Sentence],
    config: TrainConfig,
    bpe: BpeModel,
    log_file=None,
    start_epoch: int = 0,
    opt_state: OptimizerState | None = None,
    on_best=None,
):
    """Train, track dev accuracy per epoch, and keep the best-on-dev weights.

    Returns ``(model, logs)`` with the best-on-dev parameters restored into
    the model. ``on_best(model)`` fires whenever dev accuracy improves
    (used to write checkpoints). ``start_epoch``/``opt_state`` allow
    resuming: with identical seeds the loss trajectory continues exactly as
    in an uninterrupted run. Aborts with NumericError on non-finite loss.
    """
    if not train_sentences:
        raise ValueError("train_loop requires a non-empty training set")
    if not dev_sentences:
        raise ValueError("train_loop requires a non-empty dev set")
    if opt_state is None:
        opt_state = OptimizerState(model.params)

    logs: list[EpochLog] = []
    best_acc = -1.0
    best_params = model.copy_param_data()
    for epoch in range(start_epoch, config.epochs):
        lr = lr_for_epoch(config, epoch)
        batch_losses = []
        for batch in make_batches(
            train_sentences,
            bpe,
            model.config.schemas,
            config.batch_size,
            shuffle_seed=_shuffle_seed(config.seed, epoch),
            max_words=config.max_words,
            max_subtokens=model.config.max_subtokens,
        ):
            model.zero_grad()
            logits = forward(model, batch)
            loss = multi_head_loss(logits, batch.gold, batch.word_mask)
            if not np.isfinite(loss.data):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            T.backward(loss)
            adamw_step(
                dict(model.named_parameters()),
                {name: p.grad for name, p in model.named_parameters()},
                opt_state,
                lr,
                config.weight_decay,
                config.beta1,
                config.beta2,
                config.eps,
            )
            batch_losses.append(float(loss.data))
        train_loss = float(np.mean(batch_losses))
        dev_acc = joint_word_accuracy(model, dev_sentences, bpe, config)
        entry = EpochLog(epoch, lr, train_loss, dev_acc)
        logs.append(entry)
        if log_file is not None:
            log_file.write(entry.line() + "\n")
            log_file.flush()
        if dev_acc > best_acc:
            best_acc = dev_acc
            best_params = model.copy_param_data()
            if on_best is not None:
                on_best(model)
    model.load_param_data(best_params)
    return model, logs
