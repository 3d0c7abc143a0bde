"""Morphological tagging toolkit: open-dictionary subword tokenization,
a multi-head-attention tagger with learned subtoken pooling, training,
and a full evaluation battery over CoNLL-U corpora."""

from .bpe import BpeModel, WordEncoding, load_bpe, save_bpe, train_bpe
from .conllu import (
    CategorySchema,
    CorpusStats,
    Sentence,
    Word,
    build_schemas,
    corpus_stats,
    format_conllu,
    parse_conllu,
)
from .evaluate import MetricsReport, compute_report, evaluate_model, predict_labels
from .model import (
    ModelConfig,
    TaggerModel,
    forward,
    full_scale_config,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from .train import TrainConfig, make_batches, multi_head_loss, train_loop

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
