"""
Suggestion classifier: embeddings -> LSTM encoder -> attention -> linear -> log-softmax.

Training minimizes a class-weighted NLL (weighted mean over the mini-batch),
evaluates binary F1 on the validation set after every epoch and keeps the
parameters of the best epoch.
"""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import checkpoint as ckpt
from .data import Dataset, require_labels
from .encoder import EncoderConfig, attend, encode, init_encoder_params, pool_last
from .errors import ConfigError, DataError, TrainingError
from .metrics import evaluate
from .predictions import PredictionSet
from .preprocess import PipelineConfig, preprocess
from .tensor import Tensor, dropout, log_softmax, matmul, no_grad
from .vocab import EmbeddingMatrix, Vocabulary, build_vocab, load_vectors, lookup, random_embedding

log = logging.getLogger(__name__)

EMBEDDING_SOURCES = ("random", "pretrained_file")


def _from_dict(cls, d: dict, what: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown {what} field(s): {', '.join(unknown)}")
    return cls(**d)


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    embedding_dim: int = 100
    embedding_source: str = "random"
    # None: trainable for random embeddings, frozen for pretrained ones
    embedding_trainable: bool | None = None
    dropout_embed: float = 0.3
    dropout_attn: float = 0.3
    num_classes: int = 2
    # [w_neg, w_pos], or "balanced" for n / (2 * count) from the training labels
    class_weights: object = (1.0, 1.0)
    vocab_size: int = 0
    vocab_ref: str = ""

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = _from_dict(EncoderConfig, self.encoder, "encoder")
        if self.num_classes != 2:
            raise ConfigError("num_classes is fixed at 2")
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be positive, got {self.embedding_dim}")
        if self.embedding_source not in EMBEDDING_SOURCES:
            raise ConfigError(f"embedding_source must be one of {EMBEDDING_SOURCES}")
        for name in ("dropout_embed", "dropout_attn"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {p}")
        if self.class_weights != "balanced":
            w = tuple(float(x) for x in self.class_weights)
            if len(w) != 2 or not all(x > 0 and np.isfinite(x) for x in w):
                raise ConfigError(f"class_weights must be two positive numbers, got {self.class_weights}")
            self.class_weights = w

    @property
    def trainable_embeddings(self) -> bool:
        if self.embedding_trainable is None:
            return self.embedding_source == "random"
        return bool(self.embedding_trainable)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["class_weights"] != "balanced":
            d["class_weights"] = list(d["class_weights"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return _from_dict(cls, dict(d), "model")


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    batch_size: int = 16
    min_count: int = 1
    # stop once accuracy on the training set reaches this value (None: never)
    target_train_accuracy: float | None = None
    track_train_accuracy: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return _from_dict(cls, dict(d), "training")


def vocab_fingerprint(vocab: Vocabulary) -> str:
    return hashlib.sha256("\n".join(vocab.id_to_token).encode("utf-8")).hexdigest()[:16]


def balanced_weights(labels) -> tuple:
    """n / (2 * count_c) per class; a class absent from ``labels`` gets weight 1."""
    labels = list(labels)
    n = len(labels)
    out = []
    for c in (0, 1):
        k = sum(1 for y in labels if y == c)
        out.append(n / (2.0 * k) if k else 1.0)
    return tuple(out)


class SuggestionClassifier:
    def __init__(self, config: ModelConfig, vocab: Vocabulary, embedding: EmbeddingMatrix | None = None,
                 seed: int = 0, pipeline: PipelineConfig | None = None):
        if config.class_weights == "balanced":
            raise ConfigError("resolve 'balanced' class weights before building a model")
        self.config = config
        self.vocab = vocab
        self.pipeline = pipeline or PipelineConfig()
        config.vocab_size = len(vocab)
        config.vocab_ref = vocab_fingerprint(vocab)
        rng = np.random.default_rng(seed)
        emb_seed = int(rng.integers(2**31))
        if embedding is None:
            embedding = random_embedding(vocab, config.embedding_dim, emb_seed, config.trainable_embeddings)
        else:
            if embedding.dim != config.embedding_dim or embedding.vectors.shape[0] != len(vocab):
                raise ConfigError(
                    f"embedding matrix {embedding.vectors.shape} does not fit vocab of {len(vocab)} x {config.embedding_dim}"
                )
            embedding.trainable = config.trainable_embeddings
            embedding.vectors.requires_grad = embedding.trainable
        self.embedding = embedding
        enc = config.encoder
        self.encoder = init_encoder_params(config.embedding_dim, enc, rng)
        e = enc.output_size
        bound = 1.0 / np.sqrt(e)
        self.W_dec = Tensor(rng.uniform(-bound, bound, size=(2, e)), requires_grad=True)
        self.b_dec = Tensor(np.zeros(2), requires_grad=True)

    def named_parameters(self):
        yield "embedding", self.embedding.vectors
        yield from self.encoder.named_parameters()
        yield "decoder.W", self.W_dec
        yield "decoder.b", self.b_dec

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters() if p.requires_grad]

    def zero_grad(self):
        for _, p in self.named_parameters():
            p.grad = None

    def _sentence(self, tokens, training, rng):
        cfg = self.config
        x = lookup(tokens, self.vocab, self.embedding)
        x = dropout(x, cfg.dropout_embed, training, rng)
        states = encode(x, cfg.encoder, self.encoder, training, rng)
        if cfg.encoder.attention:
            sentence, weights = attend(states, self.encoder.attention)
        else:
            sentence, weights = pool_last(states, cfg.encoder.bidirectional), None
        return dropout(sentence, cfg.dropout_attn, training, rng), weights

    def forward(self, tokens, training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        """Log class probabilities [log p_neg, log p_pos] for one token sequence."""
        if not tokens:
            warnings.warn("empty token sequence classified as non-suggestion", stacklevel=2)
            return Tensor(np.array([0.0, -np.inf]))
        sentence, _ = self._sentence(tokens, training, rng)
        return log_softmax(matmul(self.W_dec, sentence) + self.b_dec)

    def attention_weights(self, tokens) -> np.ndarray | None:
        if not tokens or not self.config.encoder.attention:
            return None
        with no_grad():
            _, weights = self._sentence(tokens, False, None)
        return weights.data.copy()

    def predict_proba(self, token_lists) -> np.ndarray:
        out = np.empty((len(token_lists), 2))
        with no_grad(), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for i, tokens in enumerate(token_lists):
                out[i] = np.exp(self.forward(tokens).data)
        return out

    def tokenize(self, text: str) -> list:
        return preprocess(text, self.pipeline).tokens

    def to_checkpoint(self, metadata: dict | None = None) -> ckpt.Checkpoint:
        return ckpt.Checkpoint(
            config=self.config.to_dict(),
            vocab=list(self.vocab.id_to_token),
            params={name: p.data.copy() for name, p in self.named_parameters()},
            pipeline=list(self.pipeline.enabled_stages),
            metadata=dict(metadata or {}),
        )

    @classmethod
    def from_checkpoint(cls, ck: ckpt.Checkpoint) -> "SuggestionClassifier":
        config = ModelConfig.from_dict(ck.config)
        vocab = Vocabulary(ck.vocab)
        if config.vocab_size != len(vocab) or config.vocab_ref != vocab_fingerprint(vocab):
            raise ConfigError(
                f"checkpoint vocabulary ({len(vocab)} tokens) does not match its config "
                f"(vocab_size={config.vocab_size}, vocab_ref={config.vocab_ref})"
            )
        model = cls(config, vocab, pipeline=PipelineConfig(tuple(ck.pipeline)))
        expected = {name: p for name, p in model.named_parameters()}
        if set(expected) != set(ck.params):
            missing = sorted(set(expected) - set(ck.params))
            extra = sorted(set(ck.params) - set(expected))
            raise ckpt.CheckpointManifestError(f"parameter mismatch: missing {missing}, unexpected {extra}")
        for name, tensor in expected.items():
            arr = np.asarray(ck.params[name], dtype=np.float64)
            if arr.shape != tensor.shape:
                raise ckpt.CheckpointManifestError(f"{name}: shape {arr.shape} does not match config {tensor.shape}")
            tensor.data = arr.copy()
        return model


def weighted_nll(log_probs, labels, class_weights) -> Tensor:
    """sum_i w[y_i] * -log p_i[y_i] / sum_i w[y_i]."""
    if isinstance(log_probs, Tensor):
        if log_probs.ndim != 2:
            raise DataError(f"expected a [N x 2] tensor of log-probabilities, got {log_probs.shape}")
        log_probs = [log_probs[i] for i in range(log_probs.shape[0])]
    log_probs, labels = list(log_probs), list(labels)
    if not log_probs:
        raise DataError("empty batch")
    if len(log_probs) != len(labels):
        raise DataError(f"{len(log_probs)} predictions but {len(labels)} labels")
    w = [float(x) for x in class_weights]
    if len(w) != 2 or min(w) <= 0:
        raise ConfigError(f"class weights must be two positive numbers, got {class_weights}")
    total, wsum = None, 0.0
    for lp, y in zip(log_probs, labels):
        if y not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {y!r}")
        term = lp[y] * (-w[y])
        total = term if total is None else total + term
        wsum += w[y]
    return total / wsum


class SGD:
    def __init__(self, params, lr):
        self.params, self.lr = list(params), lr

    def step(self):
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad

    def zero_grad(self):
        for p in self.params:
            p.grad = None


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params, self.lr, self.betas, self.eps = list(params), lr, betas, eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def make_optimizer(name, params, lr):
    return Adam(params, lr) if name == "adam" else SGD(params, lr)


def _tokens_for(ds: Dataset, pipeline: PipelineConfig) -> list:
    return [preprocess(s.text, pipeline).tokens for s in ds]


def _accuracy(model, token_lists, labels) -> float:
    pred = (model.predict_proba(token_lists)[:, 1] > 0.5).astype(int)
    return float(np.mean(pred == np.asarray(labels)))


def train(train_ds: Dataset, val_ds: Dataset | None, model_cfg: ModelConfig, train_cfg: TrainConfig,
          pipeline: PipelineConfig | None = None, vectors_path=None, on_epoch=None):
    """Fit a classifier; returns (checkpoint of the best validation epoch, per-epoch log).

    Without a validation set the last epoch is kept.  ``on_epoch`` is called
    with each log entry as it is produced.
    """
    pipeline = pipeline or PipelineConfig()
    require_labels(train_ds, "training set")
    if val_ds:
        require_labels(val_ds, "validation set")
        overlap = sorted(set(train_ds.ids) & set(val_ds.ids))
        if overlap:
            raise DataError(f"training and validation sets share ids: {', '.join(overlap[:10])}")
    train_tokens = _tokens_for(train_ds, pipeline)
    keep = [i for i, t in enumerate(train_tokens) if t]
    if len(keep) < len(train_tokens):
        log.warning("skipping %d training samples with no tokens", len(train_tokens) - len(keep))
    if not keep:
        raise DataError("training set has no usable samples")
    train_labels = train_ds.labels
    vocab = build_vocab((train_tokens[i] for i in keep), train_cfg.min_count)

    cfg = ModelConfig.from_dict(model_cfg.to_dict())
    if cfg.class_weights == "balanced":
        cfg.class_weights = balanced_weights(train_labels[i] for i in keep)
    embedding = None
    if cfg.embedding_source == "pretrained_file":
        if vectors_path is None:
            raise ConfigError("embedding_source 'pretrained_file' needs a vectors path")
        embedding = load_vectors(vectors_path, vocab, cfg.embedding_dim, seed=train_cfg.seed,
                                 trainable=cfg.trainable_embeddings)
        log.info("loaded vectors cover %.1f%% of the vocabulary", 100 * embedding.coverage)
    model = SuggestionClassifier(cfg, vocab, embedding, seed=train_cfg.seed, pipeline=pipeline)
    opt = make_optimizer(train_cfg.optimizer, model.parameters(), train_cfg.learning_rate)

    shuffle_seq, dropout_seq = np.random.SeedSequence(train_cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    val_tokens = _tokens_for(val_ds, pipeline) if val_ds else None
    weights = cfg.class_weights
    bs = train_cfg.batch_size

    history, best_state, best_f1, best_epoch = [], None, -1.0, 0
    for epoch in range(1, train_cfg.epochs + 1):
        order = [keep[i] for i in shuffle_rng.permutation(len(keep))]
        loss_sum, n_batches = 0.0, 0
        for start in range(0, len(order), bs):
            batch = order[start:start + bs]
            lps = [model.forward(train_tokens[i], training=True, rng=dropout_rng) for i in batch]
            loss = weighted_nll(lps, [train_labels[i] for i in batch], weights)
            if not np.isfinite(loss.item()):
                ids = ", ".join(train_ds[i].id for i in batch)
                raise TrainingError(f"non-finite loss {loss.item()} in epoch {epoch}, batch with samples {ids}")
            loss.backward()
            opt.step()
            opt.zero_grad()
            loss_sum += loss.item()
            n_batches += 1

        entry = {"epoch": epoch, "loss": loss_sum / n_batches}
        if val_ds:
            probs = model.predict_proba(val_tokens)
            rep = evaluate([int(p[1] > p[0]) for p in probs], val_ds.labels)
            entry.update(val_micro_f1=rep.micro_f1, val_macro_f1=rep.macro_f1, val_binary_f1=rep.binary_f1)
        train_acc = None
        if train_cfg.track_train_accuracy or train_cfg.target_train_accuracy is not None:
            train_acc = _accuracy(model, [train_tokens[i] for i in keep], [train_labels[i] for i in keep])
            entry["train_accuracy"] = train_acc
        history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        score = entry.get("val_binary_f1", 0.0) if val_ds else float(epoch)
        if score > best_f1 or not val_ds:
            best_f1, best_epoch = score, epoch
            best_state = {name: p.data.copy() for name, p in model.named_parameters()}
        if train_cfg.target_train_accuracy is not None and train_acc >= train_cfg.target_train_accuracy:
            break

    for name, p in model.named_parameters():
        p.data = best_state[name]
    meta = {"seed": train_cfg.seed, "selected_epoch": best_epoch, "epochs_run": len(history),
            "training": train_cfg.to_dict()}
    return model.to_checkpoint(meta), history


def _as_model(source) -> SuggestionClassifier:
    if isinstance(source, SuggestionClassifier):
        return source
    if isinstance(source, ckpt.Checkpoint):
        return SuggestionClassifier.from_checkpoint(source)
    return SuggestionClassifier.from_checkpoint(ckpt.load(source))


def predict(dataset: Dataset, source) -> PredictionSet:
    """Eval-mode probabilities for every sample.

    ``source`` is a model, an in-memory Checkpoint or a checkpoint path.  Text is
    preprocessed with the pipeline stored alongside the model.
    """
    model = _as_model(source)
    token_lists = [model.tokenize(s.text) for s in dataset]
    for s, toks in zip(dataset, token_lists):
        if not toks:
            log.warning("sample %s has no tokens; predicted as non-suggestion", s.id)
    return PredictionSet(dataset.ids, model.predict_proba(token_lists))
