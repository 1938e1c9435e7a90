"""Learnable similarity scorer: MLP over concatenated embedding pairs.

ReLU hidden layers, tanh scalar output. Trained with Adam (manual, 64-bit,
single-threaded, bit-reproducible per seed) under either MSE against cosine
similarity or a quadratic contrastive objective that pulls positive pairs
toward +1 and negatives toward -1.
"""
from __future__ import annotations

import base64
import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics as _metrics
from .corpus import PairedCorpus

FULL_DATASET_LIMIT = 2048
_ONE_INSIDE = float(np.nextafter(1.0, 0.0))


class ScorerError(Exception):
    code = "scorer-error"


class ScorerModel:
    """Feed-forward scorer; weights are float64 throughout."""

    def __init__(self, input_dim, hidden_sizes, weights, biases):
        self.input_dim = int(input_dim)
        self.hidden_sizes = [int(h) for h in hidden_sizes]
        if any(h <= 0 for h in self.hidden_sizes) or len(self.hidden_sizes) > 5:
            raise ScorerError("hidden_sizes must be up to 5 positive integers")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        dims = [self.input_dim] + self.hidden_sizes + [1]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ScorerError(f"layer {i} shape mismatch: {w.shape}, {b.shape}")

    @classmethod
    def initialize(cls, input_dim, hidden_sizes, seed=0):
        """Glorot-uniform weights, zero biases, seeded."""
        rng = np.random.default_rng(seed)
        dims = [int(input_dim)] + [int(h) for h in hidden_sizes] + [1]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(input_dim, hidden_sizes, weights, biases)

    def forward_batch(self, X) -> np.ndarray:
        """Scores for a (P, input_dim) batch of concatenated pairs."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.input_dim:
            raise ScorerError(f"input dim {X.shape[1]} != {self.input_dim}")
        h = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        out = np.tanh(h @ self.weights[-1] + self.biases[-1])[:, 0]
        # tanh rounds to exactly +/-1 for |z| > ~19; keep the open interval
        return np.clip(out, -_ONE_INSIDE, _ONE_INSIDE)

    def _forward_cached(self, X):
        acts = [np.asarray(X, dtype=np.float64)]
        h = acts[0]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        out = np.tanh(h @ self.weights[-1] + self.biases[-1])[:, 0]
        return np.clip(out, -_ONE_INSIDE, _ONE_INSIDE), acts

    def _backward(self, acts, out, dloss_dout):
        """Gradients of sum(dloss_dout * out) w.r.t. every parameter."""
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        delta = (dloss_dout * (1.0 - out * out))[:, None]
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = acts[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (acts[layer] > 0.0)
        return grad_w, grad_b

    def pairwise_scores(self, text_data, image_data, chunk=256) -> np.ndarray:
        """Dense (N_text, N_image) score matrix from forward passes."""
        T = np.asarray(text_data, dtype=np.float64)
        I = np.asarray(image_data, dtype=np.float64)
        if T.shape[1] + I.shape[1] != self.input_dim:
            raise ScorerError("concatenated dim does not match input_dim")
        out = np.empty((T.shape[0], I.shape[0]))
        for start in range(0, T.shape[0], chunk):
            stop = min(start + chunk, T.shape[0])
            block = np.concatenate(
                [
                    np.repeat(T[start:stop], I.shape[0], axis=0),
                    np.tile(I, (stop - start, 1)),
                ],
                axis=1,
            )
            out[start:stop] = self.forward_batch(block).reshape(stop - start, -1)
        return out

    def copy(self) -> "ScorerModel":
        return ScorerModel(self.input_dim, list(self.hidden_sizes),
                           [w.copy() for w in self.weights],
                           [b.copy() for b in self.biases])


def forward(model: ScorerModel, x, y) -> float:
    """Score one (text, image) pair; output is in (-1, 1)."""
    vec = np.concatenate([np.asarray(x, np.float64).ravel(),
                          np.asarray(y, np.float64).ravel()])
    if vec.size != model.input_dim:
        raise ScorerError(f"pair dim {vec.size} != {model.input_dim}")
    return float(model.forward_batch(vec[None, :])[0])


def contrastive_pair_loss(d_hat: float, is_positive: bool) -> float:
    if is_positive:
        return 0.5 * (1.0 - d_hat) ** 2
    return 0.5 * (d_hat + 1.0) ** 2


def _contrastive_losses(d_hat, positive_mask):
    pos = 0.5 * (1.0 - d_hat) ** 2
    neg = 0.5 * (d_hat + 1.0) ** 2
    return np.where(positive_mask, pos, neg)


def _contrastive_dloss(d_hat, positive_mask):
    return np.where(positive_mask, d_hat - 1.0, d_hat + 1.0)


def per_query_loss(model: ScorerModel, query, candidates, positive_index) -> float:
    """Mean contrastive pair loss of one query against all its candidates."""
    candidates = np.asarray(candidates, dtype=np.float64)
    if not 0 <= positive_index < candidates.shape[0]:
        raise ScorerError("positive_index out of range")
    q = np.asarray(query, np.float64).ravel()
    X = np.concatenate([np.tile(q, (candidates.shape[0], 1)), candidates], axis=1)
    d_hat = model.forward_batch(X)
    mask = np.zeros(candidates.shape[0], dtype=bool)
    mask[positive_index] = True
    return float(np.mean(_contrastive_losses(d_hat, mask)))


def _aligned_pairs(corpus: PairedCorpus):
    """(X_text, Y_image) arrays with matching rows for a one-to-one corpus."""
    if corpus.captions_per_item != 1:
        raise ScorerError("scorer training requires a one-to-one corpus")
    b_index = {s: i for i, s in enumerate(corpus.side_b.ids)}
    X = corpus.side_a.data.astype(np.float64)
    rows = []
    for qid in corpus.side_a.ids:
        rel = corpus.relevance_a_to_b.entries.get(qid)
        if not rel or len(rel) != 1:
            raise ScorerError(f"query {qid!r} is not one-to-one")
        rows.append(b_index[rel[0]])
    Y = corpus.side_b.data.astype(np.float64)[rows]
    return X, Y


def _pair_loss_matrix(model, X, Y, loss, chunk=128):
    n = X.shape[0]
    out = np.empty((n, n))
    if loss == "mse":
        targets = _cosine_matrix(X, Y)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = np.concatenate(
            [np.repeat(X[start:stop], n, axis=0), np.tile(Y, (stop - start, 1))],
            axis=1,
        )
        d_hat = model.forward_batch(block).reshape(stop - start, n)
        if loss == "contrastive":
            mask = np.zeros((stop - start, n), dtype=bool)
            for r in range(stop - start):
                mask[r, start + r] = True
            out[start:stop] = _contrastive_losses(d_hat, mask)
        else:
            out[start:stop] = (d_hat - targets[start:stop]) ** 2
    return out


def _cosine_matrix(X, Y):
    nx = np.sqrt(np.sum(X * X, axis=1))
    ny = np.sqrt(np.sum(Y * Y, axis=1))
    return np.clip((X @ Y.T) / (nx[:, None] * ny[None, :]), -1.0, 1.0)


def dataset_loss(model: ScorerModel, corpus: PairedCorpus,
                 loss: str = "contrastive") -> float:
    """Mean pair loss over all N^2 query-candidate combinations."""
    X, Y = _aligned_pairs(corpus)
    return float(np.mean(_pair_loss_matrix(model, X, Y, loss)))


def dataset_loss_sides(model: ScorerModel, corpus: PairedCorpus,
                       loss: str = "contrastive"):
    """(text-side mean, image-side mean) from one shared pair-loss matrix."""
    X, Y = _aligned_pairs(corpus)
    L = _pair_loss_matrix(model, X, Y, loss)
    return float(np.mean(L.mean(axis=1))), float(np.mean(L.mean(axis=0)))


def mse_loss(model: ScorerModel, X, Y, targets=None) -> float:
    """Mean squared error of forward scores against cosine targets."""
    X = np.asarray(X, np.float64)
    Y = np.asarray(Y, np.float64)
    if targets is None:
        targets = np.array([_metrics.score("cosine", x, y) for x, y in zip(X, Y)])
    d_hat = model.forward_batch(np.concatenate([X, Y], axis=1))
    return float(np.mean((d_hat - targets) ** 2))


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 5e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 100
    early_stop_patience: int = 5
    early_stop_min_improvement: float = 0.01  # relative, vs previous epoch
    loss: str = "contrastive"
    negative_mode: str = "in_batch"
    seed: int = 0

    def __post_init__(self):
        if self.base_lr <= 0 or self.adam_eps <= 0 or self.batch_size < 1:
            raise ScorerError("rates and batch size must be positive")
        if self.early_stop_patience < 1:
            raise ScorerError("patience must be >= 1")
        if self.loss not in ("mse", "contrastive"):
            raise ScorerError(f"unknown loss {self.loss!r}")
        if self.negative_mode not in ("in_batch", "full_dataset"):
            raise ScorerError(f"unknown negative_mode {self.negative_mode!r}")


def effective_lr(base_lr: float, epoch: int) -> float:
    """Scheduled rate: base_lr / (1 + 2^(0.5 c)), c = 0 for the first epoch."""
    return base_lr / (1.0 + 2.0 ** (0.5 * epoch))


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    stopped_epoch: int = -1
    best_epoch: int = -1
    initial_loss: float = math.nan
    final_loss: float = math.nan

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
            for c, (t, v, r) in enumerate(zip(self.train_loss, self.val_loss, self.lr)):
                writer.writerow([c, repr(t), repr(v), repr(r)])


class _Adam:
    def __init__(self, model, config):
        self.cfg = config
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]
        self.t = 0

    def step(self, model, grad_w, grad_b, lr):
        self.t += 1
        b1, b2, eps = self.cfg.adam_beta1, self.cfg.adam_beta2, self.cfg.adam_eps
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for i in range(len(model.weights)):
            for params, grads, m, v in (
                (model.weights, grad_w, self.m_w, self.v_w),
                (model.biases, grad_b, self.m_b, self.v_b),
            ):
                m[i] = b1 * m[i] + (1.0 - b1) * grads[i]
                v[i] = b2 * v[i] + (1.0 - b2) * grads[i] ** 2
                params[i] = params[i] - lr * (m[i] / corr1) / (
                    np.sqrt(v[i] / corr2) + eps
                )


def _batch_step(model, optimizer, Xb, Yb, loss, lr):
    """One Adam update on the B x B pair grid of a batch; returns mean loss."""
    B = Xb.shape[0]
    pairs = np.concatenate(
        [np.repeat(Xb, B, axis=0), np.tile(Yb, (B, 1))], axis=1
    )
    out, acts = model._forward_cached(pairs)
    if loss == "contrastive":
        mask = np.eye(B, dtype=bool).ravel()
        losses = _contrastive_losses(out, mask)
        dloss = _contrastive_dloss(out, mask) / out.size
    else:
        targets = _cosine_matrix(Xb, Yb).ravel()
        losses = (out - targets) ** 2
        dloss = 2.0 * (out - targets) / out.size
    grad_w, grad_b = model._backward(acts, out, dloss)
    optimizer.step(model, grad_w, grad_b, lr)
    return float(np.mean(losses))


def train(corpus_splits, config: TrainConfig, arch):
    """Train a scorer on (train, val[, test]) corpus splits.

    Returns (model, history); the returned model carries the weights of the
    best validation epoch.
    """
    train_corpus, val_corpus = corpus_splits[0], corpus_splits[1]
    Xt, Yt = _aligned_pairs(train_corpus)
    if Xt.shape[0] == 0:
        raise ScorerError("empty training split")
    Xv, Yv = _aligned_pairs(val_corpus)
    if Xv.shape[0] == 0:
        raise ScorerError("empty validation split")
    n = Xt.shape[0]
    if config.negative_mode == "full_dataset" and n > FULL_DATASET_LIMIT:
        raise ScorerError(
            f"full_dataset mode limited to N <= {FULL_DATASET_LIMIT}, got {n}"
        )
    input_dim = Xt.shape[1] + Yt.shape[1]
    model = ScorerModel.initialize(input_dim, arch, seed=config.seed)
    optimizer = _Adam(model, config)
    rng = np.random.default_rng(config.seed)

    history = TrainHistory()
    history.initial_loss = float(np.mean(_pair_loss_matrix(model, Xt, Yt, config.loss)))
    best_val = math.inf
    best_weights = None
    patience_used = 0
    prev_val = None

    for epoch in range(config.max_epochs):
        lr = effective_lr(config.base_lr, epoch)
        if config.negative_mode == "full_dataset":
            epoch_loss = _full_dataset_step(model, optimizer, Xt, Yt, config.loss, lr)
        else:
            order = rng.permutation(n)
            batch_losses = []
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                batch_losses.append(
                    _batch_step(model, optimizer, Xt[idx], Yt[idx], config.loss, lr)
                )
            epoch_loss = float(np.mean(batch_losses))
        val_loss = float(np.mean(_pair_loss_matrix(model, Xv, Yv, config.loss)))
        history.train_loss.append(epoch_loss)
        history.val_loss.append(val_loss)
        history.lr.append(lr)
        if val_loss < best_val:
            best_val = val_loss
            history.best_epoch = epoch
            best_weights = ([w.copy() for w in model.weights],
                            [b.copy() for b in model.biases])
        if prev_val is not None:
            improvement = (prev_val - val_loss) / prev_val if prev_val != 0 else 0.0
            if improvement < config.early_stop_min_improvement:
                patience_used += 1
            else:
                patience_used = 0
        prev_val = val_loss
        history.stopped_epoch = epoch
        if patience_used >= config.early_stop_patience:
            break
    if best_weights is not None:
        model.weights = best_weights[0]
        model.biases = best_weights[1]
    history.final_loss = float(np.mean(_pair_loss_matrix(model, Xt, Yt, config.loss)))
    return model, history


def _full_dataset_step(model, optimizer, X, Y, loss, lr, chunk=128):
    """Single Adam step on the exact N x N objective, chunked for memory."""
    n = X.shape[0]
    total = n * n
    if loss == "mse":
        targets = _cosine_matrix(X, Y)
    acc_w = [np.zeros_like(w) for w in model.weights]
    acc_b = [np.zeros_like(b) for b in model.biases]
    loss_sum = 0.0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        pairs = np.concatenate(
            [np.repeat(X[start:stop], n, axis=0), np.tile(Y, (stop - start, 1))],
            axis=1,
        )
        out, acts = model._forward_cached(pairs)
        if loss == "contrastive":
            mask = np.zeros((stop - start, n), dtype=bool)
            for r in range(stop - start):
                mask[r, start + r] = True
            mask = mask.ravel()
            losses = _contrastive_losses(out, mask)
            dloss = _contrastive_dloss(out, mask) / total
        else:
            t = targets[start:stop].ravel()
            losses = (out - t) ** 2
            dloss = 2.0 * (out - t) / total
        gw, gb = model._backward(acts, out, dloss)
        for i in range(len(acc_w)):
            acc_w[i] += gw[i]
            acc_b[i] += gb[i]
        loss_sum += float(np.sum(losses))
    optimizer.step(model, acc_w, acc_b, lr)
    return loss_sum / total


def gradient_check(model: ScorerModel, X, Y, loss: str = "contrastive",
                   n_params: int = 100, step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error of analytic gradients vs central differences."""
    X = np.asarray(X, np.float64)
    Y = np.asarray(Y, np.float64)
    B = X.shape[0]
    pairs = np.concatenate(
        [np.repeat(X, B, axis=0), np.tile(Y, (B, 1))], axis=1
    )
    mask = np.eye(B, dtype=bool).ravel()
    if loss == "mse":
        targets = _cosine_matrix(X, Y).ravel()

    def total_loss(m):
        out, acts = m._forward_cached(pairs)
        pattern = tuple((a > 0.0).tobytes() for a in acts[1:])
        if loss == "contrastive":
            return float(np.mean(_contrastive_losses(out, mask))), pattern
        return float(np.mean((out - targets) ** 2)), pattern

    out, acts = model._forward_cached(pairs)
    if loss == "contrastive":
        dloss = _contrastive_dloss(out, mask) / out.size
    else:
        dloss = 2.0 * (out - targets) / out.size
    grad_w, grad_b = model._backward(acts, out, dloss)
    analytic = np.concatenate(
        [g.ravel() for g in grad_w] + [g.ravel() for g in grad_b]
    )
    total = analytic.size
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(max(n_params, 100), total), replace=False)

    flat_params = [model.weights[i] for i in range(len(model.weights))]
    flat_params += [model.biases[i] for i in range(len(model.biases))]
    offsets = np.cumsum([0] + [p.size for p in flat_params])

    worst = 0.0
    probe = model.copy()
    probe_params = probe.weights + probe.biases
    for flat_idx in picks:
        arr_i = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        local = flat_idx - offsets[arr_i]
        target = probe_params[arr_i].ravel()
        orig = target[local]
        target[local] = orig + step
        plus, pat_plus = total_loss(probe)
        target[local] = orig - step
        minus, pat_minus = total_loss(probe)
        target[local] = orig
        if pat_plus != pat_minus:
            # perturbation crosses a rectifier kink; the central difference
            # is not a valid derivative estimate there
            continue
        numeric = (plus - minus) / (2.0 * step)
        err = abs(analytic[flat_idx] - numeric) / max(1e-8, abs(numeric))
        worst = max(worst, err)
    return worst


def search_architectures(space, budget, corpus_splits, config: TrainConfig):
    """Seeded random search over (depth, widths); returns (arch, val_loss).

    `space` is either an explicit list of architectures (cycled through) or a
    dict with `depths` and `widths` iterables.
    """
    if budget < 1:
        raise ScorerError("budget must be >= 1")
    rng = np.random.default_rng(config.seed)
    explicit = isinstance(space, (list, tuple))
    if not explicit:
        depths = list(space.get("depths", range(1, 6)))
        widths = list(space.get("widths", range(100, 1101, 100)))
    best = None
    for trial in range(budget):
        if explicit:
            arch = list(space[trial % len(space)])
        else:
            depth = int(rng.choice(depths))
            arch = [int(rng.choice(widths)) for _ in range(depth)]
        trial_config = replace(config, seed=config.seed + trial)
        _, history = train(corpus_splits, trial_config, arch)
        val = min(history.val_loss)
        if best is None or val < best[1]:
            best = (arch, val)
    return best


def save_model(model: ScorerModel, path, extra=None) -> None:
    """JSON header plus base64 little-endian float64 payload per layer."""
    obj = {
        "input_dim": model.input_dim,
        "hidden_sizes": model.hidden_sizes,
        "weights": [base64.b64encode(w.astype("<f8").tobytes()).decode("ascii")
                    for w in model.weights],
        "biases": [base64.b64encode(b.astype("<f8").tobytes()).decode("ascii")
                   for b in model.biases],
    }
    if extra:
        obj.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_model(path) -> ScorerModel:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    dims = [obj["input_dim"]] + list(obj["hidden_sizes"]) + [1]
    weights = [
        np.frombuffer(base64.b64decode(blob), dtype="<f8").reshape(dims[i], dims[i + 1])
        for i, blob in enumerate(obj["weights"])
    ]
    biases = [
        np.frombuffer(base64.b64decode(blob), dtype="<f8").copy()
        for blob in obj["biases"]
    ]
    return ScorerModel(obj["input_dim"], obj["hidden_sizes"],
                       [w.copy() for w in weights], biases)
