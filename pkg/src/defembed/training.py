"""Losses, analytic gradients, adadelta updates and the minibatch loop.

Gradients are derived by hand: through the projected-sum for the BOW
encoder and through time for the LSTM.  A finite-difference checker
(`gradient_check`) validates every trainable tensor in float64.
Training runs in float32; given fixed seeds the whole loop is
deterministic, so identical runs produce identical checkpoints.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import DefinitionRecord, build_vocabulary
from .embeddings import EmbeddingStore, cosine
from .encoders import (
    BowParameters,
    EncoderConfig,
    LstmParameters,
    Model,
    Parameters,
    bow_forward_vectors,
    init_parameters,
    lstm_forward_cached,
)
from .errors import DefembedError, NoKnownTokensError

log = logging.getLogger(__name__)


@dataclass
class LossConfig:
    kind: str = "cosine"  # "cosine" | "rank"
    margin: float = 0.1
    negative_sampling_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cosine", "rank"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "rank" and self.margin <= 0:
            raise ValueError("rank loss needs margin > 0")


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_epochs: int = 5
    shuffle_seed: int = 0
    eval_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def cosine_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """1 - cosine(pred, target), in [0, 2]."""
    return 1.0 - cosine(pred, target)


def rank_loss(
    pred: np.ndarray, target_vec: np.ndarray, negative_vec: np.ndarray, margin: float = 0.1
) -> float:
    """Hinge pushing pred closer to the target than to the negative word."""
    slack = margin - cosine(pred, target_vec) + cosine(pred, negative_vec)
    return max(0.0, slack)


def example_loss(
    pred: np.ndarray,
    loss_cfg: LossConfig,
    target_vec: np.ndarray,
    negative_vec: np.ndarray | None,
) -> float:
    if loss_cfg.kind == "cosine":
        return cosine_loss(pred, target_vec)
    if negative_vec is None:
        raise ValueError("rank loss requires a negative vector")
    return rank_loss(pred, target_vec, negative_vec, loss_cfg.margin)


def _cos_grad(pred: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """d cosine(pred, ref) / d pred, computed in float64."""
    p = pred.astype(np.float64)
    r = ref.astype(np.float64)
    np_ = np.linalg.norm(p)
    nr = np.linalg.norm(r)
    if np_ == 0.0 or nr == 0.0:
        raise ValueError("cosine gradient undefined for zero-norm vector")
    c = np.dot(p, r) / (np_ * nr)
    return r / (np_ * nr) - c * p / (np_ * np_)


def _loss_grad(
    pred: np.ndarray,
    loss_cfg: LossConfig,
    target_vec: np.ndarray,
    negative_vec: np.ndarray | None,
) -> np.ndarray:
    """dL/dpred in pred's dtype.  Zero on an inactive (or exactly tied) hinge."""
    if loss_cfg.kind == "cosine":
        grad = -_cos_grad(pred, target_vec)
    else:
        if negative_vec is None:
            raise ValueError("rank loss requires a negative vector")
        slack = (
            loss_cfg.margin
            - cosine(pred, target_vec)
            + cosine(pred, negative_vec)
        )
        if slack > 0.0:
            grad = -_cos_grad(pred, target_vec) + _cos_grad(pred, negative_vec)
        else:
            grad = np.zeros(pred.shape, dtype=np.float64)
    return grad.astype(pred.dtype)


def zero_gradients(params: Parameters) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.named_tensors()}


def backward(
    model: Model,
    tokens: Sequence[str],
    loss_cfg: LossConfig,
    target_vec: np.ndarray,
    negative_vec: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradient for one example.

    Returns one gradient per trainable tensor (input embeddings are not
    trainable in pretrained_fixed mode and get no entry).
    """
    vectors, ids, _ = model.lookup(tokens)
    dtype = model.params.dtype
    target = np.asarray(target_vec, dtype=dtype)
    negative = None if negative_vec is None else np.asarray(negative_vec, dtype=dtype)
    grads = zero_gradients(model.params)
    if isinstance(model.params, BowParameters):
        pred = bow_forward_vectors(model.params, vectors)
        loss = example_loss(pred, loss_cfg, target, negative)
        dpred = _loss_grad(pred, loss_cfg, target, negative)
        _bow_backward(model.params, vectors, ids, dpred, grads)
    else:
        pred, cache = lstm_forward_cached(model.params, model.config, vectors)
        loss = example_loss(pred, loss_cfg, target, negative)
        dpred = _loss_grad(pred, loss_cfg, target, negative)
        _lstm_backward(model.params, model.config, cache, ids, dpred, grads)
    return loss, grads


def _bow_backward(params: BowParameters, vectors, ids, dpred, grads) -> None:
    grads["W"] += np.outer(dpred, vectors.sum(axis=0))
    if ids is not None:
        dv = params.W.T @ dpred
        for i in ids:
            grads["input_embeddings"][i] += dv


def _lstm_backward(params: LstmParameters, config, cache, ids, dpred, grads) -> None:
    out = cache["out"]
    m_final = cache["m_final"]
    if config.output_nonlinearity == "tanh":
        dz = dpred * (1.0 - out * out)
    else:
        dz = dpred
    grads["P"] += np.outer(dz, m_final)
    grads["p"] += dz
    dm = params.P.T @ dz
    dh = np.zeros_like(dm)
    dvecs = []
    for step in reversed(cache["steps"]):
        v, h_prev, m_prev = step["v"], step["h_prev"], step["m_prev"]
        iw, gi, gf, go = step["iw"], step["gi"], step["gf"], step["go"]
        tanh_m = step["tanh_m"]
        # h_t = g_o * tanh(m_t): output-gate path and memory path.
        da_o = (dh * tanh_m) * go * (1.0 - go)
        dm = dm + dh * go * (1.0 - tanh_m * tanh_m)
        # m_t = i_w * g_i + m_{t-1} * g_f; the candidate i_w is linear.
        da_w = dm * gi
        da_i = (dm * iw) * gi * (1.0 - gi)
        da_f = (dm * m_prev) * gf * (1.0 - gf)
        dm = dm * gf
        dh_next = np.zeros_like(dh)
        dv = np.zeros_like(v)
        for s, da in (("w", da_w), ("i", da_i), ("f", da_f), ("o", da_o)):
            grads[f"W_{s}"] += np.outer(da, v)
            grads[f"U_{s}"] += np.outer(da, h_prev)
            grads[f"b_{s}"] += da
            dh_next += params.U[s].T @ da
            dv += params.W[s].T @ da
        dh = dh_next
        dvecs.append(dv)
    if ids is not None:
        for i, dv in zip(ids, reversed(dvecs)):
            grads["input_embeddings"][i] += dv


@dataclass
class OptimizerState:
    """Per-parameter adadelta accumulators E[g^2] and E[dx^2]."""

    sq_grad: dict[str, np.ndarray]
    sq_delta: dict[str, np.ndarray]
    rho: float = 0.95
    epsilon: float = 1e-6

    @classmethod
    def for_params(cls, params: Parameters, rho: float = 0.95, epsilon: float = 1e-6):
        return cls(
            sq_grad={name: np.zeros_like(arr) for name, arr in params.named_tensors()},
            sq_delta={name: np.zeros_like(arr) for name, arr in params.named_tensors()},
            rho=rho,
            epsilon=epsilon,
        )


def adadelta_update(
    params: Parameters, grads: dict[str, np.ndarray], state: OptimizerState
) -> tuple[Parameters, OptimizerState]:
    """In-place adadelta step; learning-rate-free by construction."""
    rho, eps = state.rho, state.epsilon
    for name, x in params.named_tensors():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise DefembedError(f"non-finite gradient for tensor {name!r}")
        eg = state.sq_grad[name]
        ed = state.sq_delta[name]
        eg *= rho
        eg += (1.0 - rho) * g * g
        delta = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
        ed *= rho
        ed += (1.0 - rho) * delta * delta
        x += delta
    return params, state


def _usable_pairs(model: Model, pairs, target_store: EmbeddingStore):
    usable = []
    skipped = 0
    for rec in pairs:
        if rec.headword not in target_store:
            log.warning("skipping pair: headword %r not in target store", rec.headword)
            skipped += 1
            continue
        try:
            model.lookup(rec.tokens)
        except NoKnownTokensError:
            log.warning("skipping pair for %r: no known definition tokens", rec.headword)
            skipped += 1
            continue
        usable.append(rec)
    return usable, skipped


def _sample_negative(rng: np.random.Generator, store: EmbeddingStore, exclude: str) -> str:
    while True:
        j = int(rng.integers(len(store)))
        if store.tokens[j] != exclude:
            return store.tokens[j]


def train(
    model: Model,
    pairs: Sequence[DefinitionRecord],
    train_cfg: TrainConfig,
    loss_cfg: LossConfig,
    target_store: EmbeddingStore,
    optimizer: OptimizerState | None = None,
    eval_fn: Callable[[Model], dict] | None = None,
) -> list[dict]:
    """Minibatch training; returns one log record per epoch.

    Negatives are drawn uniformly from the target vocabulary excluding the
    correct word, fresh each epoch.  The minibatch gradient is the mean
    over its examples, accumulated in example order.
    """
    usable, skipped = _usable_pairs(model, pairs, target_store)
    if not usable:
        if skipped:
            log.warning("no usable training pairs (%d skipped)", skipped)
        return []
    if optimizer is None:
        optimizer = OptimizerState.for_params(model.params)
    dtype = model.params.dtype
    targets = np.stack(
        [target_store.vector(rec.headword).astype(dtype) for rec in usable]
    )
    records = []
    for epoch in range(train_cfg.max_epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([train_cfg.shuffle_seed, epoch]).permutation(len(usable))
        neg_rng = np.random.default_rng([loss_cfg.negative_sampling_seed, epoch])
        total_loss = 0.0
        for start in range(0, len(order), train_cfg.batch_size):
            chunk = order[start : start + train_cfg.batch_size]
            batch_grads = zero_gradients(model.params)
            for i in chunk:
                rec = usable[i]
                negative = None
                if loss_cfg.kind == "rank":
                    neg_tok = _sample_negative(neg_rng, target_store, rec.headword)
                    negative = target_store.vector(neg_tok).astype(dtype)
                loss, grads = backward(model, rec.tokens, loss_cfg, targets[i], negative)
                total_loss += loss
                for name in batch_grads:
                    batch_grads[name] += grads[name]
            scale = dtype.type(1.0 / len(chunk))
            for name in batch_grads:
                batch_grads[name] *= scale
            adadelta_update(model.params, batch_grads, optimizer)
        record = {
            "epoch": epoch + 1,
            "mean_loss": total_loss / len(usable),
            "skipped_pairs": skipped,
            "wall_time": time.perf_counter() - t0,
        }
        if eval_fn is not None and train_cfg.eval_every > 0 and (epoch + 1) % train_cfg.eval_every == 0:
            record["eval"] = eval_fn(model)
        records.append(record)
    return records


def gradient_check(
    model: Model,
    pair: DefinitionRecord,
    loss_cfg: LossConfig,
    target_vec: np.ndarray,
    negative_vec: np.ndarray | None = None,
    epsilon: float = 1e-4,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in float64 regardless of the model's training precision.  For the
    rank loss, an example sitting exactly on the hinge boundary is nudged
    (the negative vector is re-drawn with deterministic noise) because the
    two-sided difference straddles the kink there.
    """
    model64 = Model(
        config=model.config,
        params=model.params.astype(np.float64),
        vocab=model.vocab,
        input_store=model.input_store,
    )
    target = np.asarray(target_vec, dtype=np.float64)
    negative = None if negative_vec is None else np.asarray(negative_vec, dtype=np.float64)

    if loss_cfg.kind == "rank":
        if negative is None:
            raise ValueError("rank loss gradient check requires a negative vector")
        nudge_rng = np.random.default_rng(loss_cfg.negative_sampling_seed)
        for attempt in range(8):
            pred = model64.encode(pair.tokens)
            slack = (
                loss_cfg.margin - cosine(pred, target) + cosine(pred, negative)
            )
            if abs(slack) > 10.0 * epsilon:
                break
            log.warning(
                "gradient_check: hinge slack %.2e within guard band, re-drawing negative "
                "(attempt %d)", slack, attempt + 1,
            )
            negative = negative + nudge_rng.normal(scale=0.1 * np.linalg.norm(negative), size=negative.shape)

    _, analytic = backward(model64, pair.tokens, loss_cfg, target, negative)

    def objective() -> float:
        pred = model64.encode(pair.tokens)
        return example_loss(pred, loss_cfg, target, negative)

    max_rel = 0.0
    for name, tensor in model64.params.named_tensors():
        flat = tensor.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            f_plus = objective()
            flat[idx] = orig - epsilon
            f_minus = objective()
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = aflat[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > max_rel:
                max_rel = rel
    return max_rel


def gradient_check_suite(epsilon: float = 1e-4, seed: int = 0) -> dict[tuple[str, str], float]:
    """Finite-difference verification of all four encoder/loss combinations.

    Builds small seeded fixtures whose hinges are guaranteed active and
    whose gradient entries are well away from the noise floor of central
    differences: the target leans against the prediction and the negative
    leans toward it.
    """
    rng = np.random.default_rng(seed)
    records = [
        DefinitionRecord(
            f"word{i:02d}",
            tuple(f"tok{j:02d}" for j in rng.integers(0, 30, size=rng.integers(3, 7))),
            "dictionary",
        )
        for i in range(20)
    ]
    vocab = build_vocabulary(records)  # at most 50 tokens: 20 headwords + 30 pool
    target_dim = 12
    results = {}
    for arch in ("bow", "lstm"):
        for kind in ("cosine", "rank"):
            config = EncoderConfig(
                arch=arch,
                input_mode="learned",
                input_dim=16,
                hidden_dim=8,
                target_dim=target_dim,
                output_nonlinearity="tanh",
                seed=seed + 1,
            )
            model = Model(
                config=config,
                params=init_parameters(config, vocab, dtype=np.float64),
                vocab=vocab,
            )
            pair = records[int(rng.integers(len(records)))]
            pred = model.encode(pair.tokens)
            unit = pred / np.linalg.norm(pred)
            target = -0.5 * unit + rng.normal(size=target_dim)
            negative = 0.5 * unit + rng.normal(size=target_dim)
            loss_cfg = LossConfig(kind=kind, margin=0.1, negative_sampling_seed=seed)
            results[(arch, kind)] = gradient_check(
                model, pair, loss_cfg, target, negative_vec=negative, epsilon=epsilon
            )
    return results
