"""Definition encoders: a linear bag-of-words model and an LSTM.

Both map a token sequence to a vector in the target embedding space.
Input token vectors are either learned rows of an embedding table or
looked up in a fixed pre-trained store.  The BOW output is the running
sum of projected input embeddings, so it is order-invariant and exactly
matches the degenerate recurrence ``A_t = A_{t-1} + W v_t``.  The LSTM
keeps four internal layers per step:

    i_w = W_w v_t + U_w h_{t-1} + b_w           (linear candidate)
    g_s = sigmoid(W_s v_t + U_s h_{t-1} + b_s)  for s in {i, f, o}
    m_t = i_w * g_i + m_{t-1} * g_f
    h_t = g_o * tanh(m_t)

and projects the sentence-final memory state m_N through an affine map
followed by the configured output nonlinearity (tanh by default,
identity available).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .corpus import Vocabulary, tokenize
from .embeddings import EmbeddingStore
from .errors import DefembedError, NoKnownTokensError

GATES = ("w", "i", "f", "o")

INPUT_MODES = ("learned", "pretrained_fixed")
NONLINEARITIES = ("tanh", "identity")


@dataclass
class EncoderConfig:
    arch: str = "bow"  # "bow" | "lstm"
    input_mode: str = "learned"
    input_dim: int = 256
    hidden_dim: int = 512
    target_dim: int = 500
    output_nonlinearity: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ("bow", "lstm"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"unknown input_mode {self.input_mode!r}")
        if self.output_nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown output_nonlinearity {self.output_nonlinearity!r}")
        if min(self.input_dim, self.hidden_dim, self.target_dim) < 1:
            raise ValueError("dimensions must be positive")


@dataclass
class BowParameters:
    W: np.ndarray  # target_dim x input_dim projection
    input_embeddings: np.ndarray | None  # vocab x input_dim; None when fixed

    def named_tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        if self.input_embeddings is not None:
            yield "input_embeddings", self.input_embeddings
        yield "W", self.W

    def astype(self, dtype) -> "BowParameters":
        emb = None if self.input_embeddings is None else self.input_embeddings.astype(dtype)
        return BowParameters(W=self.W.astype(dtype), input_embeddings=emb)

    @property
    def dtype(self):
        return self.W.dtype


@dataclass
class LstmParameters:
    W: dict[str, np.ndarray]  # per gate: hidden_dim x input_dim
    U: dict[str, np.ndarray]  # per gate: hidden_dim x hidden_dim
    b: dict[str, np.ndarray]  # per gate: hidden_dim
    P: np.ndarray  # target_dim x hidden_dim output projection
    p: np.ndarray  # target_dim output bias
    input_embeddings: np.ndarray | None

    def named_tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        if self.input_embeddings is not None:
            yield "input_embeddings", self.input_embeddings
        for s in GATES:
            yield f"W_{s}", self.W[s]
            yield f"U_{s}", self.U[s]
            yield f"b_{s}", self.b[s]
        yield "P", self.P
        yield "p", self.p

    def astype(self, dtype) -> "LstmParameters":
        emb = None if self.input_embeddings is None else self.input_embeddings.astype(dtype)
        return LstmParameters(
            W={s: m.astype(dtype) for s, m in self.W.items()},
            U={s: m.astype(dtype) for s, m in self.U.items()},
            b={s: m.astype(dtype) for s, m in self.b.items()},
            P=self.P.astype(dtype),
            p=self.p.astype(dtype),
            input_embeddings=emb,
        )

    @property
    def dtype(self):
        return self.P.dtype


Parameters = Union[BowParameters, LstmParameters]


@dataclass
class LstmState:
    h: np.ndarray  # output state
    m: np.ndarray  # internal memory

    @classmethod
    def zeros(cls, hidden_dim: int, dtype=np.float32) -> "LstmState":
        return cls(h=np.zeros(hidden_dim, dtype=dtype), m=np.zeros(hidden_dim, dtype=dtype))


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_parameters(
    config: EncoderConfig,
    vocab: Vocabulary,
    input_store: EmbeddingStore | None = None,
    dtype=np.float32,
) -> Parameters:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    if config.input_mode == "pretrained_fixed":
        if input_store is None:
            raise DefembedError("pretrained_fixed input mode requires an input embedding store")
        if input_store.dim != config.input_dim:
            raise DefembedError(
                f"input store dim {input_store.dim} != config input_dim {config.input_dim}"
            )
    rng = np.random.default_rng(config.seed)
    learned = config.input_mode == "learned"
    emb = _uniform(rng, (len(vocab), config.input_dim), config.input_dim, dtype) if learned else None
    if config.arch == "bow":
        W = _uniform(rng, (config.target_dim, config.input_dim), config.input_dim, dtype)
        return BowParameters(W=W, input_embeddings=emb)
    W = {s: _uniform(rng, (config.hidden_dim, config.input_dim), config.input_dim, dtype) for s in GATES}
    U = {s: _uniform(rng, (config.hidden_dim, config.hidden_dim), config.hidden_dim, dtype) for s in GATES}
    b = {s: np.zeros(config.hidden_dim, dtype=dtype) for s in GATES}
    P = _uniform(rng, (config.target_dim, config.hidden_dim), config.hidden_dim, dtype)
    p = np.zeros(config.target_dim, dtype=dtype)
    return LstmParameters(W=W, U=U, b=b, P=P, p=p, input_embeddings=emb)


@dataclass
class Model:
    """An encoder ready to map token sequences to target-space vectors."""

    config: EncoderConfig
    params: Parameters
    vocab: Vocabulary
    input_store: EmbeddingStore | None = None

    def __post_init__(self):
        if self.config.input_mode == "pretrained_fixed":
            if self.input_store is None:
                raise DefembedError("pretrained_fixed model needs its input embedding store")
            if self.input_store.dim != self.config.input_dim:
                raise DefembedError(
                    f"input store dim {self.input_store.dim} != config input_dim "
                    f"{self.config.input_dim}"
                )

    def lookup(self, tokens: Sequence[str]) -> tuple[np.ndarray, list[int] | None, list[str]]:
        """Resolve tokens to input vectors, skipping unknown ones.

        Returns (vectors, vocab ids or None in pretrained mode, skipped
        tokens).  Raises NoKnownTokensError when nothing resolves.
        """
        dtype = self.params.dtype
        skipped: list[str] = []
        if self.config.input_mode == "learned":
            ids = []
            for tok in tokens:
                if tok in self.vocab:
                    ids.append(self.vocab.token_to_id[tok])
                else:
                    skipped.append(tok)
            if not ids:
                raise NoKnownTokensError("no known tokens in input")
            return self.params.input_embeddings[ids], ids, skipped
        vecs = []
        for tok in tokens:
            if tok in self.input_store:
                vecs.append(self.input_store.vector(tok).astype(dtype))
            else:
                skipped.append(tok)
        if not vecs:
            raise NoKnownTokensError("no known tokens in input")
        return np.stack(vecs), None, skipped

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        if self.config.arch == "bow":
            return bow_forward(self, tokens)
        return lstm_forward(self, tokens)

    def encode_text(self, text: str) -> tuple[np.ndarray, list[str]]:
        """Tokenize and encode, reporting which tokens were unknown."""
        tokens = tokenize(text)
        if not tokens:
            raise NoKnownTokensError("query contains no tokens")
        _, _, skipped = self.lookup(tokens)
        return self.encode(tokens), skipped


def bow_forward(model: Model, tokens: Sequence[str]) -> np.ndarray:
    """Sum of projected input embeddings over in-vocabulary tokens."""
    vectors, _, _ = model.lookup(tokens)
    return bow_forward_vectors(model.params, vectors)


def bow_forward_vectors(params: BowParameters, vectors: np.ndarray) -> np.ndarray:
    # Accumulated one token at a time so the result is bit-identical to the
    # degenerate recurrence A_t = A_{t-1} + W v_t.
    out = np.zeros(params.W.shape[0], dtype=params.dtype)
    for v in vectors:
        out += params.W @ v
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to stay overflow-free in float32.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_step(params: LstmParameters, state: LstmState, v_t: np.ndarray) -> LstmState:
    """One four-gate update; no clipping anywhere."""
    if not np.all(np.isfinite(v_t)):
        raise ValueError("non-finite input vector")
    new_state, _ = _lstm_step_cached(params, state, np.asarray(v_t, dtype=params.dtype))
    return new_state


def _lstm_step_cached(params: LstmParameters, state: LstmState, v: np.ndarray):
    h_prev, m_prev = state.h, state.m
    iw = params.W["w"] @ v + params.U["w"] @ h_prev + params.b["w"]
    gi = _sigmoid(params.W["i"] @ v + params.U["i"] @ h_prev + params.b["i"])
    gf = _sigmoid(params.W["f"] @ v + params.U["f"] @ h_prev + params.b["f"])
    go = _sigmoid(params.W["o"] @ v + params.U["o"] @ h_prev + params.b["o"])
    m = iw * gi + m_prev * gf
    tanh_m = np.tanh(m)
    h = go * tanh_m
    cache = {
        "v": v, "h_prev": h_prev, "m_prev": m_prev,
        "iw": iw, "gi": gi, "gf": gf, "go": go, "m": m, "tanh_m": tanh_m,
    }
    return LstmState(h=h, m=m), cache


def _apply_output(params: LstmParameters, config: EncoderConfig, m_final: np.ndarray):
    z = params.P @ m_final + params.p
    if config.output_nonlinearity == "tanh":
        return np.tanh(z)
    return z


def lstm_forward(model: Model, tokens: Sequence[str]) -> np.ndarray:
    """Fold the step over tokens from zero state; project the final memory."""
    vectors, _, _ = model.lookup(tokens)
    out, _ = lstm_forward_cached(model.params, model.config, vectors)
    return out


def lstm_forward_cached(params: LstmParameters, config: EncoderConfig, vectors: np.ndarray):
    """Forward pass keeping per-step activations for backpropagation."""
    state = LstmState.zeros(params.P.shape[1], dtype=params.dtype)
    steps = []
    for v in vectors:
        state, cache = _lstm_step_cached(params, state, v)
        steps.append(cache)
    out = _apply_output(params, config, state.m)
    return out, {"steps": steps, "m_final": state.m, "out": out}
