import numpy as np
import pytest

from defembed.checkpoint import load_checkpoint, save_checkpoint, vocab_hash
from defembed.corpus import DefinitionRecord, Vocabulary, build_vocabulary
from defembed.encoders import (
    GATES,
    BowParameters,
    EncoderConfig,
    LstmParameters,
    LstmState,
    Model,
    bow_forward,
    init_parameters,
    lstm_forward,
    lstm_step,
)
from defembed.errors import DefembedError, FormatError, NoKnownTokensError

from helpers import random_store, toy_model, toy_records


def tiny_vocab(tokens):
    ordered = sorted(tokens)
    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(ordered)},
        id_to_token=ordered,
        counts={t: 1 for t in ordered},
    )


def zero_lstm(hidden, inp, target, dtype=np.float64):
    return LstmParameters(
        W={s: np.zeros((hidden, inp), dtype=dtype) for s in GATES},
        U={s: np.zeros((hidden, hidden), dtype=dtype) for s in GATES},
        b={s: np.zeros(hidden, dtype=dtype) for s in GATES},
        P=np.zeros((target, hidden), dtype=dtype),
        p=np.zeros(target, dtype=dtype),
        input_embeddings=None,
    )


class TestInitParameters:
    def test_same_seed_bit_identical(self):
        vocab = tiny_vocab(["a", "b", "c"])
        cfg = EncoderConfig(arch="lstm", input_dim=6, hidden_dim=4, target_dim=5, seed=11)
        p1 = init_parameters(cfg, vocab)
        p2 = init_parameters(cfg, vocab)
        for (n1, t1), (n2, t2) in zip(p1.named_tensors(), p2.named_tensors()):
            assert n1 == n2
            np.testing.assert_array_equal(t1, t2)

    def test_different_seeds_differ(self):
        vocab = tiny_vocab(["a", "b"])
        cfg1 = EncoderConfig(arch="bow", input_dim=6, target_dim=5, seed=1)
        cfg2 = EncoderConfig(arch="bow", input_dim=6, target_dim=5, seed=2)
        p1 = init_parameters(cfg1, vocab)
        p2 = init_parameters(cfg2, vocab)
        assert np.abs(p1.W - p2.W).max() > 0

    def test_magnitudes_bounded_by_fan_in(self):
        vocab = tiny_vocab([f"t{i}" for i in range(20)])
        cfg = EncoderConfig(arch="lstm", input_dim=9, hidden_dim=16, target_dim=25, seed=3)
        params = init_parameters(cfg, vocab)
        fan_in = {"input_embeddings": 9, "P": 16}
        for s in GATES:
            fan_in[f"W_{s}"] = 9
            fan_in[f"U_{s}"] = 16
            fan_in[f"b_{s}"] = None  # biases are zero
        fan_in["p"] = None
        for name, tensor in params.named_tensors():
            if fan_in[name] is None:
                np.testing.assert_array_equal(tensor, 0)
            else:
                assert np.abs(tensor).max() <= 1.0 / np.sqrt(fan_in[name])

    def test_pretrained_without_store_is_error(self):
        vocab = tiny_vocab(["a"])
        cfg = EncoderConfig(arch="bow", input_mode="pretrained_fixed", input_dim=4, target_dim=3)
        with pytest.raises(DefembedError):
            init_parameters(cfg, vocab)

    def test_pretrained_dim_mismatch_is_error(self):
        vocab = tiny_vocab(["a"])
        store = random_store(["a"], dim=5)
        cfg = EncoderConfig(arch="bow", input_mode="pretrained_fixed", input_dim=4, target_dim=3)
        with pytest.raises(DefembedError):
            init_parameters(cfg, vocab, input_store=store)


class TestBowForward:
    def _identity_model(self, vectors):
        vocab = tiny_vocab(vectors.keys())
        dim = len(next(iter(vectors.values())))
        emb = np.zeros((len(vocab), dim))
        for tok, vec in vectors.items():
            emb[vocab.token_to_id[tok]] = vec
        cfg = EncoderConfig(arch="bow", input_dim=dim, target_dim=dim, seed=0)
        params = BowParameters(W=np.eye(dim), input_embeddings=emb)
        return Model(config=cfg, params=params, vocab=vocab)

    def test_identity_projection_sums_embeddings(self):
        model = self._identity_model({"a": np.array([1.0, 2.0]), "b": np.array([0.5, -1.0])})
        np.testing.assert_allclose(bow_forward(model, ["a", "b"]), [1.5, 1.0])

    def test_one_dimensional_hand_value(self):
        vocab = tiny_vocab(["a", "b"])
        emb = np.array([[2.0], [3.0]])  # ids in sorted order: a, b
        params = BowParameters(W=np.array([[0.5]]), input_embeddings=emb)
        cfg = EncoderConfig(arch="bow", input_dim=1, target_dim=1, seed=0)
        model = Model(config=cfg, params=params, vocab=vocab)
        np.testing.assert_allclose(bow_forward(model, ["a", "b"]), [2.5])

    def test_order_invariance(self):
        model, records = toy_model(arch="bow", seed=4)
        rng = np.random.default_rng(4)
        for rec in records[:20]:
            perm = list(rec.tokens)
            rng.shuffle(perm)
            a = bow_forward(model, rec.tokens)
            b = bow_forward(model, perm)
            np.testing.assert_allclose(a, b, atol=1e-6)

    def test_additivity(self):
        model, records = toy_model(arch="bow", seed=5)
        tokens = records[0].tokens + records[1].tokens
        whole = bow_forward(model, tokens)
        parts = bow_forward(model, tokens[:3]) + bow_forward(model, tokens[3:])
        np.testing.assert_allclose(whole, parts, atol=1e-9)

    def test_unknown_tokens_skipped(self):
        model, records = toy_model(arch="bow", seed=6)
        known = list(records[0].tokens)
        with_unknown = known + ["zzzunknown"]
        np.testing.assert_array_equal(bow_forward(model, known), bow_forward(model, with_unknown))

    def test_no_known_tokens_is_error(self):
        model, _ = toy_model(arch="bow", seed=7)
        with pytest.raises(NoKnownTokensError):
            bow_forward(model, ["zzz", "qqq"])

    def test_degenerate_rnn_recurrence_is_exact(self):
        model, records = toy_model(arch="bow", seed=8)
        for rec in records[:10]:
            vectors, _, _ = model.lookup(rec.tokens)
            acc = np.zeros(model.config.target_dim, dtype=model.params.dtype)
            for v in vectors:
                acc = acc + model.params.W @ v
            np.testing.assert_array_equal(bow_forward(model, rec.tokens), acc)


class TestLstmStep:
    def test_zero_parameter_fixed_point(self):
        params = zero_lstm(hidden=3, inp=2, target=4)
        state = LstmState.zeros(3, dtype=np.float64)
        out = lstm_step(params, state, np.array([0.7, -0.2]))
        np.testing.assert_array_equal(out.m, np.zeros(3))
        np.testing.assert_array_equal(out.h, np.zeros(3))

    def test_scalar_hand_recurrence(self):
        params = zero_lstm(hidden=1, inp=1, target=1)
        params.W["w"] = np.array([[1.0]])
        state = lstm_step(params, LstmState.zeros(1, dtype=np.float64), np.array([1.0]))
        assert state.m[0] == pytest.approx(0.5, abs=1e-12)
        assert state.h[0] == pytest.approx(0.5 * np.tanh(0.5), abs=1e-12)
        assert state.h[0] == pytest.approx(0.231059, abs=1e-6)

    def test_memory_retention_with_forced_gates(self):
        rng = np.random.default_rng(9)
        params = zero_lstm(hidden=4, inp=3, target=2)
        for s in GATES:
            params.W[s] = 0.1 * rng.normal(size=(4, 3))
        params.b["f"] = np.full(4, 20.0)   # forget gate ~ 1
        params.b["i"] = np.full(4, -20.0)  # input gate ~ 0
        state = LstmState(h=np.zeros(4), m=np.array([0.7, -0.3, 0.2, 1.1]))
        s1 = lstm_step(params, state, rng.normal(size=3))
        s2 = lstm_step(params, s1, rng.normal(size=3))
        np.testing.assert_allclose(s1.m, state.m, atol=1e-3)
        np.testing.assert_allclose(s2.m, s1.m, atol=1e-3)

    def test_non_finite_input_rejected(self):
        params = zero_lstm(hidden=2, inp=2, target=2)
        with pytest.raises(ValueError):
            lstm_step(params, LstmState.zeros(2, dtype=np.float64), np.array([np.nan, 1.0]))

    def test_gates_bounded_and_state_finite_over_many_steps(self):
        rng = np.random.default_rng(10)
        hidden, inp = 6, 4
        params = LstmParameters(
            W={s: rng.normal(scale=0.5, size=(hidden, inp)) for s in GATES},
            U={s: rng.normal(scale=0.5, size=(hidden, hidden)) for s in GATES},
            b={s: rng.normal(scale=0.5, size=hidden) for s in GATES},
            P=rng.normal(size=(3, hidden)),
            p=np.zeros(3),
            input_embeddings=None,
        )
        from defembed.encoders import _lstm_step_cached

        state = LstmState.zeros(hidden, dtype=np.float64)
        for _ in range(10_000):
            state, cache = _lstm_step_cached(params, state, rng.normal(size=inp))
            for g in ("gi", "gf", "go"):
                assert np.all(cache[g] > 0) and np.all(cache[g] < 1)
        assert np.all(np.isfinite(state.m)) and np.all(np.isfinite(state.h))


class TestLstmForward:
    def test_single_token_matches_one_step_projection(self):
        model, records = toy_model(arch="lstm", seed=11)
        token = records[0].tokens[0]
        vectors, _, _ = model.lookup([token])
        state = lstm_step(model.params, LstmState.zeros(model.config.hidden_dim, np.float64), vectors[0])
        expected = np.tanh(model.params.P @ state.m + model.params.p)
        np.testing.assert_allclose(lstm_forward(model, [token]), expected, atol=1e-12)

    def test_order_sensitivity(self):
        model, records = toy_model(arch="lstm", seed=12)
        rec = records[0]
        reversed_tokens = tuple(reversed(rec.tokens))
        assert reversed_tokens != rec.tokens
        a = lstm_forward(model, rec.tokens)
        b = lstm_forward(model, reversed_tokens)
        assert np.abs(a - b).max() > 1e-6

    def test_zero_parameters_give_zero_output(self):
        vocab = tiny_vocab(["a", "b"])
        params = zero_lstm(hidden=3, inp=2, target=4)
        params.input_embeddings = np.ones((2, 2))
        cfg = EncoderConfig(arch="lstm", input_dim=2, hidden_dim=3, target_dim=4)
        model = Model(config=cfg, params=params, vocab=vocab)
        np.testing.assert_array_equal(lstm_forward(model, ["a", "b"]), np.zeros(4))

    def test_identity_output_nonlinearity(self):
        model, records = toy_model(arch="lstm", seed=13, output_nonlinearity="identity")
        rec = records[0]
        vectors, _, _ = model.lookup(rec.tokens)
        state = LstmState.zeros(model.config.hidden_dim, np.float64)
        for v in vectors:
            state = lstm_step(model.params, state, v)
        expected = model.params.P @ state.m + model.params.p
        np.testing.assert_allclose(lstm_forward(model, rec.tokens), expected, atol=1e-12)

    def test_pretrained_fixed_lookup(self):
        records = toy_records(10, seed=14)
        tokens = sorted({t for r in records for t in r.tokens} | {r.headword for r in records})
        store = random_store(tokens, dim=6, seed=14)
        model, _ = toy_model(
            arch="lstm", records=records, input_dim=6, input_mode="pretrained_fixed",
            input_store=store, seed=14,
        )
        out = lstm_forward(model, records[0].tokens)
        assert out.shape == (model.config.target_dim,)
        assert model.params.input_embeddings is None


class TestCheckpoint:
    def test_round_trip_preserves_everything(self, tmp_path):
        model, _ = toy_model(arch="lstm", seed=15, dtype=np.float32)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.config == model.config
        assert loaded.vocab.token_to_id == model.vocab.token_to_id
        assert loaded.vocab.counts == model.vocab.counts
        for (n1, t1), (n2, t2) in zip(model.params.named_tensors(), loaded.params.named_tensors()):
            assert n1 == n2 and t1.dtype == t2.dtype
            np.testing.assert_array_equal(t1, t2)

    def test_save_load_save_byte_identical(self, tmp_path):
        for arch in ("bow", "lstm"):
            model, _ = toy_model(arch=arch, seed=16, dtype=np.float32)
            p1, p2 = tmp_path / f"{arch}1.ckpt", tmp_path / f"{arch}2.ckpt"
            save_checkpoint(model, p1)
            save_checkpoint(load_checkpoint(p1), p2)
            assert p1.read_bytes() == p2.read_bytes()

    def test_corrupted_header_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not json\n\x00\x01")
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated_tensor_rejected(self, tmp_path):
        model, _ = toy_model(arch="bow", seed=17, dtype=np.float32)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_vocab_hash_changes_with_vocab(self):
        v1 = build_vocabulary(toy_records(5, seed=1))
        v2 = build_vocabulary(toy_records(6, seed=1))
        assert vocab_hash(v1) != vocab_hash(v2)

    def test_pretrained_fixed_round_trip_requires_store(self, tmp_path):
        records = toy_records(8, seed=18)
        tokens = sorted({t for r in records for t in r.tokens})
        store = random_store(tokens, dim=6, seed=18)
        model, _ = toy_model(
            arch="bow", records=records, input_dim=6, input_mode="pretrained_fixed",
            input_store=store, seed=18, dtype=np.float32,
        )
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        with pytest.raises(DefembedError):
            load_checkpoint(path)  # no input store supplied
        loaded = load_checkpoint(path, input_store=store)
        assert loaded.params.input_embeddings is None
