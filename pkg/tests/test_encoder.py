"""Vocabulary, tokenizer, and encoder gradient tests."""

import numpy as np
import pytest

from calrex import encoder as enc
from conftest import numerical_gradient, relative_error


class TestBuildVocab:
    def test_min_freq_threshold(self):
        vocab = enc.build_vocab(["a a b"], min_freq=2)
        assert "a" in vocab.index
        assert "b" not in vocab.index
        assert vocab.lookup("b") == vocab.unk_index

    def test_min_freq_one_keeps_all(self):
        vocab = enc.build_vocab(["a a b"], min_freq=1)
        assert "a" in vocab.index and "b" in vocab.index

    def test_frequency_ties_break_lexicographically(self):
        # Oracle: tally then sort by (-count, token).
        texts = ["z q z q m"]
        counts = {"z": 2, "q": 2, "m": 1}
        want = sorted(counts, key=lambda t: (-counts[t], t))
        vocab = enc.build_vocab(texts, min_freq=1)
        got = [t for t in vocab.tokens if t not in enc.SPECIAL_TOKENS]
        assert got == want

    def test_special_tokens_always_present_and_dense(self):
        vocab = enc.build_vocab(["x"], min_freq=5)
        for tok in enc.SPECIAL_TOKENS:
            assert tok in vocab.index
        assert sorted(vocab.index.values()) == list(range(vocab.size))


class TestTokenize:
    def test_placeholders_kept_atomic(self):
        vocab = enc.build_vocab(["@CHEMICAL$ inhibits @GENE$."])
        seq = enc.tokenize("@CHEMICAL$ inhibits @GENE$.", vocab)
        toks = [vocab.tokens[i] for i in seq.indices]
        assert toks == [enc.CLS, "@CHEMICAL$", "inhibits", "@GENE$", "."]

    def test_truncation_to_max_len(self):
        text = " ".join(f"w{i}" for i in range(300))
        vocab = enc.build_vocab([text])
        seq = enc.tokenize(text, vocab, max_len=200)
        assert seq.true_length == 200

    def test_empty_text_is_cls_only(self):
        vocab = enc.build_vocab(["x"])
        seq = enc.tokenize("", vocab)
        assert seq.true_length == 1
        assert vocab.tokens[seq.indices[0]] == enc.CLS

    def test_unknown_tokens_map_to_unk(self):
        vocab = enc.build_vocab(["known"])
        seq = enc.tokenize("unknownword", vocab)
        assert seq.indices[1] == vocab.unk_index


def _small_params(rng, vocab_size=9, dim=4, hidden=5):
    return enc.init_encoder_params(vocab_size, dim, hidden, rng)


class TestEncode:
    def test_all_zero_parameters_give_zero_vector(self):
        rng = np.random.default_rng(0)
        params = enc.zeros_like_params(_small_params(rng))
        seq = enc.TokenSequence(np.array([2, 3, 4], dtype=np.int64))
        assert np.all(enc.encode(seq, params) == 0.0)

    def test_determinism(self):
        rng = np.random.default_rng(1)
        params = _small_params(rng)
        seq = enc.TokenSequence(np.array([2, 5, 7], dtype=np.int64))
        assert np.array_equal(enc.encode(seq, params), enc.encode(seq, params))

    def test_repeated_token_equals_single_under_mean_pooling(self):
        # Hand-checkable on a 2-dim embedding: with the feed-forward block
        # zeroed and the projection set to identity, the output is
        # tanh(mean of token embeddings). A single token and the same token
        # repeated share that mean.
        embed = np.zeros((6, 2))
        embed[3] = [0.3, -0.2]
        params = enc.EncoderParams(
            embed=embed,
            w1=np.zeros((2, 3)),
            b1=np.zeros(3),
            w2=np.zeros((3, 2)),
            b2=np.zeros(2),
            w_out=np.eye(2),
            b_out=np.zeros(2),
        )
        one = enc.encode(enc.TokenSequence(np.array([3], dtype=np.int64)), params)
        three = enc.encode(enc.TokenSequence(np.array([3, 3, 3], dtype=np.int64)), params)
        np.testing.assert_allclose(one, three, atol=1e-15)
        np.testing.assert_allclose(one, np.tanh([0.3, -0.2]), atol=1e-15)

    def test_padding_invariance(self):
        rng = np.random.default_rng(2)
        params = _small_params(rng)
        short = enc.TokenSequence(np.array([2, 5], dtype=np.int64))
        longer = enc.TokenSequence(np.array([2, 5, 7, 8], dtype=np.int64))
        batch = enc.encode_batch([short, longer], params)
        alone = enc.encode(short, params)
        np.testing.assert_allclose(batch[0], alone, atol=1e-15)

    def test_index_out_of_range_raises(self):
        rng = np.random.default_rng(3)
        params = _small_params(rng, vocab_size=4)
        seq = enc.TokenSequence(np.array([9], dtype=np.int64))
        with pytest.raises(enc.ShapeMismatch):
            enc.encode(seq, params)

    def test_params_check_catches_bad_shapes(self):
        rng = np.random.default_rng(4)
        params = _small_params(rng)
        params.w2 = params.w2[:, :-1]
        with pytest.raises(enc.ShapeMismatch):
            params.check()


class TestEncodeBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(5)
        params = _small_params(rng)
        seq = enc.TokenSequence(np.array([2, 5, 7], dtype=np.int64))
        grads = enc.encode_backward(seq, params, np.zeros(params.dim))
        for tensor in grads.tensors().values():
            assert np.all(tensor == 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        params = _small_params(rng)
        seq = enc.TokenSequence(np.array([2, 5, 7, 8, 3], dtype=np.int64))
        upstream = rng.normal(size=params.dim)
        grads = enc.encode_backward(seq, params, upstream)

        def scalar():
            return float(enc.encode(seq, params) @ upstream)

        for name, tensor in params.tensors().items():
            num = numerical_gradient(scalar, tensor, h=1e-4)
            assert relative_error(grads.tensors()[name], num) < 1e-4, name

    def test_upstream_linearity(self):
        rng = np.random.default_rng(7)
        params = _small_params(rng)
        seq = enc.TokenSequence(np.array([2, 6, 4], dtype=np.int64))
        u1 = rng.normal(size=params.dim)
        u2 = rng.normal(size=params.dim)
        g1 = enc.encode_backward(seq, params, u1)
        g2 = enc.encode_backward(seq, params, u2)
        g_sum = enc.encode_backward(seq, params, u1 + u2)
        for name in g1.tensors():
            np.testing.assert_allclose(
                g_sum.tensors()[name],
                g1.tensors()[name] + g2.tensors()[name],
                atol=1e-12,
            )

    def test_batch_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        params = _small_params(rng)
        seqs = [
            enc.TokenSequence(np.array([2, 5], dtype=np.int64)),
            enc.TokenSequence(np.array([2, 7, 8, 3], dtype=np.int64)),
        ]
        upstream = rng.normal(size=(2, params.dim))
        grads = enc.encode_backward(seqs, params, upstream)

        def scalar():
            return float((enc.encode_batch(seqs, params) * upstream).sum())

        for name, tensor in params.tensors().items():
            num = numerical_gradient(scalar, tensor, h=1e-4)
            assert relative_error(grads.tensors()[name], num) < 1e-4, name

    def test_upstream_shape_mismatch(self):
        rng = np.random.default_rng(9)
        params = _small_params(rng)
        seq = enc.TokenSequence(np.array([2, 5], dtype=np.int64))
        with pytest.raises(enc.ShapeMismatch):
            enc.encode_backward(seq, params, np.zeros(params.dim + 1))
