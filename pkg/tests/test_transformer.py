"""Encoder-decoder model: init, masking, gradients, training, checkpoints."""

import io
import json
import math
import struct

import numpy as np
import pytest

from metaphor_forge.mask_corpus import BOS_ID, EOS_ID, MET, MET_ID, PAD_ID, Vocab
from metaphor_forge.text_core import TokenSentence
from metaphor_forge.transformer import (
    AllPadTargetError,
    CheckpointError,
    ConfigError,
    ModelParams,
    NonFiniteLossError,
    SequenceError,
    TransformerConfig,
    compute_gradients,
    forward,
    generate_metaphor,
    greedy_decode,
    init_optimizer,
    init_params,
    load_checkpoint,
    loss,
    save_checkpoint,
    sinusoidal_position_table,
    train_step,
)

TINY = TransformerConfig(
    vocab_size=11, encoder_layers=1, decoder_layers=1, heads=2,
    d_model=8, d_ff=16, max_len=8, dropout_rate=0.0, seed=7,
)


def _tiny_params() -> ModelParams:
    return init_params(TINY)


class TestConfig:
    def test_indivisible_heads_rejected(self):
        with pytest.raises(ConfigError):
            TransformerConfig(vocab_size=10, d_model=8, heads=3)

    def test_nonpositive_dimension_rejected(self):
        with pytest.raises(ConfigError):
            TransformerConfig(vocab_size=0)

    def test_dropout_one_rejected(self):
        with pytest.raises(ConfigError):
            TransformerConfig(vocab_size=10, dropout_rate=1.0)

    def test_unknown_schedule_rejected(self):
        with pytest.raises(ConfigError):
            init_optimizer(_tiny_params(), schedule="cyclic")


class TestPositionTable:
    def test_shape(self):
        table = sinusoidal_position_table(10, 6)
        assert table.shape == (10, 6)

    def test_position_zero_alternates_zero_one(self):
        table = sinusoidal_position_table(4, 6)
        np.testing.assert_allclose(table[0], [0, 1, 0, 1, 0, 1], atol=1e-12)

    def test_values_bounded(self):
        table = sinusoidal_position_table(50, 16)
        assert np.all(np.abs(table) <= 1.0)


class TestInit:
    def test_same_seed_is_bitwise_identical(self):
        a, b = init_params(TINY), init_params(TINY)
        assert set(a.tensors) == set(b.tensors)
        for name in a.tensors:
            np.testing.assert_array_equal(a.tensors[name], b.tensors[name])

    def test_different_seed_differs(self):
        other = TransformerConfig(**{**TINY.__dict__, "seed": 8})
        a, b = init_params(TINY), init_params(other)
        assert not np.array_equal(a.tensors["embedding"], b.tensors["embedding"])

    def test_gains_one_biases_zero(self):
        params = _tiny_params()
        for name, tensor in params.tensors.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf == "gain":
                np.testing.assert_array_equal(tensor, np.ones_like(tensor))
            elif leaf in ("bias", "b1", "b2"):
                np.testing.assert_array_equal(tensor, np.zeros_like(tensor))

    def test_weights_within_glorot_bounds(self):
        params = _tiny_params()
        for name, tensor in params.tensors.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf in ("gain", "bias", "b1", "b2"):
                continue
            fan_in, fan_out = tensor.shape
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            assert np.all(np.abs(tensor) <= limit), name

    def test_expected_tensor_set(self):
        params = _tiny_params()
        assert "embedding" in params.tensors
        assert "enc0.attn.wq" in params.tensors
        assert "dec0.cross.wo" in params.tensors
        assert "dec0.ln3.gain" in params.tensors


class TestForward:
    def test_logit_shape_tracks_prefix(self):
        params = _tiny_params()
        logits = forward(params, [BOS_ID, 5, 6, EOS_ID], [BOS_ID, 5, 6])
        assert logits.shape == (3, TINY.vocab_size)

    def test_empty_sequence_rejected(self):
        with pytest.raises(SequenceError):
            forward(_tiny_params(), [], [BOS_ID])

    def test_overlong_sequence_rejected(self):
        with pytest.raises(SequenceError):
            forward(_tiny_params(), [BOS_ID] * 9, [BOS_ID])

    def test_out_of_range_id_rejected(self):
        with pytest.raises(SequenceError):
            forward(_tiny_params(), [BOS_ID, 11], [BOS_ID])

    def test_attention_rows_are_distributions(self):
        params = _tiny_params()
        logits, attention = forward(
            params, [BOS_ID, 5, 6, EOS_ID], [BOS_ID, 5, 6], return_attention=True
        )
        assert set(attention) == {"enc0.attn", "dec0.self", "dec0.cross"}
        for name, probs in attention.items():
            sums = probs.sum(axis=-1)
            np.testing.assert_allclose(sums, 1.0, atol=1e-9, err_msg=name)

    def test_inference_is_deterministic(self):
        # dropout must be off outside training even when configured on
        config = TransformerConfig(**{**TINY.__dict__, "dropout_rate": 0.5})
        params = init_params(config)
        a = forward(params, [BOS_ID, 5, EOS_ID], [BOS_ID, 5])
        b = forward(params, [BOS_ID, 5, EOS_ID], [BOS_ID, 5])
        np.testing.assert_array_equal(a, b)


class TestCausalityAndPadding:
    def test_future_target_tokens_cannot_leak(self):
        params = _tiny_params()
        src = [BOS_ID, 5, 6, EOS_ID]
        base = forward(params, src, [BOS_ID, 5, 6, 7])
        for t in range(3):
            altered = [BOS_ID, 5, 6, 7]
            for later in range(t + 1, 4):
                altered[later] = (altered[later] + 3) % TINY.vocab_size or 5
            changed = forward(params, src, altered)
            np.testing.assert_array_equal(base[: t + 1], changed[: t + 1])

    def test_source_padding_does_not_move_logits(self):
        params = _tiny_params()
        src = [BOS_ID, 5, 6, EOS_ID]
        tgt = [BOS_ID, 8, 9]
        base = forward(params, src, tgt)
        for extra in (1, 2, 3):
            padded = forward(params, src + [PAD_ID] * extra, tgt)
            assert np.max(np.abs(padded - base)) <= 1e-5

    def test_many_random_probes(self):
        params = _tiny_params()
        rng = np.random.default_rng(123)
        for _ in range(25):
            s_len = int(rng.integers(2, 6))
            t_len = int(rng.integers(2, 6))
            src = [BOS_ID] + list(rng.integers(5, 11, size=s_len - 1))
            tgt = [BOS_ID] + list(rng.integers(5, 11, size=t_len - 1))
            base = forward(params, src, tgt)
            # causality probe
            t = int(rng.integers(0, t_len - 1))
            altered = list(tgt)
            altered[-1] = int(rng.integers(5, 11))
            if altered == tgt:
                altered[-1] = 5 if tgt[-1] != 5 else 6
            changed = forward(params, src, altered)
            np.testing.assert_array_equal(base[: t + 1], changed[: t + 1])
            # padding probe
            padded = forward(params, src + [PAD_ID] * int(rng.integers(1, 3)), tgt)
            assert np.max(np.abs(padded - base)) <= 1e-5


class TestLoss:
    def test_uniform_logits_give_log_vocab(self):
        logits = np.zeros((4, TINY.vocab_size))
        got = loss(logits, [5, 6, 7, EOS_ID])
        assert got == pytest.approx(math.log(TINY.vocab_size), abs=1e-9)

    def test_hand_computed_value(self):
        logits = np.array([[2.0, 0.0, -1.0], [0.5, 0.5, 0.5]])
        assert loss(logits, [0, 2], pad_id=-1) == pytest.approx(
            0.6342291541121977, abs=1e-12
        )

    def test_padding_rows_excluded(self):
        rng = np.random.default_rng(31)
        logits = rng.normal(size=(3, 11))
        with_pad = loss(logits, [5, 6, PAD_ID])
        without = loss(logits[:2], [5, 6])
        assert with_pad == pytest.approx(without, abs=1e-12)

    def test_all_padding_raises(self):
        with pytest.raises(AllPadTargetError):
            loss(np.zeros((2, 11)), [PAD_ID, PAD_ID])

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            loss(np.zeros((2, 11)), [5, 6, 7])


class TestGradients:
    def test_sampled_gradient_check(self):
        """Central differences agree with backprop on sampled coordinates."""
        params = _tiny_params()
        batch = [
            ([BOS_ID, 5, 6, EOS_ID], [BOS_ID, 7, 8, EOS_ID]),
            ([BOS_ID, 9, EOS_ID], [BOS_ID, 10, EOS_ID]),
        ]
        base_loss, grads = compute_gradients(params, batch)
        assert math.isfinite(base_loss)
        rng = np.random.default_rng(40)
        h = 1e-4
        checked = 0
        worst = 0.0
        for name, tensor in params.tensors.items():
            flat = tensor.reshape(-1)
            n_samples = min(6, flat.size)
            for idx in rng.choice(flat.size, size=n_samples, replace=False):
                orig = flat[idx]
                flat[idx] = orig + h
                up, _ = compute_gradients(params, batch)
                flat[idx] = orig - h
                down, _ = compute_gradients(params, batch)
                flat[idx] = orig
                numeric = (up - down) / (2 * h)
                analytic = grads[name].reshape(-1)[idx]
                scale = max(1e-8, abs(numeric) + abs(analytic))
                rel = abs(numeric - analytic) / scale
                worst = max(worst, rel)
                checked += 1
        assert checked > 100
        assert worst <= 1e-3, f"worst relative error {worst:.2e}"

    def test_batch_loss_matches_single_forward(self):
        params = _tiny_params()
        src = [BOS_ID, 5, 6, EOS_ID]
        tgt = [BOS_ID, 7, 8, EOS_ID]
        batch_loss, _ = compute_gradients(params, [(src, tgt)])
        logits = forward(params, src, tgt[:-1])
        assert batch_loss == pytest.approx(loss(logits, tgt[1:]), abs=1e-12)

    def test_short_target_rejected(self):
        with pytest.raises(SequenceError):
            compute_gradients(_tiny_params(), [([BOS_ID, 5], [BOS_ID])])


class TestTrainStep:
    def test_zero_rate_leaves_params_unchanged(self):
        params = _tiny_params()
        state = init_optimizer(params, base_rate=0.0)
        before = {k: v.copy() for k, v in params.tensors.items()}
        train_step(params, state, [([BOS_ID, 5, EOS_ID], [BOS_ID, 6, EOS_ID])])
        for name in before:
            np.testing.assert_array_equal(params.tensors[name], before[name])
        assert state.step == 1

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_loss_aborts_without_update(self):
        params = _tiny_params()
        state = init_optimizer(params)
        params.tensors["embedding"][:] = 1e200
        snapshot = {k: v.copy() for k, v in params.tensors.items()}
        with pytest.raises(NonFiniteLossError):
            train_step(params, state, [([BOS_ID, 5, EOS_ID], [BOS_ID, 6, EOS_ID])])
        assert state.step == 0
        for name in snapshot:
            np.testing.assert_array_equal(params.tensors[name], snapshot[name])

    def test_loss_decreases_on_repeated_pair(self):
        params = _tiny_params()
        state = init_optimizer(params, base_rate=1.0, warmup_steps=20)
        batch = [([BOS_ID, 5, 6, EOS_ID], [BOS_ID, 7, 8, EOS_ID])]
        first = None
        for _ in range(60):
            params, state, step_loss = train_step(params, state, batch)
            if first is None:
                first = step_loss
        assert step_loss < first

    def test_training_is_deterministic_across_runs(self):
        def run():
            config = TransformerConfig(
                vocab_size=11, encoder_layers=1, decoder_layers=1, heads=2,
                d_model=8, d_ff=16, max_len=8, dropout_rate=0.2, seed=21,
            )
            params = init_params(config)
            state = init_optimizer(params, base_rate=1.0, warmup_steps=20)
            batch = [([BOS_ID, 5, 6, EOS_ID], [BOS_ID, 7, 8, EOS_ID])]
            losses = []
            for _ in range(25):
                params, state, step_loss = train_step(params, state, batch)
                losses.append(step_loss)
            return losses, params

        losses_a, params_a = run()
        losses_b, params_b = run()
        assert losses_a == losses_b
        for name in params_a.tensors:
            np.testing.assert_array_equal(
                params_a.tensors[name], params_b.tensors[name]
            )


class TestLearningRateSchedule:
    def test_warmup_peak_and_decay(self):
        params = _tiny_params()
        state = init_optimizer(params, base_rate=0.5, warmup_steps=4000)
        d = TINY.d_model
        state.step = 4000
        peak = state.learning_rate(d)
        assert peak == pytest.approx(0.5 * d ** -0.5 * 4000 ** -0.5, rel=1e-12)
        state.step = 100
        early = state.learning_rate(d)
        assert early == pytest.approx(0.5 * d ** -0.5 * 100 * 4000 ** -1.5, rel=1e-12)
        assert early < peak
        state.step = 16000
        late = state.learning_rate(d)
        assert late == pytest.approx(peak / 2, rel=1e-12)

    def test_constant_schedule(self):
        params = _tiny_params()
        state = init_optimizer(params, base_rate=0.3, schedule="constant")
        state.step = 123
        assert state.learning_rate(TINY.d_model) == 0.3


class TestDecode:
    def test_overfit_then_decode_exactly(self):
        config = TransformerConfig(
            vocab_size=12, encoder_layers=1, decoder_layers=1, heads=4,
            d_model=32, d_ff=64, max_len=16, dropout_rate=0.0, seed=3,
        )
        params = init_params(config)
        state = init_optimizer(params, base_rate=1.0, warmup_steps=50)
        src = [BOS_ID, 5, 6, 7, EOS_ID]
        tgt = [BOS_ID, 8, 9, 10, EOS_ID]
        final = math.inf
        for _ in range(500):
            params, state, final = train_step(params, state, [(src, tgt)])
            if final < 0.01:
                break
        assert final < 0.05
        decoded = greedy_decode(params, src, max_len=10)
        assert decoded == [8, 9, 10, EOS_ID]
        assert greedy_decode(params, src, max_len=10) == decoded

    def test_max_len_one_returns_single_token(self):
        params = _tiny_params()
        out = greedy_decode(params, [BOS_ID, 5, EOS_ID], max_len=1)
        assert len(out) == 1

    def test_max_len_below_one_rejected(self):
        with pytest.raises(SequenceError):
            greedy_decode(_tiny_params(), [BOS_ID, 5], max_len=0)

    def test_decode_capped_by_model_max_len(self):
        params = _tiny_params()
        out = greedy_decode(params, [BOS_ID, 5, EOS_ID], max_len=10_000)
        assert len(out) <= TINY.max_len - 1


class TestGenerateMetaphor:
    def test_untrained_model_returns_token_sentence(self):
        vocab = Vocab(["he", "runs", "every", "morning"])
        config = TransformerConfig(
            vocab_size=len(vocab), encoder_layers=1, decoder_layers=1,
            heads=2, d_model=8, d_ff=16, max_len=20, dropout_rate=0.0, seed=1,
        )
        params = init_params(config)
        sent = TokenSentence(("he", "runs", "every", "morning"), verb_index=1)
        out = generate_metaphor(params, vocab, sent)
        assert isinstance(out, TokenSentence)
        assert MET not in "".join(out.tokens) or out.verb_index is None

    def test_requires_marked_verb(self):
        vocab = Vocab(["he", "runs"])
        params = init_params(
            TransformerConfig(
                vocab_size=len(vocab), encoder_layers=1, decoder_layers=1,
                heads=2, d_model=8, d_ff=16, max_len=20, seed=1, dropout_rate=0.0,
            )
        )
        with pytest.raises(ValueError):
            generate_metaphor(params, vocab, TokenSentence(("he", "runs")))


class TestCheckpoint:
    def _roundtrip(self, params):
        sink = io.BytesIO()
        save_checkpoint(params, sink)
        sink.seek(0)
        return load_checkpoint(sink)

    def test_round_trip_preserves_config_and_weights(self):
        params = _tiny_params()
        again = self._roundtrip(params)
        assert again.config == params.config
        for name in params.tensors:
            np.testing.assert_allclose(
                again.tensors[name], params.tensors[name], atol=1e-6
            )

    def test_round_trip_preserves_behavior(self):
        params = _tiny_params()
        again = self._roundtrip(params)
        src, tgt = [BOS_ID, 5, 6, EOS_ID], [BOS_ID, 7, 8]
        np.testing.assert_allclose(
            forward(again, src, tgt), forward(params, src, tgt), atol=1e-4
        )

    def test_bad_magic_rejected(self):
        with pytest.raises(CheckpointError):
            load_checkpoint(io.BytesIO(b"NOTMAGIC" + b"\x00" * 32))

    def test_truncated_payload_rejected(self):
        sink = io.BytesIO()
        save_checkpoint(_tiny_params(), sink)
        clipped = sink.getvalue()[:-17]
        with pytest.raises(CheckpointError):
            load_checkpoint(io.BytesIO(clipped))

    def test_tampered_shape_rejected(self):
        sink = io.BytesIO()
        save_checkpoint(_tiny_params(), sink)
        blob = sink.getvalue()
        (header_len,) = struct.unpack("<Q", blob[8:16])
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        header["tensors"][0]["shape"] = [2, 2]
        new_header = json.dumps(header, sort_keys=True).encode("utf-8")
        tampered = (
            blob[:8]
            + struct.pack("<Q", len(new_header))
            + new_header
            + blob[16 + header_len :]
        )
        with pytest.raises(CheckpointError):
            load_checkpoint(io.BytesIO(tampered))

    def test_missing_tensor_rejected(self):
        sink = io.BytesIO()
        save_checkpoint(_tiny_params(), sink)
        blob = sink.getvalue()
        (header_len,) = struct.unpack("<Q", blob[8:16])
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        del header["tensors"][0]
        new_header = json.dumps(header, sort_keys=True).encode("utf-8")
        tampered = (
            blob[:8]
            + struct.pack("<Q", len(new_header))
            + new_header
            + blob[16 + header_len :]
        )
        with pytest.raises(CheckpointError):
            load_checkpoint(io.BytesIO(tampered))
