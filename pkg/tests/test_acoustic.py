import numpy as np
import pytest
import torch

from speechedit.acoustic import (
    BACKWARD,
    FORWARD,
    AcousticModel,
    AcousticNet,
    Batch,
    DurationModel,
    ModelConfig,
    TrainingExample,
    acoustic_train_step,
    batch_hidden,
    build_hidden,
    duration_losses,
    length_regulate,
    position_embedding,
    round_half_up_durations,
    teacher_forced_losses,
)
from speechedit.errors import InvalidInputError, TrainingDivergedError

TINY = ModelConfig(scale_factor=1 / 16)


def tiny_net(n_phones=6, n_speakers=2, seed=0) -> AcousticNet:
    torch.manual_seed(seed)
    net = AcousticNet(n_phones, n_speakers, TINY)
    net.eval()
    return net


def random_examples(n, rng, n_phones=6, frames=(3, 9)):
    out = []
    for _ in range(n):
        length = rng.integers(2, 6)
        durations = tuple(int(d) for d in rng.integers(*frames, size=length))
        phones = tuple(f"P{int(i)}" for i in rng.integers(0, n_phones, size=length))
        mel = rng.normal(size=(sum(durations), 80)).astype(np.float32)
        out.append(TrainingExample(phones=phones, durations=durations, mel=mel, speaker_id="s0"))
    return out


PHONE_IDS = {f"P{i}": i for i in range(6)}
SPEAKERS = {"s0": 0}


class TestLengthRegulate:
    def test_repeats_in_order(self):
        emb = torch.tensor([[1.0], [2.0]])
        out = length_regulate(emb, [2, 3])
        assert out.squeeze(1).tolist() == [1, 1, 2, 2, 2]

    def test_all_ones_is_identity(self):
        emb = torch.arange(12.0).reshape(4, 3)
        assert torch.equal(length_regulate(emb, [1, 1, 1, 1]), emb)

    def test_output_length_matches_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            durations = rng.integers(1, 9, size=n)
            emb = torch.zeros(n, 4)
            assert length_regulate(emb, durations).shape[0] == durations.sum()

    def test_zero_duration_rejected(self):
        with pytest.raises(InvalidInputError):
            length_regulate(torch.zeros(2, 3), [1, 0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            length_regulate(torch.zeros(2, 3), [1, 1, 1])


class TestPositionEmbedding:
    def test_duration_four(self):
        assert position_embedding([4]).tolist() == pytest.approx([0.0, 1 / 3, 2 / 3, 1.0])

    def test_duration_one(self):
        assert position_embedding([1]).tolist() == [0.0]

    def test_resets_at_phone_starts(self):
        assert position_embedding([2, 2]).tolist() == [0.0, 1.0, 0.0, 1.0]


class TestBuildHidden:
    def test_shape_is_concatenation(self):
        out = build_hidden(torch.zeros(5, 512), torch.zeros(5), torch.zeros(128))
        assert out.shape == (5, 641)

    def test_zero_speaker_block(self):
        out = build_hidden(torch.ones(4, 8), torch.ones(4), torch.zeros(3))
        assert torch.all(out[:, -3:] == 0)

    def test_two_speakers_differ_only_in_speaker_block(self):
        text = torch.randn(6, 8)
        pos = torch.rand(6)
        a = build_hidden(text, pos, torch.full((3,), 0.5))
        b = build_hidden(text, pos, torch.full((3,), -0.5))
        assert torch.equal(a[:, :9], b[:, :9])
        assert not torch.equal(a[:, 9:], b[:, 9:])

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            build_hidden(torch.zeros(4, 8), torch.zeros(5), torch.zeros(2))


class TestTextEncoder:
    def test_one_vector_per_phone(self):
        net = tiny_net()
        ids = torch.tensor([[0, 1, 2, 3, 4]])
        out = net.text_encoder(ids)
        assert out.shape == (1, 5, TINY.encoder_dim)

    def test_deterministic(self):
        net = tiny_net()
        ids = torch.tensor([[0, 1, 2]])
        with torch.no_grad():
            a = net.text_encoder(ids)
            b = net.text_encoder(ids)
        assert torch.equal(a, b)

    def test_conv_stage_receptive_field(self):
        net = tiny_net()
        base = torch.tensor([[0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 5]])
        poked = base.clone()
        position = 6
        poked[0, position] = 3
        with torch.no_grad():
            a = net.text_encoder.conv_stage(base)[0]
            b = net.text_encoder.conv_stage(poked)[0]
        changed = (a - b).abs().sum(dim=1) > 1e-9
        radius = 3 * (TINY.conv_kernel // 2)
        assert changed[position]
        for i in torch.nonzero(changed).flatten().tolist():
            assert abs(i - position) <= radius

    def test_full_encoder_differs_at_poked_position(self):
        net = tiny_net()
        base = torch.tensor([[0, 1, 2, 3, 4]])
        poked = torch.tensor([[0, 1, 5, 3, 4]])
        with torch.no_grad():
            a = net.text_encoder(base)[0]
            b = net.text_encoder(poked)[0]
        assert (a[2] - b[2]).abs().sum() > 1e-9


class TestDecodeStep:
    def zero_args(self, net):
        d = net.config
        return (
            torch.zeros(d.output_dim),
            torch.zeros(d.hidden_dim),
            torch.zeros(d.hidden_dim),
        )

    @pytest.mark.parametrize("direction", [FORWARD, BACKWARD])
    def test_zero_inputs_finite(self, direction):
        net = tiny_net()
        mel, h_prev, h_cur = self.zero_args(net)
        with torch.no_grad():
            frame, state = net.decode_step(direction, mel, h_prev, h_cur, net.initial_state(direction))
        assert frame.shape == (net.config.output_dim,)
        assert torch.all(torch.isfinite(frame))
        assert torch.all(torch.isfinite(state.h1)) and torch.all(torch.isfinite(state.c2))

    def test_identical_calls_identical_outputs(self):
        net = tiny_net()
        mel, h_prev, h_cur = self.zero_args(net)
        with torch.no_grad():
            a, _ = net.decode_step(FORWARD, mel, h_prev, h_cur, net.initial_state(FORWARD))
            b, _ = net.decode_step(FORWARD, mel, h_prev, h_cur, net.initial_state(FORWARD))
        assert torch.equal(a, b)

    def test_sensitive_to_previous_frame(self):
        net = tiny_net()
        mel, h_prev, h_cur = self.zero_args(net)
        poked = mel.clone()
        poked[13] += 1e-3
        with torch.no_grad():
            a, _ = net.decode_step(FORWARD, mel, h_prev, h_cur, net.initial_state(FORWARD))
            b, _ = net.decode_step(FORWARD, poked, h_prev, h_cur, net.initial_state(FORWARD))
        assert (a - b).abs().max() > 0

    def test_unknown_direction_rejected(self):
        net = tiny_net()
        mel, h_prev, h_cur = self.zero_args(net)
        with pytest.raises(InvalidInputError):
            net.decode_step("sideways", mel, h_prev, h_cur, net.initial_state(FORWARD))

    @pytest.mark.parametrize("direction", [FORWARD, BACKWARD])
    def test_stepwise_matches_sequence_pass(self, direction):
        # The same weights drive training (whole sequences) and partial
        # inference (frame by frame); the two paths must agree.
        net = tiny_net()
        t, dh = 2, net.config.hidden_dim
        torch.manual_seed(5)
        mel = torch.randn(t, net.config.output_dim)
        hidden = torch.randn(t, dh)
        with torch.no_grad():
            mel_prev = torch.cat([torch.zeros(1, net.config.output_dim), mel[:-1]])
            h_prev = torch.cat([torch.zeros(1, dh), hidden[:-1]])
            seq = net.decode_sequence(
                direction, mel_prev.unsqueeze(0), h_prev.unsqueeze(0), hidden.unsqueeze(0)
            )[0]

            state = net.initial_state(direction)
            prev_mel = torch.zeros(net.config.output_dim)
            prev_h = torch.zeros(dh)
            stepped = []
            for i in range(t):
                frame, state = net.decode_step(direction, prev_mel, prev_h, hidden[i], state)
                stepped.append(frame)
                prev_mel = mel[i]
                prev_h = hidden[i]
        assert torch.allclose(torch.stack(stepped), seq, atol=1e-6)

    def test_forward_predictions_causal(self):
        net = tiny_net()
        rng = np.random.default_rng(0)
        example = random_examples(1, rng)[0]
        batch = Batch([example], PHONE_IDS, SPEAKERS)
        hidden = batch_hidden(net, batch)
        poked = Batch([example], PHONE_IDS, SPEAKERS)
        k = batch.mel.shape[1] - 2
        poked.mel[0, k:] += 1.0
        from speechedit.acoustic import _shift_right

        with torch.no_grad():
            a = net.decode_sequence(FORWARD, _shift_right(batch.mel), _shift_right(hidden), hidden)
            b = net.decode_sequence(FORWARD, _shift_right(poked.mel), _shift_right(hidden), hidden)
        assert torch.allclose(a[0, : k + 1], b[0, : k + 1])
        assert not torch.allclose(a[0, k + 1], b[0, k + 1])


class TestTraining:
    def test_fresh_model_finite_positive_losses(self, corpus, desk_config):
        model = AcousticModel(config=desk_config, seed=3, iterations=2).fit(corpus)
        for _, l_fwd, l_bwd in model.losses_:
            assert np.isfinite(l_fwd) and np.isfinite(l_bwd)
            assert l_fwd > 0 and l_bwd > 0

    def test_loss_permutation_invariant_across_batch(self):
        rng = np.random.default_rng(7)
        examples = random_examples(3, rng)
        net = tiny_net()
        with torch.no_grad():
            a = teacher_forced_losses(net, Batch(examples, PHONE_IDS, SPEAKERS))
            b = teacher_forced_losses(net, Batch(examples[::-1], PHONE_IDS, SPEAKERS))
        assert torch.allclose(a[0], b[0], atol=1e-6)
        assert torch.allclose(a[1], b[1], atol=1e-6)

    def test_nan_loss_aborts(self):
        rng = np.random.default_rng(1)
        examples = random_examples(2, rng)
        net = tiny_net()
        net.train()
        with torch.no_grad():
            net.mel_proj.weight.fill_(float("nan"))
        optimizer = torch.optim.Adam(net.parameters())
        with pytest.raises(TrainingDivergedError):
            acoustic_train_step(net, optimizer, Batch(examples, PHONE_IDS, SPEAKERS))

    def test_fixed_seed_training_bit_reproducible(self, corpus, desk_config):
        def run():
            model = AcousticModel(config=desk_config, seed=11, iterations=6).fit(corpus)
            blob = b"".join(
                p.detach().numpy().tobytes() for p in model.net_.state_dict().values()
            )
            return model.losses_, blob

        losses_a, blob_a = run()
        losses_b, blob_b = run()
        assert losses_a == losses_b
        assert blob_a == blob_b

    def test_seed_changes_trajectory(self, corpus, desk_config):
        a = AcousticModel(config=desk_config, seed=1, iterations=3).fit(corpus)
        b = AcousticModel(config=desk_config, seed=2, iterations=3).fit(corpus)
        assert a.losses_ != b.losses_


class TestDurationModel:
    class FakeNet:
        def __init__(self, offset):
            self.offset = offset

        def __call__(self, phone_ids, lengths=None, encoder=None):
            target = torch.tensor([[8.0, 2.0, 5.0, 1.0]])
            return torch.log(target) + self.offset

    def batch(self):
        example = TrainingExample(
            phones=("P0", "P1", "P2", "P3"),
            durations=(8, 2, 5, 1),
            mel=np.zeros((16, 80), dtype=np.float32),
            speaker_id="s0",
        )
        return Batch([example], PHONE_IDS, SPEAKERS)

    def test_perfect_predictor_zero_loss(self):
        loss = duration_losses(self.FakeNet(0.0), self.batch())
        assert float(loss) == pytest.approx(0.0, abs=1e-12)

    def test_e_scaled_prediction_gives_unit_loss(self):
        loss = duration_losses(self.FakeNet(1.0), self.batch())
        assert float(loss) == pytest.approx(1.0, abs=1e-6)

    def test_round_half_up(self):
        assert round_half_up_durations(np.array([0.0])) == [1]
        assert round_half_up_durations(np.log(np.array([10.4]))) == [10]
        assert round_half_up_durations(np.log(np.array([10.5]))) == [11]
        assert round_half_up_durations(np.array([-5.0])) == [1]

    def test_overfit_predictions_close_to_ground_truth(self, corpus, trained):
        duration = trained["duration"]
        for utt in corpus.ordered():
            predicted = duration.predict(utt.phones)
            actual = np.array(utt.alignment.durations())
            assert np.all(np.abs(predicted - actual) <= 2)

    def test_unknown_phone_rejected(self, corpus, trained):
        with pytest.raises(InvalidInputError):
            trained["duration"].predict(["NOT_A_PHONE"])


class TestCheckpoints:
    def test_acoustic_round_trip(self, tmp_path, corpus, desk_config):
        model = AcousticModel(config=desk_config, seed=5, iterations=2).fit(corpus)
        path = tmp_path / "ac.ckpt"
        model.save(path)
        loaded = AcousticModel.load(path)
        assert loaded.step_ == model.step_
        assert loaded.phone_inventory_ == model.phone_inventory_
        for name, tensor in model.net_.state_dict().items():
            assert torch.equal(loaded.net_.state_dict()[name], tensor)

    def test_duration_round_trip_and_binding(self, tmp_path, corpus, desk_config):
        acoustic = AcousticModel(config=desk_config, seed=5, iterations=1).fit(corpus)
        duration = DurationModel(config=desk_config, seed=5, iterations=2).fit(
            corpus, text_encoder=acoustic.net_.text_encoder
        )
        path = tmp_path / "du.ckpt"
        duration.save(path)
        loaded = DurationModel.load(path)
        with pytest.raises(InvalidInputError):
            loaded.predict(corpus.get("utt-001").phones)
        loaded.bind_encoder(acoustic)
        before = duration.predict(corpus.get("utt-001").phones)
        after = loaded.predict(corpus.get("utt-001").phones)
        assert np.array_equal(before, after)

    def test_wrong_kind_rejected(self, tmp_path, corpus, desk_config):
        model = AcousticModel(config=desk_config, seed=5, iterations=1).fit(corpus)
        path = tmp_path / "ac.ckpt"
        model.save(path)
        with pytest.raises(InvalidInputError):
            DurationModel.load(path)
