"""Neural core: text encoder, length regulator, prenet, forward/backward
decoders, duration predictor, training loops and checkpointing.

Both decoders share one prenet and one output projection. Generation length
is fully determined by the duration sequence; there is no stop token.
"""

from dataclasses import dataclass, asdict
import json
import zipfile

import numpy as np
import torch
import torch.nn as nn
from sklearn.base import BaseEstimator

from .errors import InvalidInputError, TrainingDivergedError
from .frontend import PhoneSequence

FORWARD = "forward"
BACKWARD = "backward"

CHECKPOINT_FORMAT = "speechedit-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Full-scale widths; scale_factor < 1 shrinks everything but the
    80-channel mel interface for desk-scale runs."""

    text_embed_dim: int = 512
    conv_layers: int = 3
    conv_kernel: int = 5
    conv_channels: int = 512
    encoder_recurrent_dim: int = 512  # total over both directions
    speaker_embed_dim: int = 128
    prenet_dims: tuple[int, ...] = (256, 256)
    decoder_recurrent_dim: int = 1024
    output_dim: int = 80
    duration_recurrent_dim: int = 512  # total over both directions
    duration_layers: int = 2
    prenet_dropout: float = 0.5
    scale_factor: float = 1.0
    shared_encoder: bool = True

    def scaled(self, dim: int, multiple: int = 1) -> int:
        value = max(1, round(dim * self.scale_factor / multiple)) * multiple
        return value

    @property
    def text_dim(self) -> int:
        return self.scaled(self.text_embed_dim)

    @property
    def conv_dim(self) -> int:
        return self.scaled(self.conv_channels)

    @property
    def encoder_dim(self) -> int:
        return self.scaled(self.encoder_recurrent_dim, multiple=2)

    @property
    def speaker_dim(self) -> int:
        return self.scaled(self.speaker_embed_dim)

    @property
    def prenet_sizes(self) -> tuple[int, ...]:
        return tuple(self.scaled(d) for d in self.prenet_dims)

    @property
    def decoder_dim(self) -> int:
        return self.scaled(self.decoder_recurrent_dim)

    @property
    def duration_dim(self) -> int:
        return self.scaled(self.duration_recurrent_dim, multiple=2)

    @property
    def hidden_dim(self) -> int:
        # frame-level hidden = [text | position scalar | speaker]
        return self.encoder_dim + 1 + self.speaker_dim


def length_regulate(phone_embeddings: torch.Tensor, durations) -> torch.Tensor:
    """Repeat embedding i durations[i] times; output length is sum(durations)."""
    durations = np.asarray(durations)
    if len(durations) != phone_embeddings.shape[0]:
        raise InvalidInputError(
            f"{len(durations)} durations for {phone_embeddings.shape[0]} embeddings"
        )
    if np.any(durations < 1):
        raise InvalidInputError("durations must all be >= 1 frame")
    repeats = torch.as_tensor(durations.astype(np.int64), device=phone_embeddings.device)
    return torch.repeat_interleave(phone_embeddings, repeats, dim=0)


def position_embedding(durations) -> torch.Tensor:
    """Relative frame position within each phone: 0..1 over duration d
    (k/(d-1) for frame k), a single 0 for d == 1."""
    durations = np.asarray(durations)
    if durations.size == 0 or np.any(durations < 1):
        raise InvalidInputError("durations must be a non-empty sequence of frames >= 1")
    chunks = [
        torch.linspace(0.0, 1.0, int(d)) if d > 1 else torch.zeros(1) for d in durations
    ]
    return torch.cat(chunks)


def build_hidden(
    text_frames: torch.Tensor,
    position_frames: torch.Tensor,
    speaker_embedding: torch.Tensor,
) -> torch.Tensor:
    """Per-frame concatenation [text | position | speaker], (T, hidden_dim)."""
    if text_frames.shape[0] != position_frames.shape[0]:
        raise InvalidInputError(
            f"text frames ({text_frames.shape[0]}) and position frames "
            f"({position_frames.shape[0]}) disagree"
        )
    t = text_frames.shape[0]
    speaker = speaker_embedding.reshape(1, -1).expand(t, -1)
    return torch.cat([text_frames, position_frames.reshape(t, 1).to(text_frames.dtype), speaker], dim=1)


class TextEncoder(nn.Module):
    """Phone embedding -> 3 Conv1d (kernel 5) + ReLU -> bidirectional LSTM."""

    def __init__(self, n_phones: int, config: ModelConfig):
        super().__init__()
        self.embedding = nn.Embedding(n_phones, config.text_dim)
        convs = []
        channels = config.text_dim
        for _ in range(config.conv_layers):
            convs.append(
                nn.Conv1d(
                    channels,
                    config.conv_dim,
                    kernel_size=config.conv_kernel,
                    padding=config.conv_kernel // 2,
                )
            )
            channels = config.conv_dim
        self.convs = nn.ModuleList(convs)
        self.blstm = nn.LSTM(
            config.conv_dim,
            config.encoder_dim // 2,
            batch_first=True,
            bidirectional=True,
        )

    def conv_stage(self, phone_ids: torch.Tensor) -> torch.Tensor:
        """Embedding + convolutions only, (B, L, conv_dim)."""
        x = self.embedding(phone_ids).transpose(1, 2)  # (B, C, L)
        for conv in self.convs:
            x = torch.relu(conv(x))
        return x.transpose(1, 2)

    def forward(self, phone_ids: torch.Tensor, lengths=None) -> torch.Tensor:
        """(B, L) ids -> (B, L, encoder_dim) phone-level embeddings."""
        x = self.conv_stage(phone_ids)
        if lengths is not None:
            packed = nn.utils.rnn.pack_padded_sequence(
                x, lengths, batch_first=True, enforce_sorted=False
            )
            out, _ = self.blstm(packed)
            out, _ = nn.utils.rnn.pad_packed_sequence(
                out, batch_first=True, total_length=phone_ids.shape[1]
            )
        else:
            out, _ = self.blstm(x)
        return out


class Prenet(nn.Module):
    """Two linear bottleneck layers on the previous mel frame. Dropout is
    active only in training mode; inference must be deterministic."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        sizes = (config.output_dim,) + config.prenet_sizes
        self.layers = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(sizes[:-1], sizes[1:])
        )
        self.dropout = nn.Dropout(config.prenet_dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            x = torch.relu(layer(x))
            if self.training:
                x = self.dropout(x)
        return x


@dataclass
class DecoderState:
    """Recurrent hidden/cell values for both LSTMs of one decoder."""

    h1: torch.Tensor
    c1: torch.Tensor
    h2: torch.Tensor
    c2: torch.Tensor


class UnidirectionalDecoder(nn.Module):
    """Two stacked unidirectional LSTMs.

    The first consumes [prenet(previous mel) | hidden of the preceding
    frame]; the second consumes [context | hidden of the current frame].
    "Preceding" is t-1 when run forward and t+1 when fed time-reversed
    sequences for backward generation.
    """

    def __init__(self, config: ModelConfig, prenet_out: int):
        super().__init__()
        self.lstm1 = nn.LSTM(prenet_out + config.hidden_dim, config.decoder_dim, batch_first=True)
        self.lstm2 = nn.LSTM(
            config.decoder_dim + config.hidden_dim, config.decoder_dim, batch_first=True
        )

    def forward(
        self, prenet_prev: torch.Tensor, h_prev: torch.Tensor, h_cur: torch.Tensor
    ) -> torch.Tensor:
        """Whole-sequence pass, (B, T, decoder_dim)."""
        context, _ = self.lstm1(torch.cat([prenet_prev, h_prev], dim=-1))
        out, _ = self.lstm2(torch.cat([context, h_cur], dim=-1))
        return out

    def initial_state(self, dtype, device) -> DecoderState:
        d = self.lstm1.hidden_size
        zero = lambda: torch.zeros(1, 1, d, dtype=dtype, device=device)
        return DecoderState(zero(), zero(), zero(), zero())

    def step(
        self,
        prenet_prev: torch.Tensor,
        h_prev: torch.Tensor,
        h_cur: torch.Tensor,
        state: DecoderState,
    ) -> tuple[torch.Tensor, DecoderState]:
        """One frame; inputs are 1-d tensors."""
        x1 = torch.cat([prenet_prev, h_prev]).reshape(1, 1, -1)
        context, (h1, c1) = self.lstm1(x1, (state.h1, state.c1))
        x2 = torch.cat([context.reshape(-1), h_cur]).reshape(1, 1, -1)
        out, (h2, c2) = self.lstm2(x2, (state.h2, state.c2))
        return out.reshape(-1), DecoderState(h1, c1, h2, c2)


class AcousticNet(nn.Module):
    """Text encoder, speaker table, shared prenet, two decoders, shared
    mel projection.

    Mel frames cross the decoder boundary in a normalized feature space
    (per-channel statistics captured from the training corpus as buffers);
    predictions and losses stay in the raw log-mel domain.
    """

    def __init__(self, n_phones: int, n_speakers: int, config: ModelConfig):
        super().__init__()
        self.config = config
        self.text_encoder = TextEncoder(n_phones, config)
        self.speaker_embedding = nn.Embedding(n_speakers, config.speaker_dim)
        self.prenet = Prenet(config)
        prenet_out = config.prenet_sizes[-1]
        self.forward_decoder = UnidirectionalDecoder(config, prenet_out)
        self.backward_decoder = UnidirectionalDecoder(config, prenet_out)
        self.mel_proj = nn.Linear(config.decoder_dim, config.output_dim)
        self.register_buffer("feat_mean", torch.zeros(config.output_dim))
        self.register_buffer("feat_scale", torch.ones(config.output_dim))

    def set_feature_stats(self, mels: np.ndarray) -> None:
        """Capture per-channel normalization statistics from training mels."""
        mean = mels.mean(axis=0)
        std = mels.std(axis=0)
        scale = 2.0 * np.maximum(std, 0.1 * max(float(std.mean()), 1e-3))
        self.feat_mean.copy_(torch.as_tensor(mean, dtype=self.feat_mean.dtype))
        self.feat_scale.copy_(torch.as_tensor(scale, dtype=self.feat_scale.dtype))

    def decoder(self, direction: str) -> UnidirectionalDecoder:
        if direction == FORWARD:
            return self.forward_decoder
        if direction == BACKWARD:
            return self.backward_decoder
        raise InvalidInputError(f"unknown direction {direction!r}")

    def decode_sequence(
        self, direction: str, mel_prev: torch.Tensor, h_prev: torch.Tensor, h_cur: torch.Tensor
    ) -> torch.Tensor:
        """Teacher-forced pass over (possibly time-reversed) sequences."""
        normalized = (mel_prev - self.feat_mean) / self.feat_scale
        out = self.decoder(direction)(self.prenet(normalized), h_prev, h_cur)
        return self.mel_proj(out) * self.feat_scale + self.feat_mean

    def decode_step(
        self,
        direction: str,
        prev_mel_frame: torch.Tensor,
        h_prev: torch.Tensor,
        h_cur: torch.Tensor,
        state: DecoderState,
    ) -> tuple[torch.Tensor, DecoderState]:
        """Predict one mel frame and advance the decoder state."""
        normalized = (prev_mel_frame - self.feat_mean) / self.feat_scale
        out, state = self.decoder(direction).step(
            self.prenet(normalized), h_prev, h_cur, state
        )
        return self.mel_proj(out) * self.feat_scale + self.feat_mean, state

    def initial_state(self, direction: str) -> DecoderState:
        p = next(self.parameters())
        return self.decoder(direction).initial_state(p.dtype, p.device)


class DurationNet(nn.Module):
    """Phone-level log-duration regressor: 2-layer bidirectional LSTM and a
    linear head. Input is either its own phone embedding or a detached
    shared text-encoder embedding."""

    def __init__(self, n_phones: int, config: ModelConfig):
        super().__init__()
        self.config = config
        if config.shared_encoder:
            self.embedding = None
            input_dim = config.encoder_dim
        else:
            self.embedding = nn.Embedding(n_phones, config.text_dim)
            input_dim = config.text_dim
        self.blstm = nn.LSTM(
            input_dim,
            config.duration_dim // 2,
            num_layers=config.duration_layers,
            batch_first=True,
            bidirectional=True,
        )
        self.proj = nn.Linear(config.duration_dim, 1)

    def forward(self, phone_ids: torch.Tensor, lengths=None, encoder=None) -> torch.Tensor:
        """(B, L) ids -> (B, L) log-domain durations."""
        if self.embedding is not None:
            x = self.embedding(phone_ids)
        else:
            if encoder is None:
                raise InvalidInputError("shared-encoder duration model needs a text encoder")
            with torch.no_grad():
                x = encoder(phone_ids, lengths)
        if lengths is not None:
            packed = nn.utils.rnn.pack_padded_sequence(
                x, lengths, batch_first=True, enforce_sorted=False
            )
            out, _ = self.blstm(packed)
            out, _ = nn.utils.rnn.pad_packed_sequence(
                out, batch_first=True, total_length=phone_ids.shape[1]
            )
        else:
            out, _ = self.blstm(x)
        return self.proj(out).squeeze(-1)


@dataclass(frozen=True)
class TrainingExample:
    """One utterance ready for training."""

    phones: tuple[str, ...]
    durations: tuple[int, ...]
    mel: np.ndarray  # (T, 80) float32, T == sum(durations)
    speaker_id: str


def _reverse_padded(x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Reverse each row's valid prefix, leaving padding in place."""
    out = torch.zeros_like(x)
    for b, length in enumerate(lengths.tolist()):
        out[b, :length] = torch.flip(x[b, :length], dims=[0])
    return out


def _shift_right(x: torch.Tensor) -> torch.Tensor:
    zero = torch.zeros_like(x[:, :1])
    return torch.cat([zero, x[:, :-1]], dim=1)


class Batch:
    """Padded tensors for one training step."""

    def __init__(self, examples, phone_to_id, speaker_to_id, dtype=torch.float32):
        if not examples:
            raise InvalidInputError("empty batch")
        self.phone_lengths = torch.tensor([len(e.phones) for e in examples])
        self.frame_lengths = torch.tensor([int(sum(e.durations)) for e in examples])
        max_l = int(self.phone_lengths.max())
        max_t = int(self.frame_lengths.max())
        b = len(examples)

        self.phone_ids = torch.zeros(b, max_l, dtype=torch.long)
        self.durations = torch.zeros(b, max_l, dtype=torch.long)
        self.mel = torch.zeros(b, max_t, 80, dtype=dtype)
        self.speaker_ids = torch.tensor([speaker_to_id[e.speaker_id] for e in examples])
        for i, e in enumerate(examples):
            try:
                ids = [phone_to_id[p] for p in e.phones]
            except KeyError as err:
                raise InvalidInputError(f"unknown phone symbol {err.args[0]!r}") from err
            self.phone_ids[i, : len(ids)] = torch.tensor(ids)
            self.durations[i, : len(e.durations)] = torch.tensor(e.durations)
            if e.mel.shape[0] != int(sum(e.durations)):
                raise InvalidInputError(
                    f"mel has {e.mel.shape[0]} frames but durations sum to {sum(e.durations)}"
                )
            self.mel[i, : e.mel.shape[0]] = torch.as_tensor(e.mel, dtype=dtype)

    def frame_mask(self, dtype) -> torch.Tensor:
        max_t = self.mel.shape[1]
        return (torch.arange(max_t)[None, :] < self.frame_lengths[:, None]).to(dtype)

    def phone_mask(self, dtype) -> torch.Tensor:
        max_l = self.phone_ids.shape[1]
        return (torch.arange(max_l)[None, :] < self.phone_lengths[:, None]).to(dtype)


def batch_hidden(net: AcousticNet, batch: Batch) -> torch.Tensor:
    """Frame-level hidden representations for a padded batch, (B, T, Dh)."""
    enc = net.text_encoder(batch.phone_ids, batch.phone_lengths)
    speaker = net.speaker_embedding(batch.speaker_ids)
    dtype = enc.dtype
    rows = []
    for b in range(batch.phone_ids.shape[0]):
        l = int(batch.phone_lengths[b])
        durs = batch.durations[b, :l].numpy()
        text_frames = length_regulate(enc[b, :l], durs)
        pos = position_embedding(durs).to(dtype)
        rows.append(build_hidden(text_frames, pos, speaker[b]))
    max_t = batch.mel.shape[1]
    hidden = torch.zeros(len(rows), max_t, rows[0].shape[1], dtype=dtype)
    for b, row in enumerate(rows):
        hidden[b, : row.shape[0]] = row
    return hidden


def teacher_forced_losses(net: AcousticNet, batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
    """Masked MSE of forward and backward next-frame prediction, ground
    truth fed at every step in both directions."""
    hidden = batch_hidden(net, batch)
    mask = batch.frame_mask(hidden.dtype).unsqueeze(-1)
    denom = mask.sum() * batch.mel.shape[2]

    pred_f = net.decode_sequence(
        FORWARD, _shift_right(batch.mel), _shift_right(hidden), hidden
    )
    loss_f = (((pred_f - batch.mel) ** 2) * mask).sum() / denom

    rev_mel = _reverse_padded(batch.mel, batch.frame_lengths)
    rev_hidden = _reverse_padded(hidden, batch.frame_lengths)
    pred_b_rev = net.decode_sequence(
        BACKWARD, _shift_right(rev_mel), _shift_right(rev_hidden), rev_hidden
    )
    loss_b = (((pred_b_rev - rev_mel) ** 2) * mask).sum() / denom
    return loss_f, loss_b


def acoustic_train_step(
    net: AcousticNet, optimizer: torch.optim.Optimizer, batch: Batch
) -> tuple[float, float]:
    """One Adam step on the joint forward+backward mel loss."""
    net.train()
    optimizer.zero_grad()
    loss_f, loss_b = teacher_forced_losses(net, batch)
    total = loss_f + loss_b
    if not torch.isfinite(total):
        raise TrainingDivergedError(f"non-finite acoustic loss at training step: {total}")
    total.backward()
    optimizer.step()
    return float(loss_f.detach()), float(loss_b.detach())


def duration_losses(
    net: DurationNet, batch: Batch, encoder: TextEncoder | None = None
) -> torch.Tensor:
    """Masked MSE between log ground-truth and log predicted durations."""
    pred_log = net(batch.phone_ids, batch.phone_lengths, encoder=encoder)
    target_log = torch.log(batch.durations.clamp(min=1).to(pred_log.dtype))
    mask = batch.phone_mask(pred_log.dtype)
    return (((pred_log - target_log) ** 2) * mask).sum() / mask.sum()


def duration_train_step(
    net: DurationNet,
    optimizer: torch.optim.Optimizer,
    batch: Batch,
    encoder: TextEncoder | None = None,
) -> float:
    net.train()
    optimizer.zero_grad()
    loss = duration_losses(net, batch, encoder)
    if not torch.isfinite(loss):
        raise TrainingDivergedError(f"non-finite duration loss at training step: {loss}")
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def round_half_up_durations(log_durations: np.ndarray) -> np.ndarray:
    """exp, round half-up, clamp to a minimum of one frame."""
    frames = np.floor(np.exp(log_durations) + 0.5).astype(np.int64)
    return np.maximum(frames, 1)


class _ExampleStream:
    """Deterministic shuffled cycling over examples."""

    def __init__(self, examples, batch_size: int, seed: int):
        self.examples = list(examples)
        self.batch_size = min(batch_size, len(self.examples))
        self.rng = np.random.default_rng(seed)
        self.order: list[int] = []

    def next_batch(self) -> list:
        while len(self.order) < self.batch_size:
            self.order.extend(self.rng.permutation(len(self.examples)).tolist())
        take, self.order = self.order[: self.batch_size], self.order[self.batch_size :]
        return [self.examples[i] for i in take]


class AcousticModel(BaseEstimator):
    """Trainable bidirectional mel-spectrogram synthesizer.

    fit() consumes an object exposing training_examples(), phone_inventory
    and speakers (see corpus.PreparedCorpus).
    """

    def __init__(
        self,
        config: ModelConfig | None = None,
        seed: int = 1234,
        learning_rate: float = 1e-3,
        weight_decay: float = 1e-6,
        iterations: int = 500,
        batch_size: int = 32,
    ):
        self.config = config
        self.seed = seed
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.iterations = iterations
        self.batch_size = batch_size

    def _setup(self, phone_inventory, speakers):
        self.phone_inventory_ = list(phone_inventory)
        self.speakers_ = list(speakers)
        self.phone_to_id_ = {p: i for i, p in enumerate(self.phone_inventory_)}
        self.speaker_to_id_ = {s: i for i, s in enumerate(self.speakers_)}
        cfg = self.config or ModelConfig()
        torch.manual_seed(self.seed)
        self.net_ = AcousticNet(len(self.phone_inventory_), len(self.speakers_), cfg)
        self.step_ = 0

    def _optimizer(self):
        return torch.optim.Adam(
            self.net_.parameters(), lr=self.learning_rate, weight_decay=self.weight_decay
        )

    def fit(self, corpus, callback=None):
        self._setup(corpus.phone_inventory, corpus.speakers)
        examples = corpus.training_examples()
        if examples:
            self.net_.set_feature_stats(np.concatenate([e.mel for e in examples]))
        optimizer = self._optimizer()
        self.run_training(corpus, optimizer, self.iterations, callback)
        return self

    def run_training(self, corpus, optimizer, iterations, callback=None):
        """Advance training by `iterations` steps; reusable for resume."""
        examples = corpus.training_examples()
        stream = _ExampleStream(examples, self.batch_size, self.seed + self.step_)
        self.losses_ = getattr(self, "losses_", [])
        for _ in range(iterations):
            batch = Batch(stream.next_batch(), self.phone_to_id_, self.speaker_to_id_)
            l_fwd, l_bwd = acoustic_train_step(self.net_, optimizer, batch)
            self.step_ += 1
            self.losses_.append((self.step_, l_fwd, l_bwd))
            if callback is not None:
                callback(self.step_, l_fwd, l_bwd)
        return self

    def teacher_forced_loss(self, corpus) -> tuple[float, float]:
        """Deterministic eval-mode measurement over the whole corpus."""
        self.net_.eval()
        batch = Batch(corpus.training_examples(), self.phone_to_id_, self.speaker_to_id_)
        with torch.no_grad():
            loss_f, loss_b = teacher_forced_losses(self.net_, batch)
        return float(loss_f), float(loss_b)

    def phone_ids(self, phones) -> torch.Tensor:
        symbols = phones.phones if isinstance(phones, PhoneSequence) else tuple(phones)
        try:
            return torch.tensor([[self.phone_to_id_[p] for p in symbols]], dtype=torch.long)
        except KeyError as err:
            raise InvalidInputError(f"unknown phone symbol {err.args[0]!r}") from err

    def encode_text(self, phones) -> torch.Tensor:
        """Phone-level embeddings, (L, encoder_dim); deterministic."""
        self.net_.eval()
        with torch.no_grad():
            return self.net_.text_encoder(self.phone_ids(phones))[0]

    def hidden_for(self, phones, durations, speaker_id: str) -> torch.Tensor:
        """Frame-level hidden sequence for one utterance, (sum durations, Dh)."""
        if speaker_id not in self.speaker_to_id_:
            raise InvalidInputError(f"unknown speaker {speaker_id!r}")
        self.net_.eval()
        with torch.no_grad():
            text = length_regulate(self.encode_text(phones), durations)
            pos = position_embedding(durations)
            speaker = self.net_.speaker_embedding(
                torch.tensor(self.speaker_to_id_[speaker_id])
            )
            return build_hidden(text, pos, speaker)

    def save(self, path, extras: dict | None = None) -> None:
        save_checkpoint(
            path,
            kind="acoustic",
            config=self.net_.config,
            net=self.net_,
            step=self.step_,
            seed=self.seed,
            phone_inventory=self.phone_inventory_,
            speakers=self.speakers_,
            extras=extras,
        )

    @classmethod
    def load(cls, path) -> "AcousticModel":
        header, state, _ = load_checkpoint(path, expected_kind="acoustic")
        model = cls(config=ModelConfig(**header["config"]), seed=header["seed"])
        model.phone_inventory_ = header["phone_inventory"]
        model.speakers_ = header["speakers"]
        model.phone_to_id_ = {p: i for i, p in enumerate(model.phone_inventory_)}
        model.speaker_to_id_ = {s: i for i, s in enumerate(model.speakers_)}
        model.net_ = AcousticNet(
            len(model.phone_inventory_), len(model.speakers_), model.config
        )
        model.net_.load_state_dict(state)
        model.net_.eval()
        model.step_ = header["step"]
        return model


class DurationModel(BaseEstimator):
    """Trainable phone-duration predictor (log-frame domain)."""

    def __init__(
        self,
        config: ModelConfig | None = None,
        seed: int = 1234,
        learning_rate: float = 1e-3,
        weight_decay: float = 1e-6,
        iterations: int = 500,
        batch_size: int = 32,
    ):
        self.config = config
        self.seed = seed
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.iterations = iterations
        self.batch_size = batch_size

    def fit(self, corpus, text_encoder: TextEncoder | None = None, callback=None):
        cfg = self.config or ModelConfig()
        self.phone_inventory_ = list(corpus.phone_inventory)
        self.phone_to_id_ = {p: i for i, p in enumerate(self.phone_inventory_)}
        torch.manual_seed(self.seed + 1)
        self.net_ = DurationNet(len(self.phone_inventory_), cfg)
        self.encoder_ = text_encoder
        if cfg.shared_encoder and text_encoder is None:
            raise InvalidInputError("config.shared_encoder requires a fitted text encoder")
        optimizer = torch.optim.Adam(
            self.net_.parameters(), lr=self.learning_rate, weight_decay=self.weight_decay
        )
        examples = corpus.training_examples()
        stream = _ExampleStream(examples, self.batch_size, self.seed + 1)
        self.losses_ = []
        self.step_ = 0
        for _ in range(self.iterations):
            batch = Batch(stream.next_batch(), self.phone_to_id_, {e.speaker_id: 0 for e in examples})
            loss = duration_train_step(self.net_, optimizer, batch, encoder=self.encoder_)
            self.step_ += 1
            self.losses_.append((self.step_, loss))
            if callback is not None:
                callback(self.step_, loss)
        return self

    def eval_loss(self, corpus) -> float:
        self.net_.eval()
        examples = corpus.training_examples()
        batch = Batch(examples, self.phone_to_id_, {e.speaker_id: 0 for e in examples})
        with torch.no_grad():
            return float(duration_losses(self.net_, batch, encoder=self.encoder_))

    def bind_encoder(self, acoustic: AcousticModel) -> None:
        self.encoder_ = acoustic.net_.text_encoder

    def predict(self, phones) -> np.ndarray:
        """Per-phone frame counts, integers >= 1."""
        symbols = phones.phones if isinstance(phones, PhoneSequence) else tuple(phones)
        try:
            ids = torch.tensor([[self.phone_to_id_[p] for p in symbols]], dtype=torch.long)
        except KeyError as err:
            raise InvalidInputError(f"unknown phone symbol {err.args[0]!r}") from err
        self.net_.eval()
        if self.net_.config.shared_encoder and self.encoder_ is None:
            raise InvalidInputError("duration model not bound to a text encoder")
        with torch.no_grad():
            log_d = self.net_(ids, encoder=self.encoder_)[0].numpy()
        return round_half_up_durations(log_d)

    def save(self, path, extras: dict | None = None) -> None:
        save_checkpoint(
            path,
            kind="duration",
            config=self.net_.config,
            net=self.net_,
            step=self.step_,
            seed=self.seed,
            phone_inventory=self.phone_inventory_,
            speakers=[],
            extras=extras,
        )

    @classmethod
    def load(cls, path) -> "DurationModel":
        header, state, _ = load_checkpoint(path, expected_kind="duration")
        model = cls(config=ModelConfig(**header["config"]), seed=header["seed"])
        model.phone_inventory_ = header["phone_inventory"]
        model.phone_to_id_ = {p: i for i, p in enumerate(model.phone_inventory_)}
        model.net_ = DurationNet(len(model.phone_inventory_), model.config)
        model.net_.load_state_dict(state)
        model.net_.eval()
        model.step_ = header["step"]
        model.encoder_ = None
        return model


def optimizer_state_extras(optimizer: torch.optim.Optimizer) -> dict[str, np.ndarray]:
    """Flatten Adam moments (and the torch RNG state) into named arrays so a
    checkpoint can resume training without a loss transient."""
    extras = {"rng/torch": torch.get_rng_state().numpy()}
    state = optimizer.state_dict()["state"]
    for idx, entry in state.items():
        for key, value in entry.items():
            arr = np.asarray(value.detach().numpy() if torch.is_tensor(value) else value)
            extras[f"opt/{idx}/{key}"] = arr.astype(np.float32)
    return extras


def restore_optimizer_state(optimizer: torch.optim.Optimizer, extras: dict) -> None:
    rng = extras.get("rng/torch")
    if rng is not None:
        torch.set_rng_state(torch.from_numpy(rng.astype(np.uint8)))
    state_dict = optimizer.state_dict()
    state: dict[int, dict] = {}
    for name, arr in extras.items():
        if not name.startswith("opt/"):
            continue
        _, idx, key = name.split("/", 2)
        entry = state.setdefault(int(idx), {})
        entry[key] = torch.tensor(float(arr)) if arr.ndim == 0 else torch.from_numpy(arr.copy())
    if state:
        state_dict["state"] = state
        optimizer.load_state_dict(state_dict)


def save_checkpoint(
    path,
    kind: str,
    config: ModelConfig,
    net: nn.Module,
    step: int,
    seed: int,
    phone_inventory,
    speakers,
    extras: dict | None = None,
) -> None:
    """Single-file archive: JSON header plus named little-endian float32
    parameter blocks. `extras` may carry optimizer/RNG state for resume."""
    state = net.state_dict()
    params = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
    extra_meta = []
    extra_blobs = {}
    for name, value in (extras or {}).items():
        arr = np.asarray(value)
        extra_meta.append({"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)})
        extra_blobs[name] = arr
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": asdict(config),
        "step": int(step),
        "seed": int(seed),
        "phone_inventory": list(phone_inventory),
        "speakers": list(speakers),
        "params": params,
        "extras": extra_meta,
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("header.json", json.dumps(header, sort_keys=True, indent=1))
        for name, tensor in state.items():
            zf.writestr(
                f"params/{name}", tensor.detach().numpy().astype("<f4").tobytes(order="C")
            )
        for name, arr in extra_blobs.items():
            zf.writestr(f"extras/{name}", np.ascontiguousarray(arr).tobytes(order="C"))


def load_checkpoint(path, expected_kind: str | None = None):
    """Returns (header, state_dict, extras)."""
    with zipfile.ZipFile(path, "r") as zf:
        header = json.loads(zf.read("header.json"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise InvalidInputError(f"{path}: not a model checkpoint")
        if expected_kind and header["kind"] != expected_kind:
            raise InvalidInputError(
                f"{path}: expected a {expected_kind} checkpoint, found {header['kind']}"
            )
        header["config"]["prenet_dims"] = tuple(header["config"]["prenet_dims"])
        state = {}
        for meta in header["params"]:
            raw = zf.read(f"params/{meta['name']}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(meta["shape"]).copy()
            state[meta["name"]] = torch.from_numpy(arr)
        extras = {}
        for meta in header["extras"]:
            raw = zf.read(f"extras/{meta['name']}")
            extras[meta["name"]] = (
                np.frombuffer(raw, dtype=meta["dtype"]).reshape(meta["shape"]).copy()
            )
    return header, state, extras
