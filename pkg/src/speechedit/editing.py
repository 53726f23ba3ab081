"""Word-level speech editing on mel-spectrograms: deletion by frame splicing,
insertion/replacement by duration refinement, partial inference in both
decoding directions, and bidirectional fusion at the minimum-discrepancy
frame.

Frame indices follow two conventions: algorithm formulas are 1-indexed
(frame t covers (len_a, ...] style intervals), array storage is 0-indexed.
RegionSplit keeps the conversions in one place.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .acoustic import BACKWARD, FORWARD, AcousticModel, DurationModel
from .dsp import MelSpectrogram
from .errors import InvalidInputError, InvalidRequestError
from .frontend import Alignment, EditRequest, Lexicon, PhoneSequence, g2p, locate_region, splice_phones
from .validation import check_frame_range


@dataclass(frozen=True)
class RegionSplit:
    """Frame bookkeeping for an edit: unmodified prefix A, edited middle B',
    unmodified suffix C, and the original middle's length."""

    len_a: int
    len_b_edit: int
    len_c: int
    orig_len_b: int

    def __post_init__(self):
        if min(self.len_a, self.len_b_edit, self.len_c, self.orig_len_b) < 0:
            raise InvalidInputError("region lengths must be non-negative")
        if self.t_tot < 1:
            raise InvalidInputError("edited utterance must keep at least one frame")

    @property
    def t_tot(self) -> int:
        return self.len_a + self.len_b_edit + self.len_c

    @property
    def orig_total(self) -> int:
        return self.len_a + self.orig_len_b + self.len_c

    @property
    def shift(self) -> int:
        # Added to an edited frame index to reach the matching original
        # frame inside region C.
        return self.orig_len_b - self.len_b_edit

    def modified_slice(self) -> slice:
        """0-indexed storage slice of the modified region."""
        return slice(self.len_a, self.len_a + self.len_b_edit)

    def is_modified(self, t: int) -> bool:
        """1-indexed membership test for the modified region."""
        return self.len_a < t <= self.len_a + self.len_b_edit


@dataclass(frozen=True)
class EditResult:
    edited_mel: MelSpectrogram
    split: RegionSplit
    t_fusion: int | None
    forward_mel: np.ndarray | None  # predictions over frames 1..len_a+len_b_edit
    backward_mel: np.ndarray | None  # predictions over frames len_a+1..t_tot
    edited_durations: tuple[int, ...]
    edited_phones: PhoneSequence | None = None

    def report(self) -> dict:
        return {
            "t_fusion": self.t_fusion,
            "len_A": self.split.len_a,
            "len_B_edit": self.split.len_b_edit,
            "len_C": self.split.len_c,
            "edited_durations": list(self.edited_durations),
        }


def delete_region(mel: MelSpectrogram, frame_range: tuple[int, int]) -> MelSpectrogram:
    """Remove [start, end) frames; the rest is copied bit-exactly."""
    start, end = check_frame_range(frame_range, mel.num_frames)
    if end - start == mel.num_frames:
        raise InvalidInputError("cannot delete every frame of the utterance")
    kept = np.concatenate([mel.frames[:start], mel.frames[end:]])
    return MelSpectrogram(frames=kept)


def refine_durations(orig_a, orig_c, pred_a, pred_c, pred_b_edit) -> np.ndarray:
    """Scale predicted middle durations so the speaking rate matches the
    unmodified context: s = sum(orig_A + orig_C) / sum(pred_A + pred_C).
    Rounded half-up, clamped to >= 1 frame. s = 1 when A and C are empty."""
    orig_a, orig_c = np.asarray(orig_a, dtype=np.int64), np.asarray(orig_c, dtype=np.int64)
    pred_a, pred_c = np.asarray(pred_a, dtype=np.int64), np.asarray(pred_c, dtype=np.int64)
    pred_b = np.asarray(pred_b_edit, dtype=np.float64)
    if len(orig_a) != len(pred_a) or len(orig_c) != len(pred_c):
        raise InvalidInputError("original and predicted context durations must pair up")
    denom = pred_a.sum() + pred_c.sum()
    if denom == 0:
        if orig_a.size or orig_c.size:
            raise InvalidInputError("predicted context durations sum to zero")
        scale = 1.0
    else:
        scale = float(orig_a.sum() + orig_c.sum()) / float(denom)
    refined = np.floor(pred_b * scale + 0.5).astype(np.int64)
    return np.maximum(refined, 1)


def _context_frame(original: np.ndarray, split: RegionSplit, t: int, direction: str) -> np.ndarray:
    """Original frame fed as decoder context at 1-indexed edited position t."""
    if direction == FORWARD:
        return original[t - 1]
    return original[t - 1 + split.shift]


def partial_inference(
    direction: str,
    model: AcousticModel,
    hidden: torch.Tensor,
    original_mel: MelSpectrogram,
    split: RegionSplit,
) -> np.ndarray:
    """Run one decoder over its half of the utterance.

    In the unmodified region the prediction at each step is recorded but
    discarded as context: the original frame is fed back instead. Inside
    the modified region the decoder feeds on its own predictions.

    Forward covers frames 1..len_a+len_b_edit and returns them in order.
    Backward covers t_tot..len_a+1 and returns rows indexed by
    t - (len_a + 1).
    """
    if hidden.shape[0] != split.t_tot:
        raise InvalidInputError(
            f"hidden has {hidden.shape[0]} frames, edited utterance has {split.t_tot}"
        )
    if original_mel.num_frames != split.orig_total:
        raise InvalidInputError(
            f"original mel has {original_mel.num_frames} frames, split implies {split.orig_total}"
        )
    net = model.net_
    net.eval()
    original = original_mel.frames
    dtype = next(net.parameters()).dtype
    zero_frame = torch.zeros(net.config.output_dim, dtype=dtype)
    zero_hidden = torch.zeros(hidden.shape[1], dtype=dtype)

    if direction == FORWARD:
        steps = range(1, split.len_a + split.len_b_edit + 1)
        first_unmodified = lambda t: t <= split.len_a
        row = lambda t: t - 1
    elif direction == BACKWARD:
        steps = range(split.t_tot, split.len_a, -1)
        first_unmodified = lambda t: t > split.len_a + split.len_b_edit
        row = lambda t: t - split.len_a - 1
    else:
        raise InvalidInputError(f"unknown direction {direction!r}")

    out = np.zeros((len(steps), net.config.output_dim), dtype=np.float32)
    state = net.initial_state(direction)
    prev_mel = zero_frame
    prev_hidden = zero_hidden
    with torch.no_grad():
        for t in steps:
            h_cur = hidden[t - 1].to(dtype)
            frame, state = net.decode_step(direction, prev_mel, prev_hidden, h_cur, state)
            out[row(t)] = frame.numpy()
            if first_unmodified(t):
                prev_mel = torch.as_tensor(
                    _context_frame(original, split, t, direction), dtype=dtype
                )
            else:
                prev_mel = frame
            prev_hidden = h_cur
    return out


def select_fusion_point(
    forward_mel: np.ndarray, backward_mel: np.ndarray, split: RegionSplit
) -> int:
    """1-indexed frame in the modified region where the two decoders agree
    best (smallest per-frame L2 difference); ties go to the earliest frame."""
    if split.len_b_edit < 1:
        raise InvalidInputError("modified region is empty, no fusion point exists")
    fwd = forward_mel[split.len_a : split.len_a + split.len_b_edit]
    bwd = backward_mel[: split.len_b_edit]
    diffs = np.linalg.norm(
        fwd.astype(np.float64) - bwd.astype(np.float64), axis=1
    )
    return split.len_a + int(np.argmin(diffs)) + 1


def fuse(
    original_mel: MelSpectrogram,
    forward_mel: np.ndarray,
    backward_mel: np.ndarray,
    split: RegionSplit,
    t_fusion: int,
) -> MelSpectrogram:
    """Piecewise edited mel: original A, forward predictions up to the
    fusion point, backward predictions after it, original C. Copies from
    the original are bit-exact."""
    if not split.is_modified(t_fusion):
        raise InvalidInputError(f"fusion point {t_fusion} outside the modified region")
    original = original_mel.frames
    out = np.empty((split.t_tot, original.shape[1]), dtype=original.dtype)
    out[: split.len_a] = original[: split.len_a]
    out[split.len_a : t_fusion] = forward_mel[split.len_a : t_fusion]
    end_b = split.len_a + split.len_b_edit
    out[t_fusion:end_b] = backward_mel[t_fusion - split.len_a : split.len_b_edit]
    out[end_b:] = original[split.len_a + split.orig_len_b :]
    return MelSpectrogram(frames=out)


@dataclass(frozen=True)
class PreparedUtterance:
    """Everything edits need to know about one recorded utterance."""

    id: str
    text: str
    speaker_id: str
    phones: PhoneSequence
    alignment: Alignment
    mel: MelSpectrogram


class SpeechEditor:
    """Orchestrates word-level edits against fitted models."""

    def __init__(self, acoustic: AcousticModel, duration: DurationModel, lexicon: Lexicon):
        self.acoustic = acoustic
        self.duration = duration
        self.lexicon = lexicon

    def edit(self, utterance: PreparedUtterance, request: EditRequest) -> EditResult:
        if request.operation == "delete":
            return self._delete(utterance, request)
        return self._resynthesize(utterance, request)

    def _delete(self, utterance: PreparedUtterance, request: EditRequest) -> EditResult:
        (p0, p1), frame_range = locate_region(utterance.alignment, request)
        edited = delete_region(utterance.mel, frame_range)
        durations = utterance.alignment.durations()
        split = RegionSplit(
            len_a=frame_range[0],
            len_b_edit=0,
            len_c=utterance.mel.num_frames - frame_range[1],
            orig_len_b=frame_range[1] - frame_range[0],
        )
        kept = tuple(durations[:p0] + durations[p1:])
        return EditResult(
            edited_mel=edited,
            split=split,
            t_fusion=None,
            forward_mel=None,
            backward_mel=None,
            edited_durations=kept,
            edited_phones=splice_phones(
                utterance.phones, (p0, p1), PhoneSequence((), ())
            ),
        )

    def plan(self, utterance: PreparedUtterance, request: EditRequest):
        """Shared front half of insert/replace: edited phones, refined
        durations and the region split, before any decoding."""
        (p0, p1), frame_range = locate_region(utterance.alignment, request)
        new_phones = g2p(request.new_text, self.lexicon)
        if len(new_phones) == 0:
            raise InvalidRequestError(f"new text {request.new_text!r} produced no phones")
        edited_phones = splice_phones(utterance.phones, (p0, p1), new_phones)

        predicted = self.duration.predict(edited_phones)
        pred_a = predicted[:p0]
        pred_b = predicted[p0 : p0 + len(new_phones)]
        pred_c = predicted[p0 + len(new_phones) :]

        orig_durations = np.asarray(utterance.alignment.durations(), dtype=np.int64)
        orig_a, orig_c = orig_durations[:p0], orig_durations[p1:]
        refined_b = refine_durations(orig_a, orig_c, pred_a, pred_c, pred_b)

        edited_durations = np.concatenate([orig_a, refined_b, orig_c])
        split = RegionSplit(
            len_a=int(orig_a.sum()),
            len_b_edit=int(refined_b.sum()),
            len_c=int(orig_c.sum()),
            orig_len_b=int(orig_durations[p0:p1].sum()),
        )
        return edited_phones, edited_durations, split

    def _resynthesize(self, utterance: PreparedUtterance, request: EditRequest) -> EditResult:
        edited_phones, edited_durations, split = self.plan(utterance, request)
        hidden = self.acoustic.hidden_for(edited_phones, edited_durations, utterance.speaker_id)
        forward = partial_inference(FORWARD, self.acoustic, hidden, utterance.mel, split)
        backward = partial_inference(BACKWARD, self.acoustic, hidden, utterance.mel, split)
        t_fusion = select_fusion_point(forward, backward, split)
        edited = fuse(utterance.mel, forward, backward, split, t_fusion)
        return EditResult(
            edited_mel=edited,
            split=split,
            t_fusion=t_fusion,
            forward_mel=forward,
            backward_mel=backward,
            edited_durations=tuple(int(d) for d in edited_durations),
            edited_phones=edited_phones,
        )
