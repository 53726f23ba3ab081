"""Objective evaluation: DTW over MCEPs, mel-cepstral distortion, the four
baseline editing strategies, and the masked-word reconstruction experiment."""

from dataclasses import dataclass, field
import math

import numpy as np

from .acoustic import FORWARD, AcousticModel, DurationModel
from .dsp import MCEPSequence, MelSpectrogram, mcep
from .editing import (
    EditResult,
    PreparedUtterance,
    RegionSplit,
    SpeechEditor,
    fuse,
    partial_inference,
)
from .errors import InvalidInputError, InvalidRequestError
from .frontend import EditRequest, PhoneSequence, g2p, locate_region, tokenize_words
from .validation import check_mcep_coeffs

MCD_SCALE = 10.0 / math.log(10.0)

PROPOSED = "proposed"
BASELINE1 = "baseline1"
BASELINE2 = "baseline2"
BASELINE3 = "baseline3"
BASELINE4 = "baseline4"
ALL_SYSTEMS = (BASELINE1, BASELINE2, BASELINE3, BASELINE4, PROPOSED)


@dataclass(frozen=True)
class DTWPath:
    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def dtw(x: MCEPSequence, y: MCEPSequence) -> DTWPath:
    """Minimal-cost monotone alignment under Euclidean frame distance,
    steps {(1,0),(0,1),(1,1)}, anchored at both ends."""
    cx = check_mcep_coeffs(x.coeffs)
    cy = check_mcep_coeffs(y.coeffs)
    tx, ty = cx.shape[0], cy.shape[0]
    dist = np.linalg.norm(cx[:, None, :] - cy[None, :, :], axis=2)
    cost = np.full((tx + 1, ty + 1), np.inf)
    cost[0, 0] = 0.0
    for i in range(1, tx + 1):
        cost[i, 1 : ty + 1] = dist[i - 1]
        for j in range(1, ty + 1):
            cost[i, j] += min(cost[i - 1, j - 1], cost[i - 1, j], cost[i, j - 1])

    pairs = []
    i, j = tx, ty
    while i > 0 or j > 0:
        pairs.append((i - 1, j - 1))
        if i == 1 and j == 1:
            break
        # Diagonal first so equal-cost ties keep identical inputs on it.
        moves = []
        if i > 1 and j > 1:
            moves.append((cost[i - 1, j - 1], (i - 1, j - 1)))
        if i > 1:
            moves.append((cost[i - 1, j], (i - 1, j)))
        if j > 1:
            moves.append((cost[i, j - 1], (i, j - 1)))
        _, (i, j) = min(moves, key=lambda m: m[0])
    pairs.reverse()
    return DTWPath(pairs=tuple(pairs), total_cost=float(cost[tx, ty]))


def _frame_mcd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return MCD_SCALE * np.sqrt(2.0 * ((a - b) ** 2).sum(axis=-1))


def mcd(x: MCEPSequence, y: MCEPSequence, aligned: bool = False) -> float:
    """Mel-cepstral distortion in dB, averaged per aligned frame pair.
    Unequal-length inputs are DTW-aligned unless `aligned` forces direct
    pairing (then lengths must match)."""
    cx = check_mcep_coeffs(x.coeffs)
    cy = check_mcep_coeffs(y.coeffs)
    if aligned:
        if cx.shape[0] != cy.shape[0]:
            raise InvalidInputError("aligned MCD needs equal-length sequences")
        return float(_frame_mcd(cx, cy).mean())
    path = dtw(x, y)
    ii = np.array([p[0] for p in path.pairs])
    jj = np.array([p[1] for p in path.pairs])
    return float(_frame_mcd(cx[ii], cy[jj]).mean())


@dataclass(frozen=True)
class SystemOutput:
    """A system's edited mel plus where its own A/B'/C regions sit."""

    mel: MelSpectrogram
    len_a: int
    len_b: int
    len_c: int


def _free_run(model: AcousticModel, phones, durations, speaker_id: str) -> MelSpectrogram:
    """Forward decoder free-running from zero init over the whole utterance."""
    hidden = model.hidden_for(phones, durations, speaker_id)
    total = int(np.asarray(durations).sum())
    split = RegionSplit(len_a=0, len_b_edit=total, len_c=0, orig_len_b=total)
    dummy = MelSpectrogram(frames=np.zeros((total, 80), dtype=np.float32))
    pred = partial_inference(FORWARD, model, hidden, dummy, split)
    return MelSpectrogram(frames=pred)


def synthesize_baseline1(
    acoustic: AcousticModel,
    duration: DurationModel,
    edited_phones: PhoneSequence,
    speaker_id: str,
    region: tuple[int, int] | None = None,
) -> SystemOutput:
    """Complete TTS of the edited text, ignoring the original speech.
    `region` is the (start, stop) phone range of B' for bookkeeping."""
    durations = duration.predict(edited_phones)
    mel = _free_run(acoustic, edited_phones, durations, speaker_id)
    p0, p1 = region if region is not None else (0, len(edited_phones))
    return SystemOutput(
        mel=mel,
        len_a=int(durations[:p0].sum()),
        len_b=int(durations[p0:p1].sum()),
        len_c=int(durations[p1:].sum()),
    )


def synthesize_baseline2(
    acoustic: AcousticModel,
    duration: DurationModel,
    new_text_phones: PhoneSequence,
    original_mel: MelSpectrogram,
    split: RegionSplit,
    speaker_id: str,
) -> SystemOutput:
    """Standalone synthesis of only the new text, spliced between the
    original A and C frames. No conditioning on context."""
    durations = duration.predict(new_text_phones)
    middle = _free_run(acoustic, new_text_phones, durations, speaker_id)
    original = original_mel.frames
    frames = np.concatenate(
        [
            original[: split.len_a],
            middle.frames,
            original[split.len_a + split.orig_len_b :],
        ]
    )
    return SystemOutput(
        mel=MelSpectrogram(frames=frames),
        len_a=split.len_a,
        len_b=middle.frames.shape[0],
        len_c=split.len_c,
    )


def locate_candidate_region(
    path: DTWPath, split: RegionSplit, candidate_len: int
) -> tuple[int, int] | None:
    """Candidate frames aligned strictly between region A and region C of
    the original, per the DTW path; None when the mapping degenerates."""
    a_end = split.len_a - 1  # last original frame of region A (0-indexed)
    c_start = split.len_a + split.orig_len_b
    mapped_a = [j for i, j in path.pairs if i <= a_end]
    mapped_c = [j for i, j in path.pairs if i >= c_start]
    start = (max(mapped_a) + 1) if mapped_a else 0
    stop = min(mapped_c) if mapped_c else candidate_len
    if stop <= start:
        return None
    return start, stop


def synthesize_baseline3(
    acoustic: AcousticModel,
    duration: DurationModel,
    edited_phones: PhoneSequence,
    original_mel: MelSpectrogram,
    split: RegionSplit,
    speaker_id: str,
    region: tuple[int, int] | None = None,
) -> SystemOutput:
    """Baseline-1 candidate, then DTW over MCEPs locates the candidate
    frames playing the role of B'; those are spliced between original A
    and C. Falls back to the candidate's own duration span if the DTW
    mapping degenerates."""
    candidate = synthesize_baseline1(acoustic, duration, edited_phones, speaker_id, region)
    path = dtw(mcep(original_mel), mcep(candidate.mel))
    span = locate_candidate_region(path, split, candidate.mel.num_frames)
    if span is None:
        span = (candidate.len_a, candidate.len_a + candidate.len_b)
    located = candidate.mel.frames[span[0] : span[1]]

    original = original_mel.frames
    frames = np.concatenate(
        [original[: split.len_a], located, original[split.len_a + split.orig_len_b :]]
    )
    return SystemOutput(
        mel=MelSpectrogram(frames=frames),
        len_a=split.len_a,
        len_b=located.shape[0],
        len_c=split.len_c,
    )


def synthesize_baseline4(
    editor: SpeechEditor, utterance: PreparedUtterance, request: EditRequest
) -> EditResult:
    """The proposed pipeline with only the left-to-right decoder: the
    fusion point is forced to the last modified frame."""
    edited_phones, edited_durations, split = editor.plan(utterance, request)
    hidden = editor.acoustic.hidden_for(edited_phones, edited_durations, utterance.speaker_id)
    forward = partial_inference(FORWARD, editor.acoustic, hidden, utterance.mel, split)
    t_fusion = split.len_a + split.len_b_edit
    # Backward frames are unused at this fusion point; reuse forward rows to
    # satisfy fuse's interface.
    pad = np.zeros((split.t_tot - split.len_a, forward.shape[1]), dtype=forward.dtype)
    edited = fuse(utterance.mel, forward, pad, split, t_fusion)
    return EditResult(
        edited_mel=edited,
        split=split,
        t_fusion=t_fusion,
        forward_mel=forward,
        backward_mel=None,
        edited_durations=tuple(int(d) for d in edited_durations),
        edited_phones=edited_phones,
    )


@dataclass
class MCDReport:
    """Per-system MCD breakdown mirroring the Modi./Unmodi./Whole layout."""

    system: str
    mcd_modified: float = 0.0
    mcd_unmodified: float = 0.0
    mcd_whole: float = 0.0
    per_utterance: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "system": self.system,
            "modified": self.mcd_modified,
            "unmodified": self.mcd_unmodified,
            "whole": self.mcd_whole,
            "per_utterance": self.per_utterance,
            "skipped": self.skipped,
        }


def _vocoded_mcep(mel: MelSpectrogram, vocoder) -> np.ndarray:
    """MCEPs re-extracted from vocoded audio; frame count is preserved by
    the vocoder's length convention."""
    from .dsp import mel_spectrogram

    rebuilt = mel_spectrogram(vocoder.synthesize(mel))
    return mcep(rebuilt).coeffs


def _region_mcds(
    original: PreparedUtterance, output: SystemOutput, exact_context: bool, vocoder=None
):
    """(modified, unmodified, whole) MCDs for one utterance.

    The modified region is always DTW-aligned. Unmodified regions pair
    frames directly when the system copies context (exact_context), else
    each region is DTW-aligned. Whole-utterance MCD pairs directly when
    lengths agree and falls back to DTW otherwise. With a vocoder, MCEPs
    come from vocoded audio instead of the mel level, so vocoder
    distortion is included."""
    orig = original.mel.frames
    out = output.mel.frames
    orig_len_b = orig.shape[0] - output.len_a - output.len_c

    if vocoder is None:
        orig_mc = mcep(original.mel).coeffs
        out_mc = mcep(output.mel).coeffs
    else:
        orig_mc = _vocoded_mcep(original.mel, vocoder)
        out_mc = _vocoded_mcep(output.mel, vocoder)

    orig_b = MCEPSequence(orig_mc[output.len_a : output.len_a + orig_len_b])
    out_b = MCEPSequence(out_mc[output.len_a : output.len_a + output.len_b])
    modified = mcd(orig_b, out_b)
    a_pair = (orig_mc[: output.len_a], out_mc[: output.len_a])
    c_pair = (
        orig_mc[output.len_a + orig_len_b :],
        out_mc[output.len_a + output.len_b :],
    )
    if exact_context:
        diffs = [_frame_mcd(a, b) for a, b in (a_pair, c_pair) if a.shape[0]]
        unmodified = float(np.concatenate(diffs).mean()) if diffs else 0.0
    else:
        frame_diffs = []
        for a, b in (a_pair, c_pair):
            if a.shape[0] == 0 or b.shape[0] == 0:
                continue
            path = dtw(MCEPSequence(a), MCEPSequence(b))
            ii = np.array([p[0] for p in path.pairs])
            jj = np.array([p[1] for p in path.pairs])
            frame_diffs.append(_frame_mcd(a[ii], b[jj]))
        unmodified = float(np.concatenate(frame_diffs).mean()) if frame_diffs else 0.0

    whole = mcd(
        MCEPSequence(orig_mc),
        MCEPSequence(out_mc),
        aligned=orig.shape[0] == out.shape[0],
    )
    return modified, unmodified, whole


def middle_word_mask(text: str, fraction: float = 1.0 / 3.0) -> tuple[int, int, str]:
    """(first_word, last_word, masked_text) for the middle ceil(W*fraction)
    words of the transcript."""
    tokens = tokenize_words(text)
    words = [t for t in tokens if t.strip(",.;")]
    w = len(words)
    if w < 3:
        raise InvalidRequestError(f"need at least 3 words to mask, got {w}")
    n = math.ceil(w * fraction)
    first = (w - n) // 2
    masked = " ".join(words[first : first + n])
    return first, first + n - 1, masked


def _mask_request(utterance: PreparedUtterance, fraction: float) -> EditRequest:
    first, last, masked_text = middle_word_mask(utterance.text, fraction)
    return EditRequest(
        operation="replace", first_word=first, last_word=last, new_text=masked_text
    )


def run_system(
    system: str,
    editor: SpeechEditor,
    utterance: PreparedUtterance,
    request: EditRequest,
) -> SystemOutput:
    """Produce one system's edited output for a replace-style request."""
    acoustic, duration, lexicon = editor.acoustic, editor.duration, editor.lexicon
    if system == PROPOSED:
        result = editor.edit(utterance, request)
        return SystemOutput(
            mel=result.edited_mel,
            len_a=result.split.len_a,
            len_b=result.split.len_b_edit,
            len_c=result.split.len_c,
        )
    if system == BASELINE4:
        result = synthesize_baseline4(editor, utterance, request)
        return SystemOutput(
            mel=result.edited_mel,
            len_a=result.split.len_a,
            len_b=result.split.len_b_edit,
            len_c=result.split.len_c,
        )

    edited_phones, _, split = editor.plan(utterance, request)
    (p0, p1), _ = locate_region(utterance.alignment, request)
    new_phones = g2p(request.new_text, lexicon)
    region = (p0, p0 + len(new_phones))
    if system == BASELINE1:
        return synthesize_baseline1(
            acoustic, duration, edited_phones, utterance.speaker_id, region
        )
    if system == BASELINE2:
        return synthesize_baseline2(
            acoustic, duration, new_phones, utterance.mel, split, utterance.speaker_id
        )
    if system == BASELINE3:
        return synthesize_baseline3(
            acoustic,
            duration,
            edited_phones,
            utterance.mel,
            split,
            utterance.speaker_id,
            region,
        )
    raise InvalidInputError(f"unknown system {system!r}")


def masked_reconstruction(
    editor: SpeechEditor,
    utterances,
    systems=(BASELINE1, BASELINE2, PROPOSED),
    fraction: float = 1.0 / 3.0,
    vocoder=None,
) -> dict[str, MCDReport]:
    """Mask the middle third of each utterance's words, reconstruct with
    each system, and report MCD over modified/unmodified/whole regions.

    By default MCD is computed at the mel level (pre-vocoder). Passing a
    vocoder switches to waveform-level measurement: every mel is vocoded
    and re-analyzed before MCEP extraction."""
    reports = {s: MCDReport(system=s) for s in systems}
    usable = []
    for utt in utterances:
        try:
            request = _mask_request(utt, fraction)
        except InvalidRequestError as err:
            for report in reports.values():
                report.skipped.append({"utterance_id": utt.id, "reason": str(err)})
            continue
        usable.append((utt, request))
    if not usable:
        raise InvalidInputError("no utterance long enough for masked reconstruction")

    for system, report in reports.items():
        rows = {}
        for utt, request in usable:
            output = run_system(system, editor, utt, request)
            exact = system in (PROPOSED, BASELINE2, BASELINE3, BASELINE4)
            modified, unmodified, whole = _region_mcds(
                utt, output, exact_context=exact, vocoder=vocoder
            )
            rows[utt.id] = {
                "modified": modified,
                "unmodified": unmodified,
                "whole": whole,
            }
        report.per_utterance = rows
        report.mcd_modified = float(np.mean([r["modified"] for r in rows.values()]))
        report.mcd_unmodified = float(np.mean([r["unmodified"] for r in rows.values()]))
        report.mcd_whole = float(np.mean([r["whole"] for r in rows.values()]))
    return reports


def format_report_table(reports: dict[str, MCDReport]) -> str:
    """Aligned-column text table, systems by rows, regions by columns."""
    headers = ("System", "Modi.", "Unmodi.", "Whole")
    rows = [
        (
            name,
            f"{r.mcd_modified:.3f}",
            f"{r.mcd_unmodified:.3f}",
            f"{r.mcd_whole:.3f}",
        )
        for name, r in reports.items()
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"
