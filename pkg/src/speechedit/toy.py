"""Deterministic desk-scale toy corpus.

Each phone is rendered as a fixed pair of sine partials, so alignments are
exact by construction and the tiny models can overfit in a few hundred
steps. Stands in for the full-scale corpora the approach is meant for.
"""

import json
from pathlib import Path

import numpy as np

from . import dsp
from .frontend import PAUSE, Lexicon, g2p

TOY_LEXICON = {
    "A": ("AH",),
    "BIRD": ("B", "ER", "D"),
    "BRIGHT": ("B", "R", "AY", "T"),
    "DARK": ("D", "AA", "R", "K"),
    "GARDEN": ("G", "AA", "R", "D", "AH", "N"),
    "GREEN": ("G", "R", "IY", "N"),
    "HELLO": ("HH", "AH", "L", "OW"),
    "HILL": ("HH", "IH", "L"),
    "IN": ("IH", "N"),
    "MOON": ("M", "UW", "N"),
    "OVER": ("OW", "V", "ER"),
    "PLANET": ("P", "L", "AE", "N", "IH", "T"),
    "RED": ("R", "EH", "D"),
    "ROSE": ("R", "OW", "Z"),
    "SANG": ("S", "AE", "NG"),
    "SLOWLY": ("S", "L", "OW", "L", "IY"),
    "SMALL": ("S", "M", "AO", "L"),
    "SUN": ("S", "AH", "N"),
    "THE": ("DH", "AH"),
    "WORLD": ("W", "ER", "L", "D"),
}

DEFAULT_UTTERANCES = (
    ("utt-001", "the bright moon, rose slowly", "alice"),
    ("utt-002", "a small bird sang over the garden", "alice"),
)

RAMP_SECONDS = 0.004
DRONE_LINE_AMP = 0.0008


def _drone(n_samples: int) -> np.ndarray:
    """Low-level harmonic floor under every utterance.

    The fundamental is exactly one analysis hop, so each frame sees an
    identical drone contribution and the floor stays perfectly predictable.
    Schroeder phases keep the crest factor low.
    """
    f0 = dsp.SAMPLE_RATE / dsp.HOP_SAMPLES
    n_lines = int(8000.0 / f0)
    t = np.arange(n_samples) / dsp.SAMPLE_RATE
    out = np.zeros(n_samples)
    for k in range(1, n_lines + 1):
        phase = np.pi * k * (k - 1) / n_lines
        out += DRONE_LINE_AMP * np.sin(2.0 * np.pi * k * f0 * t + phase)
    return out


def toy_lexicon() -> Lexicon:
    return Lexicon(TOY_LEXICON)


def _phone_table() -> dict[str, int]:
    return {p: i for i, p in enumerate(toy_lexicon().phone_inventory())}


def phone_duration(phone: str) -> int:
    """Frames per phone, a pure function of phone identity (learnable)."""
    if phone == PAUSE:
        return 8
    return 6 + _phone_table()[phone] % 5


def phone_partials(phone: str, speaker_id: str) -> tuple[tuple[float, float], ...]:
    """(frequency, amplitude) sine partials; silent for the pause symbol."""
    if phone == PAUSE:
        return ()
    idx = _phone_table()[phone]
    shift = 1.0 if speaker_id == "alice" else 1.17
    f1 = (190.0 + 52.0 * idx) * shift
    return ((f1, 0.28), (2.37 * f1, 0.11))


def render_utterance(text: str, speaker_id: str):
    """(samples, phones, durations). Audio length is chosen so the mel
    analysis yields exactly sum(durations) frames."""
    phones = g2p(text, toy_lexicon())
    durations = [phone_duration(p) for p in phones.phones]
    total_frames = sum(durations)
    n_samples = total_frames * dsp.HOP_SAMPLES - dsp.HOP_SAMPLES // 2 - 1
    samples = _drone(n_samples)
    ramp = int(RAMP_SECONDS * dsp.SAMPLE_RATE)

    start_frame = 0
    for phone, dur in zip(phones.phones, durations):
        seg_start = start_frame * dsp.HOP_SAMPLES
        seg_end = min((start_frame + dur) * dsp.HOP_SAMPLES, n_samples)
        length = seg_end - seg_start
        if length > 0:
            t = np.arange(length) / dsp.SAMPLE_RATE
            seg = np.zeros(length)
            for freq, amp in phone_partials(phone, speaker_id):
                seg += amp * np.sin(2.0 * np.pi * freq * t)
            env = np.ones(length)
            edge = min(ramp, length // 2)
            if edge > 0:
                fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
                env[:edge] = fade
                env[length - edge :] = fade[::-1]
            samples[seg_start:seg_end] += seg * env
        start_frame += dur
    return samples, phones, durations


def build_toy_corpus(root, utterances=DEFAULT_UTTERANCES) -> dict:
    """Write manifest, lexicon, audio and alignment files under root."""
    root = Path(root)
    audio_dir = root / "audio"
    align_dir = root / "alignments"
    audio_dir.mkdir(parents=True, exist_ok=True)
    align_dir.mkdir(parents=True, exist_ok=True)

    lexicon_path = root / "lexicon.txt"
    lexicon_path.write_text(
        "".join(f"{word} {' '.join(phones)}\n" for word, phones in sorted(TOY_LEXICON.items()))
    )

    manifest_lines = []
    for utt_id, text, speaker_id in utterances:
        samples, phones, durations = render_utterance(text, speaker_id)
        dsp.save_wav(dsp.Waveform(samples=samples), audio_dir / f"{utt_id}.wav")

        entries = []
        frame = 0
        for phone, w, dur in zip(phones.phones, phones.word_index, durations):
            entries.append(
                {
                    "phone": phone,
                    "start_frame": frame,
                    "end_frame": frame + dur,
                    "word_index": w,
                }
            )
            frame += dur
        (align_dir / f"{utt_id}.json").write_text(
            json.dumps(
                {"utterance_id": utt_id, "total_frames": frame, "phones": entries},
                sort_keys=True,
                indent=1,
            )
            + "\n"
        )
        manifest_lines.append(
            json.dumps(
                {
                    "id": utt_id,
                    "audio_path": f"audio/{utt_id}.wav",
                    "text": text,
                    "speaker_id": speaker_id,
                },
                sort_keys=True,
            )
        )
    manifest_path = root / "manifest.jsonl"
    manifest_path.write_text("\n".join(manifest_lines) + "\n")
    return {
        "manifest": manifest_path,
        "lexicon": lexicon_path,
        "alignments": align_dir,
        "audio": audio_dir,
    }


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Write the deterministic toy corpus.")
    parser.add_argument("out_dir", help="directory to create the corpus in")
    args = parser.parse_args(argv)
    paths = build_toy_corpus(args.out_dir)
    print(f"toy corpus written to {Path(args.out_dir).resolve()}")
    print(f"  manifest:   {paths['manifest']}")
    print(f"  lexicon:    {paths['lexicon']}")
    print(f"  alignments: {paths['alignments']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
