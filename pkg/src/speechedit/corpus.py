"""Corpus preparation and the on-disk feature cache.

prep validates every record (audio, alignment, transcript/alignment phone
agreement) and persists mels in the raw-f32 mel format alongside one JSON
record per utterance. Reruns produce byte-identical caches.
"""

from dataclasses import dataclass
import json
import shutil
from pathlib import Path

from . import dsp
from .acoustic import TrainingExample
from .editing import PreparedUtterance
from .errors import InvalidInputError, SpeechEditError, UnknownIdError
from .frontend import (
    Alignment,
    AlignmentEntry,
    Lexicon,
    g2p,
    load_alignment,
    load_manifest,
)

META_FILE = "meta.json"
LEXICON_FILE = "lexicon.txt"


def _alignment_payload(alignment: Alignment) -> dict:
    return {
        "total_frames": alignment.total_frames,
        "phones": [
            {
                "phone": e.phone,
                "start_frame": e.start_frame,
                "end_frame": e.end_frame,
                "word_index": e.word_index,
            }
            for e in alignment.entries
        ],
    }


def _alignment_from_payload(payload: dict) -> Alignment:
    return Alignment(
        entries=tuple(
            AlignmentEntry(
                phone=p["phone"],
                start_frame=p["start_frame"],
                end_frame=p["end_frame"],
                word_index=p["word_index"],
            )
            for p in payload["phones"]
        ),
        total_frames=payload["total_frames"],
    )


def prepare_corpus(manifest_path, lexicon_path, alignments_dir, out_dir) -> dict:
    """Build the feature cache; returns a summary dict."""
    manifest_path = Path(manifest_path)
    alignments_dir = Path(alignments_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lexicon = Lexicon.load(lexicon_path)
    records = load_manifest(manifest_path)
    if not records:
        raise InvalidInputError(f"{manifest_path}: manifest is empty")

    speakers = sorted({r.speaker_id for r in records})
    utterance_ids = []
    for record in records:
        audio_path = Path(record.audio_path)
        if not audio_path.is_absolute():
            audio_path = manifest_path.parent / audio_path
        try:
            wave_in = dsp.load_wav(audio_path)
            mel = dsp.mel_spectrogram(wave_in)
            alignment = load_alignment(alignments_dir / f"{record.id}.json")
            phones = g2p(record.text, lexicon)
        except (SpeechEditError, FileNotFoundError) as err:
            raise InvalidInputError(f"utterance {record.id!r}: {err}") from err

        aligned_phones = alignment.phone_sequence()
        if aligned_phones.phones != phones.phones:
            raise InvalidInputError(
                f"utterance {record.id!r}: alignment phones {aligned_phones.phones} "
                f"do not match transcript phones {phones.phones}"
            )
        if aligned_phones.word_index != phones.word_index:
            raise InvalidInputError(
                f"utterance {record.id!r}: alignment word indices disagree with transcript"
            )
        if alignment.total_frames != mel.num_frames:
            raise InvalidInputError(
                f"utterance {record.id!r}: alignment covers {alignment.total_frames} frames "
                f"but the mel-spectrogram has {mel.num_frames}"
            )

        dsp.save_mel(mel, out_dir / f"{record.id}.mel")
        shutil.copyfile(audio_path, out_dir / f"{record.id}.wav")
        payload = {
            "id": record.id,
            "text": record.text,
            "speaker_id": record.speaker_id,
            "alignment": _alignment_payload(alignment),
        }
        (out_dir / f"{record.id}.record.json").write_text(
            json.dumps(payload, sort_keys=True, indent=1) + "\n"
        )
        utterance_ids.append(record.id)

    shutil.copyfile(lexicon_path, out_dir / LEXICON_FILE)
    meta = {
        "utterance_ids": utterance_ids,
        "speakers": speakers,
        "phone_inventory": lexicon.phone_inventory(),
        "sample_rate": dsp.SAMPLE_RATE,
        "hop_samples": dsp.HOP_SAMPLES,
        "mel_channels": dsp.MEL_CHANNELS,
    }
    (out_dir / META_FILE).write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return {"utterances": len(utterance_ids), "speakers": len(speakers)}


class PreparedCorpus:
    """A loaded feature cache: utterances, lexicon, inventory, speakers."""

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)
        meta_path = self.cache_dir / META_FILE
        if not meta_path.exists():
            raise InvalidInputError(f"{self.cache_dir}: not a prepared corpus (missing meta.json)")
        meta = json.loads(meta_path.read_text())
        self.phone_inventory = meta["phone_inventory"]
        self.speakers = meta["speakers"]
        self.lexicon = Lexicon.load(self.cache_dir / LEXICON_FILE)
        self.utterances: dict[str, PreparedUtterance] = {}
        for utt_id in meta["utterance_ids"]:
            record = json.loads((self.cache_dir / f"{utt_id}.record.json").read_text())
            alignment = _alignment_from_payload(record["alignment"])
            self.utterances[utt_id] = PreparedUtterance(
                id=utt_id,
                text=record["text"],
                speaker_id=record["speaker_id"],
                phones=alignment.phone_sequence(),
                alignment=alignment,
                mel=dsp.load_mel(self.cache_dir / f"{utt_id}.mel"),
            )

    def __len__(self) -> int:
        return len(self.utterances)

    def get(self, utterance_id: str) -> PreparedUtterance:
        if utterance_id not in self.utterances:
            raise UnknownIdError(f"unknown utterance id {utterance_id!r}")
        return self.utterances[utterance_id]

    def ordered(self) -> list[PreparedUtterance]:
        return [self.utterances[k] for k in sorted(self.utterances)]

    def audio_path(self, utterance_id: str) -> Path:
        self.get(utterance_id)
        return self.cache_dir / f"{utterance_id}.wav"

    def training_examples(self) -> list[TrainingExample]:
        return [
            TrainingExample(
                phones=utt.phones.phones,
                durations=tuple(utt.alignment.durations()),
                mel=utt.mel.frames,
                speaker_id=utt.speaker_id,
            )
            for utt in self.ordered()
        ]
