"""Text and corpus ingestion: G2P, manifests, forced-alignment parsing,
and mapping word-level edit requests onto phone and frame ranges."""

from dataclasses import dataclass, field
import json
from pathlib import Path

from .errors import (
    InvalidInputError,
    InvalidRequestError,
    MalformedAlignmentError,
    OOVError,
)

PAUSE = "sp"
# Punctuation that collapses to a short-pause phone attached to the
# preceding word. Anything else stays part of the word token.
PAUSE_PUNCTUATION = ",.;"


@dataclass(frozen=True)
class PhoneSequence:
    """Ordered phone symbols with the index of the word that produced each.

    Pause phones carry the preceding word's index, so word_index is
    non-decreasing.
    """

    phones: tuple[str, ...]
    word_index: tuple[int, ...]

    def __post_init__(self):
        if len(self.phones) != len(self.word_index):
            raise InvalidInputError("phones and word_index must have equal length")
        if any(b < a for a, b in zip(self.word_index, self.word_index[1:])):
            raise InvalidInputError("word_index must be non-decreasing")

    def __len__(self) -> int:
        return len(self.phones)

    def slice(self, start: int, stop: int) -> "PhoneSequence":
        return PhoneSequence(self.phones[start:stop], self.word_index[start:stop])


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    audio_path: str
    text: str
    speaker_id: str


@dataclass(frozen=True)
class AlignmentEntry:
    phone: str
    start_frame: int
    end_frame: int
    word_index: int

    @property
    def duration(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class Alignment:
    """Contiguous, non-overlapping per-phone frame spans covering the utterance."""

    entries: tuple[AlignmentEntry, ...]
    total_frames: int

    def __post_init__(self):
        if not self.entries:
            raise MalformedAlignmentError("alignment has no phone entries")
        if self.entries[0].start_frame != 0:
            raise MalformedAlignmentError(
                f"first span starts at {self.entries[0].start_frame}, expected 0"
            )
        for i, entry in enumerate(self.entries):
            if entry.duration < 1:
                raise MalformedAlignmentError(
                    f"span {i} ({entry.phone}) has length {entry.duration}, expected >= 1"
                )
            if i + 1 < len(self.entries) and entry.end_frame != self.entries[i + 1].start_frame:
                raise MalformedAlignmentError(
                    f"span {i} ends at {entry.end_frame} but span {i + 1} starts at "
                    f"{self.entries[i + 1].start_frame}"
                )
        if self.entries[-1].end_frame != self.total_frames:
            raise MalformedAlignmentError(
                f"last span ends at {self.entries[-1].end_frame}, expected total_frames "
                f"{self.total_frames}"
            )

    def durations(self) -> list[int]:
        return [e.duration for e in self.entries]

    def phone_sequence(self) -> PhoneSequence:
        return PhoneSequence(
            tuple(e.phone for e in self.entries),
            tuple(e.word_index for e in self.entries),
        )


@dataclass(frozen=True)
class EditRequest:
    """User intent: delete / insert / replace at word positions.

    For delete/replace, first_word..last_word is the inclusive word range.
    For insert, position is the gap index between words (0 = before the
    first word).
    """

    operation: str
    first_word: int | None = None
    last_word: int | None = None
    position: int | None = None
    new_text: str = ""

    def __post_init__(self):
        if self.operation not in ("delete", "insert", "replace"):
            raise InvalidRequestError(f"unknown operation {self.operation!r}")
        if self.operation == "insert":
            if self.position is None or self.position < 0:
                raise InvalidRequestError("insert requires a non-negative position")
            if not self.new_text.strip():
                raise InvalidRequestError("insert requires non-empty new_text")
        else:
            if self.first_word is None or self.last_word is None:
                raise InvalidRequestError(f"{self.operation} requires first_word and last_word")
            if self.first_word < 0 or self.first_word > self.last_word:
                raise InvalidRequestError(
                    f"invalid word range [{self.first_word}, {self.last_word}]"
                )
            if self.operation == "replace" and not self.new_text.strip():
                raise InvalidRequestError("replace requires non-empty new_text")
            if self.operation == "delete" and self.new_text.strip():
                raise InvalidRequestError("delete takes no new_text")


def parse_edit_request(payload: dict) -> EditRequest:
    known = {"operation", "first_word", "last_word", "position", "new_text", "utterance_id"}
    unknown = set(payload) - known
    if unknown:
        raise InvalidRequestError(f"unknown request fields: {sorted(unknown)}")
    return EditRequest(
        operation=payload.get("operation", ""),
        first_word=payload.get("first_word"),
        last_word=payload.get("last_word"),
        position=payload.get("position"),
        new_text=payload.get("new_text", ""),
    )


class Lexicon:
    """Immutable word -> phones mapping, case-insensitive on lookup."""

    def __init__(self, entries: dict[str, tuple[str, ...]]):
        self._entries = {w.upper(): tuple(p) for w, p in entries.items()}

    def __contains__(self, word: str) -> bool:
        return word.upper() in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, word: str) -> tuple[str, ...]:
        phones = self._entries.get(word.upper())
        if phones is None:
            raise OOVError(word)
        return phones

    def phone_inventory(self) -> list[str]:
        symbols = {p for phones in self._entries.values() for p in phones}
        symbols.add(PAUSE)
        return sorted(symbols)

    @classmethod
    def load(cls, path) -> "Lexicon":
        entries = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise InvalidInputError(f"{path}:{lineno}: expected 'WORD PH1 PH2 ...'")
            entries[parts[0]] = tuple(parts[1:])
        return cls(entries)


def tokenize_words(text: str) -> list[str]:
    """Whitespace word tokens; pause punctuation stays attached to its word."""
    return text.split()


def g2p(text: str, lexicon: Lexicon) -> PhoneSequence:
    """Map words through the lexicon; pause punctuation becomes "sp".

    The pause attaches to the preceding word's index; consecutive pauses
    collapse, and punctuation before any word is dropped. Out-of-vocabulary
    words raise OOVError rather than guessing a pronunciation.
    """
    phones: list[str] = []
    word_index: list[int] = []
    word_count = 0
    for token in tokenize_words(text):
        word = token.strip(PAUSE_PUNCTUATION)
        trailing_pause = len(token) > len(word) and token.rstrip(PAUSE_PUNCTUATION) != token
        if word:
            for p in lexicon.lookup(word):
                phones.append(p)
                word_index.append(word_count)
            word_count += 1
        if trailing_pause and word_count > 0 and (not phones or phones[-1] != PAUSE):
            phones.append(PAUSE)
            word_index.append(word_count - 1)
    return PhoneSequence(tuple(phones), tuple(word_index))


def count_words(text: str) -> int:
    return sum(1 for t in tokenize_words(text) if t.strip(PAUSE_PUNCTUATION))


def load_alignment(path) -> Alignment:
    """Parse and validate one alignment JSON file."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise MalformedAlignmentError(f"{path}: invalid JSON: {err}") from err
    try:
        entries = tuple(
            AlignmentEntry(
                phone=p["phone"],
                start_frame=int(p["start_frame"]),
                end_frame=int(p["end_frame"]),
                word_index=int(p["word_index"]),
            )
            for p in payload["phones"]
        )
        total = int(payload["total_frames"])
    except (KeyError, TypeError) as err:
        raise MalformedAlignmentError(f"{path}: missing field {err}") from err
    return Alignment(entries=entries, total_frames=total)


def load_manifest(path) -> list[UtteranceRecord]:
    """JSON-lines manifest, one utterance record per line."""
    records = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            record = UtteranceRecord(
                id=row["id"],
                audio_path=row["audio_path"],
                text=row["text"],
                speaker_id=row["speaker_id"],
            )
        except (json.JSONDecodeError, KeyError) as err:
            raise InvalidInputError(f"{path}:{lineno}: bad manifest record: {err}") from err
        if record.id in seen:
            raise InvalidInputError(f"{path}:{lineno}: duplicate utterance id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    return records


def locate_region(
    alignment: Alignment, request: EditRequest
) -> tuple[tuple[int, int], tuple[int, int]]:
    """Map a word-level request to (phone_range, frame_range), half-open.

    For insert both ranges are empty, positioned at the requested word gap.
    """
    num_words = alignment.entries[-1].word_index + 1
    if request.operation == "insert":
        if request.position > num_words:
            raise InvalidRequestError(
                f"insert position {request.position} out of range for {num_words} words"
            )
        idx = next(
            (i for i, e in enumerate(alignment.entries) if e.word_index >= request.position),
            len(alignment.entries),
        )
        frame = alignment.entries[idx].start_frame if idx < len(alignment.entries) else alignment.total_frames
        return (idx, idx), (frame, frame)

    if request.last_word >= num_words:
        raise InvalidRequestError(
            f"word range [{request.first_word}, {request.last_word}] out of range "
            f"for {num_words} words"
        )
    in_range = [
        i
        for i, e in enumerate(alignment.entries)
        if request.first_word <= e.word_index <= request.last_word
    ]
    first, last = in_range[0], in_range[-1]
    return (first, last + 1), (
        alignment.entries[first].start_frame,
        alignment.entries[last].end_frame,
    )


def splice_phones(
    original: PhoneSequence,
    phone_range: tuple[int, int],
    new_phones: PhoneSequence,
) -> PhoneSequence:
    """Replace the phone slice with new_phones, renumbering word indices so
    the result indexes words of the edited transcript consecutively.

    phone_range must respect word boundaries, as locate_region ranges do.
    """
    start, stop = phone_range
    if not (0 <= start <= stop <= len(original)):
        raise InvalidInputError(f"phone range [{start}, {stop}) out of bounds")

    prefix = original.slice(0, start)
    suffix = original.slice(stop, len(original))

    words_before = prefix.word_index[-1] + 1 if prefix.word_index else 0
    new_base = new_phones.word_index[0] if new_phones.word_index else 0
    new_word_count = (
        max(w - new_base for w in new_phones.word_index) + 1 if new_phones.word_index else 0
    )

    phones = list(prefix.phones)
    word_index = list(prefix.word_index)
    for p, w in zip(new_phones.phones, new_phones.word_index):
        phones.append(p)
        word_index.append(words_before + w - new_base)
    if suffix.phones:
        # Pauses at the head of the suffix belong to the word before them;
        # the first real phone starts the next fresh word index.
        first_real = next(
            (w for p, w in zip(suffix.phones, suffix.word_index) if p != PAUSE),
            suffix.word_index[0] + 1,
        )
        shift = words_before + new_word_count - first_real
        for p, w in zip(suffix.phones, suffix.word_index):
            phones.append(p)
            word_index.append(w + shift)
    return PhoneSequence(tuple(phones), tuple(word_index))
