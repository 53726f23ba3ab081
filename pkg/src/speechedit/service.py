"""HTTP facade over the corpus and the editor.

GET /utterances, GET /utterances/{id}/alignment, POST /edits,
GET /audio/{id}, GET /health. Errors come back as {"error", "message"}.
Edits run synchronously but answer with a job envelope; artifacts are
stored under content-addressed ids so repeat requests are cache hits.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.middleware.cors import CORSMiddleware

from . import dsp
from .acoustic import AcousticModel, DurationModel
from .corpus import PreparedCorpus
from .editing import SpeechEditor
from .errors import SpeechEditError, UnknownIdError
from .frontend import PAUSE, parse_edit_request, tokenize_words


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message})


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def word_tokens(utterance) -> list[dict]:
    """One token per word plus pause markers, spans in frames and seconds."""
    words = [t.strip(",.;") for t in tokenize_words(utterance.text) if t.strip(",.;")]
    tokens = []
    current = None
    for entry in utterance.alignment.entries:
        if entry.phone == PAUSE:
            if current is not None:
                tokens.append(current)
                current = None
            tokens.append(
                {
                    "kind": "pause",
                    "text": "",
                    "word_index": entry.word_index,
                    "start_frame": entry.start_frame,
                    "end_frame": entry.end_frame,
                }
            )
            continue
        if current is not None and current["word_index"] != entry.word_index:
            tokens.append(current)
            current = None
        if current is None:
            current = {
                "kind": "word",
                "text": words[entry.word_index],
                "word_index": entry.word_index,
                "start_frame": entry.start_frame,
                "end_frame": entry.end_frame,
            }
        else:
            current["end_frame"] = entry.end_frame
    if current is not None:
        tokens.append(current)
    for token in tokens:
        token["start_seconds"] = round(token["start_frame"] * dsp.FRAME_HOP_SECONDS, 6)
        token["end_seconds"] = round(token["end_frame"] * dsp.FRAME_HOP_SECONDS, 6)
    return tokens


class EditingService:
    def __init__(self, corpus: PreparedCorpus, editor: SpeechEditor, artifacts_dir, vocoder, model_checksum: str):
        self.corpus = corpus
        self.editor = editor
        self.artifacts_dir = Path(artifacts_dir)
        self.artifacts_dir.mkdir(parents=True, exist_ok=True)
        self.vocoder = vocoder
        self.model_checksum = model_checksum

    def job_id(self, payload: dict) -> str:
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256((canon + self.model_checksum).encode()).hexdigest()
        return f"edit-{digest[:16]}"

    def run_edit(self, payload: dict) -> dict:
        job_id = self.job_id(payload)
        report_path = self.artifacts_dir / f"{job_id}.json"
        if report_path.exists():
            return json.loads(report_path.read_text())

        job = {
            "job_id": job_id,
            "status": "pending",
            "request": payload,
            "result_audio_id": None,
            "diagnostics": None,
            "error_message": None,
        }
        try:
            utterance_id = payload.get("utterance_id")
            if not utterance_id:
                raise SpeechEditError("request is missing utterance_id")
            utterance = self.corpus.get(utterance_id)
            request = parse_edit_request(payload)
            result = self.editor.edit(utterance, request)
            wave_out = self.vocoder.synthesize(result.edited_mel)

            wav_path = self.artifacts_dir / f"{job_id}.wav"
            tmp_wav = self.artifacts_dir / f".tmp-{job_id}.wav"
            dsp.save_wav(wave_out, tmp_wav)
            os.replace(tmp_wav, wav_path)
            dsp.save_mel(result.edited_mel, self.artifacts_dir / f"{job_id}.mel")

            job["status"] = "done"
            job["result_audio_id"] = job_id
            job["diagnostics"] = result.report()
        except SpeechEditError as err:
            job["status"] = "failed"
            job["error_message"] = str(err)

        _atomic_write(report_path, (json.dumps(job, sort_keys=True, indent=1) + "\n").encode())
        return job

    def audio_bytes(self, audio_id: str) -> bytes:
        try:
            return self.corpus.audio_path(audio_id).read_bytes()
        except UnknownIdError:
            pass
        artifact = self.artifacts_dir / f"{audio_id}.wav"
        if artifact.exists():
            return artifact.read_bytes()
        raise UnknownIdError(f"unknown audio id {audio_id!r}")


def create_app(cache_dir, acoustic_path, duration_path, artifacts_dir, vocoder=None) -> FastAPI:
    corpus = PreparedCorpus(cache_dir)
    acoustic = AcousticModel.load(acoustic_path)
    duration = DurationModel.load(duration_path)
    if duration.net_.config.shared_encoder:
        duration.bind_encoder(acoustic)
    editor = SpeechEditor(acoustic, duration, corpus.lexicon)
    checksum = _file_checksum(acoustic_path) + _file_checksum(duration_path)
    service = EditingService(
        corpus, editor, artifacts_dir, vocoder or dsp.GriffinLimVocoder(), checksum
    )

    app = FastAPI(title="speechedit")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.service = service

    @app.get("/health")
    def health():
        return {"status": "ok", "utterances": len(corpus)}

    @app.get("/utterances")
    def utterances():
        return [
            {
                "id": utt.id,
                "text": utt.text,
                "speaker_id": utt.speaker_id,
                "duration_seconds": round(utt.mel.num_frames * dsp.FRAME_HOP_SECONDS, 6),
            }
            for utt in corpus.ordered()
        ]

    @app.get("/utterances/{utterance_id}/alignment")
    def alignment(utterance_id: str):
        try:
            utt = corpus.get(utterance_id)
        except UnknownIdError as err:
            return _error(404, "not_found", str(err))
        return {
            "utterance_id": utt.id,
            "total_frames": utt.alignment.total_frames,
            "frame_hop_seconds": dsp.FRAME_HOP_SECONDS,
            "tokens": word_tokens(utt),
        }

    @app.post("/edits")
    async def edits(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_request", "body must be an EditRequest JSON object")
        if not isinstance(payload, dict):
            return _error(400, "bad_request", "body must be a JSON object")
        return service.run_edit(payload)

    @app.get("/audio/{audio_id}")
    def audio(audio_id: str):
        try:
            data = service.audio_bytes(audio_id)
        except UnknownIdError as err:
            return _error(404, "not_found", str(err))
        return Response(content=data, media_type="audio/wav")

    return app
