import json

import pytest
from fastapi.testclient import TestClient

from speechedit.dsp import GriffinLimVocoder, load_mel
from speechedit.service import create_app


@pytest.fixture(scope="module")
def artifacts_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("artifacts")


@pytest.fixture(scope="module")
def client(cache_dir, quick_checkpoints, artifacts_dir):
    app = create_app(
        cache_dir=cache_dir,
        acoustic_path=quick_checkpoints["acoustic"],
        duration_path=quick_checkpoints["duration"],
        artifacts_dir=artifacts_dir,
        vocoder=GriffinLimVocoder(iterations=4),
    )
    with TestClient(app) as c:
        yield c


def replace_request(**overrides):
    payload = {
        "utterance_id": "utt-001",
        "operation": "replace",
        "first_word": 1,
        "last_word": 1,
        "new_text": "dark",
    }
    payload.update(overrides)
    return payload


class TestReads:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["utterances"] == 2

    def test_utterances_sorted_and_stable(self, client):
        first = client.get("/utterances").json()
        second = client.get("/utterances").json()
        assert [u["id"] for u in first] == ["utt-001", "utt-002"]
        assert first == second
        assert all(u["duration_seconds"] > 0 for u in first)

    def test_alignment_tokens(self, client):
        body = client.get("/utterances/utt-001/alignment").json()
        kinds = [t["kind"] for t in body["tokens"]]
        assert kinds.count("word") == 5
        assert kinds.count("pause") == 1
        words = [t["text"] for t in body["tokens"] if t["kind"] == "word"]
        assert words == ["the", "bright", "moon", "rose", "slowly"]
        spans = [(t["start_frame"], t["end_frame"]) for t in body["tokens"]]
        assert spans[0][0] == 0
        assert spans[-1][1] == body["total_frames"]
        for (_, e0), (s1, _) in zip(spans, spans[1:]):
            assert e0 == s1

    def test_alignment_unknown_id(self, client):
        response = client.get("/utterances/nope/alignment")
        assert response.status_code == 404
        body = response.json()
        assert body["error"] == "not_found"
        assert "message" in body

    def test_original_audio_streams(self, client, corpus):
        response = client.get("/audio/utt-001")
        assert response.status_code == 200
        assert response.headers["content-type"] == "audio/wav"
        assert response.content[:4] == b"RIFF"
        assert response.content == corpus.audio_path("utt-001").read_bytes()

    def test_unknown_audio_id(self, client):
        response = client.get("/audio/edit-doesnotexist")
        assert response.status_code == 404
        assert response.json()["error"] == "not_found"


class TestEdits:
    def test_replace_job_done_with_diagnostics(self, client):
        job = client.post("/edits", json=replace_request()).json()
        assert job["status"] == "done"
        assert job["result_audio_id"] == job["job_id"]
        d = job["diagnostics"]
        assert d["len_A"] < d["t_fusion"] <= d["len_A"] + d["len_B_edit"]

        audio = client.get(f"/audio/{job['result_audio_id']}")
        assert audio.status_code == 200
        assert audio.content[:4] == b"RIFF"

    def test_identical_request_is_cache_hit(self, client, artifacts_dir):
        first = client.post("/edits", json=replace_request(new_text="sun")).json()
        mel_path = artifacts_dir / f"{first['job_id']}.mel"
        before = mel_path.read_bytes()
        second = client.post("/edits", json=replace_request(new_text="sun")).json()
        assert first == second
        assert mel_path.read_bytes() == before

    def test_deterministic_artifacts(self, client, artifacts_dir):
        job = client.post("/edits", json=replace_request(new_text="hello")).json()
        mel = load_mel(artifacts_dir / f"{job['job_id']}.mel")
        report = json.loads((artifacts_dir / f"{job['job_id']}.json").read_text())
        assert report["diagnostics"]["len_A"] + report["diagnostics"]["len_B_edit"] + report[
            "diagnostics"
        ]["len_C"] == mel.num_frames

    def test_oov_names_the_word(self, client):
        job = client.post("/edits", json=replace_request(new_text="xylophone")).json()
        assert job["status"] == "failed"
        assert "xylophone" in job["error_message"]
        assert job["result_audio_id"] is None

    def test_delete_whole_utterance_fails(self, client):
        job = client.post(
            "/edits",
            json={
                "utterance_id": "utt-001",
                "operation": "delete",
                "first_word": 0,
                "last_word": 4,
            },
        ).json()
        assert job["status"] == "failed"

    def test_unknown_utterance_fails(self, client):
        job = client.post("/edits", json=replace_request(utterance_id="missing")).json()
        assert job["status"] == "failed"

    def test_invalid_indices_fail(self, client):
        job = client.post(
            "/edits",
            json={
                "utterance_id": "utt-001",
                "operation": "replace",
                "first_word": 4,
                "last_word": 9,
                "new_text": "sun",
            },
        ).json()
        assert job["status"] == "failed"

    def test_malformed_body_is_bad_request(self, client):
        response = client.post("/edits", content=b"}{", headers={"content-type": "application/json"})
        assert response.status_code == 400
        assert response.json()["error"] == "bad_request"

    def test_insert_request(self, client):
        job = client.post(
            "/edits",
            json={"utterance_id": "utt-002", "operation": "insert", "position": 2, "new_text": "green"},
        ).json()
        assert job["status"] == "done"

    def test_delete_request_has_no_fusion(self, client):
        job = client.post(
            "/edits",
            json={"utterance_id": "utt-001", "operation": "delete", "first_word": 1, "last_word": 1},
        ).json()
        assert job["status"] == "done"
        assert job["diagnostics"]["t_fusion"] is None
