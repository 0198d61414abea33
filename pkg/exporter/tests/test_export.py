import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from embed_export.cli import main as cli_main
from embed_export.encoders import EncoderError, get_encoder
from embed_export.jobs import ExportError, ExportJob, export_audio_embeddings, export_text_embeddings

from conftest import write_float32_wav


def _tone(freq: float, seconds: float = 5.0, rate: int = 16000) -> np.ndarray:
    t = np.arange(round(seconds * rate)) / rate
    return (0.4 * np.sin(2 * np.pi * freq * t)).astype(np.float32)


def make_pool(tmp_path: Path, n_chunks: int = 3, with_silent: bool = False) -> Path:
    rows = []
    for i in range(n_chunks):
        chunk_id = f"src_{i:04d}"
        write_float32_wav(tmp_path / f"{chunk_id}.wav", _tone(200.0 + 75 * i))
        rows.append({"chunk_id": chunk_id, "source_id": "src", "chunk_index": i,
                     "pad_samples": 0, "sha256": "0" * 64})
    if with_silent:
        write_float32_wav(tmp_path / "src_9999.wav", np.zeros(80000, dtype=np.float32))
        rows.append({"chunk_id": "src_9999", "source_id": "src", "chunk_index": 9999,
                     "pad_samples": 0, "sha256": "0" * 64})
    manifest = tmp_path / "pool_manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return manifest


def make_concepts(tmp_path: Path, n: int = 4) -> Path:
    rows = [
        {"concept_id": f"c{i}", "image_id": f"img{i}", "object": f"thing{i}",
         "description": f"sound of thing number {i}", "extractor": "vlm-a"}
        for i in range(n)
    ]
    path = tmp_path / "concepts.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


class TestAudioExport:
    def test_three_chunks_export_and_load(self, tmp_path):
        manifest = make_pool(tmp_path)
        out = tmp_path / "audio.semb"
        written = export_audio_embeddings(ExportJob(manifest, "spectral-v1", out))
        assert written == 3

        from sonify.embeddings import load_embeddings  # the format's reference reader

        matrix = load_embeddings(out)
        assert matrix.rows == 3
        assert matrix.ids == ["src_0000", "src_0001", "src_0002"]
        assert matrix.encoder_tag == "spectral-v1"
        assert matrix.normalized

    def test_duplicate_chunk_id_rejected(self, tmp_path):
        manifest = make_pool(tmp_path, n_chunks=2)
        rows = manifest.read_text().splitlines()
        manifest.write_text("\n".join(rows + [rows[0]]) + "\n", encoding="utf-8")
        with pytest.raises(ExportError, match="duplicate chunk_id"):
            export_audio_embeddings(ExportJob(manifest, "spectral-v1", tmp_path / "x.semb"))

    def test_empty_input_rejected(self, tmp_path):
        manifest = tmp_path / "pool_manifest.jsonl"
        manifest.write_text("", encoding="utf-8")
        with pytest.raises(ExportError, match="nothing to export"):
            export_audio_embeddings(ExportJob(manifest, "spectral-v1", tmp_path / "x.semb"))

    def test_unknown_model_is_load_failure(self, tmp_path):
        manifest = make_pool(tmp_path)
        with pytest.raises(EncoderError, match="model load failure"):
            export_audio_embeddings(ExportJob(manifest, "clap-base", tmp_path / "x.semb"))

    def test_silent_chunk_skipped(self, tmp_path, caplog):
        manifest = make_pool(tmp_path, n_chunks=2, with_silent=True)
        out = tmp_path / "audio.semb"
        with caplog.at_level("WARNING"):
            written = export_audio_embeddings(ExportJob(manifest, "spectral-v1", out))
        assert written == 2
        assert any("src_9999" in message for message in caplog.messages)

    def test_missing_wav_skipped_not_fatal(self, tmp_path):
        manifest = make_pool(tmp_path, n_chunks=2)
        (tmp_path / "src_0001.wav").unlink()
        written = export_audio_embeddings(
            ExportJob(manifest, "spectral-v1", tmp_path / "audio.semb")
        )
        assert written == 1

    def test_deterministic_across_runs(self, tmp_path):
        manifest = make_pool(tmp_path)
        out_a, out_b = tmp_path / "a.semb", tmp_path / "b.semb"
        export_audio_embeddings(ExportJob(manifest, "spectral-v1", out_a))
        export_audio_embeddings(ExportJob(manifest, "spectral-v1", out_b))
        assert out_a.read_bytes() == out_b.read_bytes()


class TestTextExport:
    def test_concepts_export_and_load(self, tmp_path):
        path = make_concepts(tmp_path)
        out = tmp_path / "text.semb"
        written = export_text_embeddings(ExportJob(path, "charngram-v1", out))
        assert written == 4

        from sonify.embeddings import load_embeddings

        matrix = load_embeddings(out)
        assert matrix.ids == [f"c{i}" for i in range(4)]
        assert matrix.encoder_tag == "charngram-v1"

    def test_similar_texts_score_higher(self, tmp_path):
        encode = get_encoder("text", "charngram-v1")
        dog_a = encode("dog: sound of a dog barking")
        dog_b = encode("dog: a dog barking loudly")
        train = encode("train: a train passing by")

        def cos(u, v):
            return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

        assert cos(dog_a, dog_b) > cos(dog_a, train)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "concepts.jsonl"
        path.write_text(json.dumps({"concept_id": "c0", "object": "dog"}) + "\n")
        with pytest.raises(ExportError, match="description"):
            export_text_embeddings(ExportJob(path, "charngram-v1", tmp_path / "x.semb"))

    def test_duplicate_concept_id_rejected(self, tmp_path):
        path = make_concepts(tmp_path, n=2)
        rows = path.read_text().splitlines()
        path.write_text("\n".join(rows + [rows[0]]) + "\n", encoding="utf-8")
        with pytest.raises(ExportError, match="duplicate concept_id"):
            export_text_embeddings(ExportJob(path, "charngram-v1", tmp_path / "x.semb"))

    def test_deterministic_across_runs(self, tmp_path):
        path = make_concepts(tmp_path)
        out_a, out_b = tmp_path / "a.semb", tmp_path / "b.semb"
        export_text_embeddings(ExportJob(path, "charngram-v1", out_a))
        export_text_embeddings(ExportJob(path, "charngram-v1", out_b))
        assert out_a.read_bytes() == out_b.read_bytes()


class TestCli:
    def test_audio_mode(self, tmp_path, capsys):
        manifest = make_pool(tmp_path)
        out = tmp_path / "audio.semb"
        code = cli_main(["--mode", "audio", "--in", str(manifest),
                         "--model", "spectral-v1", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert "wrote 3 embedding(s)" in capsys.readouterr().out

    def test_unknown_model_fails_cleanly(self, tmp_path, capsys):
        manifest = make_pool(tmp_path)
        code = cli_main(["--mode", "audio", "--in", str(manifest),
                         "--model", "nope", "--out", str(tmp_path / "x.semb")])
        assert code == 1
        assert "model load failure" in capsys.readouterr().err


def test_acceptance_exporter_round_trip(tmp_path):
    """Exports load through the pipeline with invariants intact and
    identical hashes across two runs."""
    from sonify.embeddings import load_embeddings

    failures = []
    pool_manifest = make_pool(tmp_path)
    concepts = make_concepts(tmp_path)
    hashes = {}
    for run in ("one", "two"):
        audio_out = tmp_path / f"audio-{run}.semb"
        text_out = tmp_path / f"text-{run}.semb"
        export_audio_embeddings(ExportJob(pool_manifest, "spectral-v1", audio_out))
        export_text_embeddings(ExportJob(concepts, "charngram-v1", text_out))
        hashes[run] = (
            hashlib.sha256(audio_out.read_bytes()).hexdigest(),
            hashlib.sha256(text_out.read_bytes()).hexdigest(),
        )
        for path, expected_rows in ((audio_out, 3), (text_out, 4)):
            matrix = load_embeddings(path)
            if matrix.rows != expected_rows:
                failures.append(f"{path.name}: {matrix.rows} rows != {expected_rows}")
            if not np.isfinite(matrix.data).all():
                failures.append(f"{path.name}: non-finite values")
            if len(set(matrix.ids)) != matrix.rows:
                failures.append(f"{path.name}: duplicate ids")
            norms = np.linalg.norm(matrix.data, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-4):
                failures.append(f"{path.name}: rows not unit-norm after load")
    if hashes["one"] != hashes["two"]:
        failures.append("export hashes differ across runs")
    status = "PASS" if not failures else "FAIL"
    print(f"ACCEPTANCE 13 exporter-round-trip: {status}"
          + (f"  ({'; '.join(failures)})" if failures else ""))
    assert not failures, failures
