import json

import numpy as np
import pytest
from scipy.io import wavfile

from aem1_fixtures import write_model
from coughscreen.cli import main
from coughscreen.emb1 import read_emb1


@pytest.fixture()
def synth_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--n", "120", "--dim", "4", "--imbalance", "0.2",
                 "--separation", "4", "--seed", "7", "--out", str(out)]) == 0
    return out


def _train(synth_dir, out, extra=()):
    return main(["train", "--manifest", str(synth_dir / "manifest.json"),
                 "--folds", str(synth_dir / "folds"),
                 "--n-estimators", "5", "--seed", "7",
                 "--out", str(out), *extra])


class TestSynth:
    def test_writes_manifest_folds_and_config(self, synth_dir):
        assert (synth_dir / "manifest.json").exists()
        assert (synth_dir / "config.json").exists()
        for k in range(1, 6):
            assert (synth_dir / "folds" / f"train_fold_{k}.txt").exists()
            assert (synth_dir / "folds" / f"val_fold_{k}.txt").exists()


class TestTrainEval:
    def test_train_emits_models_results_and_parameter_block(
            self, synth_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert _train(synth_dir, out) == 0
        stdout = capsys.readouterr().out
        for line in ["criterion=entropy", "max_features=0.75",
                     "min_samples_leaf=4", "min_samples_split=3",
                     "bootstrap=False"]:
            assert line in stdout
        results = json.loads((out / "results.json").read_text())
        assert len(results["folds"]) == 5
        assert set(results["average"]) == {"auc", "sensitivity", "specificity"}
        for k in range(1, 6):
            assert (out / "models" / f"fold_{k}.model.json").exists()

    def test_eval_reproduces_training_metrics(self, synth_dir, tmp_path):
        run = tmp_path / "run"
        assert _train(synth_dir, run) == 0
        ev = tmp_path / "eval"
        assert main(["eval", "--manifest", str(synth_dir / "manifest.json"),
                     "--folds", str(synth_dir / "folds"),
                     "--models", str(run / "models"), "--out", str(ev)]) == 0
        trained = json.loads((run / "results.json").read_text())
        scored = json.loads((ev / "results.json").read_text())
        for a, b in zip(trained["folds"], scored["folds"]):
            assert a["auc"] == pytest.approx(b["auc"])
        assert (ev / "roc_fold_1.csv").exists()

    def test_refit_with_val_writes_extra_model(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        assert _train(synth_dir, out, ("--refit-with-val",)) == 0
        assert (out / "models" / "best_refit.model.json").exists()


class TestScore:
    def test_single_model_scores_every_id(self, synth_dir, tmp_path):
        run = tmp_path / "run"
        _train(synth_dir, run)
        out = tmp_path / "scored"
        assert main(["score", "--manifest", str(synth_dir / "manifest.json"),
                     "--model", str(run / "models" / "fold_1.model.json"),
                     "--out", str(out)]) == 0
        lines = (out / "scores.csv").read_text().splitlines()
        assert lines[0] == "id,score"
        assert len(lines) == 121
        score = float(lines[1].split(",")[1])
        assert 0.0 <= score <= 1.0
        assert (out / "metrics.json").exists()   # labels present -> metrics too

    def test_blind_manifest_without_labels_skips_metrics(self, synth_dir, tmp_path):
        run = tmp_path / "run"
        _train(synth_dir, run)
        manifest = json.loads((synth_dir / "manifest.json").read_text())
        for entry in manifest:
            entry["label"] = None
        blind_path = tmp_path / "blind.json"
        blind_path.write_text(json.dumps(manifest))
        out = tmp_path / "blind_scored"
        assert main(["score", "--manifest", str(blind_path),
                     "--model", str(run / "models" / "fold_1.model.json"),
                     "--out", str(out)]) == 0
        assert (out / "scores.csv").exists()
        assert not (out / "metrics.json").exists()

    def test_ensemble_mode_uses_auc_weights(self, synth_dir, tmp_path):
        run = tmp_path / "run"
        _train(synth_dir, run)
        out = tmp_path / "ens"
        assert main(["score", "--manifest", str(synth_dir / "manifest.json"),
                     "--models", str(run / "models"),
                     "--results", str(run / "results.json"),
                     "--out", str(out)]) == 0
        assert (out / "scores.csv").exists()

    def test_score_without_model_is_validation_error(self, synth_dir, tmp_path):
        assert main(["score", "--manifest", str(synth_dir / "manifest.json"),
                     "--out", str(tmp_path / "x")]) == 1

    def test_malformed_results_file_is_internal_error(self, synth_dir, tmp_path):
        run = tmp_path / "run"
        _train(synth_dir, run)
        bad = tmp_path / "bad_results.json"
        bad.write_text(json.dumps({"not_folds": []}))
        code = main(["score", "--manifest", str(synth_dir / "manifest.json"),
                     "--models", str(run / "models"), "--results", str(bad),
                     "--out", str(tmp_path / "y")])
        assert code == 2


class TestSearchCommand:
    def test_search_writes_log_and_best_genome(self, synth_dir, tmp_path):
        out = tmp_path / "search"
        assert main(["search", "--manifest", str(synth_dir / "manifest.json"),
                     "--folds", str(synth_dir / "folds"),
                     "--generations", "1", "--population", "4",
                     "--seed", "3", "--out", str(out)]) == 0
        log_lines = (out / "search_log.jsonl").read_text().splitlines()
        assert len(log_lines) == 8
        record = json.loads(log_lines[0])
        assert set(record) == {"generation", "genome", "auc", "spec_at_80",
                               "train_seconds"}
        best = json.loads((out / "best_genome.json").read_text())
        assert "genome" in best and "fitness" in best

    def test_unknown_fold_rejected(self, synth_dir, tmp_path):
        assert main(["search", "--manifest", str(synth_dir / "manifest.json"),
                     "--folds", str(synth_dir / "folds"), "--fold", "9",
                     "--out", str(tmp_path / "s")]) == 1


class TestProject:
    def test_scatter_and_history_written(self, synth_dir, tmp_path):
        out = tmp_path / "proj"
        assert main(["project", "--manifest", str(synth_dir / "manifest.json"),
                     "--perplexity", "12", "--iterations", "260",
                     "--out", str(out)]) == 0
        lines = (out / "scatter.csv").read_text().splitlines()
        assert lines[0] == "id,x,y,label"
        assert len(lines) == 121
        assert (out / "kl_history.csv").exists()


class TestExtract:
    def _write_audio(self, tmp_path, n_files=3):
        audio = tmp_path / "audio"
        audio.mkdir()
        rng = np.random.default_rng(0)
        for i in range(n_files):
            wave = (rng.normal(0, 0.1, 8000).clip(-1, 1) * 32767).astype(np.int16)
            wavfile.write(audio / f"clip{i}.wav", 8000, wave)
        return audio

    def _backend_manifest(self, tmp_path):
        write_model(tmp_path / "a.json", "neta", 6, sample_rate=4000, seed=1)
        write_model(tmp_path / "b.json", "netb", 4, sample_rate=4000, seed=2)
        manifest = tmp_path / "backends.json"
        manifest.write_text(json.dumps([
            {"id": "neta", "output_dim": 6, "sample_rate": 4000,
             "model_path": "a.json"},
            {"id": "netb", "output_dim": 4, "sample_rate": 4000,
             "model_path": "b.json"},
        ]))
        return manifest

    def test_three_files_make_three_vectors_and_manifest(self, tmp_path):
        audio = self._write_audio(tmp_path)
        manifest = self._backend_manifest(tmp_path)
        out = tmp_path / "out"
        assert main(["extract", "--audio-dir", str(audio),
                     "--backends", str(manifest), "--out", str(out)]) == 0
        entries = json.loads((out / "manifest.json").read_text())
        assert len(entries) == 3
        for entry in entries:
            mat = read_emb1(out / entry["features"])
            assert mat.shape == (1, 10)
        meta = json.loads((out / "extraction.json").read_text())
        assert [b["id"] for b in meta["backend_order"]] == ["neta", "netb"]

    def test_raw_embeddings_kept_when_asked(self, tmp_path):
        audio = self._write_audio(tmp_path, n_files=1)
        manifest = self._backend_manifest(tmp_path)
        out = tmp_path / "out"
        assert main(["extract", "--audio-dir", str(audio),
                     "--backends", str(manifest), "--raw-embeddings",
                     "--out", str(out)]) == 0
        raw = read_emb1(out / "raw" / "clip0.neta.emb")
        assert raw.shape[1] == 6

    def test_missing_audio_file_names_the_id(self, tmp_path, capsys):
        manifest = self._backend_manifest(tmp_path)
        audio_manifest = tmp_path / "audio.json"
        audio_manifest.write_text(json.dumps(
            [{"id": "lost-clip", "path": "nowhere.wav", "label": None}]))
        code = main(["extract", "--audio-manifest", str(audio_manifest),
                     "--backends", str(manifest), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "lost-clip" in capsys.readouterr().err

    def test_extract_is_byte_deterministic(self, tmp_path):
        audio = self._write_audio(tmp_path, n_files=2)
        manifest = self._backend_manifest(tmp_path)
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"out_{run}"
            assert main(["extract", "--audio-dir", str(audio),
                         "--backends", str(manifest), "--out", str(out)]) == 0
            outs.append(out)
        for entry in json.loads((outs[0] / "manifest.json").read_text()):
            blob_a = (outs[0] / entry["features"]).read_bytes()
            blob_b = (outs[1] / entry["features"]).read_bytes()
            assert blob_a == blob_b

    def test_parallel_extract_matches_sequential(self, tmp_path):
        audio = self._write_audio(tmp_path, n_files=4)
        manifest = self._backend_manifest(tmp_path)
        seq = tmp_path / "seq"
        par = tmp_path / "par"
        assert main(["extract", "--audio-dir", str(audio),
                     "--backends", str(manifest), "--out", str(seq)]) == 0
        assert main(["extract", "--audio-dir", str(audio), "--jobs", "4",
                     "--backends", str(manifest), "--out", str(par)]) == 0
        assert (seq / "manifest.json").read_text() == (par / "manifest.json").read_text()
        for entry in json.loads((seq / "manifest.json").read_text()):
            assert (seq / entry["features"]).read_bytes() == \
                   (par / entry["features"]).read_bytes()

    def test_precomputed_backend_needs_no_model_files(self, tmp_path):
        from coughscreen.emb1 import write_emb1

        audio = self._write_audio(tmp_path, n_files=2)
        emb = tmp_path / "emb"
        emb.mkdir()
        rng = np.random.default_rng(5)
        for i in range(2):
            write_emb1(emb / f"clip{i}.pre.emb",
                       rng.normal(size=(1, 7)).astype(np.float32))
        manifest = tmp_path / "backends.json"
        manifest.write_text(json.dumps([
            {"id": "pre", "output_dim": 7, "sample_rate": 8000,
             "embeddings_dir": "emb"},
        ]))
        out = tmp_path / "out"
        assert main(["extract", "--audio-dir", str(audio),
                     "--backends", str(manifest), "--out", str(out)]) == 0
        assert len(json.loads((out / "manifest.json").read_text())) == 2


class TestArgHandling:
    def test_unknown_flag_rejected(self, tmp_path):
        assert main(["synth", "--bogus", "1", "--out", str(tmp_path / "x")]) == 1

    def test_unknown_subcommand_rejected(self):
        assert main(["transmogrify"]) == 1
