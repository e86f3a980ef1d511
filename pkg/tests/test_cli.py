import csv
import json

import pytest

from ctlsed.cli import main, parse_weights

SYNTH = {
    "seed": 3,
    "num_recordings": {"train": 40, "validation": 16, "evaluation": 16},
    "T": 30,
    "classes": [
        {"name": "short", "min_dur": 2, "max_dur": 4, "rate": 0.7},
        {"name": "long", "min_dur": 8, "max_dur": 15, "rate": 0.7},
    ],
    "feature_noise_sigma": 0.4,
}
TRAIN = {"train": {"checkpoint_every": 2, "max_checkpoints": 3, "batch_size": 4}, "model": {"hidden_sizes": [6]}}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_json(root / "synth.json", SYNTH)
    assert main(["synth", "--config", cfg, "--out", str(root / "corpus")]) == 0
    return root


def run_train(root, name, *extra):
    cfg = write_json(root / f"{name}.json", TRAIN)
    out = root / name
    assert main(["train", "--config", cfg, "--corpus", str(root / "corpus"), "--out", str(out), *extra]) == 0
    return out


def test_parse_weights():
    assert parse_weights("ctl=1,mil=3.3") == {"ctl": 1.0, "mil": 3.3}
    assert parse_weights(" ctl = 2 ,") == {"ctl": 2.0}


def test_synth_writes_manifest_and_config(corpus):
    manifest = json.loads((corpus / "corpus" / "manifest.json").read_text())
    assert set(manifest["splits"]) == {"train", "validation", "evaluation"}
    assert len(manifest["splits"]["train"]["ids"]) == 40
    resolved = json.loads((corpus / "corpus" / "config.json").read_text())
    assert resolved["seed"] == 3 and resolved["T"] == 30


def test_synth_is_byte_identical(corpus, tmp_path):
    again = tmp_path / "again"
    assert main(["synth", "--config", str(corpus / "synth.json"), "--out", str(again)]) == 0
    for name in ("manifest.json", "train.bin", "validation.bin", "evaluation.bin"):
        assert (again / name).read_bytes() == (corpus / "corpus" / name).read_bytes()


def test_synth_seed_flag_changes_corpus(corpus, tmp_path):
    assert main(["synth", "--config", str(corpus / "synth.json"), "--seed", "4", "--out", str(tmp_path / "s4")]) == 0
    assert (tmp_path / "s4" / "train.bin").read_bytes() != (corpus / "corpus" / "train.bin").read_bytes()


def test_synth_invalid_config_names_field(tmp_path, capsys):
    bad = dict(SYNTH, classes=[{"name": "x", "min_dur": 5, "max_dur": 2, "rate": 1.0}])
    assert main(["synth", "--config", write_json(tmp_path / "bad.json", bad), "--out", str(tmp_path / "c")]) == 2
    assert "classes[0].min_dur" in capsys.readouterr().err


def test_synth_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["synth", "--out", str(blocker / "sub")]) == 2
    assert "not writable" in capsys.readouterr().err


def test_train_ctl_metrics_and_params(corpus):
    out = run_train(corpus, "ctl", "--loss", "ctl")
    rows = list(csv.DictReader((out / "metrics.csv").open()))
    assert [int(r["checkpoint"]) for r in rows] == [1, 2, 3]
    assert {"val_macro_f1", "train_loss", "val_f1_short", "val_f1_long"} <= set(rows[0])
    assert (out / "params.bin").exists()
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["train"]["loss"] == "ctl" and resolved["model"]["head"] == "sigmoid"


def test_train_ctc_switches_head(corpus):
    out = run_train(corpus, "ctc", "--loss", "ctc")
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["model"]["head"] == "softmax"


def test_train_weights_flag_selects_combo(corpus):
    out = run_train(corpus, "combo", "--weights", "ctl=1,mil=3.3")
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["train"]["loss"] == "combo"
    assert resolved["train"]["loss_weights"] == {"ctl": 1.0, "mil": 3.3}


def test_train_rerun_from_resolved_config_is_identical(corpus, tmp_path):
    first = run_train(corpus, "rerun", "--loss", "mil", "--seed", "2")
    assert main(["train", "--config", str(first / "config.json"), "--out", str(tmp_path / "again")]) == 0
    for name in ("metrics.csv", "params.bin"):
        assert (tmp_path / "again" / name).read_bytes() == (first / name).read_bytes()


def test_train_bad_weights(corpus, capsys):
    rc = main(["train", "--corpus", str(corpus / "corpus"), "--out", str(corpus / "bad"), "--weights", "ctc=1"])
    assert rc == 2
    assert "unknown loss weight" in capsys.readouterr().err


@pytest.mark.parametrize("loss", ["strong", "ctc"])
def test_eval_outputs(corpus, loss, tmp_path):
    trained = run_train(corpus, f"ev-{loss}", "--loss", loss)
    out = tmp_path / "eval"
    args = ["eval", "--params", str(trained / "params.bin"), "--corpus", str(corpus / "corpus"), "--out", str(out)]
    assert main(args) == 0
    report = json.loads((out / "report.json").read_text())
    per_class = [c["f1"] for c in report["classes"]]
    assert report["macro_f1"] == pytest.approx(sum(per_class) / len(per_class))
    assert report["split"] == "evaluation"
    rows = list(csv.reader((out / "posteriors.csv").open()))
    assert len(rows) - 1 == 16 * 30
    assert len(rows[0]) == 2 + (2 if loss == "strong" else 5)
    first = {name: (out / name).read_bytes() for name in ("report.json", "report.csv", "posteriors.csv")}
    assert main(args) == 0
    for name, data in first.items():
        assert (out / name).read_bytes() == data


def test_eval_vocabulary_mismatch(corpus, tmp_path, capsys):
    trained = run_train(corpus, "vocab", "--loss", "strong")
    other = dict(SYNTH, classes=[dict(c, name=c["name"] + "2") for c in SYNTH["classes"]])
    cfg = write_json(tmp_path / "other.json", other)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "other")]) == 0
    rc = main(["eval", "--params", str(trained / "params.bin"), "--corpus", str(tmp_path / "other"), "--out", str(tmp_path / "e")])
    assert rc == 2
    assert "vocabulary mismatch" in capsys.readouterr().err


def test_gradcheck_passes_and_writes_table(tmp_path, capsys):
    cfg = write_json(tmp_path / "g.json", {"instances": 10})
    assert main(["gradcheck", "--config", cfg, "--out", str(tmp_path / "g")]) == 0
    text = capsys.readouterr().out
    for loss in ("strong", "mil", "ctc", "ctl"):
        assert loss in text
    rows = list(csv.DictReader((tmp_path / "g" / "gradcheck.csv").open()))
    assert all(r["passed"] == "1" for r in rows)


def test_gradcheck_corrupted_gradient_fails(tmp_path, capsys):
    cfg = write_json(tmp_path / "g.json", {"instances": 5, "corrupt": ["ctl"]})
    assert main(["gradcheck", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "FAIL ctl" in err and "0:3:" in err


def test_oracle_check_default(capsys):
    assert main(["oracle-check", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "worked example" in out and "0.2500" in out


def test_oracle_check_zero_trials_warns(tmp_path, capsys):
    cfg = write_json(tmp_path / "o.json", {"trials": 0})
    assert main(["oracle-check", "--config", cfg]) == 0
    assert "vacuously" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["gradcheck", "oracle-check"])
def test_check_outputs_are_deterministic(command, tmp_path):
    cfg = write_json(tmp_path / "c.json", {"instances": 5} if command == "gradcheck" else {"trials": 20})
    for name in ("a", "b"):
        assert main([command, "--config", cfg, "--out", str(tmp_path / name)]) == 0
    for name in ("config.json", "gradcheck.csv" if command == "gradcheck" else "oracle.csv"):
        assert (tmp_path / "a" / name).read_bytes().replace(b"/a", b"/b") == (tmp_path / "b" / name).read_bytes()
