import hashlib

import numpy as np
import pytest

from ctlsed.labels import strong_to_events, strong_to_presence, strong_to_sequential
from ctlsed.synth import (
    ClassSpec,
    ConfigError,
    SynthConfig,
    generate,
    read_corpus,
    signatures,
    write_corpus,
)

SMALL = {"train": 30, "validation": 10, "evaluation": 10}


def test_defaults_mirror_short_vs_long():
    cfg = SynthConfig()
    assert cfg.T == 100
    assert [(c.name, c.min_dur, c.max_dur) for c in cfg.classes] == [("short", 3, 8), ("long", 30, 60)]
    assert cfg.num_recordings["train"] >= 2000


def test_zero_rate_gives_silence():
    cfg = SynthConfig(num_recordings=SMALL, classes=[ClassSpec("a", 2, 4, 0.0), ClassSpec("b", 2, 4, 0.0)])
    for rec in generate(cfg, "train"):
        assert not rec.strong.any()
        assert rec.sequential == ()


def test_noiseless_single_event_features():
    cfg = SynthConfig(num_recordings=SMALL, classes=[ClassSpec("a", 5, 5, 1.0)], feature_noise_sigma=0.0, d=4, T=20)
    sig = signatures(cfg).astype(np.float32)
    seen = False
    for rec in generate(cfg, "train"):
        if len(strong_to_events(rec.strong)) == 1:
            seen = True
            active = rec.strong[:, 0] == 1
            assert np.array_equal(rec.features[active], np.broadcast_to(sig[0], (active.sum(), 4)))
            assert not rec.features[~active].any()
    assert seen


def test_signatures_orthonormal():
    sig = signatures(SynthConfig())
    np.testing.assert_allclose(sig @ sig.T, np.eye(2), atol=1e-12)


def test_label_consistency_and_durations():
    cfg = SynthConfig(num_recordings=SMALL)
    for split in ("train", "validation", "evaluation"):
        for rec in generate(cfg, split):
            assert rec.sequential == strong_to_sequential(rec.strong)
            assert np.array_equal(rec.presence, strong_to_presence(rec.strong))
            assert rec.features.dtype == np.float32 and rec.features.shape == (100, 8)
            for c, a, b in strong_to_events(rec.strong):
                spec = cfg.classes[c]
                assert spec.min_dur <= b - a <= spec.max_dur


def test_no_overlap_option():
    cfg = SynthConfig(num_recordings=SMALL, overlap_allowed=False, classes=[ClassSpec("a", 3, 8, 2.0), ClassSpec("b", 5, 20, 1.0)])
    for rec in generate(cfg, "train"):
        assert rec.strong.sum(axis=1).max(initial=0) <= 1


def test_splits_differ():
    cfg = SynthConfig(num_recordings=SMALL)
    a = generate(cfg, "train")[0].features
    b = generate(cfg, "validation")[0].features
    assert not np.array_equal(a, b)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"classes": [ClassSpec("a", 5, 3, 1.0)]}, "classes[0].min_dur"),
        ({"classes": [ClassSpec("a", 0, 3, 1.0)]}, "classes[0].min_dur"),
        ({"classes": [ClassSpec("a", 3, 200, 1.0)]}, "classes[0].max_dur"),
        ({"classes": [ClassSpec("a", 3, 5, -1.0)]}, "classes[0].rate"),
        ({"feature_noise_sigma": -0.1}, "feature_noise_sigma"),
        ({"num_recordings": {"test": 3}}, "num_recordings.test"),
    ],
)
def test_config_errors_name_the_field(kwargs, field):
    with pytest.raises(ConfigError) as err:
        SynthConfig(**kwargs)
    assert err.value.field == field


def test_config_round_trip():
    cfg = SynthConfig(seed=7, num_recordings=SMALL)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"bogus": 1})


def _digest(directory):
    h = hashlib.sha256()
    for p in sorted(directory.iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_corpus_round_trip_and_determinism(tmp_path):
    cfg = SynthConfig(seed=3, num_recordings=SMALL)
    write_corpus(tmp_path / "a", cfg)
    write_corpus(tmp_path / "b", cfg)
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")
    vocab, corpus = read_corpus(tmp_path / "a")
    assert vocab.classes == ("short", "long")
    fresh = generate(cfg, "train")
    for got, want in zip(corpus["train"], fresh):
        assert got.id == want.id
        assert np.array_equal(got.features, want.features)
        assert np.array_equal(got.strong, want.strong)
        assert got.sequential == want.sequential


def test_split_file_layout(tmp_path):
    cfg = SynthConfig(seed=1, num_recordings={"train": 2, "validation": 0, "evaluation": 0})
    write_corpus(tmp_path, cfg)
    data = (tmp_path / "train.bin").read_bytes()
    assert data[:8] == b"CTLSPLT1"
    hlen = int.from_bytes(data[8:16], "little")
    feats = np.frombuffer(data[16 + hlen :], dtype="<f4")
    assert feats.size == 2 * 100 * 8
    assert np.array_equal(feats[:800].reshape(100, 8), generate(cfg, "train")[0].features)
