"""Smoke tests for the Python bindings: shapes, metric oracles, and one
end-to-end pretrain/extract/eval round trip on a tiny synthetic corpus."""

import math

import numpy as np
import pytest

import ssrl


def sine(freq, seconds, amp=0.5, sr=16000):
    t = np.arange(int(seconds * sr)) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def test_frontend_shapes():
    w = sine(440.0, 1.0)
    lm = ssrl.log_mel(w)
    assert lm.shape == (98, 80)
    mf = ssrl.mfcc(w)
    assert mf.shape == (98, 39)
    assert ssrl.frame_count(16000, 16000) == 98


def test_mix_at_snr_power_ratio():
    clean = sine(440.0, 1.0, 0.4)
    noise = sine(1333.0, 0.4, 0.2)
    for snr in (-5.0, 0.0, 20.0):
        mixed = ssrl.mix_at_snr(clean, noise, snr)
        added = mixed - clean
        measured = 10 * np.log10(np.mean(clean**2) / np.mean(added**2))
        assert abs(measured - snr) < 0.1


def test_jumble_involution_and_multiset():
    rng = np.random.default_rng(0)
    frames = rng.uniform(-5, 5, size=(100, 80))
    out, spec = ssrl.jumble(frames, seed=42)
    assert out.shape == frames.shape
    assert spec["window_len"] == 15
    # multiset of rows preserved
    assert np.allclose(
        np.sort(frames, axis=0).sum(), np.sort(out, axis=0).sum()
    )
    assert not np.array_equal(out, frames)


def test_metric_oracles():
    assert ssrl.ccc([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert ssrl.ccc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert ssrl.ccc([0, 1], [1, 2]) == pytest.approx(1 / 3)
    assert ssrl.ccc_loss([1, 2, 3], [3, 2, 1]) == pytest.approx(1.0)
    assert ssrl.macro_f1([0, 0, 0, 0], [0, 0, 1, 1], 2) == pytest.approx(1 / 3)
    assert ssrl.accuracy([1, 2, 3], [1, 2, 0]) == pytest.approx(2 / 3)
    t, p = ssrl.paired_t_test([1, 2, 3, 4], [2, 1, 4, 3])
    assert t == pytest.approx(0.0)
    assert p == pytest.approx(1.0)


def test_multitask_loss_linear():
    assert ssrl.multitask_loss(1.0, 2.0, 0.67) == pytest.approx(1.33)
    assert ssrl.multitask_loss(3.5, 9.0, 1.0) == 3.5
    assert ssrl.multitask_loss(3.5, 9.0, 0.0) == 9.0


def test_synthetic_envelope_bounds():
    env = ssrl.synthetic_envelope(0, 25)
    assert len(env) == 25
    assert all(0.0 <= v <= 1.0 for v in env)


def test_pipeline_round_trip(tmp_path):
    data = str(tmp_path / "ds")
    n = ssrl.synth_dataset(data, n_speakers=5, clips_per_speaker=3, seconds=0.5, seed=3)
    assert n == 15

    ckpt = str(tmp_path / "m.ckpt")
    result = ssrl.pretrain(
        data, ckpt, task="Odd", epochs=1, batch_size=8, lr0=0.003, seed=2
    )
    assert len(result["total_loss"]) == 1
    assert math.isfinite(result["total_loss"][0])
    assert 0.0 <= result["val_odd_accuracy"] <= 1.0

    store = str(tmp_path / "feats")
    ssrl.extract_features(ckpt, data, store)
    out = ssrl.eval_frozen(store, epochs=2, batch_size=8, bgru_hidden=8, seed=4)
    assert 0.0 <= out["test_metric"] <= 1.0
    assert len(out["val_curve"]) == 2

    # the checkpointed encoder runs standalone and is causal in time
    mel = ssrl.log_mel(sine(300.0, 0.5))
    feats = ssrl.encode(ckpt, mel)
    assert feats.shape[0] == mel.shape[0]
    prefix = ssrl.encode(ckpt, mel[:10])
    assert np.array_equal(feats[:10], prefix)
