import json

import numpy as np
import pytest

import nstate


def test_parameter_totals():
    assert nstate.Model("cnn1d", 26).count_params() == 165649
    assert nstate.Model("lstm", 256).count_params() == 168513
    audit = nstate.param_audit("eegnet", 26)
    assert audit["total"] == 2201
    assert audit["delta"] == -48


def test_unknown_model():
    with pytest.raises(ValueError):
        nstate.Model("resnet", 26)


def test_filter_and_psd():
    t = np.arange(5000) / 250.0
    x = np.sin(2 * np.pi * 10 * t)
    y = nstate.filtfilt(x)
    assert y.shape == x.shape
    assert abs(np.sqrt(np.mean(y**2)) - np.sqrt(0.5)) < 0.05 * np.sqrt(0.5)
    taps = nstate.design_bandpass()
    assert len(taps) == 825
    assert np.allclose(taps, taps[::-1])

    freqs, power = nstate.welch_psd(x[None, :2500])
    assert freqs[np.argmax(power[0])] == 10.0
    bands = nstate.band_powers(x[None, :])
    assert bands["alpha"][0] > 50 * bands["beta"][0]


def test_spline_constant_field():
    names, pos = nstate.synthetic_montage(64)
    assert len(names) == 64 and pos.shape == (64, 3)
    out = nstate.spline_interpolate(pos[1:], np.full((63, 3), 4.0), pos[:1])
    assert np.allclose(out, 4.0, atol=1e-6)


def test_splitter_and_metrics():
    labels = [i % 2 for i in range(12) for _ in range(5)]
    groups = [f"s{i}" for i in range(12) for _ in range(5)]
    folds = nstate.stratified_group_kfold(labels, groups, 6, 1)
    assert len(folds) == 6
    seen = sorted(i for _, val in folds for i in val)
    assert seen == list(range(60))
    m = nstate.compute_metrics([1, 1, 0, 0], [1, 0, 0, 0], 0.3)
    assert m["accuracy"] == 0.75
    assert nstate.bce_loss([0.5, 0.5], [1, 0]) == pytest.approx(np.log(2))


def test_fit_predict_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    y = np.array([i % 2 for i in range(32)])
    x = rng.normal(size=(32, 3, 250)).astype(np.float32) + (2 * y - 1)[:, None, None]
    model = nstate.Model("eegnet", 3)
    model.init(4)
    history = model.fit(x, y.tolist(), x, y.tolist(), epochs=2, batch_size=8, seed=1)
    assert [h["epoch"] for h in history] == [1, 2]
    p = model.predict(x)
    assert p.shape == (32,) and np.all((p > 0) & (p < 1))
    path = tmp_path / "m.nstm"
    model.save(path)
    again = nstate.Model.load(path)
    assert np.array_equal(again.predict(x), p)


def test_cli_and_containers(tmp_path):
    code, out, err = nstate.run_cli(
        ["synth", "--subjects", "2", "--channels", "8", "--minutes", "0.1", "--seed", "1",
         "--out-dir", str(tmp_path)])
    assert code == 0, err
    rec = nstate.read_container(tmp_path / "sub-01.nse")
    assert rec["kind"] == "recording"
    assert rec["data"].shape == (8, 1500)
    assert rec["condition"] == "GI"
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert len(manifest["recordings"]) == 2
    code, _, _ = nstate.run_cli(["synth", "--subjects", "3", "--out-dir", str(tmp_path)])
    assert code == 2
    with pytest.raises(OSError):
        nstate.read_container(tmp_path / "missing.nse")
