import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from hidden_lgi import theory
from hidden_lgi.quantum import depolarizing, save_channel
from run import main

CHANNELS = Path(__file__).resolve().parents[2] / "data" / "channels"


def last_violating_v(frame, column):
    return frame.loc[frame[column], "v"].max()


def test_sweep_reproduces_thresholds(tmp_path):
    out = tmp_path / "sweep.csv"
    assert(main(["sweep", "--output", str(out)]) == 0)
    frame = pd.read_csv(out)
    assert(list(frame.columns) == ["v", "D", "B_unfiltered", "B_filtered", "N",
                                   "violated_unfiltered", "violated_filtered"])
    assert(len(frame) == 2 * 101)
    low = frame[frame["D"] == 0.45]
    high = frame[frame["D"] == 0.99]
    assert(last_violating_v(low, "violated_filtered") == pytest.approx(0.63))
    assert(last_violating_v(high, "violated_filtered") == pytest.approx(0.82))
    assert(last_violating_v(low, "violated_unfiltered") == pytest.approx(0.49))
    row = low[np.isclose(low["v"], 0.6)].iloc[0]
    assert(row["B_filtered"] == pytest.approx(theory.filtered_chsh(0.6, 0.45), abs=1e-12))
    assert(row["N"] == pytest.approx(theory.filter_success(0.6, 0.45), abs=1e-12))


def test_sweep_without_filters(tmp_path):
    out = tmp_path / "sweep.csv"
    assert(main(["sweep", "--filtered", "false", "--v-range", "0", "1", "11", "--D", "0.45", "--output", str(out)]) == 0)
    frame = pd.read_csv(out)
    assert(len(frame) == 11)
    assert(frame["B_filtered"].isna().all())
    assert(not frame["violated_filtered"].any())


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"v_range": [0.6, 0.65, 6], "d_values": [0.45], "format": "json"}))
    out = tmp_path / "sweep.json.out"
    assert(main(["sweep", "--config", str(config), "--D", "0.99", "--output", str(out)]) == 0)
    records = json.loads(out.read_text())
    assert(len(records) == 6)
    assert({r["D"] for r in records} == {0.99})
    assert(records[0]["v"] == pytest.approx(0.6))


def test_invalid_config_exits_with_usage_status(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"v_range": [0, 1, 11], "colour": "blue"}))
    assert(main(["sweep", "--config", str(config)]) == 1)
    config.write_text("{not json")
    assert(main(["sweep", "--config", str(config)]) == 1)
    config.write_text(json.dumps({"v_range": 5}))
    assert(main(["sweep", "--config", str(config)]) == 1)


def test_fractional_step_count_is_rejected(tmp_path):
    out = tmp_path / "sweep.csv"
    assert(main(["sweep", "--v-range", "0", "1", "2.7", "--output", str(out)]) == 1)
    assert(not out.exists())
    assert(main(["sweep", "--v-range", "0", "1", "3.0", "--D", "0.45", "--output", str(out)]) == 0)
    assert(len(pd.read_csv(out)) == 3)


def test_missing_config_is_a_runtime_error(tmp_path):
    assert(main(["sweep", "--config", str(tmp_path / "absent.json")]) == 3)


def test_classify_amplitude_damping_06(tmp_path):
    out = tmp_path / "verdict.json"
    assert(main(["classify", str(CHANNELS / "amplitude_damping_0.6.json"), "--output", str(out)]) == 0)
    doc = json.loads(out.read_text())
    assert(set(doc) == {"channel", "scenario", "chsh", "activation", "nonlocality"})
    assert(not doc["chsh"]["violated"])
    assert(doc["activation"]["activated"])
    assert(doc["nonlocality"]["hidden_nonlocal"])
    assert(not doc["nonlocality"]["strongly_breaking_candidate"])


def test_classify_amplitude_damping_03(tmp_path):
    out = tmp_path / "verdict.json"
    assert(main(["classify", str(CHANNELS / "amplitude_damping_0.3.json"), "--resolution", "5",
                 "--output", str(out)]) == 0)
    doc = json.loads(out.read_text())
    assert(doc["chsh"]["violated"])
    assert(not doc["activation"]["activated"])
    assert(not doc["nonlocality"]["local"])


def test_classify_amplitude_damping_09(tmp_path, capsys):
    out = tmp_path / "verdict.json"
    assert(main(["classify", str(CHANNELS / "amplitude_damping_0.9.json"), "--output", str(out), "--summary"]) == 0)
    doc = json.loads(out.read_text())
    assert(not doc["activation"]["activated"])
    assert(doc["nonlocality"]["hidden_nonlocal"])
    assert("strongly_breaking_candidate" in capsys.readouterr().err)


def test_classify_entanglement_breaking_channel(tmp_path):
    path = tmp_path / "depolarizing.json"
    save_channel(depolarizing(1.0), path)
    out = tmp_path / "verdict.json"
    assert(main(["classify", str(path), "--resolution", "5", "--output", str(out)]) == 0)
    doc = json.loads(out.read_text())
    assert(not doc["activation"]["activated"])
    assert(doc["nonlocality"]["strongly_breaking_candidate"])


def test_classify_rejects_bad_documents(tmp_path):
    malformed = tmp_path / "malformed.json"
    malformed.write_text('{"dim": 2, "kraus": [')
    assert(main(["classify", str(malformed)]) == 1)
    tni = tmp_path / "tni.json"
    tni.write_text(json.dumps({"dim": 2, "kind": "tni",
                               "kraus": [[[1, 0], [0, 0], [0, 0], [0.5, 0]]]}))
    assert(main(["classify", str(tni)]) == 2)
    nan = tmp_path / "nan.json"
    nan.write_text('{"dim": 2, "kind": "tp", "kraus": [[[NaN, 0], [0, 0], [0, 0], [1, 0]]]}')
    assert(main(["classify", str(nan)]) == 2)


def test_experiment_is_deterministic(tmp_path):
    args = ["experiment", "--v", "0.6", "--D", "0.45", "--filtered", "--shots", "1000",
            "--replicates", "5", "--seed", "3", "--noise", "laboratory"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert(main(args + ["--output", str(first)]) == 0)
    assert(main(args + ["--output", str(second)]) == 0)
    assert(first.read_text() == second.read_text())
    frame = pd.read_csv(first)
    assert(list(frame.columns) == ["v", "D", "filtered", "shots", "replicates", "mean_B", "err_B", "seed"])
    assert(frame.loc[0, "shots"] == 1000 and frame.loc[0, "seed"] == 3)


def test_experiment_noise_overrides(tmp_path):
    out = tmp_path / "point.csv"
    assert(main(["experiment", "--v", "0.3", "--shots", "100", "--replicates", "2",
                 "--visibility", "0.9", "0.95", "--output", str(out)]) == 0)
    assert(main(["experiment", "--v", "0.3", "--visibility", "0.95", "0.9"]) == 2)


def test_experiment_with_annihilating_filters():
    assert(main(["experiment", "--v", "0.5", "--D", "1.0", "--filtered", "--shots", "100",
                 "--replicates", "2"]) == 3)


def test_thresholds(tmp_path):
    out = tmp_path / "thresholds.csv"
    assert(main(["thresholds", "--output", str(out)]) == 0)
    frame = pd.read_csv(out)
    assert(list(frame["D"]) == [0.0, 0.45, 0.99])
    assert(np.allclose(frame["v_numeric"], frame["v_closed_form"], atol=1e-9))
    assert(frame.loc[1, "v_closed_form"] == pytest.approx(0.632, abs=1e-3))


def test_usage_errors_exit_with_status_one():
    with pytest.raises(SystemExit) as e:
        main(["sweep", "--format", "xml"])
    assert(e.value.code == 1)
    with pytest.raises(SystemExit) as e:
        main([])
    assert(e.value.code == 1)


def test_bad_environment_defaults(monkeypatch):
    monkeypatch.setenv("LGI_SHOTS", "many")
    assert(main(["thresholds", "--D", "0.45"]) == 1)


def test_environment_supplies_defaults(monkeypatch, tmp_path):
    monkeypatch.setenv("LGI_SEED", "7")
    out = tmp_path / "point.csv"
    assert(main(["experiment", "--v", "0.3", "--shots", "100", "--replicates", "2", "--output", str(out)]) == 0)
    assert(pd.read_csv(out).loc[0, "seed"] == 7)
