import numpy as np
import pytest

from edaflow import cli
from edaflow.features import read_feature_csv


def _run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _synth_files(tmp_path, capsys, duration=360, seed=0):
    prefix = str(tmp_path / "demo")
    code, _, err = _run(capsys, "synth", "--duration", str(duration),
                        "--seed", str(seed), "--out-prefix", prefix)
    assert code == 0, err
    return prefix


def test_synth_writes_three_files(tmp_path, capsys):
    prefix = _synth_files(tmp_path, capsys)
    for suffix in ("_trace.csv", "_labels.csv", "_truth.csv"):
        p = tmp_path / f"demo{suffix}"
        assert p.exists()
        assert len(p.read_text(encoding="utf-8").splitlines()) > 1


def test_metrics_prints_reference_percentages(tmp_path, capsys):
    p = tmp_path / "conf.csv"
    p.write_text("tp,fp,fn,tn\n41223,19900,14677,36000\n", encoding="utf-8")
    code, out, _ = _run(capsys, "metrics", "--confusion", str(p))
    assert code == 0
    assert out.strip() == "accuracy=69.1% precision=67.4% recall=73.7%"


def test_metrics_undefined(tmp_path, capsys):
    p = tmp_path / "conf.csv"
    p.write_text("tp,fp,fn,tn\n0,0,0,10\n", encoding="utf-8")
    code, out, _ = _run(capsys, "metrics", "--confusion", str(p))
    assert code == 0
    assert "precision=undefined%" in out


def test_full_pipeline_and_evaluate(tmp_path, capsys):
    prefix = _synth_files(tmp_path, capsys, duration=360, seed=1)
    clean = str(tmp_path / "clean.csv")
    code, _, err = _run(capsys, "preprocess", "--trace", f"{prefix}_trace.csv",
                        "--out", clean)
    assert code == 0, err
    decomposed = str(tmp_path / "dec.csv")
    code, _, err = _run(capsys, "decompose", "--trace", clean, "--out", decomposed)
    assert code == 0, err
    feats = str(tmp_path / "feat.csv")
    code, _, err = _run(capsys, "features", "--decomposed", decomposed,
                        "--labels", f"{prefix}_labels.csv", "--out", feats)
    assert code == 0, err
    fm = read_feature_csv(feats)
    assert len(fm) > 100
    report = str(tmp_path / "report.txt")
    code, _, err = _run(capsys, "evaluate", "--features", feats, "--algo", "knn",
                        "--repeats", "3", "--out", report)
    assert code == 0, err
    text = (tmp_path / "report.txt").read_text(encoding="utf-8")
    assert "== knn ==" in text
    assert "accuracy_mean" in text


def test_features_from_raw_trace_matches_two_step(tmp_path, capsys):
    prefix = _synth_files(tmp_path, capsys, duration=360, seed=2)
    direct = str(tmp_path / "direct.csv")
    code, _, err = _run(capsys, "features", "--trace", f"{prefix}_trace.csv",
                        "--labels", f"{prefix}_labels.csv", "--out", direct)
    assert code == 0, err
    clean = str(tmp_path / "clean.csv")
    assert _run(capsys, "preprocess", "--trace", f"{prefix}_trace.csv",
                "--out", clean)[0] == 0
    decomposed = str(tmp_path / "dec.csv")
    assert _run(capsys, "decompose", "--trace", clean, "--out", decomposed)[0] == 0
    staged = str(tmp_path / "staged.csv")
    assert _run(capsys, "features", "--decomposed", decomposed,
                "--labels", f"{prefix}_labels.csv", "--out", staged)[0] == 0
    a, b = read_feature_csv(direct), read_feature_csv(staged)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-9, atol=1e-12)


def test_evaluate_deterministic(tmp_path, capsys):
    prefix = _synth_files(tmp_path, capsys, duration=360, seed=3)
    feats = str(tmp_path / "feat.csv")
    assert _run(capsys, "features", "--trace", f"{prefix}_trace.csv",
                "--labels", f"{prefix}_labels.csv", "--out", feats)[0] == 0
    r1, r2 = str(tmp_path / "r1.txt"), str(tmp_path / "r2.txt")
    for out in (r1, r2):
        code, _, err = _run(capsys, "evaluate", "--features", feats, "--algo", "dt",
                            "--repeats", "3", "--seed", "7", "--out", out)
        assert code == 0, err
    assert (tmp_path / "r1.txt").read_bytes() == (tmp_path / "r2.txt").read_bytes()


def test_config_file_supplies_defaults_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("duration = 240  # short run\nseed = 9\n", encoding="utf-8")
    prefix = str(tmp_path / "cfgrun")
    code, _, err = _run(capsys, "synth", "--config", str(cfg),
                        "--seed", "1", "--out-prefix", prefix)
    assert code == 0, err
    labels = (tmp_path / "cfgrun_labels.csv").read_text(encoding="utf-8")
    assert "120" in labels and "240" in labels  # 240 s => two segments
    # same config but seed overridden on the command line must match seed=1 run
    direct = str(tmp_path / "direct")
    assert _run(capsys, "synth", "--duration", "240", "--seed", "1",
                "--out-prefix", direct)[0] == 0
    assert ((tmp_path / "cfgrun_trace.csv").read_bytes()
            == (tmp_path / "direct_trace.csv").read_bytes())


def test_config_unknown_key_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("durations = 240\n", encoding="utf-8")
    code, _, err = _run(capsys, "synth", "--config", str(cfg),
                        "--out-prefix", str(tmp_path / "x"))
    assert code == 1
    assert "unknown config key" in err


def test_usage_errors_exit_1(capsys):
    assert _run(capsys, "frobnicate")[0] == 1
    assert _run(capsys)[0] == 1
    assert _run(capsys, "synth")[0] == 1  # missing --out-prefix


def test_missing_input_exits_2(tmp_path, capsys):
    code, _, err = _run(capsys, "preprocess", "--trace", str(tmp_path / "nope.csv"),
                        "--out", str(tmp_path / "out.csv"))
    assert code == 2
    assert "data error" in err


def test_malformed_trace_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t_s,eda_uS\n0,1\n0.25,1\n0.6,1\n", encoding="utf-8")
    code, _, err = _run(capsys, "decompose", "--trace", str(bad),
                        "--out", str(tmp_path / "out.csv"))
    assert code == 2
    assert "non-uniform" in err


def test_solver_failure_exits_3(tmp_path, capsys, monkeypatch):
    from edaflow.errors import SolverError

    def boom(*a, **kw):
        raise SolverError("did not converge")

    monkeypatch.setattr("edaflow.cli.decompose", boom)
    trace = tmp_path / "t.csv"
    rows = ["t_s,eda_uS"] + [f"{i * 0.25},2.0" for i in range(200)]
    trace.write_text("\n".join(rows) + "\n", encoding="utf-8")
    code, _, err = _run(capsys, "decompose", "--trace", str(trace),
                        "--out", str(tmp_path / "o.csv"))
    assert code == 3
    assert "solver failure" in err
