import csv
import json

import pytest
from conftest import WINE_CSV

from hebgha.bench import (
    CSV_COLUMNS,
    ConfigError,
    Report,
    emit_report,
    parse_config,
    read_csv_rows,
    render_csv,
    render_markdown,
    run_experiment,
)
from hebgha.cli import main
from hebgha.evaluation import MetricsRow


def wine_doc(**over):
    doc = {
        "datasets": [{"name": "wine", "path": str(WINE_CSV), "label_column": "class", "has_header": True}],
        "algorithms": ["GHA"],
        "splits": [0.7],
        "seeds": [0],
        "gha": {"m": 3, "epochs": 3},
        "topology": "3x3x2",
    }
    doc.update(over)
    return doc


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def masked(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    i = rows[0].index("training_time")
    return [r[:i] + r[i + 1:] for r in rows]


@pytest.mark.parametrize(
    "doc",
    [
        {"datasets": [], "bogus": 1},
        {"datasets": [{"path": "x.csv", "labl": 0}]},
        {"datasets": [{"name": "nothing"}]},
        {"datasets": [{"path": "x.csv"}], "gha": {"eta": 0.1}},
        {"datasets": [{"path": "x.csv"}], "gha": {"eta0": -1}},
        {"datasets": [{"path": "x.csv"}], "algorithms": ["SVM"]},
        {"datasets": [{"path": "x.csv"}], "algorithms": []},
        {"datasets": [{"path": "x.csv"}], "splits": [1.2]},
        {"datasets": [{"path": "x.csv"}], "seeds": []},
        {"datasets": [{"path": "x.csv"}], "topology": "3x0x1"},
        {"algorithms": ["HA"]},
    ],
)
def test_invalid_configs(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    p = write_cfg(tmp_path, {"datasets": [], "typo": True})
    assert main(["bench", "--config", str(p)]) == 2
    assert "typo" in capsys.readouterr().err
    assert main(["bench", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["train", "--config", str(tmp_path / "broken.json"), "--cell", "0"]) == 2


def test_relative_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "d").mkdir()
    cfg = parse_config({"datasets": [{"path": "wine.csv"}], "out_dir": "out"}, str(tmp_path / "d"))
    assert cfg.datasets[0].path == str(tmp_path / "d" / "wine.csv")
    assert cfg.out_dir == str(tmp_path / "d" / "out")


def test_single_cell_wine():
    rep = run_experiment(parse_config(wine_doc()))
    assert rep.failures == []
    (row,) = rep.rows
    assert (row.train_size, row.test_size) == (124, 54)
    assert row.energy is None and row.connection_events is None
    assert 0 < row.classification_accuracy <= 100


def test_grid_cardinality_and_order():
    doc = wine_doc(
        algorithms=["HA", "GHA"],
        splits=[0.7, 0.5, 0.8, 0.3],
        fabric_modes=["reference", "simulated-fabric"],
        gha={"m": 3, "epochs": 1},
    )
    cfg = parse_config(doc)
    rep = run_experiment(cfg)
    assert len(rep.rows) == 16 and not rep.failures
    keys = [(r.algorithm, r.split, r.fabric_mode) for r in rep.rows]
    assert keys == [(a, s, m) for a in ("HA", "GHA") for s in (0.7, 0.5, 0.8, 0.3)
                    for m in ("reference", "simulated-fabric")]
    for r in rep.rows:
        if r.fabric_mode == "simulated-fabric":
            assert r.connection_events > 0 and r.energy == 10 * r.connection_events / 1e9
    # same grid in parallel gives the same rows (apart from wall-clock)
    par = run_experiment(cfg, jobs=2)
    strip = lambda rows: [{k: v for k, v in vars(r).items() if k != "training_time"} for r in rows]
    assert strip(par.rows) == strip(rep.rows)


def test_failed_cell_reported_others_run(tmp_path):
    doc = wine_doc()
    doc["datasets"].append({"name": "gone", "path": str(tmp_path / "gone.csv")})
    rep = run_experiment(parse_config(doc))
    assert len(rep.rows) == 1 and len(rep.failures) == 1
    assert "gone" in rep.failures[0][1]
    out = tmp_path / "out"
    p = write_cfg(tmp_path, dict(doc, out_dir=str(out)))
    assert main(["bench", "--config", str(p), "--format", "csv"]) == 1
    meta = json.loads((out / "results.meta.json").read_text())
    assert meta["failures"][0]["cell"] == 1


def test_synthetic_cell_alignment():
    doc = {
        "datasets": [{"synthetic": {"n_samples": 10000, "eigenvalues": [8, 4, 2, 1, 0.5, 0.25, 0.125, 0.0625],
                                    "seed": 2024}}],
        "algorithms": ["GHA"],
        "splits": [0.5],
    }
    (row,) = run_experiment(parse_config(doc)).rows
    assert row.min_alignment >= 0.99
    assert row.classification_accuracy is None


def test_bench_cli_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        p = write_cfg(tmp_path, wine_doc(out_dir=str(out), splits=[0.7, 0.3]), f"c{k}.json")
        assert main(["bench", "--config", str(p), "--format", "csv,markdown"]) == 0
        outs.append(out)
    assert masked(outs[0] / "results.csv") == masked(outs[1] / "results.csv")
    assert (outs[0] / "results.md").exists()


def test_train_writes_model_and_trace(tmp_path, capsys):
    p = write_cfg(tmp_path, wine_doc(out_dir=str(tmp_path / "o")))
    assert main(["train", "--config", str(p), "--cell", "0"]) == 0
    model = json.loads((tmp_path / "o" / "cell000_model.json").read_text())
    assert len(model["weights"]) == 3 and len(model["weights"][0]) == 13
    with open(tmp_path / "o" / "cell000_trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "summed_delta_norm", "seconds", "reconstruction_error"]
    assert len(rows) == 1 + 3
    assert main(["train", "--config", str(p), "--cell", "7"]) == 2


def test_simulate_cli(tmp_path, capsys):
    trace = tmp_path / "t.tsv"
    assert main(["simulate", "--topology", "3x3x2", "--trace", str(trace)]) == 0
    text = capsys.readouterr().out
    assert "deliveries" in text
    lines = trace.read_text().splitlines()
    assert lines and all(len(line.split("\t")) == 5 for line in lines)
    assert main(["simulate", "--topology", "2x2x1", "--scenario", "gha", "--packets", "4"]) == 0
    assert main(["simulate", "--topology", "banana"]) == 2


def test_report_rerender(tmp_path, capsys):
    rep = run_experiment(parse_config(wine_doc()))
    path = emit_report(rep, "csv", str(tmp_path))
    rows = read_csv_rows(path)
    assert render_csv(rows) == render_csv(rep.rows)
    assert main(["report", "--in", path, "--format", "markdown"]) == 0
    assert "Classification accuracy and energy" in capsys.readouterr().out
    assert main(["report", "--in", path, "--format", "markdown", "--out", str(tmp_path / "md")]) == 0
    assert (tmp_path / "md" / "results.md").read_text() == render_markdown(rows)


def test_csv_layout_and_markdown_percentages():
    row = MetricsRow("wine", "GHA", "reference", 0.7, 0, 124, 54, error_rate=12.5,
                     training_time=0.25, memory_usage=440, classification_accuracy=100 * 36 / 54)
    text = render_csv([row])
    lines = text.splitlines()
    assert lines[0].split(",") == CSV_COLUMNS and len(lines) == 2
    assert repr(100 * 36 / 54) in lines[1]
    md = render_markdown([row])
    assert "| 66.67 |" in md and "66.666" not in md
    assert render_markdown([row]) == md and render_csv([row]) == text


def test_emit_report_rejects_empty_and_unknown(tmp_path):
    with pytest.raises(ValueError):
        emit_report(Report([]), "csv", str(tmp_path))
    row = MetricsRow("d", "HA", "reference", 0.5, 0)
    with pytest.raises(ValueError):
        emit_report(Report([row]), "xml", str(tmp_path))
