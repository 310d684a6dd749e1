import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from fdrlab.circuits import TOY_CIRCUITS, toy_document, write_bundled
from fdrlab.cli import main
from fdrlab.features import FEATURE_NAMES
from fdrlab.report import report_schema
from conftest import TOY_CYCLES, TOY_STIMULI


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write_stimulus(path, columns, cycles):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if columns:
            w.writerow(list(columns))
            w.writerows(zip(*columns.values()))
        else:
            w.writerow(["cycle"])
            w.writerows([t] for t in range(cycles))
    return path


@pytest.fixture
def shift3(tmp_path, write_json):
    net = write_json(toy_document("shift3"))
    stim = _write_stimulus(tmp_path / "stim.csv", TOY_STIMULI["shift3"], 8)
    return net, stim


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    d = tmp_path_factory.mktemp("bundle")
    write_bundled(d)
    return d


@pytest.fixture(scope="module")
def desk_tables(bundle, tmp_path_factory):
    d = tmp_path_factory.mktemp("desk")
    net, stim = bundle / "desk_composite.json", bundle / "desk_composite.csv"
    assert main(["features", str(net), str(stim), "-o", str(d / "features.csv")]) == 0
    assert main(["inject", str(net), str(stim), "--per-ff", "40", "--seed", "3",
                 "--window", "5..200", "-o", str(d / "fdr.csv")]) == 0
    return d / "features.csv", d / "fdr.csv"


# -- netlist / graph ----------------------------------------------------------------


def test_netlist_check_summary(shift3, capsys):
    assert main(["netlist", "check", str(shift3[0])]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["flip_flops"] == 3


def test_graph_stats_to_file(shift3, tmp_path):
    out = tmp_path / "stats.json"
    assert main(["graph", "stats", str(shift3[0]), "-o", str(out)]) == 0
    stats = json.loads(out.read_text())
    assert stats["nodes"] > 0 and 3 in stats.values()


def test_multi_driver_exits_3(write_json, capsys):
    doc = toy_document("shift3")
    doc["cells"].append({"name": "dup", "type": "BUF_X1", "pins": {"A": "d", "Y": "q0"}})
    assert main(["netlist", "check", str(write_json(doc))]) == 3
    assert "q0" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["netlist", "check", str(tmp_path / "nope.json")]) in (2, 3)
    assert main(["pipeline", str(tmp_path / "nope.ini")]) == 2
    assert "nope.ini" in capsys.readouterr().err


def test_bad_stimulus_exits_4(shift3, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("d\n1\n2\n")
    assert main(["simulate", str(shift3[0]), str(bad), "--trace", str(tmp_path / "t.csv")]) == 4
    assert "not 0/1" in capsys.readouterr().err


def test_jobs_must_be_positive(shift3, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["inject", *map(str, shift3), "-j", "0", "-o", str(tmp_path / "f.csv")])
    assert exc.value.code == 2


# -- simulate / features / inject ---------------------------------------------------


def test_simulate_trace(shift3, tmp_path):
    trace = tmp_path / "trace.csv"
    assert main(["simulate", *map(str, shift3), "--trace", str(trace)]) == 0
    rows = _read_csv(trace)
    assert len(rows) == 8
    d = TOY_STIMULI["shift3"]["d"]
    # the third stage holds the input delayed by three clocks
    ff3 = [c for c in rows[0] if c.startswith("ff:")][-1]
    assert [int(r[ff3]) for r in rows[3:]] == d[:5]


@pytest.mark.parametrize("name", [n for n in TOY_CIRCUITS if n in TOY_STIMULI])
def test_features_and_inject_files(name, tmp_path, write_json):
    net = write_json(toy_document(name))
    stim = _write_stimulus(tmp_path / "s.csv", TOY_STIMULI[name], TOY_CYCLES.get(name, 0))
    feats, fdr = tmp_path / "features.csv", tmp_path / "fdr.csv"
    assert main(["features", str(net), str(stim), "-o", str(feats)]) == 0
    assert main(["inject", str(net), str(stim), "--exhaustive", "-o", str(fdr)]) == 0
    header = next(csv.reader(open(feats)))
    assert header == ["ff_name", *FEATURE_NAMES]
    rows = _read_csv(fdr)
    assert {r["ff_name"] for r in rows} == {r["ff_name"] for r in _read_csv(feats)}
    assert all(0 <= float(r["fdr"]) <= 1 for r in rows)


def test_inject_single_ff(shift3, tmp_path):
    out = tmp_path / "f.csv"
    names = [r["ff_name"] for r in _read_csv(_features(shift3, tmp_path))]
    assert main(["inject", *map(str, shift3), "--ff", names[0], "--per-ff", "10", "-o", str(out)]) == 0
    assert [r["ff_name"] for r in _read_csv(out)] == [names[0]]
    assert main(["inject", *map(str, shift3), "--ff", "ghost", "-o", str(out)]) == 3


def _features(shift3, tmp_path):
    out = tmp_path / "feat.csv"
    main(["features", *map(str, shift3), "-o", str(out)])
    return out


# -- train / predict / evaluate ----------------------------------------------------


def test_knn_k1_reproduces_training_labels(desk_tables, tmp_path):
    feats, fdr = desk_tables
    model, pred = tmp_path / "knn.json", tmp_path / "pred.csv"
    assert main(["train", str(feats), str(fdr), "--model", "knn", "--k", "1", "-o", str(model)]) == 0
    assert main(["predict", str(model), str(feats), "-o", str(pred)]) == 0
    labels = {r["ff_name"]: float(r["fdr"]) for r in _read_csv(fdr)}
    rows = _read_csv(pred)
    assert list(rows[0]) == ["ff_name", "fdr_estimate", "outside_unit_interval"]
    # duplicated feature vectors average their labels, so compare per group
    X = {r["ff_name"]: tuple(v for k, v in r.items() if k != "ff_name") for r in _read_csv(feats)}
    groups = {}
    for n, x in X.items():
        groups.setdefault(x, []).append(labels[n])
    for r in rows:
        want = np.mean(groups[X[r["ff_name"]]])
        assert float(r["fdr_estimate"]) == pytest.approx(want, abs=1e-12)


def test_hyperparameter_file_and_flags(desk_tables, tmp_path):
    feats, fdr = desk_tables
    hp = tmp_path / "hp.json"
    hp.write_text(json.dumps({"svr": {"C": 2.0, "gamma": 0.1, "epsilon": 0.01}}))
    model = tmp_path / "svr.json"
    assert main(["train", str(feats), str(fdr), "--model", "svr", "--hp", str(hp),
                 "--epsilon", "0.05", "-o", str(model)]) == 0
    params = json.loads(model.read_text())["hyperparameters"]
    assert (params["C"], params["gamma"], params["epsilon"]) == (2.0, 0.1, 0.05)
    assert main(["train", str(feats), str(fdr), "--model", "svr", "--C", "-1",
                 "-o", str(model)]) in (2, 5)


def test_missing_feature_column(desk_tables, tmp_path, capsys):
    feats, fdr = desk_tables
    rows = list(csv.reader(open(feats)))
    drop = rows[0].index("comb_fan_in")
    cut = tmp_path / "cut.csv"
    with open(cut, "w", newline="") as fh:
        csv.writer(fh).writerows([r[:drop] + r[drop + 1:] for r in rows])
    assert main(["train", str(cut), str(fdr), "--model", "ols", "-o", str(tmp_path / "m.json")]) == 5
    assert "comb_fan_in" in capsys.readouterr().err


def test_model_version_mismatch(desk_tables, tmp_path, capsys):
    feats, fdr = desk_tables
    model = tmp_path / "ols.json"
    assert main(["train", str(feats), str(fdr), "--model", "ols", "-o", str(model)]) == 0
    doc = json.loads(model.read_text())
    doc["version"] = 99
    model.write_text(json.dumps(doc))
    assert main(["predict", str(model), str(feats), "-o", str(tmp_path / "p.csv")]) == 5
    assert "99" in capsys.readouterr().err


def test_holdout_matches_predict_output(desk_tables, tmp_path):
    feats, fdr = desk_tables
    model, pred, rep = tmp_path / "svr.json", tmp_path / "pred.csv", tmp_path / "rep.json"
    assert main(["train", str(feats), str(fdr), "--model", "svr", "-o", str(model)]) == 0
    assert main(["predict", str(model), str(feats), "-o", str(pred)]) == 0
    assert main(["evaluate", str(feats), str(fdr), "--holdout", str(model), "--report", str(rep),
                 "-o", str(tmp_path / "h.csv")]) == 0
    labels = {r["ff_name"]: float(r["fdr"]) for r in _read_csv(fdr)}
    est = {r["ff_name"]: float(r["fdr_estimate"]) for r in _read_csv(pred)}
    y = np.array([labels[n] for n in sorted(labels)])
    p = np.array([est[n] for n in sorted(labels)])
    got = json.loads(rep.read_text())["svr.json"]
    assert got["mae"] == pytest.approx(np.mean(np.abs(y - p)), abs=1e-12)
    assert got["max"] == pytest.approx(np.max(np.abs(y - p)), abs=1e-12)
    assert got["rmse"] == pytest.approx(np.sqrt(np.mean((y - p) ** 2)), abs=1e-12)
    assert [r["model"] for r in _read_csv(tmp_path / "h.csv")] == ["svr"]


def test_evaluate_table_and_plot(desk_tables, tmp_path):
    feats, fdr = desk_tables
    table, plot = tmp_path / "t1.csv", tmp_path / "folds.png"
    assert main(["evaluate", str(feats), str(fdr), "--folds", "5", "-o", str(table),
                 "--plot", str(plot)]) == 0
    assert [r["model"] for r in _read_csv(table)] == ["ols", "knn", "svr"]
    assert plot.stat().st_size > 0


def test_search_and_learning_curve(desk_tables, tmp_path, capsys):
    feats, fdr = desk_tables
    assert main(["search", str(feats), str(fdr), "--model", "knn", "--folds", "3",
                 "--random-samples", "4", "--grid-points", "3"]) == 0
    best = json.loads(capsys.readouterr().out)
    assert set(best) == {"knn"} and best["knn"]["k"] >= 1
    curve = tmp_path / "lc.csv"
    assert main(["learning-curve", str(feats), str(fdr), "--model", "ols", "--sizes", "0.2,0.5",
                 "--folds", "4", "-o", str(curve), "--plot", str(tmp_path / "lc.png")]) == 0
    assert [float(r["training_size"]) for r in _read_csv(curve)] == [0.2, 0.5]


# -- pipeline ----------------------------------------------------------------------


SMALL = """\
[netlist]
path = {net}
[sim]
stimulus = {stim}
[inject]
per_ff = 30
window = 5..200
seed = 1
[models]
kinds = ols, knn, svr
search = yes
[search]
random_samples = 3
grid_points = 2
folds = 3
[evalharness]
folds = 4
training_size = 0.5
seed = 1
learning_curve_sizes = 0.3, 0.5
[output]
directory = out
plots = yes
"""


def test_pipeline_small_config(bundle, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(SMALL.format(net=bundle / "desk_composite.json", stim=bundle / "desk_composite.csv"))
    assert main(["pipeline", str(ini)]) == 0
    out = tmp_path / "out"
    for name in ("features.csv", "fdr.csv", "predictions.csv", "report.json", "learning_curve.csv",
                 "table1.csv", "learning_curve.png", "fold_estimates.png", "fdr_histogram.png",
                 "models/ols.json", "models/knn.json", "models/svr.json"):
        assert (out / name).is_file(), name
    assert not (out / ".partial").exists()
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, report_schema())
    assert [r["model"] for r in report["table1"]] == ["ols", "knn", "svr"]
    pred = _read_csv(out / "predictions.csv")
    assert list(pred[0]) == ["ff_name", "fdr", "ols", "knn", "svr", "outside_unit_interval"]
    assert len(pred) == report["split"]["test_rows"]


def test_pipeline_failure_leaves_marker(tmp_path, write_json, capsys):
    doc = toy_document("shift3")
    doc["cells"].append({"name": "dup", "type": "BUF_X1", "pins": {"A": "d", "Y": "q0"}})
    net = write_json(doc)
    stim = _write_stimulus(tmp_path / "s.csv", TOY_STIMULI["shift3"], 8)
    ini = tmp_path / "bad.ini"
    ini.write_text(SMALL.format(net=net, stim=stim))
    assert main(["pipeline", str(ini)]) == 3
    marker = json.loads((tmp_path / "out" / ".partial").read_text())
    assert marker["stage"] == "parse"
    assert "stage 'parse'" in capsys.readouterr().err


def test_pipeline_missing_stimulus_names_path(bundle, tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text(SMALL.format(net=bundle / "desk_composite.json", stim=tmp_path / "gone.csv"))
    assert main(["pipeline", str(ini)]) == 2
    assert "gone.csv" in capsys.readouterr().err
    assert json.loads((tmp_path / "out" / ".partial").read_text())["stage"] == "config"


def test_bundle_command(tmp_path, capsys):
    assert main(["bundle", str(tmp_path)]) == 0
    listed = capsys.readouterr().out.split()
    assert str(tmp_path / "desk_composite.ini") in listed


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "fdrlab.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
