import json
import subprocess
import sys

import numpy as np
import pytest

from cgoutlier.cgr import fit_model
from cgoutlier.deviance import score_observation
from cgoutlier.errors import MissingValue, ParseError, UnknownVertex, UnseenLevel
from cgoutlier.io import (
    SCHEMA_VERSION,
    graph_to_dict,
    load_dataset,
    load_graph,
    load_model,
    load_observations,
    load_report,
    load_schema,
    save_model,
    schema_from_graph,
    schema_to_dict,
    write_dataset,
    write_json,
)
from cgoutlier.cli import run_cli
from cgoutlier.synthetic import example_graph, sample_example


@pytest.fixture()
def workdir(tmp_path):
    g = example_graph()
    data = sample_example(200, np.random.default_rng(21))
    write_json(graph_to_dict(g), tmp_path / "graph.json")
    write_json(schema_to_dict(data.columns), tmp_path / "schema.json")
    write_dataset(data, tmp_path / "data.csv")
    return tmp_path


def run(workdir, *argv):
    return run_cli([str(a) for a in argv])


# ---------------------------------------------------------------------------
# file formats


def test_graph_roundtrip(workdir):
    g = load_graph(workdir / "graph.json")
    assert g == example_graph()


def test_graph_errors_name_the_file(tmp_path):
    bad = tmp_path / "g.json"
    bad.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "graph", "vertices": [{"label": "a", "kind": "discrete"}], "edges": [["a", "q"]]}))
    with pytest.raises(UnknownVertex, match=r"g\.json.*'q'"):
        load_graph(bad)
    bad.write_text("{not json")
    with pytest.raises(ParseError, match=r"g\.json"):
        load_graph(bad)
    bad.write_text(json.dumps({"schema_version": 99, "kind": "graph", "vertices": []}))
    with pytest.raises(ParseError, match="schema_version"):
        load_graph(bad)


def test_dataset_roundtrip(workdir):
    cols = load_schema(workdir / "schema.json")
    data = load_dataset(workdir / "data.csv", cols)
    write_dataset(data, workdir / "again.csv")
    again = load_dataset(workdir / "again.csv", cols)
    assert np.array_equal(data.discrete, again.discrete)
    assert np.array_equal(data.continuous, again.continuous)


def test_dataset_errors_name_file_line_and_column(workdir):
    cols = schema_from_graph(example_graph())
    path = workdir / "bad.csv"
    path.write_text("a,b,c,d,e,f\n1.0,0,1,2.0,3.0,1\n1.0,0,,2.0,3.0,1\n")
    with pytest.raises(MissingValue, match=r"bad\.csv:3.*'c'"):
        load_dataset(path, cols)
    path.write_text("a,b,c,d,e,f\nx,0,1,2.0,3.0,1\n")
    with pytest.raises(ParseError, match=r"bad\.csv:2.*'a'"):
        load_dataset(path, cols)
    path.write_text("a,b,c,d,e\n1,0,1,2,3\n")
    with pytest.raises(ParseError, match=r"bad\.csv.*'f'"):
        load_dataset(path, cols)


def test_observations_with_unseen_level(workdir):
    cols = load_schema(workdir / "schema.json")
    data = load_dataset(workdir / "data.csv", cols)
    path = workdir / "obs.csv"
    path.write_text("a,b,c,d,e,f\n1.0,7,1,2.0,3.0,1\n")
    with pytest.raises(UnseenLevel, match=r"obs\.csv:2.*'b'"):
        load_observations(path, data)


def test_model_persistence_roundtrip(workdir):
    g = example_graph()
    cols = load_schema(workdir / "schema.json")
    data = load_dataset(workdir / "data.csv", cols)
    for mode in ("inhomogeneous", "homogeneous"):
        base = data.drop(0)
        model = fit_model(g, base, mode)
        save_model(model, cols, workdir / "m.json")
        loaded, cols2 = load_model(workdir / "m.json")
        assert cols2 == tuple(cols)
        for k in range(10):
            z = data.row(k)
            a = score_observation(model, base, z)
            b = score_observation(loaded, base, z)
            assert abs(a.total - b.total) <= 1e-12 * max(1.0, abs(a.total))
            for ta, tb in zip(a.continuous_terms, b.continuous_terms):
                if ta.q is not None:
                    assert abs(ta.q.value - tb.q.value) <= 1e-12


# ---------------------------------------------------------------------------
# CLI


def test_check_graph_exit_codes(workdir, capsys):
    assert run(workdir, "check-graph", "--graph", workdir / "graph.json") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["results"][0]["numbering"] == ["b", "c", "f", "d", "e", "a"]
    cyc = workdir / "cyc.json"
    write_json({"kind": "graph", "vertices": [{"label": v, "kind": "continuous"} for v in "wxyz"], "edges": [["w", "x"], ["x", "y"], ["y", "z"], ["z", "w"]]}, cyc)
    assert run(workdir, "check-graph", "--graph", cyc) == 0
    res = json.loads(capsys.readouterr().out)["results"][0]
    assert res["decomposable"] is False and res["witness"]["kind"] == "chordless_cycle"


def test_usage_and_analysis_errors(workdir, capsys):
    assert run(workdir, "test", "--graph", workdir / "graph.json") == 2
    assert run(workdir, "test", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--obs", 9999) == 2
    assert run(workdir, "test", "--graph", workdir / "nope.json", "--data", workdir / "data.csv", "--obs", 1) == 1
    err = capsys.readouterr().err
    assert "nope.json" in err
    assert run(workdir, "fit", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--nsim", 0) == 2
    assert run(workdir, "bogus") == 2


def test_report_echoes_configuration_and_is_reproducible(workdir):
    args = ["test", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--obs", 4, "--nsim", 800, "--seed", 7]
    assert run(workdir, *args, "--out", workdir / "r1.json", "--threads", 1) == 0
    assert run(workdir, *args, "--out", workdir / "r2.json", "--threads", 3) == 0
    assert (workdir / "r1.json").read_bytes() == (workdir / "r2.json").read_bytes()
    report = load_report(workdir / "r1.json")
    assert report.config["seed"] == 7 and report.config["nsim"] == 800 and report.config["obs"] == "4"
    assert report.config["mode"] == "inhomogeneous" and report.config["df_convention"] == "residual"
    assert report.timing is None
    assert run(workdir, *args, "--out", workdir / "r3.json", "--timing") == 0
    assert load_report(workdir / "r3.json").timing["seconds"] >= 0


def test_fit_then_test_with_model_matches_direct(workdir):
    data = load_dataset(workdir / "data.csv", load_schema(workdir / "schema.json"))
    base = data.drop(0)
    write_dataset(base, workdir / "base.csv")
    write_dataset(data.take([0]), workdir / "z.csv")
    common = ["--nsim", 600, "--seed", 2]
    assert run(workdir, "fit", "--graph", workdir / "graph.json", "--data", workdir / "base.csv", "--schema", workdir / "schema.json", "--out", workdir / "m.json") == 0
    assert run(workdir, "test", "--model", workdir / "m.json", "--obs", workdir / "z.csv", *common, "--out", workdir / "a.json") == 0
    assert run(workdir, "test", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--schema", workdir / "schema.json", "--obs", 0, *common, "--out", workdir / "b.json") == 0
    a = load_report(workdir / "a.json").results[0]
    b = load_report(workdir / "b.json").results[0]
    assert a["deviance"] == pytest.approx(b["deviance"], rel=1e-12)
    assert a["cdf"] == b["cdf"]


def test_batch_score_leave_one_in(workdir):
    assert run(workdir, "batch-score", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--nsim", 300, "--out", workdir / "b.json") == 0
    rep = load_report(workdir / "b.json")
    assert len(rep.results) == 200
    summary = rep.extra["summary"]
    assert summary["n"] == 200 and summary["n_outliers"] == sum(r["outlier"] for r in rep.results)
    # leave-one-in: every row sees the same augmented counts
    assert summary["distinct_null_samples"] == 1


def test_batch_score_new_points_and_shared_null(workdir):
    data = load_dataset(workdir / "data.csv", load_schema(workdir / "schema.json"))
    write_dataset(sample_example(20, np.random.default_rng(5)), workdir / "new.csv")
    base = ["batch-score", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--obs", workdir / "new.csv", "--nsim", 300]
    assert run(workdir, *base, "--out", workdir / "exact.json") == 0
    assert run(workdir, *base, "--approx-shared-null", "--out", workdir / "approx.json") == 0
    exact = load_report(workdir / "exact.json")
    approx = load_report(workdir / "approx.json")
    assert 1 < exact.extra["summary"]["distinct_null_samples"] <= 8
    assert approx.extra["summary"]["distinct_null_samples"] == 1
    assert [r["deviance"] for r in exact.results] == [r["deviance"] for r in approx.results]
    assert data.n_rows == 200


def test_simulate_null_and_diagnose(workdir, capsys):
    assert run(workdir, "simulate-null", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--nsim", 500, "--out", workdir / "n.json") == 0
    rep = load_report(workdir / "n.json")
    assert len(rep.results[0]["deviances"]) == 500
    assert rep.extra["null"]["n_sim"] == 500
    assert run(workdir, "diagnose", "--graph", workdir / "graph.json", "--data", workdir / "data.csv", "--out", workdir / "d.json") == 0
    diag = load_report(workdir / "d.json").results
    e = next(r for r in diag if r["target"] == "e")
    assert e["continuous_parents"] == ["d"] and all(0 <= c["r_squared"] <= 1 for c in e["cells"])
    assert "R2=" in capsys.readouterr().err


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "cgoutlier", "check-graph", "--graph", str(workdir / "graph.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "check-graph"
