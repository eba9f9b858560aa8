import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bnp_dcgx import cli, io
from bnp_dcgx.errors import InvalidConfig, SamplerFailure
from bnp_dcgx.evaluate import scenario1_metrics
from bnp_dcgx.model import ClusterParams, Hyperparams, Sample, Trace, validate_dataset
from bnp_dcgx.simulate import GroundTruth, gen_scenario1
from bnp_dcgx.stability import is_stable

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=25)
@given(arrays(float, st.tuples(st.integers(2, 6), st.integers(2, 4)), elements=floats))
def test_csv_roundtrip_exact(tmp_path_factory, Y):
    d = tmp_path_factory.mktemp("csv")
    data = validate_dataset(Y, Y[:, :1])
    e, c = io.write_dataset(d, data)
    back = io.read_dataset(e, c)
    assert np.array_equal(back.Y, data.Y) and np.array_equal(back.X, data.X)
    assert back.gene_names == ("g1", "g2", "g3", "g4")[: Y.shape[1]]


def test_bad_csv(tmp_path):
    (tmp_path / "e.csv").write_text("a,b\n1,x\n")
    (tmp_path / "c.csv").write_text("x1\n0\n")
    with pytest.raises(InvalidConfig):
        io.read_dataset(tmp_path / "e.csv", tmp_path / "c.csv")


def test_trace_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    cl = ClusterParams(B=np.array([[0, 0.3], [0.1, 0]]), M=rng.standard_normal(2), sigma=np.ones(2),
                       gamma=np.array([[0, 1], [0, 0]], dtype=np.int8), eta=0.2, phi=0.4)
    tr = Trace([Sample(i, np.array([0, 0, 0]), [cl], loglik=-1.5 * i) for i in range(3)])
    io.write_trace(tmp_path / "t.jsonl", tr)
    text = (tmp_path / "t.jsonl").read_text()
    assert all(json.loads(line) for line in text.splitlines())
    (tmp_path / "t.jsonl").write_text(text + "\n\n")
    back = io.read_trace(tmp_path / "t.jsonl")
    assert len(back) == 3 and back.samples[2].loglik == -3.0
    assert np.array_equal(back.samples[0].clusters[0].B, cl.B)
    assert np.array_equal(back.samples[0].clusters[0].M, cl.M)


def test_parse_grid():
    g = io.parse_grid("x1=0:1:0.1 at x2=0.5", 2)
    assert g.shape == (11, 2) and np.allclose(g[:, 1], 0.5) and np.isclose(g[-1, 0], 1.0)
    g = io.parse_grid("x1=0.05:0.95:0.05 at x2=0.25,0.5,0.75; x2=0:0.5:0.25 at x1=0.1", 2)
    assert g.shape == (19 * 3 + 3, 2)
    for bad in ("x1=0:1 at x2=0.5", "x3=0:1:0.1 at x2=0.5", "x1=0:1:0.1", "x1=1:0:0.1 at x2=0"):
        with pytest.raises(InvalidConfig):
            io.parse_grid(bad, 2)
    assert np.array_equal(io.parse_point("0.5,0.25", 2), [0.5, 0.25])
    with pytest.raises(InvalidConfig):
        io.parse_point("0.5", 2)


def test_dot_export():
    names = ["a", "b", "c"]
    empty = io.to_dot(np.full((3, 3), 0.2), names, 0.5)
    assert empty.count("->") == 0 and all(f'"{n}";' in empty for n in names)
    prob = np.array([[0, 1.0, 0.3], [0.7, 0, 0], [0, 0.55, 0]])
    text = io.to_dot(prob, names, 0.5)
    assert '"b" -> "a" [penwidth=5,' in text  # probability 1 gets the maximum width
    edges = io.parse_dot(text)
    assert set(edges) == {("b", "a"), ("a", "b"), ("b", "c")}
    assert edges[("b", "a")] == 1.0 and edges[("b", "c")] == 0.55


def run(args):
    return cli.main([str(a) for a in args])


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps({"n_iter": 14, "n_burn": 4, "temperatures": [1.0, 2.0],
                               "swap_interval": 5}))
    assert run(["simulate", "--scenario", 1, "--n", 12, "--seed", 3, "--out", d / "data"]) == 0
    common = ["--expr", d / "data/expr.csv", "--coords", d / "data/coords.csv"]
    assert run(["fit", "--config", cfg, *common, "--seed", 3, "--out", d / "fit"]) == 0
    return d, common, cfg


def test_simulate_defaults_and_determinism(tmp_path):
    assert run(["simulate", "--scenario", 1, "--seed", 1, "--out", tmp_path / "a"]) == 0
    assert run(["simulate", "--scenario", 1, "--seed", 1, "--out", tmp_path / "b"]) == 0
    assert len((tmp_path / "a/expr.csv").read_text().splitlines()) == 751
    for f in ("expr.csv", "coords.csv", "truth.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert run(["simulate", "--scenario", 2, "--seed", 1, "--out", tmp_path / "c"]) == 0
    assert len((tmp_path / "c/coords.csv").read_text().splitlines()) == 801


def test_fit_outputs(fitted):
    d, common, cfg = fitted
    lines = (d / "fit/trace.jsonl").read_text().splitlines()
    assert len(lines) == 10
    for s in io.read_trace(d / "fit/trace.jsonl").samples:
        assert all(is_stable(c.B) for c in s.clusters)
    meta = io.read_json(d / "fit/meta.json")
    assert meta["swap_acceptance"] and meta["config"]["hyperparams"]["n_iter"] == 14
    assert run(["fit", "--config", cfg, *common, "--seed", 3, "--out", d / "fit2"]) == 0
    for f in ("trace.jsonl", "meta.json"):
        assert (d / "fit" / f).read_bytes() == (d / "fit2" / f).read_bytes()


def test_predict_and_export(fitted):
    d, common, _ = fitted
    args = ["predict", "--trace", d / "fit", *common, "--grid", "x1=0:1:0.1 at x2=0.5"]
    assert run([*args, "--out", d / "p1"]) == 0
    assert run([*args, "--out", d / "p2"]) == 0
    doc = io.read_json(d / "p1/predictions.json")
    assert len(doc["predictions"]) == 11 and all(r["all_stable"] for r in doc["predictions"])
    assert (d / "p1/predictions.json").read_bytes() == (d / "p2/predictions.json").read_bytes()
    assert run(["export-graph", "--predictions", d / "p1/predictions.json", "--out", d / "g"]) == 0
    assert len(list((d / "g").glob("point_*.dot"))) == 11 and (d / "g/union.dot").exists()
    assert run(["export-graph", "--trace", d / "fit", *common, "--units", 0, 3, "--out", d / "u"]) == 0
    assert sorted(f.name for f in (d / "u").iterdir()) == ["union.dot", "unit_0000.dot", "unit_0003.dot"]


def test_evaluate_matches_in_memory(fitted):
    d, common, _ = fitted
    assert run(["evaluate", "--trace", d / "fit", "--truth", d / "data/truth.json", *common,
                "--out", d / "m"]) == 0
    got = io.read_json(d / "m/metrics.json")
    truth = GroundTruth.from_json(io.read_json(d / "data/truth.json"))
    data = io.read_dataset(d / "data/expr.csv", d / "data/coords.csv")
    ref = scenario1_metrics(io.read_trace(d / "fit/trace.jsonl"), data, truth.true_xi,
                            truth.edge_matrices())
    assert got["clusters"] == ref["clusters"] and set(got["clusters"]) == {"0", "1", "2"}
    assert got["clustering_accuracy"] == ref["clustering_accuracy"]
    assert "square-root" in got["mcc_definition"]


def test_evaluate_truth_replay(tmp_path):
    data, truth = gen_scenario1(n_per_cluster=5, seed=0)
    io.write_dataset(tmp_path, data)
    io.write_json(tmp_path / "truth.json", truth.to_json())
    cls = [ClusterParams(B=B, M=M, sigma=s, gamma=(B != 0).astype(np.int8), eta=1.0, phi=0.5)
           for B, M, s in zip(truth.true_B, truth.true_M, truth.true_sigma)]
    # the truth has radius < 1 by construction of the skeletons
    io.write_trace(tmp_path / "trace.jsonl", Trace([Sample(1, truth.true_xi, cls)]))
    assert run(["evaluate", "--trace", tmp_path / "trace.jsonl", "--truth", tmp_path / "truth.json",
                "--expr", tmp_path / "expr.csv", "--coords", tmp_path / "coords.csv",
                "--out", tmp_path]) == 0
    m = io.read_json(tmp_path / "metrics.json")
    for v in m["clusters"].values():
        assert v == {"tpr": 1.0, "fdr": 0.0, "mcc": 1.0}


def test_exit_codes(tmp_path, fitted, monkeypatch):
    d, common, _ = fitted
    (tmp_path / "bad.json").write_text('{"alpha": -1}')
    assert run(["fit", "--config", tmp_path / "bad.json", *common]) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert run(["fit", "--config", tmp_path / "junk.json", *common]) == 2
    assert run(["fit", "--expr", tmp_path / "missing.csv", "--coords", tmp_path / "m.csv"]) == 3
    assert run(["predict", "--trace", d / "fit", *common]) == 2

    def boom(*a, **k):
        raise SamplerFailure("forced")
    monkeypatch.setattr(cli, "run_tempered", boom)
    assert run(["fit", *common, "--out", tmp_path / "x"]) == 4


def test_flags_reach_hyperparams(fitted, tmp_path):
    d, common, cfg = fitted
    assert run(["fit", "--config", cfg, *common, "--strict-paper-det", "--include-x-in-swap",
                "--n-iter", 6, "--n-burn", 2, "--out", tmp_path]) == 0
    hp = Hyperparams.from_dict(io.read_json(tmp_path / "meta.json")["hyperparams"])
    assert hp.strict_paper_det and hp.include_x_in_swap and hp.n_iter == 6
