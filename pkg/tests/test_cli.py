import json

import numpy as np
import pytest

from ptfrobust.cli import EXIT_CHECK_FAILED, EXIT_OK, EXIT_VALIDATION, main, round_floats
from ptfrobust.learner import sample_size
from ptfrobust.neural import TwoLayerNet
from ptfrobust.poly import LabeledSet, PtfClassifier, QuadPoly


@pytest.fixture
def linear_model(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(PtfClassifier(QuadPoly.linear([1.0, 0.0], -0.5)).g.to_json())
    return str(p)


@pytest.fixture
def small_data(tmp_path):
    S = LabeledSet([[0.0, 0.0], [5.0, 0.0], [-3.0, 1.0]], [-1, 1, -1])
    p = tmp_path / "d.csv"
    S.save_csv(p)
    return str(p)


@pytest.fixture
def net_model(tmp_path):
    net = TwoLayerNet(W=np.eye(2), V=[[1.0, -1.0]])
    p = tmp_path / "net.json"
    p.write_text(json.dumps(net.to_dict()))
    return str(p)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_attack_cli_end_to_end(tmp_path, linear_model, small_data):
    out = tmp_path / "report.json"
    rc = main(["attack", "--model", linear_model, "--data", small_data,
               "--delta", "1.0", "--eta", "0.01", "--seed", "7", "--out", str(out)])
    assert rc == EXIT_OK
    report = read_json(out)
    assert report["schema"] == "attack-report/1"
    assert report["seed"] == 7
    assert report["summary"]["total"] == 3
    assert report["summary"]["found"] >= 1
    assert {r["verdict"] for r in report["results"]} <= {"found", "certified", "unknown"}


def test_certify_cli_all_certified(tmp_path, linear_model):
    S = LabeledSet([[5.0, 0.0], [-5.0, 0.0]], [1, -1])
    data = tmp_path / "d.csv"
    S.save_csv(data)
    out = tmp_path / "r.json"
    rc = main(["certify", "--model", linear_model, "--data", str(data),
               "--delta", "0.1", "--out", str(out)])
    assert rc == EXIT_OK
    report = read_json(out)
    assert report["summary"]["certified"] == 2


def test_attack_cli_byte_identical_reports_modulo_timings(tmp_path, linear_model, small_data):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        rc = main(["attack", "--model", linear_model, "--data", small_data,
                   "--delta", "0.7", "--seed", "11", "--out", str(out)])
        assert rc == EXIT_OK
        rep = read_json(out)
        rep.pop("timings")
        outs.append(json.dumps(rep, sort_keys=True))
    assert outs[0] == outs[1]


def test_malformed_csv_exits_2_without_report(tmp_path, linear_model):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    out = tmp_path / "r.json"
    rc = main(["attack", "--model", linear_model, "--data", str(bad),
               "--delta", "0.5", "--out", str(out)])
    assert rc == EXIT_VALIDATION
    assert not out.exists()


def test_invalid_flags_exit_2(tmp_path, linear_model, small_data):
    out = tmp_path / "r.json"
    rc = main(["attack", "--model", linear_model, "--data", small_data,
               "--delta", "-1.0", "--out", str(out)])
    assert rc == EXIT_VALIDATION
    rc2 = main(["attack", "--model", linear_model, "--data", small_data,
                "--delta", "0.5", "--eta", "2.0", "--out", str(out)])
    assert rc2 == EXIT_VALIDATION


def test_sample_size_cli(capsys):
    rc = main(["sample-size", "--degree", "2", "--n", "2",
               "--epsilon", "0.1", "--eta", "0.05"])
    assert rc == EXIT_OK
    printed = int(capsys.readouterr().out.strip())
    assert printed == sample_size(2, 2, 0.1, 0.05)


def test_learn_cli(tmp_path):
    rng = np.random.default_rng(0)
    X, y = [], []
    while len(X) < 30:
        x = rng.uniform(-2, 2, 2)
        v = x[0] - 0.3
        if abs(v) >= 0.4:
            X.append(x)
            y.append(1 if v >= 0 else -1)
    data = tmp_path / "train.csv"
    LabeledSet(np.array(X), np.array(y)).save_csv(data)
    model_out = tmp_path / "model.json"
    rc = main(["learn", "--data", str(data), "--degree", "1", "--delta", "0.1",
               "--epsilon", "0.1", "--eta", "0.05", "--seed", "3", "--out", str(model_out)])
    assert rc == EXIT_OK
    model = PtfClassifier.from_dict(read_json(model_out))
    assert model.degree == 1
    report = read_json(str(model_out) + ".report.json")
    assert report["status"] == "success"
    assert report["train_robust_error"] == 0.0
    transcript = (tmp_path / "model.json.transcript.jsonl").read_text().strip()
    assert all(json.loads(line) for line in transcript.splitlines())


def test_attack_net_cli(tmp_path, net_model):
    S = LabeledSet([[2.0, -2.0], [10.0, 0.0]], [1, 1])
    data = tmp_path / "pts.csv"
    S.save_csv(data)
    out = tmp_path / "net_report.json"
    rc = main(["attack-net", "--model", net_model, "--data", str(data),
               "--delta", "3.0", "--seed", "5", "--out", str(out)])
    assert rc == EXIT_OK
    report = read_json(out)
    assert report["schema"] == "attack-report/1"
    assert report["summary"]["found"] >= 1


def test_bench_cli_and_plot(tmp_path, net_model):
    S = LabeledSet([[2.0, -2.0], [4.0, 1.0], [0.5, 3.0]], [1, 1, 1])
    data = tmp_path / "pts.csv"
    S.save_csv(data)
    out = tmp_path / "bench.json"
    rc = main(["bench", "--model", net_model, "--data", str(data),
               "--delta", "3.0", "--seed", "5", "--out", str(out)])
    assert rc == EXIT_OK
    report = read_json(out)
    total = report["table"]["pgd_pass"]["total"] + report["table"]["pgd_fail"]["total"]
    assert total == 3
    svg = tmp_path / "bench.svg"
    assert main(["plot", "--in", str(out), "--out", str(svg)]) == EXIT_OK
    assert svg.read_text().lstrip().startswith("<?xml")


def test_gen_and_verify_gadget_cli(tmp_path):
    g = tmp_path / "gadget.json"
    # beta above the cube maximum of the sampled form: a YES-case instance
    rc = main(["gen-gadget", "--kind", "appendix", "--n", "2", "--m", "12",
               "--delta", "0.125", "--beta", "4.0", "--seed", "5", "--out", str(g)])
    assert rc == EXIT_OK
    assert read_json(g)["params"]["yes_case"]
    rep = tmp_path / "verify.json"
    rc2 = main(["verify-gadget", "--in", str(g), "--check", "all", "--out", str(rep)])
    assert rc2 == EXIT_OK
    report = read_json(rep)
    assert report["passed"]
    assert report["checks"]["counts"] and report["checks"]["rank"]


def test_verify_gadget_detects_tampering(tmp_path):
    g = tmp_path / "gadget.json"
    main(["gen-gadget", "--kind", "main", "--n", "2", "--s", "150",
          "--seed", "1", "--out", str(g)])
    doc = read_json(g)
    # tamper: drop a point from the embedded CSV
    lines = doc["dataset_csv"].strip().splitlines()
    doc["dataset_csv"] = "\n".join(lines[:-1]) + "\n"
    g.write_text(json.dumps(doc))
    rc = main(["verify-gadget", "--in", str(g), "--check", "counts"])
    assert rc == EXIT_CHECK_FAILED


def test_config_file_precedence(tmp_path, linear_model, small_data):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 0.25, "seed": 99}))
    out = tmp_path / "r.json"
    rc = main(["--config", str(cfg), "attack", "--model", linear_model,
               "--data", small_data, "--delta", "1.0", "--out", str(out)])
    assert rc == EXIT_OK
    report = read_json(out)
    assert report["config"]["delta"] == 1.0  # flag beats config file
    assert report["seed"] == 99  # config beats default


def test_round_floats_12_digits():
    assert round_floats({"x": 0.12345678901234567}) == {"x": 0.123456789012}
    assert round_floats([1.0, "s", None]) == [1.0, "s", None]


def test_jobs_env_default(tmp_path, linear_model, small_data, monkeypatch):
    monkeypatch.setenv("PTFROBUST_JOBS", "2")
    out = tmp_path / "env.json"
    rc = main(["attack", "--model", linear_model, "--data", small_data,
               "--delta", "0.5", "--out", str(out)])
    assert rc == EXIT_OK
    assert read_json(out)["config"]["jobs"] == 2
