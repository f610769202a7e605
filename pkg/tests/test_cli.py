import json

import pytest

from matweight import cli
from matweight.dynamics import StopReason


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def net(tmp_path):
    p = tmp_path / "net.json"
    assert run("gen", "ring", "--n", 10, "--k", 4, "--d", 3, "--policy", "pd", "--seed", 1, "--out", p) == 0
    return p


def test_gen_prints_range(tmp_path, capsys):
    p = tmp_path / "b.json"
    assert run("gen", "ring", "--policy", "balanced", "--v1", "1,3,5,7,9", "--seed", 2, "--out", p) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["default_tau"] == 0.5 * out["tau_upper"]
    assert json.loads(p.read_text())["metadata"]["policy"]["v1"] == [1, 3, 5, 7, 9]


def test_gen_failures(tmp_path):
    assert run("gen", "ring", "--n", 10, "--k", 3, "--out", tmp_path / "x.json") == cli.EXIT_GEN
    assert run("gen", "rgg", "--n", 2, "--radius", 0, "--out", tmp_path / "x.json") == cli.EXIT_GEN
    assert run("gen", "ring", "--policy", "balanced", "--out", tmp_path / "x.json") == cli.EXIT_GEN


def test_gen_rgg_and_file(tmp_path, net):
    assert run("gen", "rgg", "--n", 30, "--radius", 0.5, "--seed", 3, "--out", tmp_path / "r.json") == 0
    copy = tmp_path / "copy.json"
    assert run("gen", "file", "--in", net, "--keep-weights", "--out", copy) == 0
    assert copy.read_bytes() == net.read_bytes()
    flipped = tmp_path / "f.json"
    assert run("gen", "file", "--in", net, "--policy", "pattern", "--flip", "1-2", "--out", flipped) == 0


def test_sim_analyze_global(tmp_path, net):
    t, r = tmp_path / "t.csv", tmp_path / "r.json"
    assert run("sim", "--net", net, "--seed", 4, "--track-products", "--out", t) == 0
    assert run("analyze", "--trace", t, "--net", net, "--out", r) == 0
    doc = json.loads(r.read_text())
    assert doc["verdict"]["kind"] == "Global"
    assert [c["check"] for c in doc["checks"]] == ["p_product_rank_one", "q_product_zero", "f_product_spectrum"]
    assert doc["all_pass"] is True


def test_sim_byte_identical(tmp_path, net):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("sim", "--net", net, "--seed", 5, "--out", a)
    run("sim", "--net", net, "--seed", 5, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_sim_seed_from_environment(tmp_path, net, monkeypatch):
    monkeypatch.setenv("MATWEIGHT_SEED", "77")
    p = tmp_path / "t.csv"
    run("sim", "--net", net, "--steps", 10, "--out", p)
    assert json.loads(p.read_text().splitlines()[0][2:])["seed"] == 77


def test_sim_tau_range_and_override(tmp_path, net):
    assert run("sim", "--net", net, "--tau-factor", 2.0, "--out", tmp_path / "x.csv") == cli.EXIT_TAU
    assert not (tmp_path / "x.csv").exists()
    p = tmp_path / "d.csv"
    assert run("sim", "--net", net, "--tau-factor", 6.0, "--override-tau", "--steps", 10000, "--out", p) == 0
    assert json.loads(p.read_text().splitlines()[0][2:])["stop_reason"] == "diverged"


def test_sim_diverged_without_override(tmp_path, net, monkeypatch):
    real = cli.simulate

    def blow_up(*a, **kw):
        tr = real(*a, **kw)
        object.__setattr__(tr, "stop_reason", StopReason.DIVERGED)
        return tr

    monkeypatch.setattr(cli, "simulate", blow_up)
    assert run("sim", "--net", net, "--steps", 20, "--out", tmp_path / "t.csv") == cli.EXIT_DIVERGED


def test_analyze_digest_mismatch(tmp_path, net):
    other = tmp_path / "o.json"
    run("gen", "ring", "--seed", 99, "--out", other)
    t = tmp_path / "t.csv"
    run("sim", "--net", net, "--steps", 100, "--out", t)
    assert run("analyze", "--trace", t, "--net", other, "--out", tmp_path / "r.json") == cli.EXIT_DIGEST


def test_analyze_zero_verdicts(tmp_path):
    nd = tmp_path / "nd.json"
    run("gen", "ring", "--policy", "nd", "--seed", 3, "--out", nd)
    unb = tmp_path / "unb.json"
    run("gen", "ring", "--policy", "pattern", "--v1", "1,3,5,7,9", "--flip", "1-3,6-8", "--seed", 3, "--out", unb)
    for net in (nd, unb):
        t, r = tmp_path / "t.csv", tmp_path / "r.json"
        run("sim", "--net", net, "--seed", 1, "--out", t)
        run("analyze", "--trace", t, "--net", net, "--out", r)
        assert json.loads(r.read_text())["verdict"]["kind"] == "Zero"


def test_verify(tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", "product-graph", "--trials", 20, "--seed", 1, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["all_pass"] and doc["suites"][0]["passed"] == 20


def test_verify_failure_exit(tmp_path, monkeypatch):
    from matweight.suites import SuiteResult

    def failing(name, seed, trials):
        return [SuiteResult("spectra", seed, 1, 0, failures=[{"trial": 0}])]

    monkeypatch.setattr(cli, "run_suites", failing)
    out = tmp_path / "v.json"
    assert run("verify", "spectra", "--out", out) == cli.EXIT_VERIFY
    assert json.loads(out.read_text())["suites"][0]["failures"] == [{"trial": 0}]


def test_replicate(tmp_path):
    out = tmp_path / "ex2"
    assert run("replicate", 2, "--seed", 3, "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdicts"] == ["Bipartite"] and summary["matches_expected"]
    assert (out / "dim3.csv").exists()
