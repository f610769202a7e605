import json

import numpy as np
import pytest

from matweight.graph import BalanceKind, structural_balance
from matweight.replicate import SCENARIOS, build_network, replicate


def test_networks_match_regimes():
    assert structural_balance(build_network(1, 0)).kind is BalanceKind.ALL_POSITIVE
    v = structural_balance(build_network(2, 0))
    assert v.kind is BalanceKind.BALANCED
    assert {frozenset({0, 2, 4, 6, 8}), frozenset({1, 3, 5, 7, 9})} == set(v.partition)
    assert structural_balance(build_network(3, 0)).kind is BalanceKind.ALL_NEGATIVE
    assert structural_balance(build_network(5, 0)).kind is BalanceKind.UNBALANCED
    g8 = build_network(8, 0)
    assert (g8.n, g8.d) == (5, 2)


def test_unknown_example():
    with pytest.raises(ValueError):
        replicate(9, 0, "/nonexistent")


@pytest.mark.parametrize("example", [1, 2, 3, 5, 6, 7, 8])
def test_replicate_verdicts(example, tmp_path):
    res = replicate(example, 1, tmp_path)
    assert res.matches, res.verdicts
    assert (tmp_path / "network.json").exists()
    if example == 2:
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["partition_matches_planted"] and rep["antisymmetry_residual"] < 1e-6
    if example == 6:
        a, b = (np.array(p["consensus_vector"]) for p in res.summary["paths"])
        assert np.abs(a - b).max() > 1e-6
        first = [(tmp_path / f"path{k}_trace.csv").read_text().splitlines()[2] for k in (1, 2)]
        assert first[0] == first[1]  # same initial state
    if example == 8:
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["spanning_tree_root"] == 1 and rep["all_pass"]


@pytest.mark.slow
def test_replicate_rgg(tmp_path):
    assert replicate(4, 1, tmp_path).matches


def test_every_scenario_has_a_title():
    assert sorted(SCENARIOS) == list(range(1, 9))
    assert all(s.title and s.expected for s in SCENARIOS.values())
