import csv
import json

import pytest
import yaml
from click.testing import CliRunner
from fractions import Fraction
from gmpy2 import mpq

from lbmfd.cli import (
    EXIT_ERROR, EXIT_FINDING, EXIT_OK, apply_overrides, cli, extra_params, parse_value, spec_from_dict,
    spec_to_dict,
)
from lbmfd.scheme import builtin, d1q2

EXPERIMENTS = __import__("pathlib").Path(__file__).resolve().parents[1] / "experiments"


def run(*args):
    res = CliRunner().invoke(cli, list(args), obj={})
    return res.exit_code, res.output


def test_parse_value():
    assert parse_value("3/2") == Fraction(3, 2)
    assert parse_value("0.66") == Fraction(33, 50)
    assert parse_value("1,2") == [1, 2]
    assert parse_value("[w3,w5]") == ["w3", "w5"]
    assert parse_value("true") is True
    assert parse_value("d1q2") == "d1q2"


def test_extra_params_and_overrides():
    assert extra_params(["--s2", "3/2", "--magic", "--eps2=1/2"]) == {"s2": Fraction(3, 2), "magic": True,
                                                                      "eps2": Fraction(1, 2)}
    cfg = apply_overrides({"scheme": {"s2": 1}}, ("scheme.s2=3/2", "n=4"))
    assert cfg == {"scheme": {"s2": Fraction(3, 2)}, "n": 4}


@pytest.mark.parametrize("spec", [
    d1q2(mpq(3, 2), mpq(1, 3)),
    builtin("d2q9", s=mpq(3, 2), eps=[1] + [mpq(k, 17) for k in range(2, 10)]),
    builtin("d1q3_link", s=mpq(32, 17), eps=[1, 2, 1], scaling="diffusive", mu=1),
], ids=["d1q2", "d2q9", "diffusive"])
def test_spec_round_trip(spec, tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump(spec_to_dict(spec)))
    assert spec_from_dict(yaml.safe_load(p.read_text())) == spec


def test_save_scheme_round_trip(tmp_path):
    p = tmp_path / "scheme.yaml"
    code, out = run("reduce", "--scheme", "d1q3", "--magic", "--s2", "3/2", "--eps2", "1/2", "--eps3", "1/10",
                    "--save-scheme", str(p))
    assert code == EXIT_OK
    code2, out2 = run("reduce", "--scheme-file", str(p))
    assert code2 == EXIT_OK
    assert json.loads(out)["charpoly"] == json.loads(out2)["charpoly"]


def test_reduce_symbolic_eps():
    code, out = run("reduce", "--scheme", "d1q2", "--s2", "3/2")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["bulk"]["amplification"]["z^1"] == {"-1": "(3*eps2 - 1)/4", "1": "(-3*eps2 - 1)/4"}
    assert rep["bulk"]["amplification"]["z^0"] == {"0": "-1/2"}


def test_reduce_with_init(tmp_path):
    out = tmp_path / "r.json"
    code, _ = run("reduce", "--scheme", "d1q2", "--s2", "3/2", "--eps2", "1/3", "--init", "LW", "-o", str(out))
    rep = json.loads(out.read_text())
    assert code == EXIT_OK and set(rep["starting"]) == {"0", "1"}


def test_observe():
    code, out = run("observe", "--scheme", "d1q3", "--magic", "--s2", "3/2", "--eps2", "1/2", "--eps3", "1/10")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["o"] == 2 and rep["det_Omega"] == {} and rep["brewer_observable"] is False


def test_modeq_labels():
    code, out = run("modeq", "--scheme", "d1q2", "--s2", "3/2", "--eps2", "1/3", "--init", "FC-bad", "--n", "3")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert [r["label"] for r in rep["starting"]] == ["initialisation", "starting", "starting"]
    assert rep["consistency"]["drift_x1"]["ok"] is False


def test_match_feasible_and_infeasible():
    code, out = run("match", "--scheme", "d1q3_link", "--s", "3/2", "--eps", "1,1/2,1/10", "--free", "w3")
    assert code == EXIT_OK and json.loads(out)["branches"][0]["values"] == {"w3": "3/10"}
    code, out = run("match", "--scheme", "d2q5", "--s", "3/2", "--eps", "1,1/3,1/5,1/7,1/11", "--free", "w3,w5")
    assert code == EXIT_FINDING and json.loads(out)["feasible"] is False


def test_match_config_runs():
    code, out = run("match", "-c", str(EXPERIMENTS / "table_d1q3_choices.yaml"))
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["c"]["branches"][0]["values"] == {"s3": "1/2", "w3": "-17/10"}


def test_stability_exit_codes():
    assert run("stability", "--scheme", "d1q2", "--s2", "3/2", "--eps2", "9/10")[0] == EXIT_OK
    code, out = run("stability", "--scheme", "d1q2", "--s2", "2", "--eps2", "1")
    assert code == EXIT_FINDING and json.loads(out)["schur_cohn_stable"] is False


def test_stability_grid_csv(tmp_path):
    cfg = tmp_path / "g.yaml"
    cfg.write_text(yaml.safe_dump({"scheme": {"name": "d1q2", "eps2": 0.5},
                                   "grid": {"s2": [0.5, 2.0, 4]}, "nfreq": 65}))
    out = tmp_path / "g.csv"
    code, _ = run("--seed", "1", "stability", "-c", str(cfg), "-o", str(out))
    rows = list(csv.reader(out.open()))
    assert code == EXIT_OK
    assert rows[0] == ["s2", "stable", "max_modulus", "worst_xi"] and len(rows) == 5
    assert float(rows[1][2]) <= 1 + 1e-10


def test_errors_exit_one(tmp_path):
    assert run("reduce", "--scheme", "d9q99")[0] == EXIT_ERROR
    assert run("reduce")[0] == EXIT_ERROR
    assert run("match", "--scheme", "d1q2", "--s2", "3/2", "--eps2", "0")[0] == EXIT_ERROR
    assert run("match", "--scheme", "d1q2", "--s2", "3/2", "--eps2", "0", "--free", "q7")[0] == EXIT_ERROR
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just a list\n")
    assert run("reduce", "-c", str(bad))[0] == EXIT_ERROR
    assert run("smoothness", "-c", str(bad))[0] == EXIT_ERROR


def test_smoothness_experiment(tmp_path):
    code, out = run("smoothness", "-c", str(EXPERIMENTS / "fig_d1q2_smoothness_s2.yaml"), "-o", str(tmp_path))
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["LF"]["alternation_rate"] > 0.6
    assert sorted(p.name for p in tmp_path.iterdir()) == ["FC-good.csv", "LF.csv", "LW.csv", "RE1.csv"]


def test_unobservable_experiment_override(tmp_path):
    code, out = run("unobservable", "-c", str(EXPERIMENTS / "fig_d1q2_unobservable.yaml"), "--set", "steps=5")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["a"]["in_kernel"] and rep["a"]["max_l2_m1"] == 0
