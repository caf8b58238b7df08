import json
import math

import numpy as np
import pytest

from twisted_fock.cli import ConfigError, RunConfig, apply_settings, main, parse_points, read_config_file, select_checks
from twisted_fock.suite import ANCHORS, CHECKS, check_names

FAST = "hermite,kernel,weyl.group_law,geller.gamma_ratio"


def _report(out_dir, stem):
    (path,) = sorted(out_dir.glob(f"{stem}-*.json"))
    return json.loads(path.read_text()), path.with_suffix(".csv")


class TestRegistry:
    def test_at_least_thirty_checks(self):
        assert len(check_names()) >= 30

    def test_every_anchor_registered(self):
        assert {c.anchor for c in CHECKS} <= set(ANCHORS)

    def test_names_unique(self):
        names = [c.name for c in CHECKS]
        assert len(names) == len(set(names))

    def test_select_by_prefix(self):
        sel = select_checks(("hermite",))
        assert sel and all(s.startswith("hermite.") for s in sel)
        assert select_checks(("U.fourth_power",)) == ["U.fourth_power"]
        assert select_checks(("herm",)) == []


class TestConfig:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_lambda_zero_rejected(self):
        with pytest.raises(ConfigError, match="lambda != 0"):
            apply_settings(RunConfig(), {"lambda": "0"}).validate()

    def test_aliases_and_tolerances(self):
        cfg = apply_settings(RunConfig(), {"lambda": "-0.5", "k-list": "4,6,9", "tol.U.fourth_power": "1e-9"}).validate()
        assert cfg.lam == -0.5 and cfg.K_list == (4, 6, 9)
        assert cfg.tolerances == {"U.fourth_power": 1e-9}

    @pytest.mark.parametrize(
        "items",
        [{"K_list": "8,8"}, {"tol.no.such": "1"}, {"tol.U.fourth_power": "-1"}, {"preset": "x"}, {"colour": "red"}, {"n": "two"}],
    )
    def test_invalid(self, items):
        with pytest.raises(ConfigError):
            apply_settings(RunConfig(), items).validate()

    def test_config_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# comment\nlambda = -1.0\nK_list=8,12\n\ntol.hermite.commutator=1e-11\n")
        assert read_config_file(p) == {"lambda": "-1.0", "K_list": "8,12", "tol.hermite.commutator": "1e-11"}
        p.write_text("lambda -1\n")
        with pytest.raises(ConfigError):
            read_config_file(p)

    def test_parse_points(self):
        pts = parse_points("0.1,0.2;0.3+0.1j,-1", 1)
        np.testing.assert_array_equal(pts, [[0.1, 0.2], [0.3 + 0.1j, -1]])
        with pytest.raises(ConfigError):
            parse_points("0.1,0.2,0.3", 1)
        with pytest.raises(ConfigError):
            parse_points("a,b", 1)


class TestExitCodes:
    def test_lambda_zero(self, tmp_path, capsys):
        assert main(["verify", "--lambda", "0", "--out", str(tmp_path)]) == 2
        assert "lambda != 0" in capsys.readouterr().err

    def test_lambda_zero_from_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("lambda=0\n")
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "lambda != 0" in capsys.readouterr().err

    def test_unknown_selector(self, tmp_path, capsys):
        assert main(["verify", "--only", "nothing", "--out", str(tmp_path)]) == 2
        assert "no checks match" in capsys.readouterr().err

    def test_unknown_tolerance(self, tmp_path, capsys):
        assert main(["verify", "--tol.bogus", "1e-3", "--out", str(tmp_path)]) == 2

    def test_bad_subcommand(self):
        assert main(["frobnicate"]) == 2

    def test_failing_check(self, tmp_path, capsys):
        assert main(["verify", "--only", "hermite.commutator", "--tol.hermite.commutator", "1e-30", "--out", str(tmp_path)]) == 1
        rep, _ = _report(tmp_path, "verify")
        assert rep["summary"]["failed"] == ["hermite.commutator"]


class TestVerify:
    def test_records(self, tmp_path, capsys):
        assert main(["verify", "--only", FAST, "--out", str(tmp_path)]) == 0
        rep, _ = _report(tmp_path, "verify")
        assert len(rep["records"]) == len(select_checks(FAST.split(",")))
        for rec in rep["records"]:
            assert rec["status"] == "pass" and rec["passed"]
            assert rec["anchor"] in ANCHORS and rec["anchor_text"] == ANCHORS[rec["anchor"]]
            assert {"name", "value", "target", "tol", "seconds"} <= set(rec)
        assert rep["environment"]["numpy"] == np.__version__

    def test_tolerance_override_verbatim(self, tmp_path, capsys):
        argv = ["verify", "--only", "hermite", "--tol.hermite.factorization", "3.5e-11", "--out", str(tmp_path)]
        assert main(argv) == 0
        rep, _ = _report(tmp_path, "verify")
        tols = {r["name"]: r["tol"] for r in rep["records"]}
        assert tols["hermite.factorization"] == 3.5e-11
        assert rep["config"]["tolerances"] == {"hermite.factorization": 3.5e-11}

    def test_deterministic_csv(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["verify", "--only", FAST, "--out", str(a)]) == 0
        assert main(["verify", "--only", FAST, "--out", str(b)]) == 0
        ca = _report(a, "verify")[1].read_text().splitlines()
        cb = _report(b, "verify")[1].read_text().splitlines()
        assert ca[0].startswith("# package=twisted_fock")
        assert ca[1:] == cb[1:]
        assert ca[1] == "check,status,value,target,tolerance"

    def test_seed_changes_probes(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["verify", "--only", "weyl.group_law", "--out", str(a)])
        main(["verify", "--only", "weyl.group_law", "--seed", "7", "--out", str(b)])
        assert _report(a, "verify")[1].read_text().splitlines()[2] != _report(b, "verify")[1].read_text().splitlines()[2]


class TestExperiment:
    def test_identity_both_plateau(self, tmp_path, capsys):
        assert main(["experiment", "uncertainty", "--preset", "identity", "--out", str(tmp_path)]) == 0
        assert "verdict both-plateau" in capsys.readouterr().out
        rep, csv_path = _report(tmp_path, "uncertainty")
        assert rep["result"]["verdict"] == "both-plateau"
        assert rep["result"]["pointwise_ratio"] == pytest.approx(1.0, rel=1e-10)
        assert csv_path.read_text().splitlines()[1] == "K,norm_phi,norm_Uphi"

    def test_rank_one_dichotomy(self, tmp_path, capsys):
        assert main(["experiment", "uncertainty", "--preset", "rank-one", "--out", str(tmp_path)]) == 0
        rep, csv_path = _report(tmp_path, "uncertainty")
        assert rep["result"]["verdict"] == "dichotomy"
        assert rep["result"]["trace_Uphi"]["verdict"] == "divergent"
        rows = csv_path.read_text().splitlines()[2:]
        assert [r.split(",")[0] for r in rows] == ["8", "12", "16", "20"]
        assert float(rows[-1].split(",")[2]) == pytest.approx(365404.37328061665, rel=1e-6)

    def test_boundedness_plateau(self, tmp_path, capsys):
        assert main(["experiment", "boundedness", "--preset", "diag-m", "--out", str(tmp_path)]) == 0
        rep, _ = _report(tmp_path, "boundedness")
        assert rep["result"]["verdict"] == "bounded-consistent"
        assert abs(rep["result"]["plateau_value"] - 3.0) <= 0.01

    def test_algebra(self, tmp_path, capsys):
        assert main(["experiment", "algebra", "--preset", "rank-one", "--k-list", "4,8", "--out", str(tmp_path)]) == 0
        rep, _ = _report(tmp_path, "algebra")
        # (2 v v^*)^2 = 4 v v^*
        assert rep["result"]["plateau_value"] == pytest.approx(4.0, rel=1e-10)

    def test_geller(self, tmp_path, capsys):
        assert main(["experiment", "geller", "--out", str(tmp_path)]) == 0
        rep, _ = _report(tmp_path, "geller")
        wb = rep["result"]["weight_bounds"]
        assert wb["0,0"]["max"] == pytest.approx(1.0)
        assert wb["1,0"]["max"] <= math.sqrt(2)
        assert wb["1,1"]["spread"] < 1e-2


class TestEval:
    def test_heat_kernel(self, capsys):
        assert main(["eval", "heat_kernel", "--points", "0.3,-0.4"]) == 0
        re, im = capsys.readouterr().out.split()
        assert float(re) == pytest.approx(0.1333938818986669, rel=1e-14)
        assert im == "+0j"

    def test_fock_kernel_needs_ab(self, capsys):
        assert main(["eval", "fock_kernel", "--points", "0.1,0.2"]) == 2

    def test_fock_kernel(self, capsys):
        assert main(["eval", "fock_kernel", "--points", "0.3+0.2j,-0.4+0.1j", "--ab", "0.1-0.5j,0.2+0.3j"]) == 0
        re, im = capsys.readouterr().out.split()
        assert complex(float(re), float(im[:-1])) == pytest.approx(0.8210680336158658 + 0.2616718630333178j, rel=1e-14)

    def test_G_identity_is_one(self, capsys):
        assert main(["eval", "G", "--preset", "identity", "--points", "0.1,0.2;0.5j,0.3"]) == 0
        vals = [complex(float(a), float(b[:-1])) for a, b in (line.split() for line in capsys.readouterr().out.splitlines())]
        np.testing.assert_allclose(vals, 1.0, atol=1e-12)
