import json

import numpy as np
import pytest

from fgbm.cli import SUBCOMMANDS, main, validate_report
from fgbm.config import ConfigError, default_config_path, load_config, parse_policy
from fgbm.priors import AntitheticPair, ConstantMix, ConstantVertex, PiecewiseSwitch

BROWNIAN = """
[experiment]
name = brownian
seed = 3
[model]
h = 0.5
theta = [1.0]
n = 100
paths = 1000
policies = vertex:0
"""

SMALL = """
[experiment]
name = small
seed = 11
[model]
h = 0.75
theta = [0.25, 2.25]
n = 64
paths = 4000
policies = vertex:0 vertex:1 switch-random:3:4
[increments]
horizon = 12
cells_per_unit = 4
lags = 3
[gheat]
payoff = call:0.5
dx = 0.05
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def report(out, sub):
    with open(out / sub / "report.json", encoding="utf-8") as fh:
        return json.load(fh)


class TestConfig:
    def test_default_config_loads(self):
        cfg = load_config()
        assert default_config_path().exists()
        assert cfg.h == 0.75 and cfg.theta.n_vertices == 2
        assert [p.policy_id for p in cfg.policies][:2] == ["vertex[0]", "vertex[1]"]
        assert cfg.tol("n_se") == 3.0

    def test_flag_overrides(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL), seed=99, out="elsewhere", jobs=3)
        assert (cfg.seed, cfg.out, cfg.jobs) == (99, "elsewhere", 3)
        assert cfg.echo()["experiment"]["seed"] == "99"

    def test_policy_tokens(self):
        assert parse_policy("vertex:2") == ConstantVertex(2)
        assert parse_policy("mix:0.25:0.75") == ConstantMix((0.25, 0.75))
        assert parse_policy("switch-random:5:8") == PiecewiseSwitch(seed=5, rule="random", every=8)
        assert parse_policy("switch-sign:1:0:0") == PiecewiseSwitch(rule="sign", vertices=(1, 0), component=0)
        assert parse_policy("anti-vertex:0") == AntitheticPair(ConstantVertex(0))
        for bad in ("vertex", "vertex:x", "spin:1", "switch-random:1"):
            with pytest.raises(ValueError):
                parse_policy(bad)

    def test_non_psd_vertex_named(self, tmp_path):
        text = SMALL.replace("theta = [0.25, 2.25]", "theta = [[[1, 0], [0, 1]], [[1, 2], [2, 1]]]")
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text))
        fields = dict(info.value.problems)
        assert "vertex 1" in fields["[model] theta"]

    def test_all_problems_reported(self, tmp_path):
        text = SMALL.replace("h = 0.75", "h = 1.5").replace("paths = 4000", "paths = one")
        text += "[tolerances]\nrel = -1\n"
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text))
        fields = [k for k, _ in info.value.problems]
        assert fields == ["[model] h", "[model] paths", "[tolerances] rel"]

    def test_policy_out_of_range(self, tmp_path):
        with pytest.raises(ConfigError, match="vertex index 4"):
            load_config(write(tmp_path, SMALL.replace("vertex:1", "vertex:4")))

    def test_missing_section_and_file(self, tmp_path):
        with pytest.raises(ConfigError, match="section missing"):
            load_config(write(tmp_path, "[experiment]\nseed = 1\n"))
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.ini")


class TestRunner:
    def test_simulate_brownian_normality(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", write(tmp_path, BROWNIAN), "--out", str(out), "simulate"]) == 0
        doc = report(out, "simulate")
        assert validate_report(doc) == []
        jb = [c for c in doc["checks"] if "Jarque-Bera" in c["name"]]
        assert jb and jb[0]["passed"] and jb[0]["detail"]["samples"] == 100_000
        manifest = json.loads((out / "simulate" / "manifest.json").read_text())
        files = {m["file"]: m["columns"] for m in manifest["files"]}
        assert files["paths_vertex_0.csv"] == ["replicate", "t", "B1"]
        rows = (out / "simulate" / "paths_vertex_0.csv").read_text().splitlines()
        assert rows[0] == "replicate,t,B1" and len(rows) == 1 + 20 * 101

    def test_deterministic_reports(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        docs = []
        for k in (1, 2):
            out = tmp_path / f"run{k}"
            main(["--config", cfg, "--out", str(out), "covariance"])
            text = (out / "covariance" / "report.json").read_text()
            docs.append("\n".join(line for line in text.splitlines() if "wall_time" not in line))
            docs.append((out / "covariance" / "second_moments.csv").read_bytes())
        assert docs[0] == docs[2] and docs[1] == docs[3]

    def test_seed_changes_output(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        for s in (1, 2):
            main(["--config", cfg, "--out", str(tmp_path / f"s{s}"), "--seed", str(s), "covariance"])
        a = (tmp_path / "s1" / "covariance" / "second_moments.csv").read_bytes()
        b = (tmp_path / "s2" / "covariance" / "second_moments.csv").read_bytes()
        assert a != b

    @pytest.mark.parametrize("sub", ["covariance", "increments", "gheat", "arbitrage"])
    def test_subcommands_pass_on_small_config(self, tmp_path, sub):
        out = tmp_path / "out"
        code = main(["--config", write(tmp_path, SMALL), "--out", str(out), sub])
        doc = report(out, sub)
        assert validate_report(doc) == []
        assert code == 0, [c["name"] for c in doc["checks"] if not c["passed"]]
        for name in doc["data_files"]:
            assert (out / sub / name).exists()

    def test_exit_status_follows_checks(self, tmp_path, capsys):
        # a coarse grid misses the Itô residual threshold; the exit status must say so
        text = SMALL.replace("[gheat]", "[ito]\nn = 512\npaths = 20\n[gheat]")
        out = tmp_path / "out"
        code = main(["--config", write(tmp_path, text), "--out", str(out), "ito"])
        doc = report(out, "ito")
        assert code == (0 if doc["passed"] else 1)
        assert not doc["passed"]
        assert "FAIL" in capsys.readouterr().out

    def test_acceptance_subset(self, tmp_path):
        text = SMALL + "[acceptance]\ncriteria = 2, 10\n"
        out = tmp_path / "out"
        assert main(["--config", write(tmp_path, text), "--out", str(out), "acceptance"]) == 0
        doc = report(out, "acceptance")
        assert [c["number"] for c in doc["summary"]["criteria"]] == [2, 10]
        assert all(c["detail"]["criterion"] in (2, 10) for c in doc["checks"])

    def test_invalid_config_exit(self, tmp_path, capsys):
        text = SMALL.replace("theta = [0.25, 2.25]", "theta = [[[1, 0], [0, 1]], [[1, 2], [2, 1]]]")
        assert main(["--config", write(tmp_path, text), "simulate"]) == 2
        err = capsys.readouterr().err
        assert "[model] theta" in err and "vertex 1" in err

    def test_subcommand_option_validated(self, tmp_path, capsys):
        text = SMALL.replace("payoff = call:0.5", "payoff = digital")
        assert main(["--config", write(tmp_path, text), "--out", str(tmp_path), "gheat"]) == 2
        assert "[gheat] payoff" in capsys.readouterr().err

    def test_refinement_needs_two_levels(self, tmp_path, capsys):
        text = SMALL.replace("[gheat]", "[ito]\nn = 256\n[gheat]")
        assert main(["--config", write(tmp_path, text), "--out", str(tmp_path), "ito"]) == 2
        assert "[ito] n" in capsys.readouterr().err

    def test_regime_requirement(self, tmp_path, capsys):
        assert main(["--config", write(tmp_path, BROWNIAN), "--out", str(tmp_path), "sde"]) == 2
        assert "H > 1/2" in capsys.readouterr().err

    def test_numerical_error_has_context(self, tmp_path, capsys):
        text = SMALL.replace("[gheat]", "[sde]\nn = 128\npaths = 4\nsigma = 1e200\n[gheat]")
        with np.errstate(all="ignore"):
            code = main(["--config", write(tmp_path, text), "--out", str(tmp_path), "sde"])
        assert code == 3
        err = capsys.readouterr().err
        assert "youngsde.solve_sde" in err and "sigma=1e200" in err and "non-finite state" in err

    def test_bad_flags(self, capsys):
        assert main(["--seed", "-3", "simulate"]) == 2
        with pytest.raises(SystemExit):
            main(["frobnicate"])

    def test_every_subcommand_documented(self):
        for fn in SUBCOMMANDS.values():
            assert fn.__doc__
