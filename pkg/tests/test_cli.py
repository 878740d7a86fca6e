import json

import pytest

from hypam import cli
from hypam.config import RunConfig, format_config, parse_config


def run_cli(tmp_path, *argv):
    return cli.main(list(argv))


def read(path):
    with open(path) as fh:
        return fh.read()


class TestConfigParsing:
    def test_round_trip(self):
        cfg = RunConfig(d=3, sigma2=0.5, seed=17, mode="annealed")
        text = format_config(cfg, "fk")
        parsed, sub = parse_config(text)
        assert parsed == cfg and sub == "fk"

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config("frobnicate = 3")

    def test_bad_value_reports_line(self):
        with pytest.raises(ValueError, match=":2:"):
            parse_config("d = 2\nsigma2 = banana\n")

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="expected 'key = value'"):
            parse_config("just some words")

    def test_lambda_alias(self):
        cfg, _ = parse_config("lambda = 0.25")
        assert cfg.lam == 0.25

    def test_comments_and_blanks(self):
        cfg, _ = parse_config("# comment\n\nd = 4   # trailing\n")
        assert cfg.d == 4


class TestDispatch:
    def test_optimize_outputs(self, tmp_path):
        out = tmp_path / "opt"
        status = run_cli(tmp_path, "optimize", "--out", str(out), "--seed", "1")
        assert status == 0
        summary = json.loads(read(out / "summary.json"))
        assert summary["eps_star"] == 0.2
        assert summary["checks"]["gradient_norm"] <= 1e-6
        assert (out / "data.csv").exists()
        assert (out / "manifest.cfg").exists()

    def test_manifest_round_trip_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(tmp_path, "fk-localized", "--out", str(out1), "--seed", "3",
                       "--set", "n_paths=40", "--set", "dt=0.005",
                       "--set", "t=0.5") == 0
        assert run_cli(tmp_path, "fk-localized", "--config",
                       str(out1 / "manifest.cfg"), "--out", str(out2)) == 0
        assert read(out1 / "data.csv") == read(out2 / "data.csv")
        assert read(out1 / "summary.json") == read(out2 / "summary.json")

    def test_same_seed_byte_identical(self, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run_cli(tmp_path, "radial-check", "--out", str(out),
                           "--seed", "5", "--set", "t=0.2",
                           "--set", "n_paths=50") == 0
            outs.append(read(out / "data.csv"))
        assert outs[0] == outs[1]

    def test_unknown_subcommand_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["frobnicate"])

    def test_constraint_violation_exit_2(self, tmp_path):
        status = run_cli(tmp_path, "clusters", "--out", str(tmp_path / "c"),
                         "--set", "lam=0.5", "--set", "eta=0.1")
        assert status == 2

    def test_eta_above_threshold_exit_2(self, tmp_path, capsys):
        status = run_cli(tmp_path, "clusters", "--out", str(tmp_path / "c2"),
                         "--set", "lam=1e-4", "--set", "eta=0.9",
                         "--set", "delta=0.5")
        assert status == 2
        assert "eta_delta" in capsys.readouterr().err

    def test_config_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nope = 1\n")
        assert run_cli(tmp_path, "optimize", "--config", str(bad)) == 2

    def test_manifest_subcommand_mismatch(self, tmp_path):
        out = tmp_path / "m"
        assert run_cli(tmp_path, "optimize", "--out", str(out)) == 0
        assert run_cli(tmp_path, "fk", "--config", str(out / "manifest.cfg")) == 2

    def test_fk_csv_schema(self, tmp_path):
        out = tmp_path / "fk"
        assert run_cli(tmp_path, "fk", "--out", str(out), "--seed", "2",
                       "--set", "n_paths=16", "--set", "t=0.5",
                       "--set", "dt=0.005", "--set", "sigma2=0.25") == 0
        lines = read(out / "data.csv").strip().splitlines()
        assert lines[0] == "path_id,log_weight,accepted,route_word"
        assert len(lines) == 17
        summary = json.loads(read(out / "summary.json"))
        assert set(summary) >= {"mode", "t", "dt", "n_paths", "mean", "se", "params"}

    def test_exit_check_fit_json(self, tmp_path):
        out = tmp_path / "exit"
        assert run_cli(tmp_path, "exit-check", "--out", str(out), "--seed", "3",
                       "--set", "R_list=3,4", "--set", "t=2.0",
                       "--set", "n_paths=4000") == 0
        summary = json.loads(read(out / "summary.json"))
        assert set(summary["fit"]) == {"slope", "intercept", "r2", "n", "ci"}

    def test_long_route_tail_run(self, tmp_path):
        out = tmp_path / "lrt"
        assert run_cli(tmp_path, "long-route-tail", "--out", str(out),
                       "--set", "eta=0.3", "--set", "N_hops=3",
                       "--set", "t=10", "--set", "K0=2.0") == 0
        summary = json.loads(read(out / "summary.json"))
        assert summary["threshold_etaN"] > 0

    def test_route_budget_feasible_config(self, tmp_path):
        out = tmp_path / "rb"
        status = run_cli(tmp_path, "route-budget", "--out", str(out),
                         "--seed", "7",
                         "--set", "K0=40", "--set", "alpha=0.05",
                         "--set", "mu_factor=1.05", "--set", "delta=9.1537",
                         "--set", "C_R0_hat=4.8216", "--set", "eta=2.0",
                         "--set", "lam=0.05", "--set", "t=20",
                         "--set", "n_reps=20")
        assert status == 0
        summary = json.loads(read(out / "summary.json"))
        assert summary["n_geometries"] == 20
        assert summary["n_violations"] == 0

    def test_clusters_run(self, tmp_path):
        out = tmp_path / "cl"
        status = run_cli(tmp_path, "clusters", "--out", str(out), "--seed", "2",
                         "--set", "t=1.0", "--set", "site_cap=300")
        assert status == 0
        summary = json.loads(read(out / "summary.json"))
        assert "clusters" in summary
        lines = read(out / "data.csv").splitlines()
        assert lines[0] == "site_id,x0,x1,x2,value"

    def test_env_override(self, tmp_path, monkeypatch):
        out = tmp_path / "env"
        monkeypatch.setenv("HYPAM_N_PATHS", "13")
        assert run_cli(tmp_path, "radial-check", "--out", str(out),
                       "--seed", "1", "--set", "t=0.1") == 0
        summary = json.loads(read(out / "summary.json"))
        assert summary["n_paths"] == 13
