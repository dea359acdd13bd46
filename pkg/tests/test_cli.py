import csv
import json
import subprocess
import sys

import pytest

from netdesign.cli import main
from netdesign.simulate import RECORD_COLUMNS

TINY = {
    "network_families": ["er", "pl"],
    "n_nodes": 16,
    "n_replications": 2,
    "n_mc_draws": 100,
    "n_baseline_draws": 5,
    "optimizer": {"max_iters": 400, "n_restarts": 1},
}


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def net_file(tmp_path, capsys):
    path = tmp_path / "net.txt"
    assert run(["gen-network", "--family", "er", "--n", 20, "--p", 0.2, "--seed", 3, "-o", path], capsys)[0] == 0
    return path


@pytest.fixture
def path_file(tmp_path):
    path = tmp_path / "path.txt"
    path.write_text("3\n0 1\n1 2\n")
    return path


class TestGenNetwork:
    def test_edgeless(self, tmp_path, capsys):
        path = tmp_path / "g.txt"
        code, out, _ = run(["gen-network", "--family", "er", "--n", 10, "--p", 0, "-o", path], capsys)
        assert code == 0 and "edges=0" in out
        assert path.read_text() == "10\n"

    def test_deterministic(self, tmp_path, capsys):
        for name in ("a.json", "b.json"):
            run(["gen-network", "--family", "sbm", "--n", 40, "--seed", 9, "-o", tmp_path / name], capsys)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    @pytest.mark.parametrize("extra", [["--p", 1.5], ["--family", "torus"]])
    def test_bad_values(self, tmp_path, capsys, extra):
        argv = ["gen-network", "--family", "er", "--n", 10, "-o", tmp_path / "g.txt"] + extra
        code, _, err = run(argv, capsys)
        assert code == 2 and "error" in err


class TestDesign:
    def test_schema(self, net_file, capsys):
        code, out, _ = run(["design", "--network", net_file, "--seed", 1, "--n-draws", 200], capsys)
        data = json.loads(out)
        assert code == 0
        assert set(data) == {"strategy", "seed", "z", "objective", "imse"}
        assert len(data["z"]) == 20 and set(data["z"]) <= {0, 1}

    @pytest.mark.parametrize("strategy", ["optimal", "balanced", "stratified"])
    def test_deterministic(self, net_file, tmp_path, capsys, strategy):
        outs = []
        for name in ("a.json", "b.json"):
            run(["design", "--network", net_file, "--strategy", strategy, "--seed", 4, "--n-draws", 200, "-o", tmp_path / name], capsys)
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]

    def test_edgeless_closed_form(self, tmp_path, capsys):
        path = tmp_path / "g.txt"
        path.write_text("6\n")
        code, out, _ = run(["design", "--network", path, "--objective", "closed"], capsys)
        data = json.loads(out)
        # (E sigma2 + E gamma2) * (1/3 + 1/3) with the default prior
        assert data["imse"] == pytest.approx(1.5 * 2 / 3)
        assert sum(data["z"]) == 3

    def test_point_prior(self, net_file, capsys):
        grid = json.dumps({"params": [{"mu": 1, "sigma2": 1, "gamma2": 1}, {"mu": 3, "sigma2": 0.5, "gamma2": 2}], "weights": [1, 1]})
        code, out, _ = run(["design", "--network", net_file, "--strategy", "point-prior", "--grid", grid], capsys)
        data = json.loads(out)
        assert code == 0 and len(data["gamma"]) == 2

    def test_non_integrable_prior(self, net_file, capsys):
        code, _, err = run(["design", "--network", net_file, "--r-sigma", 1], capsys)
        assert code == 2 and "integrable" in err

    def test_missing_network(self, tmp_path, capsys):
        code, _, _ = run(["design", "--network", tmp_path / "nope.txt"], capsys)
        assert code == 2

    def test_config_file(self, net_file, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"strategy": "balanced", "seed": 8}))
        code, out, _ = run(["design", "--network", net_file, "--config", cfg], capsys)
        assert json.loads(out)["strategy"] == "balanced"
        cfg.write_text(json.dumps({"speed": 3}))
        assert run(["design", "--network", net_file, "--config", cfg], capsys)[0] == 2


class TestEvaluate:
    def test_path_mse(self, path_file, capsys):
        code, out, _ = run(["evaluate", "--network", path_file, "--assignment", "[1,0,1]", "--decompose"], capsys)
        data = json.loads(out)
        assert data["value"] == pytest.approx(3.0)
        assert data["decomposition"]["total"] == pytest.approx(3.0)

    def test_poisson_gamma(self, tmp_path, capsys):
        path = tmp_path / "g.txt"
        path.write_text("2\n")
        code, out, _ = run(["evaluate", "--network", path, "--assignment", "[1,0]", "--model", "poisson-gamma"], capsys)
        assert json.loads(out)["value"] == pytest.approx(4.0)

    def test_explicit_variance(self, capsys):
        cov = json.dumps([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
        code, out, _ = run(["evaluate", "--metric", "variance", "--explicit-cov", cov, "--contrast", "[0.5,0.5,-0.5,-0.5]"], capsys)
        assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-12)

    def test_design_output_as_assignment(self, net_file, tmp_path, capsys):
        design = tmp_path / "design.json"
        run(["design", "--network", net_file, "--strategy", "balanced", "-o", design], capsys)
        code, out, _ = run(["evaluate", "--network", net_file, "--assignment", design, "--metric", "imse"], capsys)
        assert json.loads(out)["value"] == pytest.approx(json.loads(design.read_text())["imse"])

    def test_imse_mc_deterministic(self, net_file, capsys):
        argv = ["evaluate", "--network", net_file, "--assignment", json.dumps([1, 0] * 10), "--metric", "imse-mc", "--seed", 2]
        first = run(argv, capsys)[1]
        assert run(argv, capsys)[1] == first

    @pytest.mark.parametrize("z", ["[1,1,1]", "[1,0]", "[1,2,0]", "not-json-file"])
    def test_bad_assignment(self, path_file, capsys, z):
        assert run(["evaluate", "--network", path_file, "--assignment", z], capsys)[0] == 2


class TestSimulate:
    def test_outputs_and_determinism(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(TINY))
        for name in ("a", "b"):
            code, out, _ = run(["simulate", "--config", cfg, "--seed", 3, "-o", tmp_path / name], capsys)
            assert code == 0 and out.startswith("median relative iMSE")
        for f in ("records.csv", "records.json", "records.config.json", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        rows = list(csv.reader((tmp_path / "a" / "records.csv").open()))
        assert tuple(rows[0]) == RECORD_COLUMNS
        assert len(rows) == 1 + 2 * 2 * 3
        assert json.loads((tmp_path / "a" / "records.json").read_text())["master_seed"] == 3

    def test_factorial_writes_anova(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(TINY))
        code, _, _ = run(["simulate", "--study", "factorial", "--config", cfg, "--format", "csv", "-o", tmp_path], capsys)
        assert code == 0
        rows = list(csv.reader((tmp_path / "anova.csv").open()))
        assert rows[0] == ["factor", "df", "mss"]
        assert [r[0] for r in rows[1:]] == ["design_strategy", "design_prior_id", "network_family", "residual"]

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        code, _, err = run(["simulate", "--config", cfg, "-o", tmp_path], capsys)
        assert code == 2 and "config.bogus" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "netdesign", "gen-network", "--family", "pl", "--n", "12", "-o", str(tmp_path / "g.txt")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "g.txt").read_text().startswith("12\n")


def test_argparse_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["design"])
    assert exc.value.code == 2
