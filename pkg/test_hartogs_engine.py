"""Command-line tests for hartogs_engine, driven through click's CliRunner"""

import json
import sqlite3

import pytest
from click.testing import CliRunner

import hartogs_engine
from conftest import domain
from hartogs_core import BlaschkeProduct, Case11Map, aut_sample
from hartogs_engine import CliConfig, build_config, cli, load_config, read_points
from hartogs_errors import EXIT_DIMENSION, EXIT_NO_PROPER_MAP, EXIT_PARSE, EXIT_VERIFICATION_FAILED, ParseError
from verify_core import SUITE_ALL, VerificationReport

F11 = '{"p": ["1"], "q": ["1"]}'
F23 = '{"p": ["2"], "q": ["3"]}'
F25 = '{"p": ["2"], "q": ["5"]}'
NM_SRC = '{"p": ["2", "4"], "q": ["3", "3"]}'
NM_DST = '{"p": ["1", "2"], "q": ["3", "1"]}'


@pytest.fixture
def runner():
    return CliRunner()


def json_lines(result):
    """JSON objects printed on stdout, skipping any log lines"""
    return [json.loads(line) for line in result.stdout.splitlines() if line.startswith("{")]


class TestExists:
    def test_case11(self, runner):
        result = runner.invoke(cli, ["exists", "--src", F23, "--dst", F25])
        assert result.exit_code == 0
        assert json_lines(result) == [{"status": "ok", "case": "11", "witness": {"k": 1, "l": 1}}]

    def test_case1m(self, runner):
        src = '{"p": ["4"], "q": ["2", "6"]}'
        dst = '{"p": ["2"], "q": ["2", "3"]}'
        result = runner.invoke(cli, ["exists", "--src", src, "--dst", dst])
        assert json_lines(result)[0]["witness"] == {"k": 2, "sigma": [0, 1]}

    def test_no_map(self, runner):
        src = '{"p": ["1", "2"], "q": ["3"]}'
        dst = '{"p": ["1", "2"], "q": ["2"]}'
        result = runner.invoke(cli, ["exists", "--src", src, "--dst", dst])
        assert result.exit_code == EXIT_NO_PROPER_MAP
        assert json_lines(result)[0]["reason"] == "no_proper_map"

    def test_parse_error(self, runner):
        result = runner.invoke(cli, ["exists", "--src", '{"p": ["0"], "q": ["1"]}', "--dst", F11])
        assert result.exit_code == EXIT_PARSE
        assert json_lines(result)[0]["reason"] == "parse_error"

    def test_dimension_mismatch(self, runner):
        result = runner.invoke(cli, ["exists", "--src", F11, "--dst", NM_DST])
        assert result.exit_code == EXIT_DIMENSION
        payload = json_lines(result)[0]
        assert payload["reason"] == "dimension_mismatch"
        assert payload["details"] == {"src": [1, 1], "dst": [2, 2]}

    def test_descriptor_from_file(self, runner, tmp_path):
        path = tmp_path / "src.json"
        path.write_text(F23)
        result = runner.invoke(cli, ["exists", "--src", f"@{path}", "--dst", F25])
        assert result.exit_code == 0

    def test_text_output(self, runner):
        result = runner.invoke(cli, ["--out", "text", "exists", "--src", F23, "--dst", F25])
        assert result.exit_code == 0
        assert "witness" in result.stdout


class TestConstruct:
    def test_nm(self, runner):
        result = runner.invoke(cli, ["construct", "--src", NM_SRC, "--dst", NM_DST])
        assert result.exit_code == 0
        descriptor = json_lines(result)[0]["map"]
        assert descriptor["case"] == "nm"
        assert descriptor["g"]["r"] == [2, 2]
        assert descriptor["h"]["r"] == [1, 3]

    def test_records_map(self, runner, tmp_path):
        db = tmp_path / "ledger.db"
        result = runner.invoke(cli, ["construct", "--src", F23, "--dst", F25, "--db", str(db)])
        assert result.exit_code == 0
        with sqlite3.connect(db) as conn:
            rows = conn.execute("SELECT map_case FROM constructed_maps").fetchall()
        assert rows == [("11",)]

    def test_no_map(self, runner):
        result = runner.invoke(cli, ["construct", "--src", F11, "--dst", '{"p": ["1"], "q": ["L"]}'])
        assert result.exit_code == EXIT_NO_PROPER_MAP


class TestAut:
    def test_family_and_rigidity(self, runner):
        result = runner.invoke(cli, ["aut", "--src", F11])
        payload = json_lines(result)[0]
        assert payload["family"]["recentering_allowed"]
        assert payload["rigidity"]["rigid"] is False
        assert payload["rigidity"]["witness"]["k"] == 2

    def test_samples_follow_seed(self, runner):
        result = runner.invoke(cli, ["--seed", "5", "aut", "--src", F11, "--samples", "2"])
        samples = json_lines(result)[0]["samples"]
        D = domain(["1"], ["1"])
        assert samples == [aut_sample(D, 5).to_dict(), aut_sample(D, 6).to_dict()]

    def test_seed_from_environment(self, runner):
        result = runner.invoke(cli, ["aut", "--src", F11, "--samples", "1"], env={"HARTOGS_SEED": "9"})
        assert json_lines(result)[0]["samples"] == [aut_sample(domain(["1"], ["1"]), 9).to_dict()]


class TestEval:
    def moebius_map(self):
        D = domain(["1"], ["1"])
        M = Case11Map(D, D, 0, 1, 1, blaschke=BlaschkeProduct(((0.5, 1),)), p_prime=1, q_prime=1)
        return json.dumps(M.to_dict())

    def test_single_point(self, runner):
        result = runner.invoke(cli, ["eval", "--map", self.moebius_map(), "--points", "[[0.1, 0], [0.5, 0]]"])
        assert result.exit_code == 0
        (z, w), = json_lines(result)[0]["images"]
        assert z == pytest.approx([-1.0 / 6.0, 0.0], abs=1e-14)
        assert w == pytest.approx([0.5, 0.0])

    def test_points_file(self, runner, tmp_path):
        path = tmp_path / "points.json"
        path.write_text("[[[0.1, 0], [0.5, 0]], [[0, 0], [0.3, 0]]]")
        result = runner.invoke(cli, ["eval", "--map", self.moebius_map(), "--points", str(path)])
        assert len(json_lines(result)[0]["images"]) == 2

    def test_outside_point(self, runner):
        result = runner.invoke(cli, ["eval", "--map", self.moebius_map(), "--points", "[[0.9, 0], [0.5, 0]]"])
        assert result.exit_code == 5
        assert json_lines(result)[0]["reason"] == "not_in_domain"

    def test_invalid_map(self, runner):
        D = domain(["2"], ["3"])
        payload = json.dumps(Case11Map(D, domain(["2"], ["5"]), 1, 1, 2).to_dict())
        result = runner.invoke(cli, ["eval", "--map", payload, "--points", "[[0.1, 0], [0.5, 0]]"])
        assert json_lines(result)[0]["reason"] == "invalid_map"


class TestVerify:
    def test_nm_suite_passes(self, runner):
        result = runner.invoke(cli, ["verify", "--src", NM_SRC, "--dst", NM_DST, "--count", "30"])
        assert result.exit_code == 0
        reports = json_lines(result)
        assert [r["property"] for r in reports] == list(SUITE_ALL)
        assert all(r["pass"] for r in reports)

    def test_selected_properties(self, runner):
        result = runner.invoke(cli, ["verify", "--src", F23, "--dst", F25, "--suite", "proper_form,interior_mapping",
                                     "--count", "20", "--workers", "2"])
        assert [r["property"] for r in json_lines(result)] == ["proper_form", "interior_mapping"]

    def test_unknown_property(self, runner):
        result = runner.invoke(cli, ["verify", "--src", F23, "--dst", F25, "--suite", "bogus"])
        assert result.exit_code == EXIT_PARSE

    def test_needs_a_map(self, runner):
        result = runner.invoke(cli, ["verify", "--src", F23])
        assert result.exit_code == EXIT_PARSE

    def test_failure_exit_code(self, runner, monkeypatch):
        failing = [VerificationReport("interior_mapping", 1, 1.0, 1e-10, False, 0)]
        monkeypatch.setattr(hartogs_engine, "run_suite", lambda *args, **kwargs: failing)
        result = runner.invoke(cli, ["verify", "--src", F23, "--dst", F25])
        assert result.exit_code == EXIT_VERIFICATION_FAILED
        assert json_lines(result)[0]["pass"] is False

    def test_records_runs(self, runner, tmp_path):
        db = tmp_path / "ledger.db"
        result = runner.invoke(cli, ["verify", "--src", F23, "--dst", F25, "--count", "20", "--db", str(db)])
        assert result.exit_code == 0
        with sqlite3.connect(db) as conn:
            (count,) = conn.execute("SELECT COUNT(*) FROM verification_runs").fetchone()
        assert count == len(SUITE_ALL)


class TestLevi:
    def test_worked_point(self, runner):
        result = runner.invoke(cli, ["levi", "--p", "1,1", "--q", "1", "--point", "[[0.3,0],[0.4,0],[0.5,0]]",
                                     "--tangent", "[[1,0],[0,0]]"])
        assert result.exit_code == 0
        payload = json_lines(result)[0]
        assert payload["lhs"] == pytest.approx(0.64)
        assert payload["rhs"] == pytest.approx(0.64)

    def test_off_k(self, runner):
        result = runner.invoke(cli, ["levi", "--p", "1,1", "--q", "1", "--point", "[[0.1,0],[0.1,0],[0.5,0]]",
                                     "--tangent", "[[1,0],[0,0]]"])
        assert result.exit_code == 5
        assert json_lines(result)[0]["reason"] == "not_on_k"

    def test_wrong_tangent_size(self, runner):
        result = runner.invoke(cli, ["levi", "--p", "1,1", "--q", "1", "--point", "[[0.3,0],[0.4,0],[0.5,0]]",
                                     "--tangent", "[[1,0]]"])
        assert result.exit_code == EXIT_PARSE


class TestConfiguration:
    def test_defaults(self):
        config = build_config(load_config(), {})
        assert config == CliConfig()

    def test_yaml_overrides(self, tmp_path):
        path = tmp_path / "engine.yaml"
        path.write_text("seed: 7\nverify:\n  count: 25\n")
        config = build_config(load_config(str(path)), {"seed": 8})
        assert (config.seed, config.count, config.suite) == (8, 25, "all")

    def test_bad_values(self, tmp_path):
        path = tmp_path / "engine.yaml"
        path.write_text("tolerance: 0.5\n")
        with pytest.raises(ParseError):
            build_config(load_config(str(path)), {})
        with pytest.raises(ParseError):
            load_config(str(tmp_path / "missing.yaml"))

    def test_config_flag(self, runner, tmp_path):
        path = tmp_path / "engine.yaml"
        path.write_text("seed: 3\n")
        result = runner.invoke(cli, ["--config", str(path), "aut", "--src", F11, "--samples", "1"])
        assert json_lines(result)[0]["samples"] == [aut_sample(domain(["1"], ["1"]), 3).to_dict()]

    def test_invalid_config_exits_with_parse_code(self, runner, tmp_path):
        path = tmp_path / "engine.yaml"
        path.write_text("- not a mapping\n")
        result = runner.invoke(cli, ["--config", str(path), "exists", "--src", F11, "--dst", F11])
        assert result.exit_code == EXIT_PARSE

    def test_read_points(self):
        single = read_points("[[0.1, 0], [0.5, 0]]", 1)
        assert len(single) == 1
        with pytest.raises(ParseError):
            read_points("[]", 1)
