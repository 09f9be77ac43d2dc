from __future__ import annotations

import json

import pytest

from nct.cli import main as cli
from nct.cli.checks import CheckReport, reduce_check
from nct.cli.document import build_model, build_source, load_config, parse_config
from nct.cli.output import config_hash
from nct.diffusion.tensor import classic_diffusion_coefficient
from nct.stats.models import TabulatedCrossSection
from nct.transport.source import GaussianSource
from nct.utils.errors import ConfigError

from tests.conftest import Z_AXIS

SMALL = {"n_polar": 8, "n_azimuthal": 16}


def _doc(**fields) -> str:
    body = {"schema_version": 1, "model": {"kind": "constant", "sigma": 1.0}, **fields}
    return json.dumps(body)


def _paths(exc: pytest.ExceptionInfo) -> list:
    return [path for path, _ in exc.value.errors]


class TestDocument:
    def test_minimal_document(self):
        doc = parse_config(_doc())
        assert doc.c == 0.0
        assert doc.phase.legendre == [1.0]
        assert doc.domain.shape == (10, 10, 10)
        assert doc.mc.boundary == "periodic"

    def test_scattering_probability_out_of_range(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(_doc(c=1.2))
        assert _paths(exc) == ["c"]

    def test_odd_modulation_reports_path(self):
        model = {"kind": "direction_modulated", "base": {"law": "constant", "sigma": 1.0},
                 "modulation": {"coefficients": [1.0, 0.5]}}
        with pytest.raises(ConfigError) as exc:
            parse_config(_doc(model=model))
        path, message = exc.value.errors[0]
        assert path == "model.modulation"
        assert "even" in message

    def test_every_error_is_listed(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(_doc(c=-1.0, seed=-3, phase={"legendre": [0.5]}))
        assert set(_paths(exc)) == {"c", "seed", "phase.legendre"}

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(_doc(colour="blue"))
        assert _paths(exc) == ["colour"]

    def test_malformed_json(self):
        with pytest.raises(ConfigError, match="malformed JSON"):
            parse_config('{"schema_version": 1,')

    def test_schema_version(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({"schema_version": 2, "model": {"kind": "constant",
                                                                    "sigma": 1.0}}))
        assert _paths(exc) == ["schema_version"]

    def test_negative_phase_function(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(_doc(phase={"legendre": [1.0, 2.0]}))
        assert _paths(exc) == ["phase.legendre"]

    def test_tabulated_model_from_csv(self, tmp_path):
        (tmp_path / "node0.csv").write_text("# mu = 0\ns,optical_depth\n0,0\n1,1\n2,2\n")
        (tmp_path / "node1.csv").write_text("s,optical_depth\n0,0\n1,2\n2,4\n")
        nodes = [{"mu": 1.0, "file": "node1.csv"}, {"mu": 0.0, "file": "node0.csv"}]
        path = tmp_path / "run.json"
        path.write_text(_doc(model={"kind": "tabulated", "nodes": nodes}))
        model = build_model(load_config(path), tmp_path)
        assert isinstance(model, TabulatedCrossSection)
        assert float(model.optical_depth(Z_AXIS, 1.0)) == pytest.approx(2.0)

    def test_missing_table_file(self, tmp_path):
        nodes = [{"mu": 0.0, "file": "absent.csv"}]
        with pytest.raises(ConfigError) as exc:
            parse_config(_doc(model={"kind": "tabulated", "nodes": nodes}), tmp_path)
        assert _paths(exc) == ["model.nodes.0.file"]

    def test_gaussian_source(self):
        doc = parse_config(_doc(source={"kind": "gaussian", "center": [0, 0, 0], "width": 1.0}))
        source = build_source(doc)
        assert isinstance(source, GaussianSource)

    def test_hash_tracks_result_fields(self):
        a = parse_config(_doc(seed=1))
        assert config_hash(a) == config_hash(parse_config(_doc(seed=1)))
        assert config_hash(a) != config_hash(parse_config(_doc(seed=2)))


class TestReduceCheck:
    def test_classic_identities_hold(self):
        doc = parse_config(_doc(c=0.5, phase={"legendre": [1.0, 0.3]}))
        report = reduce_check(doc)
        assert report.passed, [r for r in report.results if not r.passed]
        assert len(report.results) == 8
        assert "infinite-medium collision density" in [r.name for r in report.results]
        assert classic_diffusion_coefficient(1.0, 0.5, 0.3) == pytest.approx(0.392157, abs=1e-6)

    def test_dense_medium(self):
        doc = parse_config(_doc(model={"kind": "constant", "sigma": 2.0}, c=0.9))
        assert reduce_check(doc).passed

    def test_needs_constant_model(self):
        model = {"kind": "from_pdf", "distribution": {"law": "uniform", "length": 1.0}}
        with pytest.raises(ConfigError) as exc:
            reduce_check(parse_config(_doc(model=model)))
        assert _paths(exc) == ["model.kind"]


class TestMain:
    def test_reduce_check_without_config(self, capsys):
        assert cli.main(["reduce-check"]) == cli.EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"] is True
        assert payload["command"] == "reduce-check"

    def test_invalid_config_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(_doc(c=3.0))
        assert cli.main(["tensor", "--config", str(path)]) == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["moments", "--config", str(tmp_path / "none.json")]) == cli.EXIT_CONFIG

    def test_thread_count_validated(self):
        assert cli.main(["reduce-check", "--threads", "0"]) == cli.EXIT_CONFIG

    def test_anomalous_model_exit_code(self, tmp_path):
        model = {"kind": "from_pdf", "distribution": {"law": "lomax", "shape": 2.0}}
        path = tmp_path / "heavy.json"
        path.write_text(_doc(model=model, c=0.5, quadrature=SMALL))
        assert cli.main(["tensor", "--config", str(path)]) == cli.EXIT_NUMERIC

    def test_failed_check_exit_code(self, monkeypatch):
        def failing(doc):
            report = CheckReport(1.0, 0.0, 0.0)
            report.add("always fails", 1.0, 0.1)
            return report

        monkeypatch.setattr(cli, "reduce_check", failing)
        assert cli.main(["reduce-check"]) == cli.EXIT_CHECK_FAILED

    def test_moments_of_heavy_tail(self, tmp_path):
        model = {"kind": "from_pdf", "distribution": {"law": "lomax", "shape": 2.0}}
        path = tmp_path / "heavy.json"
        path.write_text(_doc(model=model, quadrature=SMALL))
        out = tmp_path / "moments.json"
        assert cli.main(["moments", "--config", str(path), "--out", str(out)]) == cli.EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["s_mean"] == pytest.approx(1.0, rel=1e-6)
        assert payload["s2_mean"] is None
        assert "divergent" in payload["s2_mean_note"]

    def test_tensor_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(_doc(c=0.5, phase={"legendre": [1.0, 0.3]}, quadrature=SMALL))
        out = tmp_path / "tensor.json"
        assert cli.main(["tensor", "--config", str(path), "--out", str(out)]) == cli.EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["Dzz"] == pytest.approx(0.392157, abs=1e-6)
        assert payload["schema_version"] == 1

    def test_diffusion_csv(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(_doc(c=0.5, seed=7, quadrature=SMALL,
                             domain={"lower": [0, 0, 0], "upper": [4, 4, 4], "shape": [4, 4, 4]},
                             integral={"directions": [[0, 0, 1]]}))
        out = tmp_path / "phi.csv"
        assert cli.main(["diffusion", "--config", str(path), "--out", str(out)]) == cli.EXIT_OK
        lines = out.read_text().splitlines()
        header = [line for line in lines if line.startswith("#")]
        assert "# schema_version=1" in header
        assert "# seed=7" in header
        assert any(line.startswith("# config_hash=") for line in header)
        columns = lines[len(header)].split(",")
        assert columns[:7] == ["i", "j", "k", "x", "y", "z", "phi0"]
        assert columns[7] == "psi_0_0_1"
        assert len(lines) == len(header) + 1 + 64

    def test_mc_run_csv(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(_doc(c=0.5, seed=3,
                             domain={"lower": [0, 0, 0], "upper": [2, 2, 2], "shape": [2, 2, 2]},
                             mc={"histories": 2000, "n_mu": 2},
                             outputs={"json": str(tmp_path / "summary.json")}))
        out = tmp_path / "mc.csv"
        assert cli.main(["mc-run", "--config", str(path), "--out", str(out)]) == cli.EXIT_OK
        columns = [line for line in out.read_text().splitlines() if not line.startswith("#")][0]
        assert columns.split(",")[6:] == ["phi", "phi_err", "F_hat", "F_hat_err", "psi_mu0",
                                          "psi_mu0_err", "psi_mu1", "psi_mu1_err"]
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["balance"]["emitted"] == 2000

    def test_mc_run_source_outside_domain(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(_doc(domain={"lower": [0, 0, 0], "upper": [2, 2, 2], "shape": [2, 2, 2]},
                             source={"kind": "point", "position": [3.0, 1.0, 1.0]},
                             mc={"histories": 200}))
        assert cli.main(["mc-run", "--config", str(path)]) == cli.EXIT_CONFIG
