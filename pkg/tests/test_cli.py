import json

import pandas as pd
import pytest
from typer.testing import CliRunner

import app as cli
from tunelamento.erros import StepFailure

runner = CliRunner()

CENARIO = {
    "potential": {"q_a": 10.0, "q_b": 13.0, "B": 10.0, "C_b": 5.0, "V_a": 0.0},
    "dynamics": {"m": 13.57, "lam": 0.05, "dt": 0.01, "t_end": 2.0},
    "sweep": {"lambdas": [0.0, 0.05]},
}


@pytest.fixture
def saida(tmp_path, monkeypatch):
    pasta = tmp_path / "saida"
    monkeypatch.setenv("TUNEL_OUTPUT_DIR", str(pasta))
    return pasta


def _cenario(tmp_path, **dynamics) -> str:
    dados = json.loads(json.dumps(CENARIO))
    dados["dynamics"].update(dynamics)
    caminho = tmp_path / "cenario.json"
    caminho.write_text(json.dumps(dados), encoding="utf-8")
    return str(caminho)


def test_simulate_writes_series_and_summary(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["simulate", _cenario(tmp_path)])
    assert r.exit_code == 0, r.output
    df = pd.read_csv(saida / "simulate_lambda_0.05.csv")
    assert list(df.columns) == ["t", "sigma_q", "sigma_p", "sigma_qq", "sigma_pp", "sigma_pq", "P", "Gamma_f"]
    assert len(df) == 201
    resumo = json.loads((saida / "simulate_lambda_0.05.json").read_text(encoding="utf-8"))
    assert resumo["classification"] == "escaped"
    assert resumo["P_inf"] is None
    assert resumo["potential"]["joins"] == [pytest.approx(105.0 / 9.0)]
    assert (saida / "effective_config.json").exists()


def test_simulate_lambda_override(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["simulate", _cenario(tmp_path), "--lam", "0.5"])
    assert r.exit_code == 0, r.output
    assert (saida / "simulate_lambda_0.5.csv").exists()


def test_csv_output_is_byte_stable(tmp_path, monkeypatch) -> None:
    cenario = _cenario(tmp_path)
    conteudos = []
    for nome in ("a", "b"):
        monkeypatch.setenv("TUNEL_OUTPUT_DIR", str(tmp_path / nome))
        assert runner.invoke(cli.app, ["simulate", cenario]).exit_code == 0
        conteudos.append((tmp_path / nome / "simulate_lambda_0.05.csv").read_bytes())
    assert conteudos[0] == conteudos[1]


def test_invalid_config_exits_with_config_code(tmp_path, saida) -> None:
    caminho = tmp_path / "ruim.json"
    dados = json.loads(json.dumps(CENARIO))
    dados["potential"]["B"] = 25.0
    caminho.write_text(json.dumps(dados), encoding="utf-8")
    r = runner.invoke(cli.app, ["simulate", str(caminho)])
    assert r.exit_code == cli.EXIT_CONFIG
    assert "2B" in r.output


def test_unknown_preset_exits_with_config_code(saida) -> None:
    r = runner.invoke(cli.app, ["simulate", "nao_existe"])
    assert r.exit_code == cli.EXIT_CONFIG


def test_numerical_failure_exits_with_numeric_code(tmp_path, saida, monkeypatch) -> None:
    def falha(cfg, lam):
        raise StepFailure("passo abaixo do mínimo")

    monkeypatch.setattr(cli, "run_scenario", falha)
    r = runner.invoke(cli.app, ["simulate", _cenario(tmp_path)])
    assert r.exit_code == cli.EXIT_NUMERICO
    assert "StepFailure" in r.output


def test_sweep_writes_one_row_per_lambda(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["sweep", _cenario(tmp_path, t_end=45.0)])
    assert r.exit_code == 0, r.output
    df = pd.read_csv(saida / "sweep.csv")
    assert list(df["lambda"]) == [0.0, 0.05]
    assert json.loads((saida / "sweep.json").read_text(encoding="utf-8"))["n"] == 2


def test_critical_writes_result(tmp_path, saida, monkeypatch) -> None:
    vistos = {}

    def falso(cfg, bracket, tol):
        vistos["bracket"], vistos["tol"] = bracket, tol
        return 0.1

    monkeypatch.setattr(cli, "critical_lambda", falso)
    r = runner.invoke(cli.app, ["critical", _cenario(tmp_path), "--hi", "0.5", "--tol", "1e-3"])
    assert r.exit_code == 0, r.output
    assert vistos == {"bracket": (0.0, 0.5), "tol": 1e-3}
    resultado = json.loads((saida / "critical.json").read_text(encoding="utf-8"))
    assert resultado["lambda_cr"] == 0.1


def test_figure_four_writes_one_csv_per_lambda(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["figures", _cenario(tmp_path), "--which", "4"])
    assert r.exit_code == 0, r.output
    for nome in ("fig4_lambda_0.csv", "fig4_lambda_0.05.csv"):
        df = pd.read_csv(saida / nome)
        assert list(df.columns) == ["t", "P"]
        assert df["P"].between(0.0, 1.0).all()


def test_figure_one_writes_potential_profile(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["figures", _cenario(tmp_path), "--which", "1"])
    assert r.exit_code == 0, r.output
    df = pd.read_csv(saida / "fig1_potential.csv")
    assert list(df.columns) == ["q", "V", "dV", "d2V", "rho0"]
    assert df.loc[df["q"] <= 13.0, "V"].min() == pytest.approx(0.0, abs=1e-3)


def test_figure_five_writes_both_depth_panels(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["figures", _cenario(tmp_path), "--which", "5"])
    assert r.exit_code == 0, r.output
    for painel in ("a", "b"):
        for q_c in ("16.5", "18", "20", "22"):
            df = pd.read_csv(saida / f"fig5_{painel}_qc_{q_c}.csv")
            assert df["q"].max() == pytest.approx(float(q_c) + 4.0)
            direita = df.loc[df["q"] >= float(q_c) - 0.5, "V"]
            assert direita.min() == pytest.approx(0.0, abs=0.05)


@pytest.mark.parametrize("numero, coluna", [("6", "sigma_q"), ("7", "P")])
def test_double_well_figures_cover_panels_and_positions(tmp_path, saida, numero, coluna) -> None:
    r = runner.invoke(cli.app, ["figures", _cenario(tmp_path), "--which", numero])
    assert r.exit_code == 0, r.output
    for painel in ("a", "b"):
        for q_c in ("16.5", "18", "20", "22"):
            for lam in ("0", "0.05"):
                df = pd.read_csv(saida / f"fig{numero}_{painel}_qc_{q_c}_lambda_{lam}.csv")
                assert list(df.columns) == ["t", coluna]
                assert len(df) == 201


def test_figure_number_out_of_range(tmp_path, saida) -> None:
    r = runner.invoke(cli.app, ["figures", _cenario(tmp_path), "--which", "8"])
    assert r.exit_code != 0


@pytest.mark.parametrize("passou,codigo", [(True, 0), (False, 3)])
def test_validate_exit_code_follows_report(saida, monkeypatch, passou, codigo) -> None:
    relatorio = {"seed": 1, "n_mc": 1000, "passed": passou,
                 "checks": [{"name": "x", "measured": 1e-12, "tolerance": 1e-10, "passed": passou}]}
    monkeypatch.setattr(cli, "run_suite", lambda seed, n_mc, n_jobs: relatorio)
    r = runner.invoke(cli.app, ["validate", "--seed", "1", "--n-mc", "1000"])
    assert r.exit_code == codigo
    assert json.loads((saida / "validation.json").read_text(encoding="utf-8"))["passed"] is passou


def test_help_lists_defaults() -> None:
    r = runner.invoke(cli.app, ["--help"])
    assert r.exit_code == 0
    for comando in ("simulate", "sweep", "critical", "figures", "validate"):
        assert comando in r.output
