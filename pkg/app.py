import importlib
import traceback
from pathlib import Path
from typing import Optional

import typer
from dotenv import load_dotenv

from services import configs
from services.logs import configurar, evento, get_logger
from services.saida import rotulo, salvar_csv, salvar_json
from tunelamento.erros import TunelamentoError
from tunelamento.experiment import asymptote, critical_lambda, friction_sweep, run_scenario
from tunelamento.validation import run_suite

load_dotenv()

log = get_logger("tunelamento.cli")

EXIT_CONFIG = 2
EXIT_NUMERICO = 3

PADROES = (
    "Padrões do cenário: dynamics.dt=1e-3 T, dynamics.t_end=100 T, dynamics.mode=centroid, "
    "dynamics.method=rk4, dynamics.stride=1, initial.sigma_p=1200 MeV/c, sweep.window=20 T, "
    "sweep.plateau_tol=1e-4, sweep.bracket=[0, 1] 1/T, sweep.critical_tol=1e-4 1/T. "
    "TUNEL_OUTPUT_DIR sobrescreve output.dir; TUNEL_LOG_LEVEL ajusta o log."
)

app = typer.Typer(add_completion=False, help="Tunelamento dissipativo de pacote gaussiano.", epilog=PADROES)


# -------------------------------------------------
# Helpers
# -------------------------------------------------
def _carregar(config: str):
    """Arquivo JSON ou nome de cenário em config/cenarios_config.json."""
    if Path(config).exists():
        return configs.parse_config(config)
    try:
        return configs.get_cenario(config)
    except KeyError as e:
        raise configs.ConfigError(f"nem arquivo nem cenário conhecido: {config}") from e


def _executar(config: str, acao):
    """Carrega o cenário, grava o effective_config e roda ``acao(cfg, pasta)``."""
    try:
        cfg = _carregar(config)
    except (configs.ConfigError, OSError) as e:
        typer.echo(f"[CLI] erro de configuração: {e}", err=True)
        raise typer.Exit(EXIT_CONFIG)

    pasta = configs.get_output_dir(cfg)
    configs.write_effective_config(cfg, pasta)
    try:
        acao(cfg, pasta)
    except TunelamentoError as e:
        traceback.print_exc()
        typer.echo(f"[CLI] falha numérica: {type(e).__name__}: {e}", err=True)
        raise typer.Exit(EXIT_NUMERICO)


@app.callback()
def main(log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING...")):
    configurar(log_level)


# -------------------------------------------------
# Subcomandos
# -------------------------------------------------
@app.command()
def simulate(
    config: str = typer.Argument(..., help="cenário JSON ou nome de cenário pré-definido"),
    lam: Optional[float] = typer.Option(None, "--lam", help="λ (1/T); padrão: dynamics.lam"),
):
    """Uma trajetória: série temporal completa com P e Gamma_f."""
    def acao(cfg, pasta):
        valor = cfg.dynamics.lam if lam is None else lam
        series = run_scenario(cfg, valor)
        a = asymptote(series, cfg.sweep.window, cfg.sweep.plateau_tol)
        salvar_csv(series.to_frame(), pasta / f"simulate_lambda_{rotulo(valor)}.csv")
        resumo = {
            "lambda": valor,
            "classification": series.meta["classification"],
            "P_inf": a.P_inf,
            "t90": a.t90,
            "potential": cfg.build_potential().describe(),
            "final": series.to_frame().iloc[-1].to_dict(),
        }
        salvar_json(resumo, pasta / f"simulate_lambda_{rotulo(valor)}.json")
        typer.echo(f"[SIM] λ={valor} -> {resumo['classification']} (P_inf={resumo['P_inf']})")

    _executar(config, acao)


@app.command()
def sweep(
    config: str = typer.Argument(...),
    threads: int = typer.Option(1, "--threads", min=1, help="limite de processos da varredura"),
):
    """Varredura em λ: P_inf, classificação e t90 por ponto."""
    def acao(cfg, pasta):
        resultado = friction_sweep(cfg, n_jobs=threads)
        salvar_csv(resultado.to_frame(), pasta / "sweep.csv")
        salvar_json(resultado.summary(), pasta / "sweep.json")
        typer.echo(f"[SWEEP] {len(resultado.entries)} pontos gravados em {pasta}")

    _executar(config, acao)


@app.command()
def critical(
    config: str = typer.Argument(...),
    lo: Optional[float] = typer.Option(None, "--lo"),
    hi: Optional[float] = typer.Option(None, "--hi"),
    tol: Optional[float] = typer.Option(None, "--tol"),
):
    """λ crítico por bisseção na classificação."""
    def acao(cfg, pasta):
        b_lo, b_hi = cfg.sweep.bracket
        intervalo = (b_lo if lo is None else lo, b_hi if hi is None else hi)
        lam_cr = critical_lambda(cfg, intervalo, tol)
        salvar_json({"lambda_cr": lam_cr, "bracket": list(intervalo),
                     "tol": tol or cfg.sweep.critical_tol}, pasta / "critical.json")
        typer.echo(f"[CRIT] λ_cr = {lam_cr:.6g} 1/T")

    _executar(config, acao)


@app.command()
def figures(
    config: str = typer.Argument(...),
    which: int = typer.Option(..., "--which", min=1, max=7, help="número da figura (1-7)"),
    threads: int = typer.Option(1, "--threads", min=1),
):
    """Reproduz uma figura: um CSV por curva."""
    def acao(cfg, pasta):
        modulo = importlib.import_module(f"figuras.fig{which}")
        arquivos = modulo.gerar(cfg, pasta, n_jobs=threads)
        evento(log, "CLI:figura", {"which": which, "arquivos": [str(a) for a in arquivos]}, nivel=20)
        typer.echo(f"[FIG] fig{which}: {len(arquivos)} arquivo(s)")

    _executar(config, acao)


@app.command()
def validate(
    seed: int = typer.Option(20240601, "--seed"),
    n_mc: int = typer.Option(20_000, "--n-mc", min=1000, help="trajetórias do Monte Carlo"),
    threads: int = typer.Option(1, "--threads", min=1),
):
    """Roda os oráculos e grava validation.json."""
    pasta = configs.get_output_dir()
    try:
        relatorio = run_suite(seed=seed, n_mc=n_mc, n_jobs=threads)
    except TunelamentoError as e:
        typer.echo(f"[CLI] falha numérica: {type(e).__name__}: {e}", err=True)
        raise typer.Exit(EXIT_NUMERICO)
    salvar_json(relatorio, pasta / "validation.json")
    for c in relatorio["checks"]:
        typer.echo(f"[VAL] {'ok ' if c['passed'] else 'FALHOU'} {c['name']}: {c['measured']:.3e} (tol {c['tolerance']:.0e})")
    if not relatorio["passed"]:
        raise typer.Exit(EXIT_NUMERICO)


if __name__ == "__main__":
    app()
