# figuras/fig7.py
# P(t) no poço duplo, uma curva por (painel, q_c, λ).
from pathlib import Path
from typing import List

from services.saida import rotulo
from tunelamento.experiment import ScenarioConfig
from .comum import QC_PADRAO, com_terceiro_poco, paineis, salvar_curvas, series_por_lambda


def gerar(cfg: ScenarioConfig, pasta: Path, n_jobs: int = 1) -> List[Path]:
    lambdas = sorted({0.0, cfg.dynamics.lam})
    arquivos = []
    for painel, V_c in paineis(cfg).items():
        for q_c in QC_PADRAO:
            series = series_por_lambda(com_terceiro_poco(cfg, q_c, V_c), lambdas, n_jobs)
            arquivos += salvar_curvas(series, pasta, f"fig7_{painel}_qc_{rotulo(q_c)}", ["P"])
    return arquivos
