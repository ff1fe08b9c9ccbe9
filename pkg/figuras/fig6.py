# figuras/fig6.py
# σ_q(t) no poço duplo: painéis (a)/(b) × q_c × λ ∈ {0, abaixo, acima de λ_cr}.
from pathlib import Path
from typing import List

from services.saida import rotulo
from tunelamento.experiment import ScenarioConfig
from .comum import (
    QC_PADRAO,
    com_terceiro_poco,
    lambda_critico,
    paineis,
    salvar_curvas,
    sem_terceiro_poco,
    series_por_lambda,
)


def gerar(cfg: ScenarioConfig, pasta: Path, n_jobs: int = 1) -> List[Path]:
    if cfg.sweep.lambdas:
        lambdas = list(cfg.sweep.lambdas)
    else:
        # o limiar é o da barreira, o mesmo para todo q_c
        lam_cr = lambda_critico(sem_terceiro_poco(cfg).model_dump_json())
        lambdas = [0.0, 0.75 * lam_cr, 1.25 * lam_cr]
    arquivos = []
    for painel, V_c in paineis(cfg).items():
        for q_c in QC_PADRAO:
            series = series_por_lambda(com_terceiro_poco(cfg, q_c, V_c), lambdas, n_jobs)
            arquivos += salvar_curvas(series, pasta, f"fig6_{painel}_qc_{rotulo(q_c)}", ["sigma_q"])
    return arquivos
