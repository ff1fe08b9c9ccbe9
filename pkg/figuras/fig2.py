# figuras/fig2.py
# Médias σ_q(t), σ_p(t) para os valores de λ da figura.
from pathlib import Path
from typing import List

from tunelamento.experiment import ScenarioConfig
from .comum import lambdas_da_figura, salvar_curvas, sem_terceiro_poco, series_por_lambda


def gerar(cfg: ScenarioConfig, pasta: Path, n_jobs: int = 1) -> List[Path]:
    cfg = sem_terceiro_poco(cfg)
    series = series_por_lambda(cfg, lambdas_da_figura(cfg), n_jobs)
    return salvar_curvas(series, pasta, "fig2", ["sigma_q", "sigma_p"])
