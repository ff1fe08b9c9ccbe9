# figuras/fig5.py
# Três parábolas: um perfil por posição e profundidade do segundo poço.
from pathlib import Path
from typing import List

from services.saida import rotulo, salvar_csv
from tunelamento.experiment import ScenarioConfig
from .comum import QC_PADRAO, com_terceiro_poco, grade_q, paineis


def gerar(cfg: ScenarioConfig, pasta: Path, n_jobs: int = 1) -> List[Path]:
    arquivos = []
    for painel, V_c in paineis(cfg).items():
        for q_c in QC_PADRAO:
            cfg_c = com_terceiro_poco(cfg, q_c, V_c)
            df = cfg_c.build_potential().profile(grade_q(cfg_c))
            arquivos.append(salvar_csv(df, Path(pasta) / f"fig5_{painel}_qc_{rotulo(q_c)}.csv"))
    return arquivos
