# figuras/fig1.py
# Duas parábolas: perfil do potencial e pacote inicial.
from pathlib import Path
from typing import List

import numpy as np

from services.saida import salvar_csv
from tunelamento.experiment import ScenarioConfig, initial_state, lindblad_params
from .comum import grade_q, sem_terceiro_poco


def gerar(cfg: ScenarioConfig, pasta: Path, n_jobs: int = 1) -> List[Path]:
    cfg = sem_terceiro_poco(cfg)
    V = cfg.build_potential()
    lam = cfg.dynamics.lam
    p = lindblad_params(cfg, lam)
    s0 = initial_state(cfg, lam, (p.D_qq, p.D_pp, p.D_pq))

    df = V.profile(grade_q(cfg))
    df["rho0"] = np.exp(-0.5 * (df["q"] - s0.sigma_q) ** 2 / s0.sigma_qq) / np.sqrt(2.0 * np.pi * s0.sigma_qq)
    return [salvar_csv(df, Path(pasta) / "fig1_potential.csv")]
