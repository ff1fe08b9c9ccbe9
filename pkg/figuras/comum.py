# figuras/comum.py
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from joblib import Parallel, delayed

from services.logs import evento, get_logger
from services.saida import rotulo, salvar_csv
from tunelamento.dynamics import TimeSeries
from tunelamento.experiment import ScenarioConfig, critical_lambda, run_scenario, stand_in_lambdas

log = get_logger(__name__)

QC_PADRAO = (16.5, 18.0, 20.0, 22.0)


@lru_cache(maxsize=8)
def lambda_critico(cfg_json: str) -> float:
    return critical_lambda(ScenarioConfig.model_validate_json(cfg_json))


def lambdas_da_figura(cfg: ScenarioConfig) -> List[float]:
    """Pontos da varredura do cenário ou, sem eles, {0, 0.25, 0.75, 1.25}·λ_cr."""
    if cfg.sweep.lambdas:
        return list(cfg.sweep.lambdas)
    lam_cr = lambda_critico(cfg.model_dump_json())
    evento(log, "FIG:lambda_cr", {"lam_cr": lam_cr}, nivel=20)
    return stand_in_lambdas(lam_cr)


def paineis(cfg: ScenarioConfig) -> Dict[str, float]:
    """Profundidade do segundo poço por painel: (a) fundo igual ao do primeiro, (b) V_c = 0."""
    return {"a": cfg.potential.V_a, "b": 0.0}


def com_terceiro_poco(cfg: ScenarioConfig, q_c: float, V_c: float) -> ScenarioConfig:
    novo = cfg.potential.model_copy(update={"q_c": q_c, "V_c": V_c})
    return ScenarioConfig.model_validate({**cfg.model_dump(), "potential": novo.model_dump()})


def sem_terceiro_poco(cfg: ScenarioConfig) -> ScenarioConfig:
    novo = cfg.potential.model_copy(update={"q_c": None, "V_c": None})
    return ScenarioConfig.model_validate({**cfg.model_dump(), "potential": novo.model_dump()})


def series_por_lambda(cfg: ScenarioConfig, lambdas: Sequence[float], n_jobs: int = 1) -> Dict[float, TimeSeries]:
    series = Parallel(n_jobs=n_jobs)(delayed(run_scenario)(cfg, lam) for lam in lambdas)
    return dict(zip(lambdas, series))


def salvar_curvas(series: Dict[float, TimeSeries], pasta: Path, prefixo: str, colunas: Sequence[str]) -> List[Path]:
    arquivos = []
    for lam, s in series.items():
        df = s.to_frame()[["t", *colunas]]
        arquivos.append(salvar_csv(df, Path(pasta) / f"{prefixo}_lambda_{rotulo(lam)}.csv"))
    return arquivos


def grade_q(cfg: ScenarioConfig, n: int = 701) -> np.ndarray:
    pot = cfg.potential
    direita = pot.q_c + 4.0 if pot.q_c is not None else pot.q_b + 4.0
    return np.linspace(pot.q_a - 4.0, direita, n)
