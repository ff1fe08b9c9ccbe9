from typing import Any, Dict

import pytest

from services.configs import build_config
from tunelamento.experiment import ScenarioConfig
from tunelamento.potential import PiecewisePotential, build_three_parabola, build_two_parabola

M_REF = 13.57


def _cenario(**secoes: Dict[str, Any]) -> ScenarioConfig:
    dados: Dict[str, Any] = {
        "potential": {"q_a": 10.0, "q_b": 13.0, "B": 10.0, "C_b": 5.0, "V_a": 0.0},
        "dynamics": {"m": M_REF, "dt": 1e-2, "t_end": 60.0},
        "initial": {"sigma_p": 1200.0},
    }
    for nome, valores in secoes.items():
        dados[nome] = {**dados.get(nome, {}), **valores}
    return build_config(dados)


@pytest.fixture
def make_cfg():
    """Cenário de referência com seções sobrescritas: make_cfg(dynamics={"t_end": 5})."""
    return _cenario


@pytest.fixture
def ref_cfg() -> ScenarioConfig:
    return _cenario()


@pytest.fixture
def V2() -> PiecewisePotential:
    return build_two_parabola(10.0, 13.0, 10.0, 5.0)


@pytest.fixture
def V3(V2) -> PiecewisePotential:
    return build_three_parabola(V2, 16.5, 0.0)
