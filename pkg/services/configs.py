# services/configs.py
import os, json
from pathlib import Path
from typing import Any, Dict, Optional

import pydantic
from dotenv import load_dotenv

from tunelamento.experiment import ScenarioConfig

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent
CONFIG_DIR = BASE_DIR / "config"

_CENARIOS = None


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (linha {line}, coluna {column})")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    pass


def _mensagem(e: pydantic.ValidationError) -> str:
    partes = []
    for err in e.errors():
        onde = ".".join(str(x) for x in err.get("loc", ())) or "cenário"
        msg = str(err.get("msg", "")).removeprefix("Value error, ")
        partes.append(f"{onde}: {msg}")
    return "; ".join(partes)


def build_config(dados: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(dados)
    except pydantic.ValidationError as e:
        raise ValidationError(_mensagem(e)) from e


def parse_text(texto: str) -> ScenarioConfig:
    try:
        dados = json.loads(texto)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from e
    if not isinstance(dados, dict):
        raise ParseError("o cenário precisa ser um objeto JSON", 1, 1)
    return build_config(dados)


def parse_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_text(f.read())


# -------------------------------------------------
# Cenários pré-definidos
# -------------------------------------------------
def load_cenarios() -> Dict[str, Dict[str, Any]]:
    global _CENARIOS
    if _CENARIOS is None:
        with open(CONFIG_DIR / "cenarios_config.json", "r", encoding="utf-8") as f:
            _CENARIOS = json.load(f)
    return _CENARIOS


def get_cenario(nome: str) -> ScenarioConfig:
    cenarios = load_cenarios()
    if nome not in cenarios:
        raise KeyError(f"Cenário não configurado: {nome}")
    return build_config(cenarios[nome])


# -------------------------------------------------
# Saída
# -------------------------------------------------
def get_output_dir(cfg: Optional[ScenarioConfig] = None) -> Path:
    """TUNEL_OUTPUT_DIR tem prioridade sobre output.dir do cenário."""
    base = os.getenv("TUNEL_OUTPUT_DIR") or (cfg.output.dir if cfg else "saida")
    pasta = Path(base)
    pasta.mkdir(parents=True, exist_ok=True)
    return pasta


def effective_config(cfg: ScenarioConfig) -> Dict[str, Any]:
    return cfg.model_dump(mode="json")


def write_effective_config(cfg: ScenarioConfig, pasta: Path) -> Path:
    destino = Path(pasta) / "effective_config.json"
    destino.write_text(json.dumps(effective_config(cfg), ensure_ascii=False, indent=2), encoding="utf-8")
    return destino
