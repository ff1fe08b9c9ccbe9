# services/saida.py
import json
from pathlib import Path
from typing import Any, Dict

import pandas as pd

FORMATO_FLOAT = "%.17g"


def salvar_csv(df: pd.DataFrame, destino) -> Path:
    destino = Path(destino)
    destino.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(destino, index=False, float_format=FORMATO_FLOAT, lineterminator="\n")
    return destino


def salvar_json(dados: Dict[str, Any], destino) -> Path:
    destino = Path(destino)
    destino.parent.mkdir(parents=True, exist_ok=True)
    destino.write_text(json.dumps(dados, ensure_ascii=False, indent=2, default=str), encoding="utf-8")
    return destino


def rotulo(valor: float) -> str:
    """Valor numérico seguro para nome de arquivo (0.075 -> 0.075, 1e-05 -> 1e-05)."""
    return format(float(valor), ".6g")
