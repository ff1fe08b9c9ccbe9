# services/logs.py
import os
import json
import logging

import coloredlogs

FORMATO = "%(asctime)s %(name)s %(levelname)s %(message)s"


def get_logger(nome: str) -> logging.Logger:
    return logging.getLogger(nome)


def evento(logger: logging.Logger, tag: str, data: dict | None = None, nivel: int = logging.DEBUG) -> None:
    """Linha única ``[TAG] {json}``; nunca levanta por payload estranho."""
    if not logger.isEnabledFor(nivel):
        return
    try:
        texto = json.dumps(data or {}, ensure_ascii=False, default=str)[:2000]
    except Exception:
        texto = "(payload não serializável)"
    logger.log(nivel, "[%s] %s", tag, texto)


def configurar(nivel: str | None = None) -> str:
    """Instala coloredlogs no root logger (nível via TUNEL_LOG_LEVEL)."""
    nivel = (nivel or os.getenv("TUNEL_LOG_LEVEL", "INFO")).upper()
    coloredlogs.install(level=nivel, fmt=FORMATO)
    return nivel
