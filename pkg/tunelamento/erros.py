# tunelamento/erros.py
"""Exceções do núcleo numérico.

Tudo herda de ``TunelamentoError`` para o CLI conseguir separar falha de
configuração (exit 2) de falha numérica (exit 3).
"""


class TunelamentoError(Exception):
    pass


class DomainError(TunelamentoError, ValueError):
    """Entrada fora do domínio físico (pré-condição violada)."""


class StepFailure(TunelamentoError):
    """Controle adaptativo não atingiu a tolerância no passo mínimo."""


class DegenerateCovariance(TunelamentoError):
    pass


class RateUndefined(TunelamentoError):
    """P(q_b) abaixo do piso de underflow, Γ_f sem sentido."""


class BracketError(TunelamentoError):
    pass


class QuadratureFailure(TunelamentoError):
    pass


class NonMonotoneWarning(RuntimeWarning):
    pass
