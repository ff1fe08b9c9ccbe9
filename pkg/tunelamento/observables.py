# tunelamento/observables.py
"""Distribuição gaussiana no espaço de fase, probabilidade de tunelamento e largura de decaimento."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcx

from services.logs import evento, get_logger
from .dynamics import MomentState, TimeSeries
from .erros import DegenerateCovariance, DomainError, RateUndefined

log = get_logger(__name__)

PISO_P = 1e-300
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _det(s: MomentState) -> float:
    return s.sigma_qq * s.sigma_pp - s.sigma_pq ** 2


def wigner_density(s: MomentState, q, p):
    """Normal bivariada com média (σ_q, σ_p) e covariância [[σ_qq, σ_pq], [σ_pq, σ_pp]]."""
    det = _det(s)
    if not det > 0:
        raise DegenerateCovariance(f"det σ = {det} <= 0")
    dq = np.asarray(q, dtype=float) - s.sigma_q
    dp = np.asarray(p, dtype=float) - s.sigma_p
    forma = (s.sigma_pp * dq * dq - 2.0 * s.sigma_pq * dq * dp + s.sigma_qq * dp * dp) / det
    return np.exp(-0.5 * forma) / (2.0 * math.pi * math.sqrt(det))


def tunneling_probability(s: MomentState, q_b: float) -> float:
    """Massa da marginal em q à direita de q_b: ½·erfc((q_b − σ_q)/√(2σ_qq))."""
    return float(0.5 * erfc((q_b - s.sigma_q) / math.sqrt(2.0 * s.sigma_qq)))


def flux_density(s: MomentState, q_b: float, m: float, weighted: bool = True) -> float:
    """J(q_b) = ∫dp (p/m) W(q_b, p); sem peso, ∫dp W(q_b, p) (a marginal em q_b)."""
    if m <= 0:
        raise DomainError(f"m precisa ser > 0, recebido {m}")
    x = q_b - s.sigma_q
    marginal = math.exp(-x * x / (2.0 * s.sigma_qq)) / (_SQRT_2PI * math.sqrt(s.sigma_qq))
    if not weighted:
        return marginal
    p_condicional = s.sigma_p + s.sigma_pq / s.sigma_qq * x
    return marginal * p_condicional / m


def decay_rate(s: MomentState, q_b: float, m: float, normalize_by_mass: bool = True) -> float:
    """Largura de decaimento Γ_f em 1/T.

    Normalizado (padrão): J/P, com J o fluxo ponderado por p/m.
    Literal: a expressão impressa, sem 1/m e com erfc inteiro no denominador.
    Escrito com erfcx para não estourar quando P é pequeno.
    """
    if not s.sigma_qq > 0:
        raise DomainError(f"sigma_qq precisa ser > 0, recebido {s.sigma_qq}")
    P = tunneling_probability(s, q_b)
    if P < PISO_P:
        raise RateUndefined(f"P(q_b) = {P:.3e} abaixo do piso {PISO_P:.0e}")
    x = (q_b - s.sigma_q) / math.sqrt(2.0 * s.sigma_qq)
    numerador = s.sigma_qq * s.sigma_p + s.sigma_pq * (q_b - s.sigma_q)
    base = numerador / math.sqrt(2.0 * math.pi * s.sigma_qq ** 3) / float(erfcx(x))
    if normalize_by_mass:
        return 2.0 * base / m
    return base


def annotate(series: TimeSeries, q_b: float, m: float, normalize_by_mass: bool = True) -> TimeSeries:
    """Preenche as colunas P e Gamma_f da série (NaN onde P estoura o piso)."""
    q = series.states[:, 0]
    p = series.states[:, 1]
    qq = series.states[:, 2]
    pq = series.states[:, 4]
    x = (q_b - q) / np.sqrt(2.0 * qq)
    P = 0.5 * erfc(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        gamma = (qq * p + pq * (q_b - q)) / np.sqrt(2.0 * math.pi * qq ** 3) / erfcx(x)
    if normalize_by_mass:
        gamma = 2.0 * gamma / m
    gamma = np.where(P < PISO_P, np.nan, gamma)
    series.P = P
    series.Gamma_f = gamma
    evento(log, "OBS:annotate", {"P_final": float(P[-1]), "Gamma_final": float(gamma[-1])})
    return series
