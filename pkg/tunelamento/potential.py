# tunelamento/potential.py
"""Potenciais quadráticos por partes (dois ou três segmentos suavemente unidos).

Cada segmento guarda a rigidez com sinal: C > 0 é poço, C < 0 é a barreira
invertida. Assim uma única forma quadrática cobre todos os casos.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import ndtr

from services.logs import evento, get_logger
from .erros import DomainError

log = get_logger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Tolerâncias de continuidade nas junções (relativas a max(1, |escala|))
TOL_JUNCAO = 1e-10


# =========================
# Tipos
# =========================
@dataclass(frozen=True)
class ParabolicSegment:
    q0: float          # fm
    C: float           # MeV/fm², com sinal
    V0: float          # MeV
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"segmento com domínio vazio: lo={self.lo} >= hi={self.hi}")

    def value(self, q):
        return self.V0 + 0.5 * self.C * (q - self.q0) ** 2

    def slope(self, q):
        return self.C * (q - self.q0)


@dataclass(frozen=True)
class PiecewisePotential:
    segments: Tuple[ParabolicSegment, ...]
    q_a: float
    q_b: Optional[float] = None
    B: Optional[float] = None
    q_c: Optional[float] = None
    joins: Tuple[float, ...] = field(init=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not 1 <= len(segs) <= 3:
            raise DomainError(f"esperado 1 a 3 segmentos, recebido {len(segs)}")
        if segs[0].lo != -math.inf or segs[-1].hi != math.inf:
            raise DomainError("os segmentos precisam cobrir a reta real inteira")
        for esq, dir_ in zip(segs, segs[1:]):
            if esq.hi != dir_.lo:
                raise DomainError(f"buraco/sobreposição entre segmentos em {esq.hi} / {dir_.lo}")
            _checar_continuidade(esq, dir_, esq.hi)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "joins", tuple(s.hi for s in segs[:-1]))

        if len(segs) >= 2:
            if not (self.q_a < self.q_t1 < self.q_b):
                raise DomainError(f"ordem inválida: q_a={self.q_a}, q_t1={self.q_t1}, q_b={self.q_b}")
            if self.B is None or self.B <= 0:
                raise DomainError("B = V(q_b) - V(q_a) precisa ser > 0")
        if len(segs) == 3:
            if self.q_c is None or not (self.q_b < self.q_t2 < self.q_c):
                raise DomainError(f"ordem inválida: q_b={self.q_b}, q_t2={self.q_t2}, q_c={self.q_c}")

    # ----------------------
    # Pontos notáveis
    # ----------------------
    @property
    def q_t1(self) -> Optional[float]:
        return self.joins[0] if self.joins else None

    @property
    def q_t2(self) -> Optional[float]:
        return self.joins[1] if len(self.joins) > 1 else None

    @property
    def delta_V_bc(self) -> Optional[float]:
        if len(self.segments) < 3:
            return None
        return self.segments[1].V0 - self.segments[2].V0

    def describe(self) -> Dict[str, object]:
        """Resumo estruturado (vai para o JSON do simulate)."""
        return {
            "segments": [
                {"q0": s.q0, "C": s.C, "V0": s.V0, "lo": _fmt_inf(s.lo), "hi": _fmt_inf(s.hi)}
                for s in self.segments
            ],
            "joins": list(self.joins),
            "q_a": self.q_a,
            "q_b": self.q_b,
            "q_c": self.q_c,
            "B": self.B,
            "delta_V_bc": self.delta_V_bc,
        }

    def profile(self, q_grid) -> pd.DataFrame:
        q = np.asarray(q_grid, dtype=float)
        return pd.DataFrame({
            "q": q,
            "V": evaluate(self, q),
            "dV": derivative(self, q),
            "d2V": curvature(self, q),
        })


def _fmt_inf(x: float):
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def _checar_continuidade(esq: ParabolicSegment, dir_: ParabolicSegment, q: float) -> None:
    v_esq, v_dir = esq.value(q), dir_.value(q)
    escala_v = max(1.0, abs(v_esq), abs(v_dir), abs(esq.V0), abs(dir_.V0),
                   0.5 * abs(esq.C) * (q - esq.q0) ** 2, 0.5 * abs(dir_.C) * (q - dir_.q0) ** 2)
    if abs(v_esq - v_dir) > TOL_JUNCAO * escala_v:
        raise DomainError(f"V descontínuo em q={q}: {v_esq} != {v_dir}")

    d_esq, d_dir = esq.slope(q), dir_.slope(q)
    escala_d = max(1.0, abs(d_esq), abs(d_dir))
    if abs(d_esq - d_dir) > TOL_JUNCAO * escala_d:
        raise DomainError(f"V' descontínuo em q={q}: {d_esq} != {d_dir}")


# =========================
# Construtores
# =========================
def _rigidez_do_poco(C_b: float, largura: float, altura: float) -> float:
    """Rigidez do poço que une suavemente à barreira (mesma fórmula nas duas junções)."""
    denom = C_b * largura ** 2 - 2.0 * altura
    if denom <= 0:
        raise DomainError(
            f"C_b*(q_b-q_a)^2 <= 2B: {C_b}*{largura}^2 <= 2*{altura} "
            "(barreira larga/baixa demais para junção suave)"
        )
    return 2.0 * C_b * altura / denom


def _ponto_de_juncao(q_poco: float, omega2: float, q_b: float, C_b: float) -> float:
    return (q_poco * omega2 + q_b * C_b) / (omega2 + C_b)


def harmonic_well(q0: float, C: float, V0: float = 0.0) -> PiecewisePotential:
    """Poço harmônico único, sem junções."""
    if C <= 0:
        raise DomainError(f"poço precisa de C > 0, recebido {C}")
    return PiecewisePotential(segments=(ParabolicSegment(q0=q0, C=C, V0=V0),), q_a=q0)


def build_two_parabola(q_a: float, q_b: float, B: float, C_b: float, V_a: float = 0.0) -> PiecewisePotential:
    if q_a >= q_b:
        raise DomainError(f"q_a >= q_b: {q_a} >= {q_b}")
    if B <= 0:
        raise DomainError(f"B <= 0: {B}")
    if C_b <= 0:
        raise DomainError(f"C_b <= 0: {C_b}")

    omega_a2 = _rigidez_do_poco(C_b, q_b - q_a, B)
    q_t = _ponto_de_juncao(q_a, omega_a2, q_b, C_b)

    poco = ParabolicSegment(q0=q_a, C=omega_a2, V0=V_a, hi=q_t)
    barreira = ParabolicSegment(q0=q_b, C=-C_b, V0=V_a + B, lo=q_t)
    V = PiecewisePotential(segments=(poco, barreira), q_a=q_a, q_b=q_b, B=B)
    evento(log, "POT:duas", {"omega_a2": omega_a2, "q_t": q_t})
    return V


def build_three_parabola(base: PiecewisePotential, q_c: float, V_c: float) -> PiecewisePotential:
    if len(base.segments) != 2:
        raise DomainError(f"base precisa ter 2 segmentos, tem {len(base.segments)}")
    poco_a, barreira = base.segments
    q_b = base.q_b
    C_b = -barreira.C
    if q_c <= q_b:
        raise DomainError(f"q_c <= q_b: {q_c} <= {q_b}")
    delta_V = barreira.V0 - V_c
    if delta_V <= 0:
        raise DomainError(f"ΔV_bc = V(q_b) - V_c <= 0: {delta_V}")

    omega_c2 = _rigidez_do_poco(C_b, q_c - q_b, delta_V)
    q_t2 = _ponto_de_juncao(q_c, omega_c2, q_b, C_b)

    barreira = ParabolicSegment(q0=q_b, C=barreira.C, V0=barreira.V0, lo=barreira.lo, hi=q_t2)
    poco_c = ParabolicSegment(q0=q_c, C=omega_c2, V0=V_c, lo=q_t2)
    V = PiecewisePotential(segments=(poco_a, barreira, poco_c), q_a=base.q_a, q_b=q_b, B=base.B, q_c=q_c)
    evento(log, "POT:tres", {"omega_c2": omega_c2, "q_t2": q_t2, "delta_V_bc": delta_V})
    return V


# =========================
# Avaliação
# =========================
def segment_at(V: PiecewisePotential, q: float) -> int:
    # Na junção exata vence o segmento da esquerda
    return bisect_left(V.joins, q)


def _indices(V: PiecewisePotential, q) -> np.ndarray:
    return np.searchsorted(np.asarray(V.joins, dtype=float), q, side="left")


def evaluate(V: PiecewisePotential, q):
    if np.ndim(q) == 0:
        return V.segments[segment_at(V, q)].value(q)
    idx = _indices(V, q)
    return np.choose(idx, [s.value(q) for s in V.segments])


def derivative(V: PiecewisePotential, q):
    if np.ndim(q) == 0:
        return V.segments[segment_at(V, q)].slope(q)
    idx = _indices(V, q)
    return np.choose(idx, [s.slope(q) for s in V.segments])


def curvature(V: PiecewisePotential, q):
    if np.ndim(q) == 0:
        return V.segments[segment_at(V, q)].C
    idx = _indices(V, q)
    return np.asarray([s.C for s in V.segments])[idx]


# =========================
# Médias gaussianas de V' e V''
# =========================
def _phi(z: float) -> float:
    if math.isinf(z):
        return 0.0
    return math.exp(-0.5 * z * z) / _SQRT_2PI


def _massa(a: float, b: float) -> float:
    """Φ(b) - Φ(a) sem cancelamento nas caudas."""
    if a > 0:
        return float(ndtr(-a) - ndtr(-b))
    return float(ndtr(b) - ndtr(a))


def gaussian_force_moments(V: PiecewisePotential, sigma_q: float, sigma_qq: float) -> Tuple[float, float]:
    """(E[V'(q)], E[V''(q)]) para q ~ N(sigma_q, sigma_qq), forma fechada.

    Vale a identidade de Stein E[V'(q)(q - sigma_q)] = sigma_qq * E[V''(q)],
    que é como a dinâmica fecha os traços mistos.
    """
    if not sigma_qq > 0:
        raise DomainError(f"sigma_qq precisa ser > 0, recebido {sigma_qq}")
    s = math.sqrt(sigma_qq)
    media_dv = 0.0
    media_d2v = 0.0
    for seg in V.segments:
        a = (seg.lo - sigma_q) / s
        b = (seg.hi - sigma_q) / s
        m = _massa(a, b)
        media_dv += seg.C * ((sigma_q - seg.q0) * m + s * (_phi(a) - _phi(b)))
        media_d2v += seg.C * m
    return media_dv, media_d2v


def junction_distance(V: PiecewisePotential, q: float) -> float:
    """Distância de q até a junção mais próxima (inf sem junções)."""
    if not V.joins:
        return math.inf
    return min(abs(q - j) for j in V.joins)

