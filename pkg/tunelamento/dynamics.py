# tunelamento/dynamics.py
"""Equações de movimento de médias e covariâncias (forma de Lindblad).

Vetor de estado, sempre nesta ordem: (sigma_q, sigma_p, sigma_qq, sigma_pp, sigma_pq).
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from services.logs import evento, get_logger
from .erros import DomainError, StepFailure
from .potential import ParabolicSegment, PiecewisePotential, gaussian_force_moments, segment_at
from .unidades import HBAR

log = get_logger(__name__)

COLUNAS = ("sigma_q", "sigma_p", "sigma_qq", "sigma_pp", "sigma_pq")

TOL_POUSO = 1e-12      # fm, distância máxima do ponto de junção ao pousar
PASSO_MINIMO = 1e-8    # T, passo mínimo do controle adaptativo
MAX_JUNCOES = 64       # pousos por passo antes de desistir


class ClosureMode(str, Enum):
    CENTROID = "centroid"
    GAUSSIAN_SMEARED = "gaussian_smeared"


# =========================
# Tipos de valor
# =========================
@dataclass(frozen=True)
class MomentState:
    t: float
    sigma_q: float
    sigma_p: float
    sigma_qq: float
    sigma_pp: float
    sigma_pq: float

    def __post_init__(self):
        if not (self.sigma_qq > 0 and self.sigma_pp > 0):
            raise DomainError(f"covariâncias precisam ser positivas: sigma_qq={self.sigma_qq}, sigma_pp={self.sigma_pp}")

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma_q, self.sigma_p, self.sigma_qq, self.sigma_pp, self.sigma_pq])

    @classmethod
    def from_array(cls, t: float, x: Sequence[float]) -> "MomentState":
        return cls(float(t), *(float(v) for v in x))

    @property
    def uncertainty(self) -> float:
        return self.sigma_qq * self.sigma_pp - self.sigma_pq ** 2


@dataclass(frozen=True)
class LindbladParams:
    lam: float
    D_qq: float
    D_pp: float
    D_pq: float
    m: float
    hbar: float = HBAR

    def __post_init__(self):
        if self.lam < 0 or self.m <= 0 or self.hbar <= 0 or self.D_qq < 0 or self.D_pp < 0:
            raise DomainError(
                f"parâmetros de Lindblad inválidos: lam={self.lam}, m={self.m}, hbar={self.hbar}, "
                f"D_qq={self.D_qq}, D_pp={self.D_pp}"
            )
        limite = 0.25 * (self.lam * self.hbar) ** 2
        if self.positivity_margin < -1e-12 * max(limite, 1e-300):
            evento(log, "DYN:positividade", {
                "D_qq*D_pp-D_pq^2": self.D_qq * self.D_pp - self.D_pq ** 2,
                "lam^2*hbar^2/4": limite,
            }, nivel=30)

    @property
    def positivity_margin(self) -> float:
        """D_qq·D_pp − D_pq² − λ²ħ²/4 (>= 0 para um gerador de Lindblad)."""
        return self.D_qq * self.D_pp - self.D_pq ** 2 - 0.25 * (self.lam * self.hbar) ** 2


@dataclass(frozen=True)
class IntegrationControls:
    dt: float = 1e-3
    t_end: float = 100.0
    stride: int = 1
    method: str = "rk4"          # rk4 | adaptive | exact
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0 or self.stride < 1:
            raise DomainError(f"controles inválidos: dt={self.dt}, t_end={self.t_end}, stride={self.stride}")
        if self.method not in ("rk4", "adaptive", "exact"):
            raise DomainError(f"método desconhecido: {self.method}")


@dataclass
class TimeSeries:
    t: np.ndarray
    states: np.ndarray                  # (N, 5)
    P: Optional[np.ndarray] = None
    Gamma_f: Optional[np.ndarray] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def column(self, nome: str) -> np.ndarray:
        if nome == "t":
            return self.t
        if nome in ("P", "Gamma_f"):
            return getattr(self, nome)
        return self.states[:, COLUNAS.index(nome)]

    def state(self, i: int) -> MomentState:
        return MomentState.from_array(self.t[i], self.states[i])

    @property
    def final(self) -> MomentState:
        return self.state(-1)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.states, columns=list(COLUNAS))
        df.insert(0, "t", self.t)
        if self.P is not None:
            df["P"] = self.P
        if self.Gamma_f is not None:
            df["Gamma_f"] = self.Gamma_f
        return df


# =========================
# Lado direito
# =========================
def _campo(V: PiecewisePotential, p: LindbladParams, mode: ClosureMode) -> Callable[[Tuple[float, ...]], Tuple[float, ...]]:
    segs, joins = V.segments, V.joins
    lam, m = p.lam, p.m
    dqq2, dpp2, dpq2 = 2.0 * p.D_qq, 2.0 * p.D_pp, 2.0 * p.D_pq
    centroide = ClosureMode(mode) is ClosureMode.CENTROID

    def f(x):
        q, pm, qq, pp, pq = x
        if centroide:
            seg = segs[bisect_left(joins, q)]
            K = seg.C
            F = K * (q - seg.q0)
        else:
            F, K = gaussian_force_moments(V, q, qq)
        return (
            -lam * q + pm / m,
            -F - lam * pm,
            -2.0 * lam * qq + 2.0 * pq / m + dqq2,
            -2.0 * lam * pp - 2.0 * K * pq + dpp2,
            -2.0 * lam * pq + pp / m - K * qq + dpq2,
        )

    return f


def _campo_segmento(seg: ParabolicSegment, p: LindbladParams) -> Callable[[Tuple[float, ...]], Tuple[float, ...]]:
    """Campo do modo centroid com K e q0 fixos num segmento."""
    lam, m, K, q0 = p.lam, p.m, seg.C, seg.q0
    dqq2, dpp2, dpq2 = 2.0 * p.D_qq, 2.0 * p.D_pp, 2.0 * p.D_pq

    def f(x):
        q, pm, qq, pp, pq = x
        return (
            -lam * q + pm / m,
            -K * (q - q0) - lam * pm,
            -2.0 * lam * qq + 2.0 * pq / m + dqq2,
            -2.0 * lam * pp - 2.0 * K * pq + dpp2,
            -2.0 * lam * pq + pp / m - K * qq + dpq2,
        )

    return f


def _campos(V: PiecewisePotential, p: LindbladParams, mode: ClosureMode) -> List[Callable]:
    """Um campo por segmento; no modo gaussian_smeared o mesmo campo liso em todos."""
    if ClosureMode(mode) is ClosureMode.CENTROID:
        return [_campo_segmento(seg, p) for seg in V.segments]
    return [_campo(V, p, mode)] * len(V.segments)


def rhs(s: MomentState, V: PiecewisePotential, p: LindbladParams, mode: ClosureMode = ClosureMode.CENTROID) -> np.ndarray:
    """d(MomentState)/dt como vetor de 5 componentes."""
    x = (s.sigma_q, s.sigma_p, s.sigma_qq, s.sigma_pp, s.sigma_pq)
    return np.array(_campo(V, p, mode)(x))


def _passo_rk4(f, x, h):
    k1 = f(x)
    k2 = f(tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k1)))
    k3 = f(tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k2)))
    k4 = f(tuple(xi + h * ki for xi, ki in zip(x, k3)))
    return tuple(
        xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    )


def step_rk4(s: MomentState, V: PiecewisePotential, p: LindbladParams, mode: ClosureMode, dt: float) -> MomentState:
    """Um passo RK4; no modo centroid todos os estágios usam o segmento de s."""
    if dt <= 0:
        raise DomainError(f"dt precisa ser > 0, recebido {dt}")
    x = (s.sigma_q, s.sigma_p, s.sigma_qq, s.sigma_pp, s.sigma_pq)
    f = _campos(V, p, mode)[segment_at(V, s.sigma_q)]
    return MomentState.from_array(s.t + dt, _passo_rk4(f, x, dt))


# =========================
# Propagador exato por segmento
# =========================
@dataclass(frozen=True)
class AffineMap:
    matrix: np.ndarray     # (5, 5)
    offset: np.ndarray     # (5,)

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float) + self.offset

    def then(self, depois: "AffineMap") -> "AffineMap":
        """Aplica self e depois ``depois``."""
        return AffineMap(depois.matrix @ self.matrix, depois.matrix @ self.offset + depois.offset)

    def power(self, k: int) -> "AffineMap":
        resultado = identity_map()
        for _ in range(k):
            resultado = resultado.then(self)
        return resultado


def identity_map() -> AffineMap:
    return AffineMap(np.eye(5), np.zeros(5))


def _exp_afim(A: np.ndarray, b: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    # exp([[A, b], [0, 0]] dt) = [[e^{A dt}, ∫ e^{A s} ds b], [0, 1]]
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = b
    E = expm(M * dt)
    return E[:n, :n], E[:n, n]


@lru_cache(maxsize=256)
def segment_propagator_exact(seg: ParabolicSegment, p: LindbladParams, dt: float) -> AffineMap:
    """Mapa afim exato do vetor de momentos enquanto a dinâmica fica em ``seg``."""
    if dt <= 0:
        raise DomainError(f"dt precisa ser > 0, recebido {dt}")
    lam, m, C = p.lam, p.m, seg.C

    # bloco das médias (q, p)
    A_med = np.array([[-lam, 1.0 / m], [-C, -lam]])
    b_med = np.array([0.0, C * seg.q0])
    E_med, c_med = _exp_afim(A_med, b_med, dt)

    # bloco das covariâncias (qq, pp, pq)
    A_cov = np.array([
        [-2.0 * lam, 0.0, 2.0 / m],
        [0.0, -2.0 * lam, -2.0 * C],
        [-C, 1.0 / m, -2.0 * lam],
    ])
    b_cov = 2.0 * np.array([p.D_qq, p.D_pp, p.D_pq])
    E_cov, c_cov = _exp_afim(A_cov, b_cov, dt)

    matriz = np.zeros((5, 5))
    matriz[:2, :2] = E_med
    matriz[2:, 2:] = E_cov
    return AffineMap(matriz, np.concatenate([c_med, c_cov]))


def segment_fixed_point(seg: ParabolicSegment, p: LindbladParams) -> Tuple[float, float]:
    """Ponto fixo (q*, p*) das médias num segmento: q* = C q0 / (C + m λ²).

    O termo -λσ_q puxa o atrator em direção à origem; com λ = 0 ele é q0.
    """
    denom = seg.C + p.m * p.lam ** 2
    if denom == 0:
        raise DomainError("segmento sem ponto fixo (C + m λ² = 0)")
    q_est = seg.C * seg.q0 / denom
    return q_est, p.m * p.lam * q_est


# =========================
# Integração
# =========================
def _pousar(avancar, x0, seg0: int, V: PiecewisePotential, h_max: float):
    """Encurta o passo até cair a <= TOL_POUSO fm da junção, já do lado novo.

    ``avancar(x0, h)`` usa o campo de ``seg0`` no passo inteiro. Devolve
    (h, x) com x no segmento novo.
    """
    lo, hi = 0.0, h_max
    x_hi = avancar(x0, hi)
    juncao = V.joins[seg0] if segment_at(V, x_hi[0]) > seg0 else V.joins[seg0 - 1]
    for _ in range(200):
        if abs(x_hi[0] - juncao) <= TOL_POUSO or hi - lo <= 1e-15 * max(1.0, hi):
            break
        meio = 0.5 * (lo + hi)
        x_meio = avancar(x0, meio)
        if segment_at(V, x_meio[0]) != seg0:
            hi, x_hi = meio, x_meio
        else:
            lo = meio
    return hi, x_hi


def _avancar_com_pouso(avancar, x, h, V: PiecewisePotential, detectar: bool):
    """Avança exatamente h, pousando em cada junção atravessada no caminho.

    ``avancar(x0, h, i)`` integra com o campo do segmento i congelado.
    """
    restante = h
    pousos = 0
    while restante > 0:
        seg0 = segment_at(V, x[0])
        x_novo = avancar(x, restante, seg0)
        if not detectar or segment_at(V, x_novo[0]) == seg0:
            return x_novo
        if pousos == MAX_JUNCOES:
            raise StepFailure(f"mais de {MAX_JUNCOES} junções num passo de {h:.3e} T (q={x[0]:.6f})")
        h_pouso, x = _pousar(lambda x0, hh: avancar(x0, hh, seg0), x, seg0, V, restante)
        restante -= h_pouso
        pousos += 1
        evento(log, "DYN:juncao", {"q": x[0], "restante": restante})
    return x


def _evento_juncao(nivel: float, direcao: float):
    def g(_t, y):
        return y[0] - nivel

    g.terminal = True
    g.direction = direcao
    return g


def _juncoes_do_segmento(V: PiecewisePotential, i: int) -> List[Tuple[float, int]]:
    """(posição, salto de índice) das junções que limitam o segmento i."""
    saidas = []
    if i < len(V.joins):
        saidas.append((V.joins[i], 1))
    if i > 0:
        saidas.append((V.joins[i - 1], -1))
    return saidas


def _avancar_adaptativo(campos, x, h, V: PiecewisePotential, detectar: bool, rtol: float, atol: float):
    """DOP853 com o campo do segmento congelado; cada junção é um evento terminal."""
    restante = h
    seg = segment_at(V, x[0])
    pousos = 0
    while restante > 0:
        f = campos[seg]
        saidas = _juncoes_do_segmento(V, seg) if detectar else []
        eventos = [_evento_juncao(nivel, float(salto)) for nivel, salto in saidas]
        sol = solve_ivp(lambda _t, y: f(tuple(y)), (0.0, restante), np.asarray(x, dtype=float),
                        method="DOP853", rtol=rtol, atol=atol, events=eventos or None)
        if sol.status < 0:
            raise StepFailure(f"controle adaptativo falhou: {sol.message}")
        # o último passo é cortado no fim do intervalo ou no evento
        passos = np.diff(sol.t)[:-1]
        if passos.size and passos.min() < PASSO_MINIMO:
            raise StepFailure(f"passo {passos.min():.3e} T abaixo do mínimo {PASSO_MINIMO:.0e} T")
        if sol.status == 0:
            return tuple(sol.y[:, -1])

        k = next(k for k, te in enumerate(sol.t_events) if len(te))
        if pousos == MAX_JUNCOES:
            raise StepFailure(f"mais de {MAX_JUNCOES} junções num passo de {h:.3e} T")
        nivel, salto = saidas[k]
        x = (nivel,) + tuple(sol.y_events[k][0][1:])
        restante -= float(sol.t_events[k][0])
        seg += salto
        pousos += 1
        evento(log, "DYN:juncao", {"q": nivel, "restante": restante})
    return x


def propagate_exact(V: PiecewisePotential, p: LindbladParams, x, h: float):
    """Estado após h pelo propagador exato, pousando em cada junção."""
    def avancar(x0, hh, i):
        return tuple(segment_propagator_exact(V.segments[i], p, hh)(x0))

    # sub-passos curtos para não perder ida-e-volta numa junção
    n = max(1, int(math.ceil(h / 0.05)))
    for _ in range(n):
        x = _avancar_com_pouso(avancar, x, h / n, V, detectar=bool(V.joins))
    return x


def integrate(s0: MomentState, V: PiecewisePotential, p: LindbladParams,
              mode: ClosureMode = ClosureMode.CENTROID,
              controls: IntegrationControls = IntegrationControls()) -> TimeSeries:
    """Integra de s0.t até s0.t + t_end, gravando a cada ``stride`` passos de dt.

    No modo centroid nenhum passo mistura segmentos: o campo fica congelado
    no segmento do início do passo e o passo é cortado na junção.
    """
    mode = ClosureMode(mode)
    if controls.method == "exact" and mode is not ClosureMode.CENTROID:
        raise DomainError("método exato só existe no modo centroid (sistema linear por partes)")

    campos = _campos(V, p, mode)
    detectar = mode is ClosureMode.CENTROID and bool(V.joins)
    n_passos = int(round(controls.t_end / controls.dt))
    h_saida = controls.dt * controls.stride

    def rk4(x0, hh, i):
        return _passo_rk4(campos[i], x0, hh)

    x = (s0.sigma_q, s0.sigma_p, s0.sigma_qq, s0.sigma_pp, s0.sigma_pq)
    tempos = [s0.t]
    estados = [x]

    k = 0
    while k < n_passos:
        bloco = min(controls.stride, n_passos - k)
        if controls.method == "rk4":
            for _ in range(bloco):
                x = _avancar_com_pouso(rk4, x, controls.dt, V, detectar)
        elif controls.method == "adaptive":
            x = _avancar_adaptativo(campos, x, bloco * controls.dt, V, detectar, controls.rtol, controls.atol)
        else:
            x = propagate_exact(V, p, x, bloco * controls.dt)
        k += bloco
        tempos.append(s0.t + k * controls.dt)
        estados.append(x)

    evento(log, "DYN:integrate", {
        "mode": mode.value, "method": controls.method, "passos": n_passos,
        "gravados": len(tempos), "h_saida": h_saida, "final": list(x),
    })
    return TimeSeries(
        t=np.asarray(tempos, dtype=float),
        states=np.asarray(estados, dtype=float),
        meta={"lam": p.lam, "mode": mode.value, "method": controls.method},
    )
