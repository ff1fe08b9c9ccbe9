# tunelamento/experiment.py
"""Cenários: condições iniciais, varreduras em λ, classificação e λ crítico."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.logs import evento, get_logger
from .dynamics import (
    ClosureMode,
    IntegrationControls,
    LindbladParams,
    MomentState,
    TimeSeries,
    integrate,
    rhs,
    segment_fixed_point,
)
from .erros import BracketError, DomainError, NonMonotoneWarning, TunelamentoError
from .observables import annotate
from .potential import PiecewisePotential, build_three_parabola, build_two_parabola
from .unidades import HBAR, momento_de_mev

log = get_logger(__name__)

ESCAPED = "escaped"
TRAPPED = "trapped"
SETTLED_RIGHT = "settled-right"
OSCILLATING = "oscillating"
UNDETERMINED = "undetermined"

TOL_ASSENTAMENTO = 0.05    # fm e fm/T


# =========================
# Configuração do cenário
# =========================
class _Secao(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialSection(_Secao):
    q_a: float
    q_b: float
    B: float
    C_b: float
    V_a: float = 0.0
    q_c: Optional[float] = None
    V_c: Optional[float] = None

    @model_validator(mode="after")
    def _par_qc_vc(self):
        if (self.q_c is None) != (self.V_c is None):
            raise ValueError("q_c e V_c vêm juntos (terceira parábola)")
        return self


class DynamicsSection(_Secao):
    m: float = Field(gt=0)
    lam: float = Field(default=0.0, ge=0)
    mode: ClosureMode = ClosureMode.CENTROID
    method: Literal["rk4", "adaptive", "exact"] = "rk4"
    dt: float = Field(default=1e-3, gt=0)
    t_end: float = Field(default=100.0, gt=0)
    stride: int = Field(default=1, ge=1)
    rtol: float = Field(default=1e-10, gt=0)
    hbar: float = Field(default=HBAR, gt=0)
    normalize_by_mass: bool = True


class InitialSection(_Secao):
    sigma_p: float = 1200.0      # MeV/c


class SweepSection(_Secao):
    lambdas: List[float] = Field(default_factory=list)
    bracket: Tuple[float, float] = (0.0, 1.0)
    critical_tol: float = Field(default=1e-4, gt=0)
    window: float = Field(default=20.0, gt=0)
    plateau_tol: float = Field(default=1e-4, gt=0)


class OutputSection(_Secao):
    dir: str = "saida"


class ScenarioConfig(_Secao):
    potential: PotentialSection
    dynamics: DynamicsSection
    initial: InitialSection = Field(default_factory=InitialSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _checar_potencial(self):
        # DomainError é ValueError: o pydantic a transforma em erro de validação
        self.build_potential()
        lams = self.sweep.lambdas
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("sweep.lambdas precisa ser estritamente crescente")
        if self.sweep.bracket[0] >= self.sweep.bracket[1]:
            raise ValueError("sweep.bracket precisa ter lo < hi")
        if self.dynamics.method == "exact" and self.dynamics.mode is not ClosureMode.CENTROID:
            raise ValueError("method=exact exige mode=centroid")
        return self

    def build_potential(self) -> PiecewisePotential:
        pot = self.potential
        V = build_two_parabola(pot.q_a, pot.q_b, pot.B, pot.C_b, pot.V_a)
        if pot.q_c is not None:
            V = build_three_parabola(V, pot.q_c, pot.V_c)
        return V

    @property
    def omega_a2(self) -> float:
        return self.build_potential().segments[0].C

    @property
    def p0(self) -> float:
        """σ_p(0) em MeV·T/fm."""
        return momento_de_mev(self.initial.sigma_p)

    def controls(self) -> IntegrationControls:
        d = self.dynamics
        return IntegrationControls(dt=d.dt, t_end=d.t_end, stride=d.stride, method=d.method, rtol=d.rtol)

    def with_lambda(self, lam: float) -> "ScenarioConfig":
        return self.model_copy(update={"dynamics": self.dynamics.model_copy(update={"lam": lam})})

    def with_momentum(self, sigma_p_mev: float) -> "ScenarioConfig":
        return self.model_copy(update={"initial": InitialSection(sigma_p=sigma_p_mev)})


# =========================
# Condições iniciais
# =========================
def rwa_diffusion(lam: float, m: float, omega_a2: float, hbar: float = HBAR) -> Tuple[float, float, float]:
    """Coeficientes de difusão na aproximação de onda girante (T = 0)."""
    if m <= 0 or omega_a2 <= 0:
        raise DomainError(f"m e Ω_a² precisam ser > 0: m={m}, Ω_a²={omega_a2}")
    if lam < 0:
        raise DomainError(f"λ precisa ser >= 0, recebido {lam}")
    D_qq = lam * hbar / (2.0 * math.sqrt(m * omega_a2))
    return D_qq, m * omega_a2 * D_qq, 0.0


def escape_momentum(m: float, B: float) -> float:
    """√(2mB): momento mínimo para passar a barreira classicamente."""
    return math.sqrt(2.0 * m * B)


def lindblad_params(cfg: ScenarioConfig, lam: float) -> LindbladParams:
    d = cfg.dynamics
    D_qq, D_pp, D_pq = rwa_diffusion(lam, d.m, cfg.omega_a2, d.hbar)
    return LindbladParams(lam=lam, D_qq=D_qq, D_pp=D_pp, D_pq=D_pq, m=d.m, hbar=d.hbar)


def initial_state(cfg: ScenarioConfig, lam: float, D: Tuple[float, float, float]) -> MomentState:
    d = cfg.dynamics
    if lam > 0:
        sigma_qq = D[0] / lam
    else:
        # limite λ -> 0 de D_qq/λ
        sigma_qq = d.hbar / (2.0 * math.sqrt(d.m * cfg.omega_a2))
    return MomentState(
        t=0.0,
        sigma_q=cfg.potential.q_a,
        sigma_p=cfg.p0,
        sigma_qq=sigma_qq,
        sigma_pp=d.hbar ** 2 / (4.0 * sigma_qq),
        sigma_pq=0.0,
    )


# =========================
# Execução e classificação
# =========================
def _cruzamentos_para_cima(q: np.ndarray, nivel: float) -> np.ndarray:
    return np.nonzero((q[:-1] <= nivel) & (q[1:] > nivel))[0]


def crossing_times(series: TimeSeries, level: float) -> np.ndarray:
    """Instantes (interpolados) em que σ_q sobe através de ``level``."""
    q = series.column("sigma_q")
    t = series.t
    idx = _cruzamentos_para_cima(q, level)
    frac = (level - q[idx]) / (q[idx + 1] - q[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def _assentado(final: MomentState, seg, p: LindbladParams, dq: float) -> bool:
    """Centróide parado no atrator do segmento (|rhs| → 0)."""
    if seg.C + p.m * p.lam ** 2 <= 0:
        return False
    q_est, _ = segment_fixed_point(seg, p)
    return abs(final.sigma_q - q_est) <= TOL_ASSENTAMENTO and abs(dq) <= TOL_ASSENTAMENTO


def classify(series: TimeSeries, V: PiecewisePotential, p: LindbladParams,
             mode: ClosureMode = ClosureMode.CENTROID) -> str:
    final = series.final
    q = final.sigma_q
    dq = float(rhs(final, V, p, mode)[0])
    n = len(V.segments)

    if n == 1:
        return TRAPPED if _assentado(final, V.segments[0], p, dq) else UNDETERMINED
    if n == 2 and q > V.q_b and dq > 0:
        return ESCAPED
    if n == 3:
        if p.lam == 0 and len(_cruzamentos_para_cima(series.column("sigma_q"), V.q_b)) >= 2:
            return OSCILLATING
        if p.lam > 0 and q > V.q_t2 and _assentado(final, V.segments[2], p, dq):
            return SETTLED_RIGHT
    if q <= V.q_t1 and _assentado(final, V.segments[0], p, dq):
        return TRAPPED
    return UNDETERMINED


def crossed_barrier(series: TimeSeries, V: PiecewisePotential, classification: str, window: float) -> bool:
    """Lado da bisseção em λ: a trajetória passou a barreira.

    Com três parábolas basta σ_q ficar acima de q_b em toda a janela final,
    mesmo sem ter assentado no poço da direita.
    """
    if len(V.segments) == 2:
        return classification == ESCAPED
    if len(V.segments) == 3:
        if classification in (SETTLED_RIGHT, OSCILLATING):
            return True
        t = series.t
        janela = series.column("sigma_q")[t >= t[-1] - window]
        return bool(janela.min() > V.q_b)
    return False


def run_scenario(cfg: ScenarioConfig, lam: float) -> TimeSeries:
    V = cfg.build_potential()
    p = lindblad_params(cfg, lam)
    s0 = initial_state(cfg, lam, (p.D_qq, p.D_pp, p.D_pq))

    limiar = escape_momentum(p.m, cfg.potential.B)
    if s0.sigma_p <= limiar:
        evento(log, "EXP:momento_baixo", {"sigma_p0": s0.sigma_p, "sqrt(2mB)": limiar}, nivel=30)

    mode = cfg.dynamics.mode
    series = integrate(s0, V, p, mode, cfg.controls())
    annotate(series, V.q_b, p.m, cfg.dynamics.normalize_by_mass)
    classe = classify(series, V, p, mode)
    series.meta["classification"] = classe
    series.meta["crossed"] = crossed_barrier(series, V, classe, cfg.sweep.window)
    evento(log, "EXP:cenario", {"lam": lam, "classification": classe, "crossed": series.meta["crossed"],
                                "P_final": float(series.P[-1])}, nivel=20)
    return series


# =========================
# Assíntotas
# =========================
@dataclass(frozen=True)
class Asymptote:
    P_inf: Optional[float]
    t90: Optional[float]

    @property
    def divergent(self) -> bool:
        return self.P_inf is None


def asymptote(series: TimeSeries, w: float = 20.0, tol: float = 1e-4) -> Asymptote:
    t, P = series.t, series.P
    if P is None or t[-1] - t[0] < 2.0 * w:
        return Asymptote(None, None)
    janela = P[t >= t[-1] - w]
    if float(janela.max() - janela.min()) > tol:
        return Asymptote(None, None)
    P_inf = float(P[-1])
    faixa = 0.1 * abs(P_inf - P[0])
    # limiar de um lado só: primeira entrada a partir do lado de P(0)
    if P_inf >= P[0]:
        dentro = np.nonzero(P >= P_inf - faixa)[0]
    else:
        dentro = np.nonzero(P <= P_inf + faixa)[0]
    return Asymptote(P_inf, float(t[dentro[0]] - t[0]))


def period_mean(series: TimeSeries, level: float) -> Optional[float]:
    """Média temporal de P sobre o último período completo (subidas de σ_q por ``level``)."""
    tc = crossing_times(series, level)
    if len(tc) < 2 or series.P is None:
        return None
    t0, t1 = tc[-2], tc[-1]
    sel = (series.t >= t0) & (series.t <= t1)
    return float(np.trapz(series.P[sel], series.t[sel]) / (series.t[sel][-1] - series.t[sel][0]))


# =========================
# Varredura em λ
# =========================
@dataclass
class SweepEntry:
    lam: float
    P_inf: Optional[float]
    classification: str
    t90: Optional[float]
    error: Optional[str] = None

    @property
    def divergent(self) -> bool:
        return self.P_inf is None


@dataclass
class SweepResult:
    entries: List[SweepEntry] = field(default_factory=list)

    def __post_init__(self):
        lams = [e.lam for e in self.entries]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise DomainError("valores de λ precisam ser estritamente crescentes")

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([asdict(e) for e in self.entries],
                          columns=["lam", "P_inf", "classification", "t90", "error"])
        return df.rename(columns={"lam": "lambda"})

    def summary(self) -> dict:
        return {
            "n": len(self.entries),
            "falhas": sum(e.error is not None for e in self.entries),
            "entries": [asdict(e) for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), ensure_ascii=False, indent=2)


def _entrada(cfg: ScenarioConfig, lam: float) -> SweepEntry:
    try:
        series = run_scenario(cfg, lam)
        a = asymptote(series, cfg.sweep.window, cfg.sweep.plateau_tol)
        return SweepEntry(lam, a.P_inf, series.meta["classification"], a.t90)
    except TunelamentoError as e:
        evento(log, "EXP:falha", {"lam": lam, "erro": str(e)}, nivel=40)
        return SweepEntry(lam, None, UNDETERMINED, None, error=f"{type(e).__name__}: {e}")


def friction_sweep(cfg: ScenarioConfig, lambdas: Optional[Sequence[float]] = None, n_jobs: int = 1) -> SweepResult:
    lambdas = list(cfg.sweep.lambdas if lambdas is None else lambdas)
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise DomainError("valores de λ precisam ser estritamente crescentes")
    entradas = Parallel(n_jobs=n_jobs)(delayed(_entrada)(cfg, lam) for lam in lambdas)
    resultado = SweepResult(list(entradas))
    evento(log, "EXP:varredura", {"n": len(lambdas), "n_jobs": n_jobs}, nivel=20)
    return resultado


# =========================
# λ crítico
# =========================
def crosses(cfg: ScenarioConfig, lam: float) -> bool:
    return bool(run_scenario(cfg, lam).meta["crossed"])


def critical_lambda(cfg: ScenarioConfig, bracket: Optional[Tuple[float, float]] = None,
                    tol: Optional[float] = None) -> float:
    """Bisseção na classificação até |λ_hi − λ_lo| <= tol."""
    lo, hi = bracket if bracket is not None else cfg.sweep.bracket
    tol = cfg.sweep.critical_tol if tol is None else tol
    if not lo < hi:
        raise DomainError(f"intervalo inválido: [{lo}, {hi}]")

    cruza_lo, cruza_hi = crosses(cfg, lo), crosses(cfg, hi)
    if cruza_lo == cruza_hi:
        raise BracketError(f"extremos com a mesma classificação em [{lo}, {hi}] (cruza={cruza_lo})")

    sondas = [lo + (hi - lo) * i / 6.0 for i in range(1, 6)]
    lados = [cruza_lo] + [crosses(cfg, lam) for lam in sondas] + [cruza_hi]
    trocas = sum(a != b for a, b in zip(lados, lados[1:]))
    if trocas > 1:
        warnings.warn(f"classificação não monotônica em λ: {lados}", NonMonotoneWarning, stacklevel=2)
    # as sondas já estreitam o intervalo
    for lam, lado in zip(sondas, lados[1:-1]):
        if lado == cruza_lo and trocas == 1:
            lo = lam
        elif trocas == 1:
            hi = lam
            break

    while hi - lo > tol:
        meio = 0.5 * (lo + hi)
        if crosses(cfg, meio) == cruza_lo:
            lo = meio
        else:
            hi = meio
    lam_cr = 0.5 * (lo + hi)
    evento(log, "EXP:critico", {"lam_cr": lam_cr, "lo": lo, "hi": hi}, nivel=20)
    return lam_cr


def stand_in_lambdas(lam_cr: float) -> List[float]:
    """Quatro valores de λ para as figuras: {0, 0.25, 0.75, 1.25}·λ_cr."""
    return [f * lam_cr for f in (0.0, 0.25, 0.75, 1.25)]
