# tunelamento/validation.py
"""Oráculos independentes: quadratura, composição exata, forma matricial e Monte Carlo de Langevin."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.integrate import quad
from scipy.optimize import brentq

from services.logs import evento, get_logger
from .dynamics import (
    COLUNAS,
    ClosureMode,
    IntegrationControls,
    LindbladParams,
    MomentState,
    integrate,
    propagate_exact,
    rhs,
    segment_fixed_point,
)
from .erros import DomainError, QuadratureFailure
from .experiment import rwa_diffusion
from .observables import decay_rate, tunneling_probability, wigner_density
from .potential import (
    ParabolicSegment,
    PiecewisePotential,
    build_three_parabola,
    build_two_parabola,
    curvature,
    derivative,
    evaluate,
    gaussian_force_moments,
    harmonic_well,
)

log = get_logger(__name__)

EPS_ABS = 1e-14
EPS_REL = 1e-12
LARGURAS = 12.0          # truncagem da gaussiana padronizada (massa fora < 1e-32)
BLOCO_TRAJETORIAS = 10_000
_SQRT_2PI = math.sqrt(2.0 * math.pi)


# =========================
# Quadratura
# =========================
def _integrar(f: Callable[[float], float], a: float, b: float, pontos=None, epsabs: float = EPS_ABS) -> float:
    saida = quad(f, a, b, points=pontos, epsabs=epsabs, epsrel=EPS_REL, limit=200, full_output=1)
    if len(saida) == 4:
        valor, erro = saida[0], saida[1]
        # aviso de arredondamento com erro estimado dentro da tolerância não é falha
        if not erro <= max(10.0 * epsabs, 10.0 * EPS_REL * abs(valor)):
            raise QuadratureFailure(f"quad não convergiu em [{a}, {b}]: {saida[3]}")
    return saida[0]


def _integrando(tag: str, V: PiecewisePotential, sigma_q: float) -> Callable[[float], float]:
    funcoes = {
        "one": lambda q: 1.0,
        "q": lambda q: q,
        "V": lambda q: evaluate(V, q),
        "dV": lambda q: derivative(V, q),
        "d2V": lambda q: curvature(V, q),
        "stein": lambda q: derivative(V, q) * (q - sigma_q),
    }
    if tag not in funcoes:
        raise DomainError(f"função desconhecida: {tag} (use {sorted(funcoes)})")
    return funcoes[tag]


def quadrature_expectation(f: str, V: PiecewisePotential, sigma_q: float, sigma_qq: float) -> float:
    """E[f(q)] para q ~ N(σ_q, σ_qq), segmento a segmento na variável padronizada z."""
    if not sigma_qq > 0:
        raise DomainError(f"sigma_qq precisa ser > 0, recebido {sigma_qq}")
    g = _integrando(f, V, sigma_q)
    s = math.sqrt(sigma_qq)
    escala = max(1.0, *(abs(float(g(sigma_q + k * s))) for k in (-3.0, -1.0, 0.0, 1.0, 3.0)))

    def h(z):
        return g(sigma_q + s * z) * math.exp(-0.5 * z * z) / _SQRT_2PI

    total = 0.0
    for seg in V.segments:
        a = max((seg.lo - sigma_q) / s, -LARGURAS)
        b = min((seg.hi - sigma_q) / s, LARGURAS)
        if a >= b:
            continue
        pontos = [0.0] if a < 0.0 < b else None
        total += _integrar(h, a, b, pontos, epsabs=EPS_ABS * escala)
    return total


def gaussian_tail_quadrature(sigma_q: float, sigma_qq: float, q_b: float) -> float:
    """∫_{q_b}^∞ da marginal gaussiana, por quadratura."""
    s = math.sqrt(sigma_qq)
    a = (q_b - sigma_q) / s
    if a >= LARGURAS:
        return 0.0
    a = max(a, -LARGURAS)
    pontos = [0.0] if a < 0.0 else None
    return _integrar(lambda z: math.exp(-0.5 * z * z) / _SQRT_2PI, a, LARGURAS, pontos, epsabs=0.0)


def flux_quadrature(s: MomentState, q_b: float, m: float, weighted: bool = True) -> float:
    """∫dp (p/m)·W(q_b, p) por quadratura direta da densidade."""
    det = s.sigma_qq * s.sigma_pp - s.sigma_pq ** 2
    media = s.sigma_p + s.sigma_pq / s.sigma_qq * (q_b - s.sigma_q)
    largura = math.sqrt(det / s.sigma_qq)
    peso = (lambda p: p / m) if weighted else (lambda p: 1.0)

    def h(z):
        pm = media + largura * z
        return peso(pm) * float(wigner_density(s, q_b, pm))

    escala = max(abs(h(z)) for z in (-1.0, 0.0, 1.0))
    return largura * _integrar(h, -LARGURAS, LARGURAS, [0.0], epsabs=EPS_ABS * escala)


# =========================
# Lado direito em forma matricial
# =========================
def rhs_matrix(s: MomentState, V: PiecewisePotential, p: LindbladParams,
               mode: ClosureMode = ClosureMode.CENTROID) -> np.ndarray:
    """Σ' = JΣ + ΣJᵀ + 2D; escrito de forma independente de ``dynamics.rhs``."""
    if ClosureMode(mode) is ClosureMode.CENTROID:
        F, K = float(derivative(V, s.sigma_q)), float(curvature(V, s.sigma_q))
    else:
        F, K = gaussian_force_moments(V, s.sigma_q, s.sigma_qq)
    J = np.array([[-p.lam, 1.0 / p.m], [-K, -p.lam]])
    Sigma = np.array([[s.sigma_qq, s.sigma_pq], [s.sigma_pq, s.sigma_pp]])
    D = np.array([[p.D_qq, p.D_pq], [p.D_pq, p.D_pp]])
    dSigma = J @ Sigma + Sigma @ J.T + 2.0 * D
    media = np.array([-p.lam * s.sigma_q + s.sigma_p / p.m, -F - p.lam * s.sigma_p])
    return np.array([media[0], media[1], dSigma[0, 0], dSigma[1, 1], dSigma[0, 1]])


# =========================
# Período exato do poço duplo sem atrito
# =========================
def exact_crossings(V: PiecewisePotential, p: LindbladParams, s0: MomentState, level: float,
                    t_max: float, h: float = 0.01) -> np.ndarray:
    """Instantes de subida de σ_q por ``level`` pela composição exata, refinados com brentq."""
    x = s0.as_array()
    t = s0.t
    tempos: List[float] = []
    for _ in range(int(round(t_max / h))):
        x_novo = np.asarray(propagate_exact(V, p, x, h))
        if x[0] <= level < x_novo[0]:
            x_ini = x
            tau = brentq(lambda tt: propagate_exact(V, p, x_ini, tt)[0] - level, 1e-15, h, xtol=1e-14, rtol=1e-15)
            tempos.append(t + tau)
        x, t = x_novo, t + h
    return np.asarray(tempos)


def exact_period(V: PiecewisePotential, p: LindbladParams, s0: MomentState, level: float, t_max: float) -> Optional[float]:
    tc = exact_crossings(V, p, s0, level, t_max)
    if len(tc) < 2:
        return None
    return float(np.mean(np.diff(tc)))


# =========================
# Monte Carlo de Langevin
# =========================
@dataclass
class LangevinResult:
    t: np.ndarray
    mean: np.ndarray      # (N, 5): q, p, var q, var p, cov qp
    se: np.ndarray        # (N, 5)
    n: int
    seed: int

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.mean, columns=list(COLUNAS))
        for i, nome in enumerate(COLUNAS):
            df[f"se_{nome}"] = self.se[:, i]
        df.insert(0, "t", self.t)
        return df


def _fator_ruido(p: LindbladParams, dt: float) -> np.ndarray:
    # fator triangular da covariância 2·D·dt do ruído
    l11 = math.sqrt(p.D_qq)
    l21 = p.D_pq / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(p.D_pp - l21 ** 2, 0.0))
    return math.sqrt(2.0 * dt) * np.array([[l11, 0.0], [l21, l22]])


def _bloco_langevin(seg: ParabolicSegment, p: LindbladParams, s0: MomentState, dt: float,
                    indices: Sequence[int], n: int, semente: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(semente))
    cov0 = np.array([[s0.sigma_qq, s0.sigma_pq], [s0.sigma_pq, s0.sigma_pp]])
    xy = rng.multivariate_normal([s0.sigma_q, s0.sigma_p], cov0, size=n, method="cholesky")
    q, pm = xy[:, 0].copy(), xy[:, 1].copy()
    L = _fator_ruido(p, dt)
    ruidoso = bool(L.any())

    saida = np.empty((len(indices), n, 2))
    alvo = {k: i for i, k in enumerate(indices)}
    if 0 in alvo:
        saida[alvo[0], :, 0], saida[alvo[0], :, 1] = q, pm
    lam, m, C, q0 = p.lam, p.m, seg.C, seg.q0
    for k in range(1, max(indices) + 1):
        dq = (pm / m - lam * q) * dt
        dp = (-C * (q - q0) - lam * pm) * dt
        if ruidoso:
            z = rng.standard_normal((2, n))
            dq += L[0, 0] * z[0]
            dp += L[1, 0] * z[0] + L[1, 1] * z[1]
        q += dq
        pm += dp
        if k in alvo:
            saida[alvo[k], :, 0], saida[alvo[k], :, 1] = q, pm
    return saida


def langevin_sample(seg: ParabolicSegment, p: LindbladParams, s0: MomentState, dt: float, t_end: float,
                    n: int, seed: int, times: Optional[Sequence[float]] = None, n_jobs: int = 1) -> LangevinResult:
    """Ensemble de Euler–Maruyama da EDE clássica com a mesma deriva e difusão.

    Trajetórias em blocos de tamanho fixo, cada um com seu gerador Philox
    derivado de ``seed``: o resultado não depende de ``n_jobs``.
    """
    if n < 1000:
        raise DomainError(f"n precisa ser >= 1000, recebido {n}")
    if dt <= 0 or t_end <= 0:
        raise DomainError(f"dt e t_end precisam ser > 0: dt={dt}, t_end={t_end}")
    tempos = [t_end] if times is None else list(times)
    indices = sorted({int(round(t / dt)) for t in tempos})

    tamanhos = [BLOCO_TRAJETORIAS] * (n // BLOCO_TRAJETORIAS)
    if n % BLOCO_TRAJETORIAS:
        tamanhos.append(n % BLOCO_TRAJETORIAS)
    sementes = np.random.SeedSequence(seed).spawn(len(tamanhos))

    blocos = Parallel(n_jobs=n_jobs)(
        delayed(_bloco_langevin)(seg, p, s0, dt, indices, tam, ss) for tam, ss in zip(tamanhos, sementes)
    )
    amostras = np.concatenate(blocos, axis=1)       # (N_t, n, 2)

    q, pm = amostras[..., 0], amostras[..., 1]
    dq = q - q.mean(axis=1, keepdims=True)
    dp = pm - pm.mean(axis=1, keepdims=True)
    termos = [q, pm, dq * dq, dp * dp, dq * dp]
    media = np.stack([q.mean(axis=1), pm.mean(axis=1),
                      (dq * dq).sum(axis=1) / (n - 1), (dp * dp).sum(axis=1) / (n - 1),
                      (dq * dp).sum(axis=1) / (n - 1)], axis=1)
    se = np.stack([x.std(axis=1, ddof=1) / math.sqrt(n) for x in termos], axis=1)

    evento(log, "VAL:langevin", {"n": n, "blocos": len(tamanhos), "seed": seed, "dt": dt})
    return LangevinResult(t=s0.t + np.asarray(indices) * dt, mean=media, se=se, n=n, seed=seed)


# =========================
# Bateria completa
# =========================
@dataclass
class Check:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.tolerance)

    def as_dict(self) -> Dict[str, object]:
        return {"name": self.name, "measured": self.measured, "tolerance": self.tolerance, "passed": self.passed}


def _rel(a, b) -> float:
    """Erro relativo máximo, cada coluna na escala do seu maior valor."""
    a, b = np.atleast_2d(np.asarray(a, dtype=float)), np.atleast_2d(np.asarray(b, dtype=float))
    escala = np.maximum(np.max(np.abs(b), axis=0), 1e-300)
    return float(np.max(np.abs(a - b) / escala))


def random_state(rng: np.random.Generator, q_lo: float, q_hi: float) -> MomentState:
    """Estado sorteado com det σ > 0 (correlação |r| < 0.9)."""
    qq, pp = rng.uniform(0.1, 2.0), rng.uniform(10.0, 60.0)
    r = rng.uniform(-0.9, 0.9)
    return MomentState(0.0, rng.uniform(q_lo, q_hi), rng.normal(20.0, 10.0), qq, pp, r * math.sqrt(qq * pp))


def _checar_juncoes(rng: np.random.Generator, n: int = 1000) -> float:
    pior = 0.0
    for _ in range(n):
        q_a = rng.uniform(0.0, 20.0)
        q_b = q_a + rng.uniform(0.5, 5.0)
        C_b = rng.uniform(0.5, 10.0)
        B = rng.uniform(0.05, 0.45) * C_b * (q_b - q_a) ** 2
        V = build_two_parabola(q_a, q_b, B, C_b)
        qt = V.q_t1
        esq, dir_ = V.segments
        pior = max(pior, abs(esq.value(qt) - dir_.value(qt)), abs(esq.slope(qt) - dir_.slope(qt)))
    return pior


def run_suite(seed: int = 20240601, n_mc: int = 20_000, n_jobs: int = 1) -> Dict[str, object]:
    """Roda os oráculos e devolve o relatório (tolerâncias medidas)."""

    rng = np.random.Generator(np.random.Philox(seed))
    checks: List[Check] = []

    checks.append(Check("join_continuity", _checar_juncoes(rng), 1e-6))

    # poço único: RK4 contra composição exata
    m = 13.57
    poco = harmonic_well(10.0, 4.0)
    D = rwa_diffusion(0.1, m, 4.0)
    p = LindbladParams(0.1, *D, m=m)
    s0 = MomentState(0.0, 10.5, 5.0, 0.5, 30.0, 0.1)
    rk4 = integrate(s0, poco, p, controls=IntegrationControls(dt=1e-3, t_end=10.0, stride=1000))
    exato = integrate(s0, poco, p, controls=IntegrationControls(dt=1e-3, t_end=10.0, stride=1000, method="exact"))
    checks.append(Check("rk4_vs_exact", _rel(rk4.states, exato.states), 1e-8))

    # forma matricial do lado direito
    V2 = build_two_parabola(10.0, 13.0, 10.0, 5.0)
    V3 = build_three_parabola(V2, 16.5, 0.0)
    pior = 0.0
    for _ in range(50):
        s = random_state(rng, 8.0, 18.0)
        for mode in ClosureMode:
            pior = max(pior, float(np.max(np.abs(rhs(s, V3, p, mode) - rhs_matrix(s, V3, p, mode)))))
    checks.append(Check("rhs_matrix_form", pior, 1e-10))

    # observáveis contra quadratura
    pior_p, pior_g, pior_f = 0.0, 0.0, 0.0
    for _ in range(100):
        s = random_state(rng, 9.0, 17.0)
        pior_p = max(pior_p, abs(tunneling_probability(s, 13.0) - gaussian_tail_quadrature(s.sigma_q, s.sigma_qq, 13.0)))
        vp, _ = gaussian_force_moments(V3, s.sigma_q, s.sigma_qq)
        pior_g = max(pior_g, abs(vp - quadrature_expectation("dV", V3, s.sigma_q, s.sigma_qq)) / max(1.0, abs(vp)))
        if tunneling_probability(s, 13.0) > 1e-200:
            J = flux_quadrature(s, 13.0, m)
            pior_f = max(pior_f, _rel(decay_rate(s, 13.0, m), J / tunneling_probability(s, 13.0)))
    checks.append(Check("tunneling_probability_quadrature", pior_p, 1e-10))
    checks.append(Check("gaussian_force_moments_quadrature", pior_g, 1e-9))
    checks.append(Check("decay_rate_flux_quadrature", pior_f, 1e-8))

    # Monte Carlo perto do atrator do poço

    q_est, p_est = segment_fixed_point(poco.segments[0], p)
    sig_qq = D[0] / p.lam
    s_mc = MomentState(0.0, q_est + 0.5, p_est, sig_qq, p.hbar ** 2 / (4.0 * sig_qq), 0.0)
    mc = langevin_sample(poco.segments[0], p, s_mc, 1e-3, 10.0, n_mc, seed, times=(1.0, 5.0, 10.0), n_jobs=n_jobs)
    ode = integrate(s_mc, poco, p, controls=IntegrationControls(dt=1e-3, t_end=10.0))
    idx = [int(round(t / 1e-3)) for t in mc.t]
    z = np.abs(mc.mean - ode.states[idx]) / mc.se
    checks.append(Check("langevin_within_3se", float(np.max(z)), 3.0))

    relatorio = {
        "seed": seed,
        "n_mc": n_mc,
        "passed": all(c.passed for c in checks),
        "checks": [c.as_dict() for c in checks],
    }
    evento(log, "VAL:suite", {"passed": relatorio["passed"], "n": len(checks)}, nivel=20)
    return relatorio
