import math

import numpy as np
import pytest

from tunelamento.dynamics import IntegrationControls, MomentState, integrate
from tunelamento.erros import DegenerateCovariance, DomainError, RateUndefined
from tunelamento.experiment import lindblad_params, run_scenario
from tunelamento.observables import annotate, decay_rate, flux_density, tunneling_probability, wigner_density
from tunelamento.validation import flux_quadrature, gaussian_tail_quadrature, random_state

Q_B = 13.0
M = 13.57


def _estado(q: float = 11.0, p: float = 40.0, qq: float = 0.5, pp: float = 30.0, pq: float = 1.2) -> MomentState:
    return MomentState(0.0, q, p, qq, pp, pq)


def test_wigner_peak_value() -> None:
    s = _estado()
    det = s.sigma_qq * s.sigma_pp - s.sigma_pq ** 2
    assert float(wigner_density(s, s.sigma_q, s.sigma_p)) == pytest.approx(1.0 / (2.0 * math.pi * math.sqrt(det)))


def test_wigner_factorizes_without_correlation() -> None:
    s = _estado(pq=0.0)
    q, p = 11.7, 35.0
    gq = math.exp(-(q - s.sigma_q) ** 2 / (2 * s.sigma_qq)) / math.sqrt(2 * math.pi * s.sigma_qq)
    gp = math.exp(-(p - s.sigma_p) ** 2 / (2 * s.sigma_pp)) / math.sqrt(2 * math.pi * s.sigma_pp)
    assert float(wigner_density(s, q, p)) == pytest.approx(gq * gp, rel=1e-14)


def test_wigner_is_normalized() -> None:
    s = _estado()
    sq, sp = math.sqrt(s.sigma_qq), math.sqrt(s.sigma_pp)
    q = np.linspace(s.sigma_q - 12 * sq, s.sigma_q + 12 * sq, 801)
    p = np.linspace(s.sigma_p - 12 * sp, s.sigma_p + 12 * sp, 801)
    Q, Pm = np.meshgrid(q, p, indexing="ij")
    W = wigner_density(s, Q, Pm)
    assert W.shape == (801, 801)
    total = np.trapz(np.trapz(W, p, axis=1), q)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_degenerate_covariance_rejected() -> None:
    with pytest.raises(DegenerateCovariance):
        wigner_density(MomentState(0.0, 11.0, 0.0, 1.0, 4.0, 2.0), 11.0, 0.0)


def test_probability_at_barrier_is_one_half() -> None:
    assert tunneling_probability(_estado(q=Q_B), Q_B) == pytest.approx(0.5, abs=1e-15)


def test_probability_tails() -> None:
    s = math.sqrt(0.5)
    longe = tunneling_probability(_estado(q=Q_B - 10 * s), Q_B)
    assert 0.0 < longe < 1e-22
    assert tunneling_probability(_estado(q=Q_B + 10 * s), Q_B) == pytest.approx(1.0, abs=1e-15)


def test_probability_symmetry_and_monotonicity() -> None:
    qs = np.linspace(9.0, 17.0, 41)
    P = [tunneling_probability(_estado(q=q), Q_B) for q in qs]
    assert np.all(np.diff(P) > 0)
    for x in (0.1, 0.7, 2.0):
        soma = tunneling_probability(_estado(q=Q_B + x), Q_B) + tunneling_probability(_estado(q=Q_B - x), Q_B)
        assert soma == pytest.approx(1.0, abs=1e-15)


def test_probability_matches_quadrature_on_random_states() -> None:
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = random_state(rng, 9.0, 17.0)
        assert tunneling_probability(s, Q_B) == pytest.approx(
            gaussian_tail_quadrature(s.sigma_q, s.sigma_qq, Q_B), abs=1e-10)


def test_zero_flux_gives_zero_rate() -> None:
    assert decay_rate(_estado(p=0.0, pq=0.0), Q_B, M) == 0.0


def test_rate_vanishes_once_packet_has_escaped() -> None:
    s = _estado(q=Q_B + 10 * math.sqrt(0.5))
    assert 0.0 < decay_rate(s, Q_B, M) < 1e-15


def test_rate_matches_flux_quadrature_on_reference_run(make_cfg) -> None:
    cfg = make_cfg(dynamics={"lam": 0.05, "t_end": 1.0})
    s = run_scenario(cfg, 0.05).final
    P = tunneling_probability(s, Q_B)
    assert P > 1e-6
    assert decay_rate(s, Q_B, M) == pytest.approx(flux_quadrature(s, Q_B, M) / P, rel=1e-8)


@pytest.mark.parametrize("c", [2.0, 10.0])
def test_rate_invariant_under_mass_rescaling(c) -> None:
    s = _estado()
    escalado = MomentState(0.0, s.sigma_q, c * s.sigma_p, s.sigma_qq, c * c * s.sigma_pp, c * s.sigma_pq)
    assert decay_rate(escalado, Q_B, c * M) == pytest.approx(decay_rate(s, Q_B, M), rel=1e-12)


def test_literal_rate_is_unnormalized() -> None:
    s = _estado()
    assert decay_rate(s, Q_B, M, normalize_by_mass=False) == pytest.approx(M * decay_rate(s, Q_B, M) / 2.0, rel=1e-14)


def test_flux_density_matches_quadrature() -> None:
    s = _estado(pq=0.0)
    assert flux_density(s, Q_B, M) == pytest.approx(flux_quadrature(s, Q_B, M), rel=1e-10)
    marginal = flux_density(_estado(q=Q_B), Q_B, M, weighted=False)
    assert marginal == pytest.approx(1.0 / math.sqrt(2.0 * math.pi * 0.5), rel=1e-14)
    with pytest.raises(DomainError):
        flux_density(s, Q_B, 0.0)


def test_rate_undefined_when_probability_underflows() -> None:
    with pytest.raises(RateUndefined):
        decay_rate(_estado(q=Q_B - 40.0 * math.sqrt(0.5)), Q_B, M)


def test_annotate_fills_probability_and_rate(ref_cfg, V2) -> None:
    p = lindblad_params(ref_cfg, 0.05)
    s0 = _estado(q=10.0, p=ref_cfg.p0, qq=0.4, pp=28.0, pq=0.0)
    serie = annotate(integrate(s0, V2, p, controls=IntegrationControls(dt=1e-2, t_end=3.0, stride=10)), Q_B, M)
    for i in (0, len(serie) // 2, -1):
        s = serie.state(i)
        assert serie.P[i] == pytest.approx(tunneling_probability(s, Q_B), rel=1e-14)
        assert serie.Gamma_f[i] == pytest.approx(decay_rate(s, Q_B, M), rel=1e-12)
    assert list(serie.to_frame().columns)[-2:] == ["P", "Gamma_f"]


def test_annotate_marks_underflow_as_nan(V2, ref_cfg) -> None:
    p = lindblad_params(ref_cfg, 0.0)
    s0 = _estado(q=0.0, p=0.0, qq=1e-3, pp=1.0, pq=0.0)
    serie = annotate(integrate(s0, V2, p, controls=IntegrationControls(dt=1e-2, t_end=0.1)), Q_B, M)
    assert np.all(np.isnan(serie.Gamma_f))
    assert np.all(serie.P < 1e-300)
