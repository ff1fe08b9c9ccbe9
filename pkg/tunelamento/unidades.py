# tunelamento/unidades.py
# Sistema de unidades: fm, MeV, T = 1e-22 s.
# Massa em MeV·T²/fm², momento em MeV·T/fm (configs usam MeV/c).

HBAR = 6.58212          # MeV·T
C_LUZ = 30.0            # fm/T


def momento_de_mev(p_mev: float) -> float:
    """MeV/c -> MeV·T/fm."""
    return p_mev / C_LUZ
