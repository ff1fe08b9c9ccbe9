# figuras/__init__.py
"""Geradores de figuras: cada ``figN`` expõe ``gerar(cfg, pasta, n_jobs) -> list[Path]``.

Cada curva vira um CSV próprio; o desenho fica por conta de ferramentas externas.
"""
