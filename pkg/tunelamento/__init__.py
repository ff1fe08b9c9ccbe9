"""Tunelamento dissipativo de um pacote gaussiano (equações de momentos de Lindblad)."""
