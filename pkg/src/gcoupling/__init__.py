"""G-coupling functions, G-conjugation and equilibrium duality on grids."""

__version__ = "0.1.0"
