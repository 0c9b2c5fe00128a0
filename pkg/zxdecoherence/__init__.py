"""Stochastic ZX decoherence of the toric code as a mixed-stabilizer simulation."""

__version__ = '0.1.0'
