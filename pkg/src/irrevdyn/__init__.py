"""Irreversible quantum lattice dynamics: propagators, Lieb-Robinson certificates, thermodynamic limit."""

__version__ = "0.1.0"
