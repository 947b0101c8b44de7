"""Holonomy algebras and holonomies of non-Abelian (Wilczek-Zee) connections."""

__version__ = "0.1.0"
