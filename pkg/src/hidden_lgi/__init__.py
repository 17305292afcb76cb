"""Temporal CHSH (Leggett-Garg) statistics of qubit channels, filter activation of
hidden nonmacrorealism, and Choi-state nonlocality classification."""

__version__ = "0.1.0"
