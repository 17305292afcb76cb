"""Closed-form temporal and spatial CHSH curves for the amplitude-damping channel.

These are the theory curves the simulator reproduces numerically; tests use
them as oracles and the runner reports thresholds from them.
"""
from __future__ import annotations

import math

from scipy.optimize import brentq

from hidden_lgi.quantum import check_in_range

TSIRELSON = 2 * math.sqrt(2)


def unfiltered_chsh(v: float) -> float:
    """B for amplitude damping on the canonical scenario: 2 sqrt(2) sqrt(1 - v)."""
    v = check_in_range("v", v, 0.0, 1.0)
    return TSIRELSON * math.sqrt(1 - v)


def filtered_chsh(v: float, D: float) -> float:
    """B with the equal-loss SPPOs: 4 sqrt(2) sqrt(1 - v) / (2 - v D)."""
    v = check_in_range("v", v, 0.0, 1.0)
    D = check_in_range("D", D, 0.0, 1.0)
    return 2 * TSIRELSON * math.sqrt(1 - v) / (2 - v * D)


def filter_success(v: float, D: float) -> float:
    """Probability that both SPPOs succeed, identical for every outcome: (1 - D)(2 - v D)/2."""
    v = check_in_range("v", v, 0.0, 1.0)
    D = check_in_range("D", D, 0.0, 1.0)
    return (1 - D) * (2 - v * D) / 2


def choi_chsh_maximum(v: float) -> float:
    """Correlation-matrix CHSH maximum of the amplitude-damping Choi state: 2 sqrt(2 (1 - v))."""
    v = check_in_range("v", v, 0.0, 1.0)
    return 2 * math.sqrt(2 * (1 - v))


def violation_threshold(D: float = 0.0) -> float:
    """Largest v with a temporal CHSH violation under equal-loss SPPOs, the root of 8(1 - v) = (2 - v D)^2.

    D = 0 gives 0.5; D -> 1 gives 2 sqrt(2) - 2.
    """
    D = check_in_range("D", D, 0.0, 1.0)
    return brentq(lambda v: 8 * (1 - v) - (2 - v * D) ** 2, 0.0, 1.0, xtol=1e-14)
