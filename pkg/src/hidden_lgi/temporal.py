# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

import itertools
import json
import logging
import math
import pathlib
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from hidden_lgi import cmatrix
from hidden_lgi.cmatrix import ComplexMatrix
from hidden_lgi.errors import DegenerateFilter, DimensionMismatch, SignallingStatistics, ValidationError
from hidden_lgi.quantum import (
    KrausChannel,
    MeasurementScenario,
    compose,
    maximally_mixed,
    observable_from_bloch,
)

logger = logging.getLogger(__name__)

# outcome a = OUTCOMES[i] is stored at index i; setting x = SETTINGS[i] likewise
OUTCOMES = (1, -1)
SETTINGS = (1, 2)

CLASSICAL_BOUND = 2.0
VIOLATION_MARGIN = 1e-9
DEGENERATE_N = 1e-12
NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class TwoTimeStatistics:
    """p(a,b|x,y) stored as p[a_idx, b_idx, x_idx, y_idx].

    `success_prob[a_idx, x_idx]` is N(a|x) = Tr[Lambda(M_a|x)]/d, the joint
    probability of outcome a and filter success on the maximally mixed
    input. `filter_success[a_idx, x_idx]` is the probability that the
    filters succeed given outcome a (1 without filters).
    """

    p: npt.NDArray[np.float64]
    success_prob: npt.NDArray[np.float64]
    filter_success: npt.NDArray[np.float64] | None = None

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        n = np.array(self.success_prob, dtype=np.float64)
        f = np.ones((2, 2)) if self.filter_success is None else np.array(self.filter_success, dtype=np.float64)
        if p.shape != (2, 2, 2, 2) or n.shape != (2, 2) or f.shape != (2, 2):
            raise DimensionMismatch("two-time statistics need a 2x2x2x2 table and 2x2 success tables")
        if p.min() < -NORMALIZATION_TOL:
            raise ValidationError(f"negative probability {p.min():.3e}")
        sums = p.sum(axis=(0, 1))
        if np.max(np.abs(sums - 1)) > NORMALIZATION_TOL:
            raise ValidationError(f"p(.,.|x,y) sums to {sums.ravel()} instead of 1")
        for table in (n, f):
            if table.min() < -NORMALIZATION_TOL or table.max() > 1 + NORMALIZATION_TOL:
                raise ValidationError("success probabilities must lie in [0, 1]")
        for array in (p, n, f):
            array.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "success_prob", n)
        object.__setattr__(self, "filter_success", f)

    @classmethod
    def uniform(cls) -> TwoTimeStatistics:
        return cls(np.full((2, 2, 2, 2), 0.25), np.full((2, 2), 0.5))

    def prob(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.p[OUTCOMES.index(a), OUTCOMES.index(b), SETTINGS.index(x), SETTINGS.index(y)])

    def n(self, a: int, x: int) -> float:
        return float(self.success_prob[OUTCOMES.index(a), SETTINGS.index(x)])


@dataclass(frozen=True)
class ChshReport:
    correlators: npt.NDArray[np.float64]  # C[x_idx, y_idx]
    value: float
    violated: bool
    nsit_deviation: float

    def correlator(self, x: int, y: int) -> float:
        return float(self.correlators[SETTINGS.index(x), SETTINGS.index(y)])

    def to_dict(self) -> dict:
        return {
            "correlators": {f"{x},{y}": self.correlator(x, y) for x in SETTINGS for y in SETTINGS},
            "value": self.value,
            "violated": self.violated,
            "nsit_deviation": self.nsit_deviation,
        }


class NsitCheck(NamedTuple):
    holds: bool
    deviation: float


def _scenario(t0: tuple, t1: tuple, name: str) -> MeasurementScenario:
    return MeasurementScenario(tuple(observable_from_bloch(n) for n in t0),
                               tuple(observable_from_bloch(n) for n in t1),
                               name=name)


_R = 1 / math.sqrt(2)

# sigma_x, sigma_y at t0 and (sigma_x +/- sigma_y)/sqrt(2) at t1
CANONICAL_SCENARIO = _scenario(((1, 0, 0), (0, 1, 0)), ((_R, _R, 0), (_R, -_R, 0)), "canonical")

SCENARIOS = {
    "canonical": CANONICAL_SCENARIO,
    # t0 leaves the Bloch xy-plane, so diagonal filters act unevenly on its eigenstates
    "sigma_z_t0": _scenario(((0, 0, 1), (1, 0, 0)), ((_R, 0, _R), (_R, 0, -_R)), "sigma_z_t0"),
}


def get_scenario_names() -> list[str]:
    return sorted(SCENARIOS)


def get_scenario(name: str) -> MeasurementScenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValidationError(f"unknown scenario {name!r}; choose from {get_scenario_names()}") from None


def _born_table(process: Callable[[ComplexMatrix], ComplexMatrix], scen: MeasurementScenario):
    """Tr[M_b|y process(M_a|x)] for every a, b, x, y plus Tr[process(M_a|x)]."""
    joint = np.empty((2, 2, 2, 2))
    traces = np.empty((2, 2))
    for (ia, a), (ix, obs_x) in itertools.product(enumerate(OUTCOMES), enumerate(scen.t0_observables)):
        evolved = process(obs_x.projector(a))
        traces[ia, ix] = cmatrix.trace(evolved).real
        for (ib, b), (iy, obs_y) in itertools.product(enumerate(OUTCOMES), enumerate(scen.t1_observables)):
            joint[ia, ib, ix, iy] = np.real(np.vdot(obs_y.projector(b), evolved))
    return np.clip(joint, 0.0, None), traces


def _check_dims(ch: KrausChannel, scen: MeasurementScenario) -> None:
    if ch.input_dim != scen.dim or ch.output_dim != scen.dim:
        raise DimensionMismatch(f"channel {ch.input_dim}->{ch.output_dim} does not fit a dimension-{scen.dim} scenario")


def two_time_distribution(ch: KrausChannel, scen: MeasurementScenario) -> TwoTimeStatistics:
    """Born statistics of Lueders measurements at t0 and t1 on the maximally mixed input."""
    if not ch.is_trace_preserving:
        raise ValidationError("two-time statistics need a trace-preserving channel")
    _check_dims(ch, scen)
    rho0 = maximally_mixed(scen.dim).matrix
    joint, n = _born_table(lambda m: ch.act(m @ rho0 @ m), scen)
    return TwoTimeStatistics(joint, n)


def filtered_two_time_distribution(ch: KrausChannel, pre: KrausChannel, post: KrausChannel,
                                   scen: MeasurementScenario) -> TwoTimeStatistics:
    """Statistics of Lambda_post o E o Lambda_pre, post-selected on both filters succeeding.

    p(a,b|x,y) = Tr[M_b Lambda(M_a)]/(d N(a|x)) weighted by N(a|x)/sum_a' N(a'|x),
    which normalizes each setting pair and equals Tr[M_b Lambda(M_a)]/Tr[Lambda(1)].
    """
    if not ch.is_trace_preserving:
        raise ValidationError("the channel under test must be trace preserving")
    _check_dims(ch, scen)
    d = scen.dim
    process = compose(post, compose(ch, pre))
    joint, traces = _born_table(process.act, scen)

    n = traces / d
    if n.min() < DEGENERATE_N:
        raise DegenerateFilter(f"success probability N(a|x) = {n.min():.3e} vanishes")
    conditional = joint / (d * n)[:, None, :, None]
    p = conditional * (n / n.sum(axis=0))[:, None, :, None]
    ranks = np.array([[cmatrix.trace(obs.projector(a)).real for obs in scen.t0_observables] for a in OUTCOMES])
    return TwoTimeStatistics(p, n, filter_success=np.clip(traces / ranks, 0.0, 1.0))


def nsit_deviation(stats: TwoTimeStatistics) -> float:
    """max over b, y and x != x' of |p(b|x,y) - p(b|x',y)|."""
    marginals = stats.p.sum(axis=0)  # [b, x, y]
    return float(np.max(np.abs(marginals[:, 0, :] - marginals[:, 1, :])))


def nsit_check(stats: TwoTimeStatistics, tol: float = NORMALIZATION_TOL) -> NsitCheck:
    deviation = nsit_deviation(stats)
    return NsitCheck(deviation <= tol, deviation)


def correlators(stats: TwoTimeStatistics) -> npt.NDArray[np.float64]:
    signs = np.outer(OUTCOMES, OUTCOMES)
    return np.einsum("ab,abxy->xy", signs, stats.p)


def chsh_value(c: npt.NDArray[np.float64]) -> float:
    """C11 + C21 + C12 - C22 from C[x_idx, y_idx]."""
    return float(c[0, 0] + c[1, 0] + c[0, 1] - c[1, 1])


def chsh_variants(c: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """All eight CHSH expressions: one negated term, either overall sign."""
    values = []
    for negated in itertools.product(range(2), range(2)):
        signs = np.ones((2, 2))
        signs[negated] = -1
        expression = float(np.sum(signs * c))
        values.extend((expression, -expression))
    return np.array(values)


def chsh_evaluate(stats: TwoTimeStatistics) -> ChshReport:
    c = correlators(stats)
    value = chsh_value(c)
    c.setflags(write=False)
    return ChshReport(c, value, value > CLASSICAL_BOUND + VIOLATION_MARGIN, nsit_deviation(stats))


def macrorealism_chsh_check(stats: TwoTimeStatistics) -> bool:
    """True iff every CHSH variant respects the classical bound.

    Under no-signalling-in-time the eight variants are the facets of the
    two-setting, two-outcome correlation polytope (Fine's theorem), so this
    decides whether a macrorealistic model exists for the table.
    """
    check = nsit_check(stats, NORMALIZATION_TOL)
    if not check.holds:
        raise SignallingStatistics(f"statistics signal in time (deviation {check.deviation:.3e})")
    return bool(np.all(chsh_variants(correlators(stats)) <= CLASSICAL_BOUND + VIOLATION_MARGIN))


def statistics_frame(stats: TwoTimeStatistics) -> pd.DataFrame:
    rows = [
        {"a": a, "b": b, "x": x, "y": y, "p": stats.prob(a, b, x, y)}
        for a, b, x, y in itertools.product(OUTCOMES, OUTCOMES, SETTINGS, SETTINGS)
    ]
    return pd.DataFrame(rows, columns=["a", "b", "x", "y", "p"])


def write_statistics(stats: TwoTimeStatistics, path: str | pathlib.Path) -> pathlib.Path:
    """Write the table as CSV and N(a|x) as a JSON sidecar next to it; returns the sidecar path."""
    path = pathlib.Path(path)
    statistics_frame(stats).to_csv(path, index=False, float_format="%.15g")
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({"N": {f"{a}|{x}": stats.n(a, x) for a in OUTCOMES for x in SETTINGS}}, indent=2))
    logger.debug("wrote statistics to %s and %s", path, sidecar)
    return sidecar
