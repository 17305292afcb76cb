# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np
import numpy.typing as npt

from hidden_lgi import cmatrix, search
from hidden_lgi.errors import DegenerateFilter, DimensionMismatch, NonUniformN, OutOfRange, ValidationError
from hidden_lgi.filters import (
    MAX_LOSS,
    FilterLabel,
    FilterSpec,
    frame_axes,
    frame_seeds,
    generic_filter,
    sppo_pair,
    success_probability,
)
from hidden_lgi.quantum import (
    DensityMatrix,
    DichotomicObservable,
    KrausChannel,
    MeasurementScenario,
    choi_of_channel,
    observable_from_bloch,
    pauli,
    transpose_observable,
)
from hidden_lgi.temporal import (
    CLASSICAL_BOUND,
    OUTCOMES,
    VIOLATION_MARGIN,
    TwoTimeStatistics,
    chsh_evaluate,
    filtered_two_time_distribution,
)

logger = logging.getLogger(__name__)

_SIGMAS = tuple(pauli(k) for k in ("x", "y", "z"))
CORRELATION_TOL = 1e-9


@dataclass(frozen=True)
class CorrelationMatrix:
    """t_ij = Tr[rho (sigma_i x sigma_j)]."""

    t: npt.NDArray[np.float64]

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64)
        if t.shape != (3, 3):
            raise DimensionMismatch(f"correlation matrix must be 3x3, got {t.shape}")
        if np.max(np.abs(t)) > 1 + CORRELATION_TOL:
            raise ValidationError("correlation entries must lie in [-1, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    def chsh_maximum(self) -> float:
        """2 sqrt(M), M the sum of the two largest eigenvalues of t^T t."""
        gram = self.t.T @ self.t
        top = cmatrix.hermitian_eigenvalues(gram).eigenvalues[:2]
        return 2 * math.sqrt(max(float(np.sum(top)), 0.0))


class SearchFamily(str, Enum):
    SPPO = "sppo"
    GENERIC = "generic"


@dataclass(frozen=True)
class NonlocalityVerdict:
    chsh_max: float
    local: bool
    hidden_nonlocal: bool
    witness_filters: Optional[tuple[FilterSpec, FilterSpec]]
    strongly_breaking_candidate: bool
    best_filtered_chsh: Optional[float] = None
    resolution: int = 21
    search_family: SearchFamily = SearchFamily.GENERIC

    def __post_init__(self):
        if self.local != (self.chsh_max <= CLASSICAL_BOUND + VIOLATION_MARGIN):
            raise ValidationError("local must agree with the CHSH maximum")
        if self.hidden_nonlocal and not self.local:
            raise ValidationError("only a local state can be hidden nonlocal")

    def to_dict(self) -> dict:
        witness = None
        if self.witness_filters is not None:
            witness = {"a": self.witness_filters[0].to_json(), "b": self.witness_filters[1].to_json()}
        return {
            "chsh_max": self.chsh_max,
            "local": self.local,
            "hidden_nonlocal": self.hidden_nonlocal,
            "best_filtered_chsh": self.best_filtered_chsh,
            "witness_filters": witness,
            "strongly_breaking_candidate": self.strongly_breaking_candidate,
            "resolution": self.resolution,
            "search_family": self.search_family.value,
        }


class FilteredState(NamedTuple):
    state: DensityMatrix
    success: float


def _require_two_qubits(rho: DensityMatrix) -> None:
    if rho.dim != 4:
        raise DimensionMismatch(f"expected a two-qubit state, got dimension {rho.dim}")


def correlation_matrix(rho: DensityMatrix) -> CorrelationMatrix:
    _require_two_qubits(rho)
    matrix = rho.matrix / rho.trace
    t = [[np.real(np.trace(matrix @ np.kron(si, sj))) for sj in _SIGMAS] for si in _SIGMAS]
    return CorrelationMatrix(np.array(t))


def chsh_maximum(rho: DensityMatrix) -> float:
    return correlation_matrix(rho).chsh_maximum()


def _unit(vector, fallback) -> npt.NDArray[np.float64]:
    norm = np.linalg.norm(vector)
    return vector / norm if norm > 1e-12 else np.asarray(fallback, dtype=np.float64)


def optimal_measurements(rho: DensityMatrix) -> tuple[tuple[DichotomicObservable, DichotomicObservable],
                                                       tuple[DichotomicObservable, DichotomicObservable]]:
    """Measurement directions attaining the CHSH maximum C11 + C12 + C21 - C22.

    Bob measures along the top two right singular directions of t mixed at
    angle arctan(s2/s1); Alice measures along t(b1 +/- b2).
    """
    t = correlation_matrix(rho).t
    u, s, vh = np.linalg.svd(t)
    mu = math.atan2(s[1], s[0])
    b1 = math.cos(mu) * vh[0] + math.sin(mu) * vh[1]
    b2 = math.cos(mu) * vh[0] - math.sin(mu) * vh[1]
    a1 = _unit(t @ (b1 + b2), u[:, 0])
    a2 = _unit(t @ (b1 - b2), u[:, 1])
    alice = (observable_from_bloch(a1), observable_from_bloch(a2))
    bob = (observable_from_bloch(b1), observable_from_bloch(b2))
    return alice, bob


def spatial_distribution(rho: DensityMatrix, alice: Sequence[DichotomicObservable],
                         bob: Sequence[DichotomicObservable]) -> TwoTimeStatistics:
    """p(a,b|x,y) = Tr[(M_a|x x M_b|y) rho] in the two-time table layout (Alice's marginals fill N(a|x))."""
    _require_two_qubits(rho)
    matrix = rho.matrix / rho.trace
    p = np.empty((2, 2, 2, 2))
    for (ia, a), (ib, b), (ix, obs_a), (iy, obs_b) in itertools.product(
            enumerate(OUTCOMES), enumerate(OUTCOMES), enumerate(alice), enumerate(bob)):
        effect = np.kron(obs_a.projector(a), obs_b.projector(b))
        p[ia, ib, ix, iy] = np.real(np.trace(effect @ matrix))
    p = np.clip(p, 0.0, None)
    return TwoTimeStatistics(p, p.sum(axis=(1, 3)) / 2)


def spatial_chsh(rho: DensityMatrix, alice: Sequence[DichotomicObservable],
                 bob: Sequence[DichotomicObservable]) -> float:
    return chsh_evaluate(spatial_distribution(rho, alice, bob)).value


def apply_local_filters(rho: DensityMatrix, fa: FilterSpec, fb: FilterSpec) -> FilteredState:
    """(K_A x K_B) rho (K_A x K_B)^dag / N with N the success probability."""
    _require_two_qubits(rho)
    k = np.kron(fa.kraus, fb.kraus)
    filtered = k @ rho.matrix @ np.conj(k).T
    success = cmatrix.trace(filtered).real / rho.trace
    if success < 1e-12:
        raise DegenerateFilter(f"local filters succeed with probability {success:.3e}")
    return FilteredState(DensityMatrix(filtered / (success * rho.trace)), success)


def _side_coordinates(prefix: str, resolution: int) -> tuple[search.Coordinate, ...]:
    # chi only adds a local unitary, which leaves the CHSH maximum unchanged
    return (search.linspace_coordinate(f"{prefix}_loss", 0.0, MAX_LOSS, resolution, is_loss=True),
            search.fixed_coordinate(f"{prefix}_theta", 0.0, math.pi, (0.0, math.pi)),
            search.fixed_coordinate(f"{prefix}_phi", 0.0, 2 * math.pi))


def local_bloch_vectors(rho: DensityMatrix) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Bloch vectors of the two reduced states."""
    _require_two_qubits(rho)
    matrix = rho.matrix / rho.trace
    eye = pauli("identity")
    a = np.array([np.real(np.trace(matrix @ np.kron(s, eye))) for s in _SIGMAS])
    b = np.array([np.real(np.trace(matrix @ np.kron(eye, s))) for s in _SIGMAS])
    return a, b


def state_frame_seeds(rho: DensityMatrix, resolution: int) -> list[list[float]]:
    """Generic filter points whose axes follow the singular directions of t and the local Bloch vectors.

    A local unitary on rho rotates all of these together, so the seeds
    reproduce the same filtered values in every local basis.
    """
    u, s, vh = np.linalg.svd(correlation_matrix(rho).t)
    a, b = local_bloch_vectors(rho)
    return frame_seeds(frame_axes(s, u.T, (a,)), frame_axes(s, vh, (b,)), resolution)


def _build_filters(family: SearchFamily, params) -> tuple[FilterSpec, FilterSpec]:
    if family is SearchFamily.SPPO:
        pre, post = sppo_pair(params[0])
        return pre.transpose(), post
    fa = generic_filter(params[0], (params[1], params[2], 0.0), FilterLabel.GENERIC)
    fb = generic_filter(params[3], (params[4], params[5], 0.0), FilterLabel.GENERIC)
    return fa, fb


def hidden_nonlocality_search(rho: DensityMatrix, resolution: int = 21,
                              search_family: SearchFamily | str = SearchFamily.GENERIC) -> NonlocalityVerdict:
    """Look for local filters that lift a CHSH-local state above the classical bound.

    A negative result means no violation was found at this resolution within
    the family, not that none exists.
    """
    family = SearchFamily(search_family)
    if resolution < 2:
        raise OutOfRange(f"resolution must be at least 2, got {resolution}")
    chsh_max = chsh_maximum(rho)
    if chsh_max > CLASSICAL_BOUND + VIOLATION_MARGIN:
        return NonlocalityVerdict(chsh_max, False, False, None, False, None, resolution, family)

    if family is SearchFamily.SPPO:
        coordinates = (search.linspace_coordinate("D", 0.0, MAX_LOSS, resolution, is_loss=True),)
    else:
        coordinates = _side_coordinates("a", resolution) + _side_coordinates("b", resolution)

    def objective(params) -> Optional[float]:
        fa, fb = _build_filters(family, params)
        try:
            return chsh_maximum(apply_local_filters(rho, fa, fb).state)
        except DegenerateFilter:
            return None

    seeds = [] if family is SearchFamily.SPPO else state_frame_seeds(rho, resolution)
    outcome = search.maximize(objective, coordinates, seeds)
    witness = _build_filters(family, outcome.params)
    best = chsh_maximum(apply_local_filters(rho, *witness).state)
    hidden = best > CLASSICAL_BOUND + VIOLATION_MARGIN
    logger.info("hidden nonlocality search %s at resolution %d: chsh_max %.6f, filtered best %.6f after %d evaluations",
                family.value, resolution, chsh_max, best, outcome.evaluations)
    return NonlocalityVerdict(chsh_max, True, hidden, witness if hidden else None, not hidden,
                              best, resolution, family)


def strongly_breaking_assessment(ch: KrausChannel, resolution: int = 21,
                                 search_family: SearchFamily | str = SearchFamily.GENERIC) -> NonlocalityVerdict:
    """Test the Choi state for (hidden) CHSH nonlocality.

    Any violation found certifies the channel is not strongly CHSH
    nonlocality-breaking; finding none leaves it a candidate at this resolution.
    """
    if not ch.is_trace_preserving or ch.input_dim != 2 or ch.output_dim != 2:
        raise ValidationError("the assessment takes a trace-preserving qubit channel")
    verdict = hidden_nonlocality_search(choi_of_channel(ch).state, resolution, search_family)
    logger.info("strongly nonlocality-breaking candidate: %s", verdict.strongly_breaking_candidate)
    return verdict


def temporal_spatial_consistency(ch: KrausChannel, D: float, scen: MeasurementScenario) -> float:
    """|temporal filtered CHSH - spatial CHSH of the filtered Choi state| under matched measurements.

    The t0 measurements and the pre-filter move to the identity side of the
    Choi state transposed, using (1 x X)|Phi+> = (X^T x 1)|Phi+>.
    """
    pre, post = sppo_pair(D)
    report = success_probability(ch, pre, post, scen)
    if not report.uniform:
        raise NonUniformN(f"filter success varies by {report.spread:.3e} across outcomes and settings")
    temporal = chsh_evaluate(filtered_two_time_distribution(ch, pre.as_map(), post.as_map(), scen)).value

    choi = choi_of_channel(ch)
    filtered = apply_local_filters(choi.state, pre.transpose(), post).state
    alice = tuple(transpose_observable(obs) for obs in scen.t0_observables)
    spatial = spatial_chsh(filtered, alice, scen.t1_observables)
    deviation = abs(temporal - spatial)
    logger.debug("temporal %.15g vs spatial %.15g (deviation %.3e)", temporal, spatial, deviation)
    return deviation
