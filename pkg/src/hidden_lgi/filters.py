# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import numpy.typing as npt

from hidden_lgi import cmatrix, search
from hidden_lgi.cmatrix import ComplexMatrix
from hidden_lgi.errors import DegenerateFilter, DimensionMismatch, OutOfRange, ValidationError
from hidden_lgi.quantum import (
    ChannelKind,
    KrausChannel,
    MeasurementScenario,
    bloch_affine_map,
    channel_to_json,
    check_in_range,
    compose,
)
from hidden_lgi.temporal import (
    CLASSICAL_BOUND,
    OUTCOMES,
    VIOLATION_MARGIN,
    chsh_evaluate,
    filtered_two_time_distribution,
    two_time_distribution,
)

logger = logging.getLogger(__name__)

# losses stop short of 1 so the searched filters never collapse to rank one
MAX_LOSS = 1 - 1e-6
UNIFORMITY_TOL = 1e-9
# singular values closer than this count as degenerate
AXIS_TOL = 1e-9
# filter axes (theta, phi) on the coordinate grid: attenuate |1> or |0>
COMPUTATIONAL_AXES = ((0.0, 0.0), (math.pi, 0.0))


class FilterLabel(str, Enum):
    PRE = "pre"
    POST = "post"
    GENERIC = "generic"


@dataclass(frozen=True)
class FilterSpec:
    """A local filter: a trace-nonincreasing map with one Kraus operator."""

    kraus: ComplexMatrix
    label: FilterLabel = FilterLabel.GENERIC
    params: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        k = cmatrix.as_matrix(self.kraus)
        if k.shape != (2, 2):
            raise DimensionMismatch(f"filters act on qubits, got a {k.shape} Kraus operator")
        defect = cmatrix.identity(2) - np.conj(k).T @ k
        smallest = cmatrix.hermitian_eigenvalues(defect).minimum
        if smallest < -cmatrix.PSD_TOL:
            raise ValidationError(f"1 - K^dag K has eigenvalue {smallest:.3e}; the filter would amplify")
        object.__setattr__(self, "kraus", k)
        object.__setattr__(self, "label", FilterLabel(self.label))

    def as_map(self) -> KrausChannel:
        """The successful branch alone, as used inside the filtered statistics."""
        return KrausChannel((self.kraus,), ChannelKind.TRACE_NONINCREASING)

    def transpose(self) -> FilterSpec:
        return FilterSpec(self.kraus.T, self.label, self.params)

    def to_json(self) -> dict:
        doc = channel_to_json(self.as_map())
        doc["label"] = self.label.value
        if self.params:
            doc["params"] = list(self.params)
        return doc


def identity_filter(label: FilterLabel = FilterLabel.GENERIC) -> FilterSpec:
    return FilterSpec(cmatrix.identity(2), label)


def sppo_pair(D: float) -> tuple[FilterSpec, FilterSpec]:
    """K_pre = |0><0| + sqrt(1-D)|1><1| and K_post = sqrt(1-D)|0><0| + |1><1|."""
    D = check_in_range("D", D, 0.0, 1.0)
    s = math.sqrt(1 - D)
    pre = FilterSpec(np.diag([1.0, s]), FilterLabel.PRE, (D,))
    post = FilterSpec(np.diag([s, 1.0]), FilterLabel.POST, (D,))
    return pre, post


def complete_to_channel(f: FilterSpec) -> KrausChannel:
    """{K, sqrt(1 - K^dag K)}: the filter plus its failure branch."""
    failure = cmatrix.psd_sqrt(cmatrix.identity(2) - np.conj(f.kraus).T @ f.kraus)
    return KrausChannel((f.kraus, failure))


def _axis_rotation(theta: float, phi: float) -> ComplexMatrix:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return cmatrix.as_matrix([[c, -s], [np.exp(1j * phi) * s, np.exp(1j * phi) * c]])


def generic_filter(loss: float, basis_rotation: Sequence[float] = (0.0, 0.0, 0.0),
                   label: FilterLabel = FilterLabel.GENERIC) -> FilterSpec:
    """Rz(chi) R diag(1, sqrt(1-loss)) R^dag with R rotating |0> onto the Bloch direction (theta, phi).

    (theta, phi) is the transmitted direction (theta = 0 attenuates |1> like
    K_pre, theta = pi attenuates |0> like K_post); chi is a phase retardance
    applied after the filter.
    """
    loss = check_in_range("loss", loss, 0.0, 1.0)
    if len(basis_rotation) != 3:
        raise OutOfRange("basis_rotation takes three angles (theta, phi, chi)")
    theta, phi, chi = basis_rotation
    theta = check_in_range("theta", theta, 0.0, math.pi)
    phi = check_in_range("phi", phi, 0.0, 2 * math.pi)
    chi = check_in_range("chi", chi, 0.0, 2 * math.pi)
    r = _axis_rotation(theta, phi)
    attenuation = np.diag([1.0, math.sqrt(1 - loss)])
    retarder = np.diag([1.0, np.exp(1j * chi)])
    kraus = retarder @ r @ attenuation @ np.conj(r).T
    return FilterSpec(kraus, label, (loss, theta, phi, chi))


def bloch_angles(n: Sequence[float]) -> tuple[float, float]:
    """(theta, phi) of a nonzero Bloch direction; phi is 0 at the poles."""
    x, y, z = np.asarray(n, dtype=np.float64) / np.linalg.norm(n)
    theta = math.atan2(math.hypot(x, y), z)
    if theta < AXIS_TOL:
        return 0.0, 0.0
    if math.pi - theta < AXIS_TOL:
        return math.pi, 0.0
    phi = math.atan2(y, x) % (2 * math.pi)
    return theta, 0.0 if 2 * math.pi - phi < AXIS_TOL else phi


def frame_axes(singular_values: Sequence[float], directions: Sequence[Sequence[float]],
               extra: Sequence[Sequence[float]] = ()) -> list[tuple[float, float]]:
    """Filter axes along the nondegenerate singular directions and the nonzero `extra` vectors, both signs.

    Degenerate singular directions are left out: any rotation within their
    subspace is an equally valid SVD.
    """
    s = np.asarray(singular_values, dtype=np.float64)
    candidates = [np.asarray(d) for k, d in enumerate(directions)
                  if np.all(np.abs(np.delete(s, k) - s[k]) > AXIS_TOL)]
    candidates += [np.asarray(e) for e in extra if np.linalg.norm(e) > AXIS_TOL]
    axes = []
    for d in candidates:
        for sign in (1.0, -1.0):
            angles = bloch_angles(sign * d)
            if not any(np.allclose(angles, a, atol=AXIS_TOL) for a in axes):
                axes.append(angles)
    return axes


def frame_seeds(axes_a: Sequence[tuple[float, float]], axes_b: Sequence[tuple[float, float]], resolution: int,
                retardance: Optional[float] = None) -> list[list[float]]:
    """Generic-family points on the loss grid with both filter axes drawn from the computational or the given axes.

    Points whose two axes are both computational are on the coordinate grid
    already and are left out. Each side is (loss, theta, phi), plus chi when
    `retardance` is given.
    """
    losses = np.linspace(0.0, MAX_LOSS, resolution)
    side_a = list(COMPUTATIONAL_AXES) + [a for a in axes_a if a not in COMPUTATIONAL_AXES]
    side_b = list(COMPUTATIONAL_AXES) + [b for b in axes_b if b not in COMPUTATIONAL_AXES]
    tail = [] if retardance is None else [retardance]
    seeds = []
    for axis_a, axis_b in itertools.product(side_a, side_b):
        if axis_a in COMPUTATIONAL_AXES and axis_b in COMPUTATIONAL_AXES:
            continue
        for loss_a, loss_b in itertools.product(losses, losses):
            seeds.append([loss_a, *axis_a, *tail, loss_b, *axis_b, *tail])
    return seeds


def channel_frame_seeds(ch: KrausChannel, resolution: int) -> list[list[float]]:
    """Generic pre/post filter points oriented along the channel's own Bloch frame.

    Pre-filter axes come from the input singular directions of T and
    post-filter axes from the output ones and the offset c, so conjugating
    the channel by a unitary rotates the seeds with it.
    """
    t, c = bloch_affine_map(ch)
    u, s, vh = np.linalg.svd(t)
    return frame_seeds(frame_axes(s, vh), frame_axes(s, u.T, (c,)), resolution, retardance=0.0)


class SuccessReport(NamedTuple):
    table: npt.NDArray[np.float64]  # [a_idx, x_idx]
    uniform: bool

    @property
    def spread(self) -> float:
        return float(self.table.max() - self.table.min())


def success_probability(ch: KrausChannel, pre: FilterSpec, post: FilterSpec,
                        scen: MeasurementScenario) -> SuccessReport:
    """Probability that both filters succeed after outcome a of setting x, and whether it is the same for all (a, x)."""
    process = compose(post.as_map(), compose(ch, pre.as_map()))
    table = np.empty((2, 2))
    for ix, obs in enumerate(scen.t0_observables):
        for ia, a in enumerate(OUTCOMES):
            projector = obs.projector(a)
            table[ia, ix] = cmatrix.trace(process.act(projector)).real / cmatrix.trace(projector).real
    table.setflags(write=False)
    return SuccessReport(table, bool(table.max() - table.min() <= UNIFORMITY_TOL))


class SearchFamily(str, Enum):
    SPPO = "sppo"
    SPPO_PAIR = "sppo_pair"
    GENERIC = "generic"


@dataclass(frozen=True)
class _FilterFamily:
    coordinates: tuple[search.Coordinate, ...]
    build: Callable[[npt.NDArray[np.float64]], tuple[FilterSpec, FilterSpec]]


def _generic_side(params, label: FilterLabel) -> FilterSpec:
    loss, theta, phi, chi = params
    return generic_filter(loss, (theta, phi, chi), label)


def _family(family: SearchFamily, resolution: int) -> _FilterFamily:
    if family is SearchFamily.SPPO:
        return _FilterFamily(
            (search.linspace_coordinate("D", 0.0, MAX_LOSS, resolution, is_loss=True),),
            lambda p: sppo_pair(p[0]))
    if family is SearchFamily.SPPO_PAIR:
        return _FilterFamily(
            (search.linspace_coordinate("D_pre", 0.0, MAX_LOSS, resolution, is_loss=True),
             search.linspace_coordinate("D_post", 0.0, MAX_LOSS, resolution, is_loss=True)),
            lambda p: (sppo_pair(p[0])[0], sppo_pair(p[1])[1]))

    def side(prefix: str) -> tuple[search.Coordinate, ...]:
        return (search.linspace_coordinate(f"{prefix}_loss", 0.0, MAX_LOSS, resolution, is_loss=True),
                search.fixed_coordinate(f"{prefix}_theta", 0.0, math.pi, (0.0, math.pi)),
                search.fixed_coordinate(f"{prefix}_phi", 0.0, 2 * math.pi),
                search.fixed_coordinate(f"{prefix}_chi", 0.0, 2 * math.pi))

    return _FilterFamily(
        side("pre") + side("post"),
        lambda p: (_generic_side(p[:4], FilterLabel.PRE), _generic_side(p[4:], FilterLabel.POST)))


def _generic_params(f: FilterSpec) -> list[float]:
    """Generic-family coordinates of an SPPO filter."""
    D = f.params[0]
    theta = 0.0 if f.label is FilterLabel.PRE else math.pi
    return [D, theta, 0.0, 0.0]


@dataclass(frozen=True)
class ActivationResult:
    best_pre: FilterSpec
    best_post: FilterSpec
    best_value: float
    unfiltered_value: float
    activated: bool
    success_prob_min: float
    search_family: SearchFamily = SearchFamily.SPPO
    resolution: int = 21

    def __post_init__(self):
        if self.activated and not (self.unfiltered_value <= CLASSICAL_BOUND + VIOLATION_MARGIN
                                   < self.best_value):
            raise ValidationError("an activation needs a non-violating channel and a violating filtered value")

    def to_dict(self) -> dict:
        return {
            "unfiltered": self.unfiltered_value,
            "best": self.best_value,
            "activated": self.activated,
            "pre": self.best_pre.to_json(),
            "post": self.best_post.to_json(),
            "min_success_prob": self.success_prob_min,
            "search": self.search_family.value,
            "resolution": self.resolution,
        }


def filtered_chsh_value(ch: KrausChannel, pre: FilterSpec, post: FilterSpec, scen: MeasurementScenario) -> float:
    return chsh_evaluate(filtered_two_time_distribution(ch, pre.as_map(), post.as_map(), scen)).value


def activate(ch: KrausChannel, scen: MeasurementScenario, search_family: SearchFamily | str = SearchFamily.SPPO,
             resolution: int = 21) -> ActivationResult:
    """Search pre/post filters that push the temporal CHSH value of `ch` above the classical bound.

    `activated` is strict: a channel that violates without filters is
    nonmacrorealistic outright, not hidden.
    """
    family = SearchFamily(search_family)
    if not ch.is_trace_preserving:
        raise ValidationError("activation needs a trace-preserving channel")
    if resolution < 2:
        raise OutOfRange(f"resolution must be at least 2, got {resolution}")
    unfiltered_value = chsh_evaluate(two_time_distribution(ch, scen)).value
    spec = _family(family, resolution)

    def objective(params) -> Optional[float]:
        pre, post = spec.build(params)
        try:
            return filtered_chsh_value(ch, pre, post, scen)
        except DegenerateFilter:
            return None

    seeds = []
    if family is SearchFamily.GENERIC:
        # the generic family contains the diagonal filters; start from their optimum too
        narrower = activate(ch, scen, SearchFamily.SPPO_PAIR, resolution)
        seeds.append(_generic_params(narrower.best_pre) + _generic_params(narrower.best_post))
        seeds.extend(channel_frame_seeds(ch, resolution))
    elif family is SearchFamily.SPPO_PAIR:
        narrower = activate(ch, scen, SearchFamily.SPPO, resolution)
        seeds.append([narrower.best_pre.params[0], narrower.best_post.params[0]])

    outcome = search.maximize(objective, spec.coordinates, seeds)
    best_pre, best_post = spec.build(outcome.params)
    stats = filtered_two_time_distribution(ch, best_pre.as_map(), best_post.as_map(), scen)
    best_value = chsh_evaluate(stats).value
    activated = (unfiltered_value <= CLASSICAL_BOUND + VIOLATION_MARGIN
                 and best_value > CLASSICAL_BOUND + VIOLATION_MARGIN)
    logger.info("activation search %s at resolution %d: unfiltered %.6f, best %.6f after %d evaluations%s",
                family.value, resolution, unfiltered_value, best_value, outcome.evaluations,
                " (activated)" if activated else "")
    return ActivationResult(best_pre, best_post, best_value, unfiltered_value, activated,
                            float(stats.filter_success.min()), family, resolution)
