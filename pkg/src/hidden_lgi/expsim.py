"""Monte Carlo emulation of the photonic amplitude-damping experiment.

Each replicate draws the instrumental imperfections (waveplate angle, filter
losses, incident polarization, interferometer visibility), builds the
resulting channel and filters, and samples coincidence counts for the four
setting pairs. The spread of the replicate estimates is the error bar.
"""
# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from hidden_lgi import cmatrix
from hidden_lgi.errors import OutOfRange, ValidationError
from hidden_lgi.filters import FilterSpec, sppo_pair
from hidden_lgi.quantum import (
    KrausChannel,
    MeasurementScenario,
    check_in_range,
    compose,
    hwp_interferometer_channel,
    pauli,
    phase_damping,
    rotate_observable,
)
from hidden_lgi.temporal import (
    CANONICAL_SCENARIO,
    OUTCOMES,
    SETTINGS,
    TwoTimeStatistics,
    chsh_evaluate,
    chsh_value,
    filtered_two_time_distribution,
    two_time_distribution,
)

logger = logging.getLogger(__name__)

DEFAULT_SHOTS = 10_000
DEFAULT_REPLICATES = 100


@dataclass(frozen=True)
class NoiseModel:
    """Half-widths of the uniform instrumental errors.

    `interferometer_visibility` is the (low, high) range the visibility is
    drawn from; equal ends fix it.
    """

    waveplate_angle_sigma: float = 0.0
    d_relative_sigma: float = 0.0
    incident_polarization_sigma: float = 0.0
    interferometer_visibility: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        for name in ("waveplate_angle_sigma", "d_relative_sigma", "incident_polarization_sigma"):
            if getattr(self, name) < 0:
                raise OutOfRange(f"{name} must be non-negative, got {getattr(self, name)}")
        low, high = (float(x) for x in self.interferometer_visibility)
        check_in_range("visibility", low, 0.0, 1.0)
        check_in_range("visibility", high, low, 1.0)
        object.__setattr__(self, "interferometer_visibility", (low, high))

    @classmethod
    def ideal(cls) -> NoiseModel:
        return cls()

    @classmethod
    def laboratory(cls) -> NoiseModel:
        """+/-1 deg waveplates, +/-2% on D, +/-1 deg incident polarization, 96-98% visibility."""
        return cls(math.radians(1), 0.02, math.radians(1), (0.96, 0.98))

    @property
    def is_ideal(self) -> bool:
        return self == NoiseModel.ideal()


NOISE_PRESETS = {
    "ideal": NoiseModel.ideal,
    "laboratory": NoiseModel.laboratory,
}


class PerturbedSetup(NamedTuple):
    channel: KrausChannel
    pre: FilterSpec
    post: FilterSpec
    t0_rotation: float


@dataclass(frozen=True)
class ShotEstimate:
    b_estimate: float
    std_error: float
    shots_per_setting: int
    counts: npt.NDArray[np.int64]  # [a_idx, b_idx, x_idx, y_idx]

    def __post_init__(self):
        per_setting = self.counts.sum(axis=(0, 1))
        if np.any(per_setting != self.shots_per_setting):
            raise ValidationError("counts of every setting pair must add up to shots_per_setting")


@dataclass(frozen=True)
class ExperimentPoint:
    v: float
    D: float
    filtered: bool
    shots: int
    replicates: int
    mean_b: float
    err_b: float
    seed: int

    def to_row(self) -> dict:
        return {
            "v": self.v,
            "D": self.D,
            "filtered": self.filtered,
            "shots": self.shots,
            "replicates": self.replicates,
            "mean_B": self.mean_b,
            "err_B": self.err_b,
            "seed": self.seed,
        }


def _check_seed(seed: int) -> int:
    if seed < 0:
        raise OutOfRange(f"seed must be non-negative, got {seed}")
    return int(seed)


def waveplate_angle(v: float) -> float:
    """HWP1 angle with sin(2 theta) = sqrt(v)."""
    v = check_in_range("v", v, 0.0, 1.0)
    return math.asin(math.sqrt(v)) / 2


def misaligned_scenario(scen: MeasurementScenario, alpha: float) -> MeasurementScenario:
    """Rotate the t0 frame by a polarization misalignment `alpha` (a Bloch rotation of 2 alpha about y)."""
    if alpha == 0:
        return scen
    u = math.cos(alpha) * cmatrix.identity(2) - 1j * math.sin(alpha) * pauli("y")
    t0 = tuple(rotate_observable(obs, u) for obs in scen.t0_observables)
    return MeasurementScenario(t0, scen.t1_observables, name=f"{scen.name}+misaligned")


def perturbed_channel(v: float, D: float, noise: NoiseModel, seed: int) -> PerturbedSetup:
    """Draw one realization of the imperfect setup."""
    v = check_in_range("v", v, 0.0, 1.0)
    D = check_in_range("D", D, 0.0, 1.0)
    rng = np.random.default_rng(_check_seed(seed))

    # every draw is taken even at zero width so streams line up across noise models
    theta_error = rng.uniform(-noise.waveplate_angle_sigma, noise.waveplate_angle_sigma)
    d_pre_error, d_post_error = rng.uniform(-noise.d_relative_sigma, noise.d_relative_sigma, size=2)
    alpha = rng.uniform(-noise.incident_polarization_sigma, noise.incident_polarization_sigma)
    visibility = rng.uniform(*noise.interferometer_visibility)

    theta = float(np.clip(waveplate_angle(v) + theta_error, 0.0, math.pi / 2))
    channel = hwp_interferometer_channel(theta)
    if visibility < 1:
        # dephasing by 1 - V^2 scales the recombined coherence by V
        channel = compose(phase_damping(1 - visibility ** 2), channel)
    d_pre = float(np.clip(D * (1 + d_pre_error), 0.0, 1.0))
    d_post = float(np.clip(D * (1 + d_post_error), 0.0, 1.0))
    pre, post = sppo_pair(d_pre)[0], sppo_pair(d_post)[1]
    logger.debug("perturbed setup: theta %.6f, D_pre %.6f, D_post %.6f, alpha %.6f, visibility %.4f",
                 theta, d_pre, d_post, alpha, visibility)
    return PerturbedSetup(channel, pre, post, float(alpha))


def sample_statistics(stats: TwoTimeStatistics, shots_per_setting: int, seed: int) -> ShotEstimate:
    """Multinomial coincidence counts per setting pair and the CHSH estimate from them.

    The error propagates Var C = (1 - C^2)/n for each empirical correlator.
    """
    if shots_per_setting < 1:
        raise OutOfRange(f"shots_per_setting must be at least 1, got {shots_per_setting}")
    rng = np.random.default_rng(_check_seed(seed))
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for ix, iy in itertools.product(range(len(SETTINGS)), repeat=2):
        p = stats.p[:, :, ix, iy].ravel()
        counts[:, :, ix, iy] = rng.multinomial(shots_per_setting, p / p.sum()).reshape(2, 2)

    signs = np.outer(OUTCOMES, OUTCOMES)
    c = np.einsum("ab,abxy->xy", signs, counts) / shots_per_setting
    variance = np.sum(1 - c ** 2) / shots_per_setting
    return ShotEstimate(chsh_value(c), math.sqrt(max(variance, 0.0)), shots_per_setting, counts)


def setup_statistics(setup: PerturbedSetup, filtered: bool,
                     scen: MeasurementScenario = CANONICAL_SCENARIO) -> TwoTimeStatistics:
    scen = misaligned_scenario(scen, setup.t0_rotation)
    if filtered:
        return filtered_two_time_distribution(setup.channel, setup.pre.as_map(), setup.post.as_map(), scen)
    return two_time_distribution(setup.channel, scen)


def experiment_point(v: float, D: float, filtered: bool, shots: int = DEFAULT_SHOTS,
                     replicates: int = DEFAULT_REPLICATES, noise: NoiseModel | None = None,
                     seed: int = 0) -> ExperimentPoint:
    """Mean temporal CHSH value and error bar over independent replicates.

    Replicate r is seeded from seed + r. The error bar is the standard
    deviation across replicates; a single replicate reports its own shot error.
    """
    if replicates < 1:
        raise OutOfRange(f"replicates must be at least 1, got {replicates}")
    noise = NoiseModel.ideal() if noise is None else noise
    seed = _check_seed(seed)

    estimates = []
    for r in range(replicates):
        noise_seed, shot_seed = (int(s) for s in np.random.SeedSequence(seed + r).generate_state(2))
        setup = perturbed_channel(v, D, noise, noise_seed)
        stats = setup_statistics(setup, filtered)
        estimates.append(sample_statistics(stats, shots, shot_seed))

    values = np.array([e.b_estimate for e in estimates])
    err = float(np.std(values, ddof=1)) if replicates > 1 else estimates[0].std_error
    point = ExperimentPoint(float(v), float(D), bool(filtered), int(shots), int(replicates),
                            float(values.mean()), err, seed)
    logger.info("experiment v=%.4f D=%.4f filtered=%s: B = %.5f +/- %.5f (%d x %d shots)",
                v, D, filtered, point.mean_b, point.err_b, replicates, shots)
    return point


def exact_value(v: float, D: float, filtered: bool, scen: MeasurementScenario = CANONICAL_SCENARIO) -> float:
    """Noise-free, infinite-shot value of the emulated point."""
    setup = perturbed_channel(v, D, NoiseModel.ideal(), 0)
    return chsh_evaluate(setup_statistics(setup, filtered, scen)).value
