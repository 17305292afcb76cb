# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

import json
import logging
import math
import pathlib
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import numpy.typing as npt

from hidden_lgi import cmatrix
from hidden_lgi.cmatrix import ComplexMatrix
from hidden_lgi.errors import (
    DimensionMismatch,
    NotHermitian,
    NotPSD,
    NotUnitVector,
    OutOfRange,
    ParseError,
    ValidationError,
)

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-9
PROJECTOR_TOL = 1e-10


def check_in_range(name: str, value: float, low: float, high: float) -> float:
    """Return `value` as a float, raising OutOfRange unless low <= value <= high."""
    value = float(value)
    if not math.isfinite(value) or value < low or value > high:
        raise OutOfRange(f"{name}={value} is outside [{low}, {high}]")
    return value


class ChannelKind(str, Enum):
    TRACE_PRESERVING = "tp"
    TRACE_NONINCREASING = "tni"


@dataclass(frozen=True)
class DensityMatrix:
    """A positive semidefinite operator; unnormalized values are allowed and flagged."""

    matrix: ComplexMatrix
    normalized: bool = True

    def __post_init__(self):
        matrix = cmatrix.as_matrix(self.matrix)
        spectrum = cmatrix.hermitian_eigenvalues(matrix)
        if spectrum.minimum < -cmatrix.PSD_TOL:
            raise NotPSD(f"state has negative eigenvalue {spectrum.minimum:.3e}")
        if self.normalized and abs(cmatrix.trace(matrix) - 1) > TRACE_TOL:
            raise ValidationError(f"normalized state has trace {cmatrix.trace(matrix).real:.12g}")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_ket(cls, psi: Sequence[complex]) -> DensityMatrix:
        ket = np.asarray(psi, dtype=np.complex128).reshape(-1, 1)
        ket = ket / np.linalg.norm(ket)
        return cls(ket @ np.conj(ket).T)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return cmatrix.trace(self.matrix).real

    def normalize(self) -> DensityMatrix:
        return DensityMatrix(self.matrix / self.trace, normalized=True)

    def purity(self) -> float:
        rho = self.matrix / self.trace
        return cmatrix.trace(rho @ rho).real


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive map given by its Kraus operators (each d_out x d_in)."""

    kraus_ops: tuple[ComplexMatrix, ...]
    kind: ChannelKind = ChannelKind.TRACE_PRESERVING

    def __post_init__(self):
        ops = tuple(cmatrix.as_matrix(k) for k in self.kraus_ops)
        if not ops:
            raise ValidationError("a channel needs at least one Kraus operator")
        if any(k.shape != ops[0].shape for k in ops):
            raise DimensionMismatch("Kraus operators must share one shape")
        if not all(np.all(np.isfinite(k)) for k in ops):
            raise ValidationError("Kraus operators must have finite entries")
        kind = ChannelKind(self.kind)
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "kind", kind)

        completeness = self.completeness()
        eye = cmatrix.identity(self.input_dim)
        if kind is ChannelKind.TRACE_PRESERVING:
            distance = cmatrix.frobenius_distance(completeness, eye)
            if distance > TRACE_TOL:
                raise ValidationError(f"sum of K^dag K differs from identity by {distance:.3e}")
        else:
            defect = cmatrix.hermitian_eigenvalues(eye - completeness).minimum
            if defect < -cmatrix.PSD_TOL:
                raise ValidationError(f"map increases trace (1 - sum K^dag K has eigenvalue {defect:.3e})")

    @property
    def input_dim(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def is_trace_preserving(self) -> bool:
        return self.kind is ChannelKind.TRACE_PRESERVING

    def completeness(self) -> ComplexMatrix:
        return cmatrix.as_matrix(sum(np.conj(k).T @ k for k in self.kraus_ops))

    def act(self, x: ComplexMatrix) -> ComplexMatrix:
        """Sum_i K_i X K_i^dag on a raw operator."""
        if x.shape != (self.input_dim, self.input_dim):
            raise DimensionMismatch(f"channel takes {self.input_dim}x{self.input_dim} inputs, got {x.shape}")
        return cmatrix.as_matrix(sum(k @ x @ np.conj(k).T for k in self.kraus_ops))


@dataclass(frozen=True)
class DichotomicObservable:
    """A +/-1 valued projective measurement."""

    observable: ComplexMatrix
    projector_plus: ComplexMatrix
    projector_minus: ComplexMatrix

    def __post_init__(self):
        obs = cmatrix.as_matrix(self.observable)
        plus = cmatrix.as_matrix(self.projector_plus)
        minus = cmatrix.as_matrix(self.projector_minus)
        eye = cmatrix.identity(obs.shape[0])
        if not (obs.shape == plus.shape == minus.shape):
            raise DimensionMismatch("observable and projectors must share one shape")
        if np.max(np.abs(plus + minus - eye)) > PROJECTOR_TOL:
            raise ValidationError("projectors do not resolve the identity")
        if np.max(np.abs(plus - minus - obs)) > PROJECTOR_TOL:
            raise ValidationError("observable is not P+ - P-")
        for projector in (plus, minus):
            if np.max(np.abs(projector @ projector - projector)) > PROJECTOR_TOL:
                raise ValidationError("projector is not idempotent")
        object.__setattr__(self, "observable", obs)
        object.__setattr__(self, "projector_plus", plus)
        object.__setattr__(self, "projector_minus", minus)

    @classmethod
    def from_projector(cls, projector_plus: ComplexMatrix) -> DichotomicObservable:
        plus = cmatrix.as_matrix(projector_plus)
        minus = cmatrix.identity(plus.shape[0]) - plus
        return cls(plus - minus, plus, minus)

    @property
    def dim(self) -> int:
        return self.observable.shape[0]

    def projector(self, outcome: int) -> ComplexMatrix:
        if outcome == 1:
            return self.projector_plus
        if outcome == -1:
            return self.projector_minus
        raise OutOfRange(f"dichotomic outcomes are +1 and -1, got {outcome}")


@dataclass(frozen=True)
class MeasurementScenario:
    """Two dichotomic settings at t0 (x = 1, 2) and two at t1 (y = 1, 2)."""

    t0_observables: tuple[DichotomicObservable, DichotomicObservable]
    t1_observables: tuple[DichotomicObservable, DichotomicObservable]
    name: str = "custom"

    def __post_init__(self):
        t0 = tuple(self.t0_observables)
        t1 = tuple(self.t1_observables)
        if len(t0) != 2 or len(t1) != 2:
            raise ValidationError("a scenario has exactly two settings per time slot")
        if len({obs.dim for obs in t0 + t1}) != 1:
            raise DimensionMismatch("all observables of a scenario must act on one space")
        object.__setattr__(self, "t0_observables", t0)
        object.__setattr__(self, "t1_observables", t1)

    @property
    def dim(self) -> int:
        return self.t0_observables[0].dim


@dataclass(frozen=True)
class ChoiState:
    """(1 x E)|Phi+><Phi+|; the channel acts on the second tensor factor."""

    state: DensityMatrix
    input_dim: int
    trace_preserving: bool = True

    def __post_init__(self):
        if self.state.dim % self.input_dim:
            raise DimensionMismatch(f"state of dimension {self.state.dim} is not d_in x d_out for d_in={self.input_dim}")
        if self.trace_preserving:
            marginal = self.input_marginal()
            expected = cmatrix.identity(self.input_dim) / self.input_dim
            if cmatrix.frobenius_distance(marginal, expected) > TRACE_TOL:
                raise ValidationError("input marginal of a trace-preserving Choi state must be 1/d")

    @property
    def output_dim(self) -> int:
        return self.state.dim // self.input_dim

    @property
    def dims(self) -> tuple[int, int]:
        return self.input_dim, self.output_dim

    def input_marginal(self) -> ComplexMatrix:
        return cmatrix.partial_trace(self.state.matrix, 1, self.dims)

    def channel_action(self, x: ComplexMatrix) -> ComplexMatrix:
        """Lambda(X) = d Tr_in[(X^T x 1) rho_CJ]."""
        lifted = cmatrix.kron(np.asarray(x).T, cmatrix.identity(self.output_dim))
        return cmatrix.as_matrix(self.input_dim * cmatrix.partial_trace(lifted @ self.state.matrix, 0, self.dims))


_PAULI = {
    "identity": cmatrix.as_matrix([[1, 0], [0, 1]]),
    "x": cmatrix.as_matrix([[0, 1], [1, 0]]),
    "y": cmatrix.as_matrix([[0, -1j], [1j, 0]]),
    "z": cmatrix.as_matrix([[1, 0], [0, -1]]),
}


def pauli(which: str) -> ComplexMatrix:
    key = "identity" if which in ("i", "I") else which.lower()
    try:
        return _PAULI[key]
    except KeyError:
        raise OutOfRange(f"unknown Pauli matrix {which!r}") from None


def bloch_operator(n: Sequence[float]) -> ComplexMatrix:
    """n . sigma"""
    nx, ny, nz = (float(c) for c in n)
    return cmatrix.as_matrix(nx * _PAULI["x"] + ny * _PAULI["y"] + nz * _PAULI["z"])


def bloch_state(n: Sequence[float]) -> DensityMatrix:
    """Qubit state (1 + n . sigma)/2 for |n| <= 1; z = +1 is |0> = |H>."""
    if np.linalg.norm(n) > 1 + TRACE_TOL:
        raise OutOfRange(f"Bloch vector {tuple(n)} lies outside the unit ball")
    return DensityMatrix((_PAULI["identity"] + bloch_operator(n)) / 2)


def observable_from_bloch(n: Sequence[float]) -> DichotomicObservable:
    norm = float(np.linalg.norm(n))
    if len(n) != 3 or abs(norm - 1) > TRACE_TOL:
        raise NotUnitVector(f"Bloch direction {tuple(n)} has norm {norm}")
    obs = bloch_operator(n)
    eye = _PAULI["identity"]
    return DichotomicObservable(obs, (eye + obs) / 2, (eye - obs) / 2)


def rotate_observable(obs: DichotomicObservable, unitary: ComplexMatrix) -> DichotomicObservable:
    u = cmatrix.as_matrix(unitary)
    u_dag = cmatrix.adjoint(u)
    return DichotomicObservable(u @ obs.observable @ u_dag,
                                u @ obs.projector_plus @ u_dag,
                                u @ obs.projector_minus @ u_dag)


def transpose_observable(obs: DichotomicObservable) -> DichotomicObservable:
    return DichotomicObservable(obs.observable.T, obs.projector_plus.T, obs.projector_minus.T)


def maximally_mixed(d: int) -> DensityMatrix:
    if d < 1:
        raise OutOfRange(f"dimension must be at least 1, got {d}")
    return DensityMatrix(cmatrix.identity(d) / d)


def identity_channel(d: int = 2) -> KrausChannel:
    return KrausChannel((cmatrix.identity(d),))


def apply_channel(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """Sum_i K_i rho K_i^dag; the result is flagged normalized only for TP channels on normalized input."""
    if rho.dim != ch.input_dim:
        raise DimensionMismatch(f"channel takes dimension {ch.input_dim}, state has {rho.dim}")
    return DensityMatrix(ch.act(rho.matrix), normalized=rho.normalized and ch.is_trace_preserving)


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """outer after inner, Kraus operators {K_o K_i}."""
    if inner.output_dim != outer.input_dim:
        raise DimensionMismatch(f"cannot feed dimension {inner.output_dim} into a channel taking {outer.input_dim}")
    kind = (ChannelKind.TRACE_PRESERVING
            if outer.is_trace_preserving and inner.is_trace_preserving
            else ChannelKind.TRACE_NONINCREASING)
    return KrausChannel(tuple(k_o @ k_i for k_o in outer.kraus_ops for k_i in inner.kraus_ops), kind)


def bloch_affine_map(ch: KrausChannel) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """(T, c) with Lambda((1 + n.sigma)/2) = (1 + (T n + c).sigma)/2 for a qubit channel."""
    if ch.input_dim != 2 or ch.output_dim != 2:
        raise DimensionMismatch("the Bloch representation needs a qubit channel")
    sigmas = [_PAULI[k] for k in ("x", "y", "z")]
    t = np.array([[np.real(np.trace(si @ ch.act(sj))) / 2 for sj in sigmas] for si in sigmas])
    c = np.array([np.real(np.trace(si @ ch.act(_PAULI["identity"]))) / 2 for si in sigmas])
    return t, c


def amplitude_damping(v: float) -> KrausChannel:
    """Decay of |1> into |0> with probability v."""
    v = check_in_range("v", v, 0.0, 1.0)
    e1 = cmatrix.as_matrix([[1, 0], [0, math.sqrt(1 - v)]])
    e2 = cmatrix.as_matrix([[0, math.sqrt(v)], [0, 0]])
    return KrausChannel((e1, e2))


def phase_damping(p: float) -> KrausChannel:
    """Coherences shrink by sqrt(1 - p); populations are untouched."""
    p = check_in_range("p", p, 0.0, 1.0)
    k0 = cmatrix.as_matrix([[1, 0], [0, math.sqrt(1 - p)]])
    k1 = cmatrix.as_matrix([[0, 0], [0, math.sqrt(p)]])
    return KrausChannel((k0, k1))


def depolarizing(p: float) -> KrausChannel:
    """rho -> (1 - p) rho + p 1/2."""
    p = check_in_range("p", p, 0.0, 1.0)
    weights = (math.sqrt(1 - 3 * p / 4), math.sqrt(p / 4), math.sqrt(p / 4), math.sqrt(p / 4))
    ops = (_PAULI["identity"], _PAULI["x"], _PAULI["y"], _PAULI["z"])
    return KrausChannel(tuple(w * op for w, op in zip(weights, ops)))


def half_wave_plate(theta: float) -> ComplexMatrix:
    """Jones matrix of a half-wave plate with its fast axis at `theta` from H."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return cmatrix.as_matrix([[c, s], [s, -c]])


def hwp_interferometer_channel(theta: float) -> KrausChannel:
    """Amplitude damping as realized in the polarization interferometer.

    HWP1 in the V arm converts V into H with amplitude sin(2 theta); the
    converted light is delayed and recombines incoherently, while the V part
    left in the arm recombines coherently with the H arm. HWP2 in the H arm
    compensates the relative phase, so the channel equals
    amplitude_damping(sin^2 2 theta).
    """
    theta = check_in_range("theta", theta, 0.0, math.pi / 2)
    converted, transmitted = half_wave_plate(theta) @ np.array([0.0, 1.0])
    compensation = np.conj(transmitted) / abs(transmitted) if abs(transmitted) > 0 else 1.0
    coherent = cmatrix.as_matrix([[1, 0], [0, compensation * transmitted]])
    delayed = cmatrix.as_matrix([[0, abs(converted)], [0, 0]])
    return KrausChannel((coherent, delayed))


def choi_of_channel(ch: KrausChannel) -> ChoiState:
    d = ch.input_dim
    phi_plus = np.zeros(d * d, dtype=np.complex128)
    phi_plus[[i * d + i for i in range(d)]] = 1 / math.sqrt(d)
    projector = np.outer(phi_plus, np.conj(phi_plus))
    eye = cmatrix.identity(d)
    lifted = [np.kron(eye, k) for k in ch.kraus_ops]
    state = sum(k @ projector @ np.conj(k).T for k in lifted)
    return ChoiState(DensityMatrix(state, normalized=ch.is_trace_preserving), d,
                     trace_preserving=ch.is_trace_preserving)


# tomographically complete qubit inputs |0>, |1>, |+>, |+i>
TOMOGRAPHIC_STATES = tuple(bloch_state(n) for n in ((0, 0, 1), (0, 0, -1), (1, 0, 0), (0, 1, 0)))


def channel_to_json(ch: KrausChannel) -> dict:
    if ch.input_dim != ch.output_dim:
        raise DimensionMismatch("the channel document stores square Kraus operators only")
    return {
        "dim": ch.input_dim,
        "kind": ch.kind.value,
        "kraus": [[[float(z.real), float(z.imag)] for z in k.ravel()] for k in ch.kraus_ops],
    }


def channel_from_json(doc) -> KrausChannel:
    """Parse a channel document; structural problems raise ParseError, non-CP input ValidationError."""
    if not isinstance(doc, dict):
        raise ParseError("channel document must be a JSON object")
    try:
        d = doc["dim"]
        kind = doc.get("kind", ChannelKind.TRACE_PRESERVING.value)
        raw_ops = doc["kraus"]
    except KeyError as e:
        raise ParseError(f"channel document is missing {e.args[0]!r}") from None
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ParseError(f"'dim' must be a positive integer, got {d!r}")
    if kind not in {k.value for k in ChannelKind}:
        raise ParseError(f"'kind' must be 'tp' or 'tni', got {kind!r}")
    if not isinstance(raw_ops, list) or not raw_ops:
        raise ParseError("'kraus' must be a non-empty list")

    ops = []
    for index, entries in enumerate(raw_ops):
        if not isinstance(entries, list) or len(entries) != d * d:
            raise ParseError(f"Kraus operator {index} must list {d * d} [re, im] entries")
        try:
            values = [complex(float(re), float(im)) for re, im in entries]
        except (TypeError, ValueError):
            raise ParseError(f"Kraus operator {index} has malformed [re, im] entries") from None
        ops.append(np.array(values).reshape(d, d))

    try:
        return KrausChannel(tuple(ops), ChannelKind(kind))
    except (NotHermitian, NotPSD) as e:
        raise ValidationError(str(e)) from e


def load_channel(path: str | pathlib.Path) -> KrausChannel:
    path = pathlib.Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e
    ch = channel_from_json(doc)
    logger.debug("loaded %s channel with %d Kraus operators from %s", ch.kind.value, len(ch.kraus_ops), path)
    return ch


def save_channel(ch: KrausChannel, path: str | pathlib.Path) -> None:
    pathlib.Path(path).write_text(json.dumps(channel_to_json(ch), indent=2))
