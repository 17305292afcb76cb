import json
import math

import numpy as np
import pytest

from hidden_lgi import cmatrix
from hidden_lgi.errors import NotPSD, NotUnitVector, OutOfRange, ParseError, ValidationError
from hidden_lgi.quantum import (
    TOMOGRAPHIC_STATES,
    ChannelKind,
    ChoiState,
    DensityMatrix,
    KrausChannel,
    amplitude_damping,
    apply_channel,
    bloch_affine_map,
    bloch_state,
    channel_from_json,
    channel_to_json,
    choi_of_channel,
    compose,
    depolarizing,
    hwp_interferometer_channel,
    identity_channel,
    load_channel,
    maximally_mixed,
    observable_from_bloch,
    pauli,
    phase_damping,
    save_channel,
)

from .conftest import PROPERTY_INSTANCES


def same_action(a: KrausChannel, b: KrausChannel) -> bool:
    return all(np.allclose(a.act(rho.matrix), b.act(rho.matrix), atol=1e-12) for rho in TOMOGRAPHIC_STATES)


def test_amplitude_damping_decays_excited_state():
    rho = apply_channel(amplitude_damping(0.3), DensityMatrix(np.diag([0.0, 1.0])))
    assert(np.allclose(rho.matrix, np.diag([0.3, 0.7])))
    assert(rho.normalized)


@pytest.mark.parametrize("v", [0.0, 0.25, 0.5, 0.9, 1.0])
def test_amplitude_damping_is_trace_preserving(v):
    ch = amplitude_damping(v)
    assert(ch.is_trace_preserving)
    assert(cmatrix.frobenius_distance(ch.completeness(), cmatrix.identity(2)) < 1e-12)


def test_amplitude_damping_range():
    with pytest.raises(OutOfRange):
        amplitude_damping(1.2)
    with pytest.raises(OutOfRange):
        amplitude_damping(-0.1)


def test_random_channels_are_cptp(rng, random_channel):
    for _ in range(PROPERTY_INSTANCES):
        ch = random_channel(rng)
        assert(cmatrix.frobenius_distance(ch.completeness(), cmatrix.identity(2)) < 1e-9)
        assert(cmatrix.is_psd(choi_of_channel(ch).state.matrix))


def test_trace_preserving_kind_is_checked():
    with pytest.raises(ValidationError):
        KrausChannel((np.diag([1.0, 0.5]),))
    # the same operator is a valid trace-nonincreasing map
    tni = KrausChannel((np.diag([1.0, 0.5]),), ChannelKind.TRACE_NONINCREASING)
    assert(not tni.is_trace_preserving)


def test_trace_increasing_map_is_rejected():
    with pytest.raises(ValidationError):
        KrausChannel((np.diag([1.5, 0.5]),), ChannelKind.TRACE_NONINCREASING)


def test_compose_amplitude_damping():
    composed = compose(amplitude_damping(0.3), amplitude_damping(0.5))
    assert(composed.is_trace_preserving)
    assert(same_action(composed, amplitude_damping(1 - 0.7 * 0.5)))


def test_compose_with_filter_is_trace_nonincreasing():
    tni = KrausChannel((np.diag([1.0, 0.5]),), ChannelKind.TRACE_NONINCREASING)
    assert(compose(amplitude_damping(0.2), tni).kind is ChannelKind.TRACE_NONINCREASING)


def test_phase_and_depolarizing_limits():
    plus = TOMOGRAPHIC_STATES[2].matrix
    assert(np.allclose(phase_damping(1.0).act(plus), np.eye(2) / 2))
    assert(np.allclose(depolarizing(1.0).act(TOMOGRAPHIC_STATES[0].matrix), np.eye(2) / 2))
    assert(np.allclose(phase_damping(0.36).act(plus)[0, 1], 0.5 * 0.8))


def test_choi_of_identity_is_maximally_entangled():
    choi = choi_of_channel(identity_channel(2))
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert(np.allclose(choi.state.matrix, np.outer(phi, phi)))
    assert(choi.state.purity() == pytest.approx(1.0))


def test_choi_marginal_and_channel_action(rng, random_channel):
    for _ in range(PROPERTY_INSTANCES):
        ch = random_channel(rng)
        choi = choi_of_channel(ch)
        assert(np.allclose(choi.input_marginal(), np.eye(2) / 2, atol=1e-10))
        rho = TOMOGRAPHIC_STATES[rng.integers(4)].matrix
        assert(np.allclose(choi.channel_action(rho), ch.act(rho), atol=1e-10))


def test_choi_state_rejects_wrong_marginal():
    with pytest.raises(ValidationError):
        ChoiState(DensityMatrix(np.diag([1.0, 0.0, 0.0, 0.0])), 2)


def test_amplitude_damping_choi_populations():
    v = 0.4
    rho = choi_of_channel(amplitude_damping(v)).state.matrix
    assert(np.allclose(np.diag(rho).real, [0.5, 0.0, v / 2, (1 - v) / 2]))
    assert(rho[0, 3].real == pytest.approx(math.sqrt(1 - v) / 2))


@pytest.mark.parametrize("v", [0.0, 0.3, 0.64, 1.0])
def test_interferometer_realizes_amplitude_damping(v):
    theta = math.asin(math.sqrt(v)) / 2
    assert(same_action(hwp_interferometer_channel(theta), amplitude_damping(v)))


def test_density_matrix_validation():
    with pytest.raises(NotPSD):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.5, 0.2]))
    unnormalized = DensityMatrix(np.diag([0.5, 0.2]), normalized=False)
    assert(unnormalized.normalize().trace == pytest.approx(1.0))


def test_observable_from_bloch():
    obs = observable_from_bloch((0, 0, 1))
    assert(np.allclose(obs.projector(1), np.diag([1, 0])))
    assert(np.allclose(obs.projector(-1), np.diag([0, 1])))
    with pytest.raises(NotUnitVector):
        observable_from_bloch((1, 1, 0))
    with pytest.raises(OutOfRange):
        obs.projector(0)


def test_pauli_lookup():
    assert(np.allclose(pauli("I"), np.eye(2)))
    assert(np.allclose(pauli("x") @ pauli("y"), 1j * pauli("z")))
    with pytest.raises(OutOfRange):
        pauli("w")


def test_channel_document(tmp_path):
    ch = amplitude_damping(0.6)
    doc = channel_to_json(ch)
    assert(doc["dim"] == 2 and doc["kind"] == "tp")
    assert(len(doc["kraus"]) == 2 and len(doc["kraus"][0]) == 4)

    path = tmp_path / "ad.json"
    save_channel(ch, path)
    assert(same_action(load_channel(path), ch))


@pytest.mark.parametrize("doc", [
    [],
    {"kraus": []},
    {"dim": 2, "kraus": []},
    {"dim": 2, "kind": "lossy", "kraus": [[[1, 0]] * 4]},
    {"dim": 2, "kraus": [[[1, 0]] * 3]},
    {"dim": 2, "kraus": [[["a", 0]] * 4]},
])
def test_malformed_channel_documents(doc):
    with pytest.raises(ParseError):
        channel_from_json(doc)


def test_non_cptp_document():
    doc = {"dim": 2, "kind": "tp", "kraus": [[[2, 0], [0, 0], [0, 0], [2, 0]]]}
    with pytest.raises(ValidationError):
        channel_from_json(doc)


def test_load_channel_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_channel(path)


def test_sample_channel_files_load():
    from pathlib import Path

    data = Path(__file__).resolve().parents[2] / "data" / "channels"
    for name, v in (("amplitude_damping_0.3.json", 0.3), ("amplitude_damping_0.6.json", 0.6),
                    ("amplitude_damping_0.9.json", 0.9)):
        assert(same_action(load_channel(data / name), amplitude_damping(v)))
    assert(json.loads((data / "amplitude_damping_0.6.json").read_text())["kind"] == "tp")


def test_maximally_mixed():
    rho = maximally_mixed(2)
    assert(np.allclose(rho.matrix, np.diag([0.5, 0.5])))
    assert(rho.trace == pytest.approx(1.0))
    assert(rho.purity() == pytest.approx(0.5))
    with pytest.raises(OutOfRange):
        maximally_mixed(0)


def test_apply_channel_is_linear(rng, random_channel, random_state):
    for _ in range(PROPERTY_INSTANCES):
        ch = random_channel(rng)
        rho, sigma = random_state(rng), random_state(rng)
        weight = rng.uniform()
        mixture = DensityMatrix(weight * rho.matrix + (1 - weight) * sigma.matrix)
        expected = weight * apply_channel(ch, rho).matrix + (1 - weight) * apply_channel(ch, sigma).matrix
        assert(np.allclose(apply_channel(ch, mixture).matrix, expected, atol=1e-12))


def test_bloch_affine_map_of_amplitude_damping():
    t, c = bloch_affine_map(amplitude_damping(0.6))
    assert(np.allclose(t, np.diag([math.sqrt(0.4), math.sqrt(0.4), 0.4]), atol=1e-12))
    assert(np.allclose(c, [0, 0, 0.6], atol=1e-12))


def test_bloch_affine_map_reproduces_the_channel(rng, random_channel):
    for _ in range(100):
        ch = random_channel(rng)
        t, c = bloch_affine_map(ch)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        out = ch.act(bloch_state(n).matrix)
        assert(np.allclose(out, bloch_state(t @ n + c).matrix, atol=1e-12))


def test_non_finite_kraus_entries_are_rejected():
    with pytest.raises(ValidationError):
        KrausChannel((np.array([[np.nan, 0], [0, 1]]),))
    with pytest.raises(ValidationError):
        KrausChannel((np.array([[1, 0], [0, np.inf]]),), ChannelKind.TRACE_NONINCREASING)


def test_non_finite_document_is_rejected():
    doc = json.loads('{"dim": 2, "kind": "tp", "kraus": [[[NaN, 0], [0, 0], [0, 0], [1, 0]]]}')
    with pytest.raises(ValidationError):
        channel_from_json(doc)
