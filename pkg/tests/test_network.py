import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from _nets import random_network, reference_eval
from manifold_relu.network import (RELAXED, STRICT, Architecture, DimensionError, FormatError, Network, NetworkError,
                                   VersionError, count_params, dense, deserialize, evaluate, from_json, load, save,
                                   serialize, sparsity, to_json, validate)
from manifold_relu.primitives import build_mult


def one_hidden(w0=1.0, v1=0.0, w1=1.0):
    return dense([[[w0]], [[w1]]], [[v1]])


def test_eval_examples():
    net = one_hidden()
    assert evaluate(net, [-2.0])[0] == 0.0
    assert evaluate(net, [0.4])[0] == 0.4
    assert evaluate(one_hidden(v1=0.5), [0.75])[0] == 0.25


def test_eval_batch_matches_single_and_reference():
    rng = np.random.default_rng(0)
    net = random_network(rng, widths=[3, 5, 4, 2])
    x = rng.uniform(-2, 2, (50, 3))
    batch = evaluate(net, x)
    assert np.array_equal(batch, np.array([evaluate(net, xi) for xi in x]))
    np.testing.assert_allclose(batch, reference_eval(net, x), atol=1e-12)


def test_eval_dimension_error_names_layer():
    with pytest.raises(DimensionError) as exc:
        evaluate(one_hidden(), [1.0, 2.0])
    assert exc.value.layer == 0 and "layer 0" in str(exc.value)


@pytest.mark.parametrize("arch,expected", [
    (Architecture(1, (2, 3, 1)), 12),
    (Architecture(0, (4, 1)), 4),
    (Architecture(2, (1, 2, 2, 1)), 12),
])
def test_count_params_examples(arch, expected):
    assert count_params(arch) == expected


@given(st.lists(st.integers(1, 6), min_size=2, max_size=6))
def test_count_params_brute_force(widths):
    arch = Architecture(len(widths) - 2, tuple(widths))
    brute = sum(widths[i + 1] * widths[i] for i in range(len(widths) - 1)) + sum(widths[1:-1])
    assert count_params(arch) == brute


def test_architecture_invariants():
    with pytest.raises(NetworkError):
        Architecture(1, (2, 1))
    with pytest.raises(NetworkError):
        Architecture(1, (2, 0, 1))


def test_sparsity_examples():
    zero = Network([sp.csr_matrix((3, 2)), sp.csr_matrix((1, 3))], [np.zeros(3)])
    assert sparsity(zero).nonzero_count == 0
    rep = sparsity(dense([[[1.0]], [[-1.0]]], [[0.5]]))
    assert rep.nonzero_count == 3 and rep.max_abs_weight == 1.0
    full = dense([np.ones((3, 2)), np.ones((1, 3))], [np.ones(3)])
    assert sparsity(full).nonzero_count == 12 == count_params(full.arch)


@given(st.integers(0, 10_000))
def test_sparsity_at_most_param_count(seed):
    net = random_network(np.random.default_rng(seed))
    rep = sparsity(net)
    assert 0 <= rep.nonzero_count <= rep.total_count == count_params(net.arch)


def test_validate_modes():
    bad = dense([[[1.5]], [[1.0]]], [[0.0]], RELAXED)
    assert validate(bad).ok
    strict = Network(bad.weights, bad.shifts, STRICT, check=False)
    rep = validate(strict)
    assert not rep.ok
    v = rep.violations[0]
    assert (v.layer, v.index, v.value) == (0, (0, 0), 1.5)
    with pytest.raises(NetworkError):
        Network(bad.weights, bad.shifts, STRICT)


def test_validate_shift_violation_reported():
    net = Network([[[1.0]], [[1.0]]], [[-2.0]], STRICT, check=False)
    rep = validate(net)
    assert [(v.layer, v.kind) for v in rep.violations] == [(1, "shift")]


def test_mult_passes_validation():
    assert validate(build_mult(8)).ok


@given(st.integers(0, 10_000))
def test_serialize_round_trip_entry_exact(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, mode=STRICT if seed % 2 else RELAXED)
    back = deserialize(serialize(net))
    assert back.widths == net.widths and back.weight_mode == net.weight_mode
    for a, b in zip(net.weights, back.weights):
        assert (a != b).nnz == 0
    for a, b in zip(net.shifts, back.shifts):
        assert np.array_equal(a, b)
    assert serialize(back) == serialize(net)
    text = to_json(net)
    assert serialize(from_json(text)) == serialize(net)


def test_serialize_errors():
    data = serialize(build_mult(4))
    with pytest.raises(FormatError) as exc:
        deserialize(data[:-5])
    assert exc.value.offset is not None
    with pytest.raises(FormatError):
        deserialize(data + b"\x00")
    with pytest.raises(FormatError):
        deserialize(b"XXXX" + data[4:])
    bumped = bytearray(data)
    bumped[4] = 99
    with pytest.raises(VersionError):
        deserialize(bytes(bumped))


def test_save_load_files(tmp_path):
    net = build_mult(6)
    for name in ("n.rnet", "n.json"):
        save(net, tmp_path / name)
        assert serialize(load(tmp_path / name)) == serialize(net)


def test_network_is_immutable():
    net = one_hidden()
    with pytest.raises(AttributeError):
        net.weights = ()
    with pytest.raises(ValueError):
        net.shifts[0][0] = 3.0


@given(st.integers(0, 10_000), st.floats(0, 50))
def test_positive_homogeneity_without_shifts(seed, lam):
    rng = np.random.default_rng(seed)
    net = random_network(rng, widths=[2, 4, 3, 1])
    net = Network(net.weights, [np.zeros_like(v) for v in net.shifts])
    x = rng.uniform(-1, 1, (20, 2))
    a, b = evaluate(net, lam * x), lam * evaluate(net, x)
    assert np.all(np.abs(a - b) <= 1e-12 * np.maximum(1.0, np.abs(b)))


def test_lipschitz_continuity_along_segments():
    rng = np.random.default_rng(3)
    for _ in range(20):
        net = random_network(rng, widths=[2, 5, 5, 1])
        lip = np.prod([max(1.0, np.abs(w.toarray()).sum(axis=1).max()) for w in net.weights])
        a, b = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        t = np.linspace(0, 1, 2001)[:, None]
        y = evaluate(net, a + t * (b - a))[:, 0]
        step = np.abs(b - a).max() / 2000
        assert np.abs(np.diff(y)).max() <= lip * step + 1e-12
