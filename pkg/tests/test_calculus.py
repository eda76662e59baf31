import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from _nets import random_network, reference_eval
from manifold_relu.calculus import (canonical_width, compose, embed, identity_net, linear_net, map_outputs, pad_depth,
                                    pad_depth_top, pad_to_depth, parallelize, replicate, select_inputs, sign_split)
from manifold_relu.network import STRICT, Architecture, Network, NetworkError, evaluate, serialize, sparsity, validate
from manifold_relu.primitives import build_mult

seeds = st.integers(0, 100_000)


@given(seeds)
def test_embed_preserves_eval_and_sparsity(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    target = Architecture(net.depth, tuple(w + int(rng.integers(0, 3)) for w in net.widths))
    big = embed(net, target)
    assert big.widths == target.widths
    x = rng.uniform(-1, 1, (100, net.input_dim))
    xb = np.hstack([x, rng.uniform(-1, 1, (100, target.widths[0] - net.input_dim))])
    np.testing.assert_allclose(evaluate(big, xb)[:, :net.output_dim], evaluate(net, x), atol=1e-12)
    assert sparsity(big).nonzero_count == sparsity(net).nonzero_count


def test_embed_examples_and_errors():
    rng = np.random.default_rng(0)
    net = random_network(rng, widths=[1, 3, 1])
    assert serialize(embed(net, net.arch)) == serialize(net)
    wide = embed(net, Architecture(1, (1, 5, 1)))
    x = rng.uniform(-2, 2, (100, 1))
    assert np.array_equal(evaluate(wide, x), evaluate(net, x))
    with pytest.raises(NetworkError):
        embed(net, Architecture(1, (1, 2, 1)))
    with pytest.raises(NetworkError):
        embed(net, Architecture(2, (1, 3, 3, 1)))
    with pytest.raises(NetworkError):
        embed(net, net.arch, extra_sparsity=-1)


@given(seeds)
def test_compose_semantics_and_arithmetic(seed):
    rng = np.random.default_rng(seed)
    inner = random_network(rng)
    outer = random_network(rng, input_dim=inner.output_dim)
    v = rng.uniform(-1, 1, inner.output_dim)
    c = compose(outer, inner, v)
    assert c.depth == inner.depth + outer.depth + 1
    assert c.widths == inner.widths + outer.widths[1:]
    assert sparsity(c).nonzero_count == (sparsity(inner).nonzero_count + sparsity(outer).nonzero_count
                                         + np.count_nonzero(v))
    x = rng.uniform(-1, 1, (200, inner.input_dim))
    expected = reference_eval(outer, np.maximum(reference_eval(inner, x) - v, 0.0))
    np.testing.assert_allclose(evaluate(c, x), expected, atol=1e-12)


def test_compose_examples():
    rng = np.random.default_rng(1)
    mult = build_mult(8)
    c = compose(mult, identity_net(2))
    x = rng.random((1000, 2))
    assert np.array_equal(evaluate(c, x), evaluate(mult, x))
    a = random_network(rng, widths=[2, 3, 3, 2])
    b = random_network(rng, widths=[2, 3, 3, 3, 1])
    assert compose(b, a).depth == 6
    zero = Network([sp.csr_matrix((2, 2)), sp.csr_matrix((2, 2))], [np.zeros(2)])
    v = np.array([-0.3, 0.2])
    out = evaluate(compose(mult, zero, v), rng.random((5, 2)))
    assert np.all(out == evaluate(mult, np.maximum(-v, 0))[0])
    with pytest.raises(NetworkError):
        compose(mult, random_network(rng, widths=[2, 3, 3]))
    with pytest.raises(NetworkError):
        compose(mult, identity_net(2), v=[2.0, 0.0])


@given(seeds, st.integers(1, 3))
def test_pad_depth_bottom(seed, q):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    p = pad_depth(net, q)
    assert p.depth == net.depth + q
    assert sparsity(p).nonzero_count == sparsity(net).nonzero_count + q * net.input_dim
    x = rng.random((100, net.input_dim))
    np.testing.assert_allclose(evaluate(p, x), evaluate(net, x), atol=1e-12)


def test_pad_depth_examples():
    rng = np.random.default_rng(2)
    net = random_network(rng, widths=[1, 3, 1])
    p = pad_depth(net, 2)
    assert evaluate(p, [0.7])[0] == pytest.approx(evaluate(net, [0.7])[0], abs=1e-12)
    assert evaluate(p, [-0.3])[0] == evaluate(net, [0.0])[0]
    assert sparsity(p).nonzero_count == sparsity(net).nonzero_count + 2
    with pytest.raises(NetworkError):
        pad_depth(net, 0)


def test_pad_depth_top_and_to_depth():
    mult = build_mult(6)
    x = np.random.default_rng(0).random((200, 2))
    p = pad_depth_top(mult, 3)
    assert p.depth == mult.depth + 3
    assert np.array_equal(evaluate(p, x), evaluate(mult, x))
    assert pad_to_depth(mult, mult.depth) is mult
    assert pad_to_depth(mult, mult.depth + 2, where="bottom").depth == mult.depth + 2
    with pytest.raises(NetworkError):
        pad_to_depth(mult, mult.depth - 1)


@given(seeds)
def test_parallelize_semantics_and_arithmetic(seed):
    rng = np.random.default_rng(seed)
    f = random_network(rng)
    widths = [f.input_dim] + [int(rng.integers(1, 5)) for _ in range(f.depth + 1)]
    g = random_network(rng, widths=widths)
    h = parallelize(f, g)
    assert h.widths == (f.input_dim,) + tuple(a + b for a, b in zip(f.widths[1:], g.widths[1:]))
    assert sparsity(h).nonzero_count == sparsity(f).nonzero_count + sparsity(g).nonzero_count
    x = rng.uniform(-1, 1, (100, f.input_dim))
    assert np.array_equal(evaluate(h, x), np.hstack([evaluate(f, x), evaluate(g, x)]))


def test_parallelize_examples_and_errors():
    rng = np.random.default_rng(4)
    f = random_network(rng, widths=[2, 3, 1])
    g = random_network(rng, widths=[2, 4, 1])
    assert parallelize(f, g).widths == (2, 7, 2)
    x = rng.random((100, 2))
    out = evaluate(parallelize(f, f), x)
    assert np.array_equal(out[:, 0], out[:, 1])
    with pytest.raises(NetworkError, match="pad_depth"):
        parallelize(f, random_network(rng, widths=[2, 3, 3, 1]))
    with pytest.raises(NetworkError):
        parallelize(f, random_network(rng, widths=[3, 3, 1]))


@given(seeds)
def test_canonical_width_semantics(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, density=0.35)
    s = sparsity(net).nonzero_count
    c = canonical_width(net, s_budget=max(s, 1))
    x = rng.uniform(-1, 1, (100, net.input_dim))
    np.testing.assert_allclose(evaluate(c, x), evaluate(net, x), atol=1e-12)
    assert all(a <= b for a, b in zip(c.widths, net.widths))
    assert all(w <= max(s, 1) for w in c.widths[1:-1])
    assert c.depth == net.depth


def test_canonical_width_examples():
    w0 = np.zeros((10, 1))
    w1 = np.zeros((1, 10))
    for k, (a, b) in zip([2, 5, 7], [(0.5, 1.0), (-0.5, 0.5), (1.0, -1.0)]):
        w0[k, 0], w1[0, k] = a, b
    net = Network([w0, w1], [np.zeros(10)])
    c = canonical_width(net)
    assert c.widths == (1, 3, 1)
    x = np.linspace(-2, 2, 101)[:, None]
    assert np.array_equal(evaluate(c, x), evaluate(net, x))
    full = build_mult(4)
    assert canonical_width(full).widths == full.widths
    zero = Network([sp.csr_matrix((4, 2)), sp.csr_matrix((1, 4))], [np.zeros(4)])
    cz = canonical_width(zero)
    assert cz.widths == (2, 1, 1) and np.all(evaluate(cz, x.repeat(2, axis=1)) == 0)
    with pytest.raises(NetworkError):
        canonical_width(full, s_budget=1)


def test_sign_split_examples():
    net = Network([[[1.0], [0.0]], [[1.0, -0.5]]], [[0.0, -1.0]])  # x - 0.5 for x >= 0 (second unit is 1)
    s = sign_split(net)
    assert np.allclose(evaluate(s, [0.8]), [0.3, 0.0])
    assert np.allclose(evaluate(s, [0.2]), [0.0, 0.3])
    x = np.random.default_rng(0).random((1000, 1))
    out = evaluate(s, x)
    np.testing.assert_allclose(out[:, 0] - out[:, 1], evaluate(net, x)[:, 0], atol=1e-12)
    assert np.all(out >= 0)
    with pytest.raises(NetworkError):
        sign_split(parallelize(net, net))


def test_wiring_helpers():
    rng = np.random.default_rng(5)
    mult = build_mult(6)
    x = rng.random((100, 3))
    sel = select_inputs(mult, [2, 0], 3)
    assert np.array_equal(evaluate(sel, x)[:, 0], evaluate(mult, x[:, [2, 0]])[:, 0])
    rep = replicate(mult, 2)
    y = rng.random((100, 4))
    np.testing.assert_array_equal(evaluate(rep, y), np.hstack([evaluate(mult, y[:, :2]), evaluate(mult, y[:, 2:])]))
    mo = map_outputs(parallelize(mult, mult), [[0.5, -0.5]])
    assert np.allclose(evaluate(mo, rng.random((10, 2))), 0.0)
    with pytest.raises(NetworkError):
        map_outputs(mult, [[2.0]])
    assert np.array_equal(evaluate(identity_net(3, 2), x), x)


@given(seeds)
def test_combinators_keep_strict_mode(seed):
    rng = np.random.default_rng(seed)
    a = random_network(rng)
    b = random_network(rng, input_dim=a.output_dim)
    for net in (compose(b, a), pad_depth(a, 1), parallelize(a, a), canonical_width(a)):
        assert net.weight_mode == STRICT and validate(net).ok
