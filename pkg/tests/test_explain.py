import itertools
import math
import time

import numpy as np
import pytest

from xrlslice.explain import (
    BackgroundSet,
    exact_shapley,
    exact_shapley_model,
    explain_batch,
    model_output,
    shapley_from_coalitions,
)
from xrlslice.nn import QNetwork

DIMS = (3, 24, 24, 11)


def permutation_shapley(f, x, background):
    """Average marginal contribution over all feature orderings (independent of subset weights)."""
    x = np.asarray(x, dtype=float)
    bg = np.asarray(background, dtype=float)
    n = x.size

    def v(members):
        rows = bg.copy()
        for l in members:
            rows[:, l] = x[l]
        return float(np.mean(f(rows)))

    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for order in perms:
        present = []
        for l in order:
            before = v(present)
            present.append(l)
            phi[l] += v(present) - before
    return phi / len(perms), v([]), v(range(n))


def net_model(net, chunk=10):
    return lambda rows: chunk * net.greedy(rows)


def random_instance(rng):
    net = QNetwork.initialize(DIMS, rng)
    # push outputs apart so the greedy action actually moves with the inputs
    net.theta *= rng.uniform(1.0, 4.0)
    x = rng.uniform(-1, 2, size=3)
    bg = rng.uniform(-1, 2, size=(int(rng.integers(1, 17)), 3))
    return net, x, bg


def test_constant_model_gets_zero_shap():
    net = QNetwork(DIMS)
    net.layers()[5][4] = 1.0          # Q constant, argmax 4 everywhere
    att = exact_shapley(net, [0.3, 0.2, 0.9], np.random.default_rng(0).random((16, 3)), 10)
    assert np.all(att.shap_values == 0.0)
    assert att.base_value == 40.0 and att.fx == 40.0


def test_tied_network_outputs_zero():
    net = QNetwork(DIMS)
    assert model_output(net, [0.1, 0.2, 0.3], 10) == 0.0


def test_forced_argmax_gives_seventy_prbs():
    net = QNetwork(DIMS)
    net.layers()[5][7] = 3.0
    assert model_output(net, [0.5, 0.5, 0.5], 10) == 70.0


def test_output_in_action_image(rng):
    for _ in range(20):
        net, x, bg = random_instance(rng)
        out = model_output(net, np.vstack([x, bg]), 10)
        assert set(np.unique(out)) <= set(range(0, 101, 10))


def test_linear_surrogate_closed_form(rng):
    for _ in range(50):
        w = rng.normal(size=3)
        x = rng.normal(size=3)
        bg = rng.normal(size=(int(rng.integers(1, 20)), 3))
        att = exact_shapley_model(lambda rows: rows @ w, x, bg)
        np.testing.assert_allclose(att.shap_values, w * (x - bg.mean(axis=0)), atol=1e-9)


def test_matches_permutation_oracle(rng):
    for _ in range(30):
        net, x, bg = random_instance(rng)
        att = exact_shapley(net, x, bg, 10)
        phi, base, fx = permutation_shapley(net_model(net), x, bg)
        np.testing.assert_allclose(att.shap_values, phi, atol=1e-9)
        assert att.base_value == pytest.approx(base, abs=1e-12)
        assert att.fx == pytest.approx(fx, abs=1e-12)


def test_additivity_on_random_networks(rng):
    for _ in range(50):
        net, x, bg = random_instance(rng)
        att = exact_shapley(net, x, bg, 10)
        assert abs(att.shap_values.sum() - (att.fx - att.base_value)) < 1e-9
        assert att.fx == model_output(net, x, 10)


def test_symmetry_axiom():
    # model depends on x0 + x1 only; x and background are symmetric in those columns
    f = lambda rows: np.floor(3 * (rows[:, 0] + rows[:, 1]))
    x = np.array([0.7, 0.7, 0.1])
    bg = np.array([[0.1, 0.1, 0.5], [0.3, 0.3, 0.2], [0.0, 0.0, 0.9]])
    att = exact_shapley_model(f, x, bg)
    assert att.shap_values[0] == pytest.approx(att.shap_values[1], abs=1e-12)
    assert att.shap_values[2] == 0.0


def test_dummy_feature_gets_exactly_zero(rng):
    for _ in range(20):
        net, x, bg = random_instance(rng)
        net.layers()[0][1, :] = 0.0   # first-layer weights from feature 1
        att = exact_shapley(net, x, bg, 10)
        assert att.shap_values[1] == 0.0


def test_background_order_invariance(rng):
    net, x, bg = random_instance(rng)
    a = exact_shapley(net, x, bg, 10)
    b = exact_shapley(net, x, bg[rng.permutation(len(bg))], 10)
    np.testing.assert_allclose(a.shap_values, b.shap_values, atol=1e-12)


def test_empty_background_rejected():
    with pytest.raises(ValueError):
        exact_shapley(QNetwork(DIMS), np.zeros(3), np.zeros((0, 3)), 10)
    with pytest.raises(ValueError):
        BackgroundSet(np.zeros((0, 3)))


def test_batch_consistency(rng):
    net, _, bg = random_instance(rng)
    states = rng.uniform(-1, 2, size=(32, 3))
    atts = explain_batch(net, states, BackgroundSet(bg), 10)
    single = exact_shapley(net, states[0], bg, 10)
    np.testing.assert_array_equal(atts[0].shap_values, single.shap_values)
    for k, att in enumerate(atts):
        assert abs(att.shap_values.sum() - (att.fx - att.base_value)) < 1e-9
        np.testing.assert_array_equal(att.shap_values, exact_shapley(net, states[k], bg, 10).shap_values)


def test_batch_of_32_under_50ms(rng):
    net = QNetwork.initialize(DIMS, rng)
    states = rng.random((32, 3))
    bg = BackgroundSet(rng.random((16, 3)))
    explain_batch(net, states, bg, 10)   # compile / warm caches
    best = min(_timed(lambda: explain_batch(net, states, bg, 10)) for _ in range(5))
    assert best < 0.050


def _timed(fn):
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


def test_coalition_weights_sum_to_one():
    # v(S) = |S|: every feature contributes exactly 1
    values = np.array([[bin(s).count("1") for s in range(8)]], dtype=float)
    np.testing.assert_allclose(shapley_from_coalitions(values), [[1.0, 1.0, 1.0]])
    assert math.isclose(sum(math.factorial(s) * math.factorial(2 - s) / 6 * math.comb(2, s)
                            for s in range(3)), 1.0)


def test_background_from_buffer_is_seeded(rng):
    states = rng.random((100, 3))
    a = BackgroundSet.from_buffer(states, 16, np.random.default_rng(1))
    b = BackgroundSet.from_buffer(states, 16, np.random.default_rng(1))
    assert len(a) == 16
    np.testing.assert_array_equal(a.vectors, b.vectors)
    assert len(BackgroundSet.from_buffer(states[:5], 16, rng)) == 5
