import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fcuc.predictor as P
from factories import tiny_net


def _logit(p):
    return math.log(p / (1 - p))


def identity_disc():
    """Discriminator whose posterior on a 1-d input x >= 0 is sigmoid(x)."""
    return P.Discriminator(w1=np.array([[1.0]]), b1=np.zeros(1), w2=np.array([1.0]), b2=0.0,
                           x_min=np.zeros(1), x_max=np.ones(1))


# ---------------------------------------------------------------- features


def test_disturbance_block_argmax():
    np.testing.assert_array_equal(P.disturbance_block([1, 1, 1], [10, 50, 30]), [0, 50, 0])


def test_disturbance_block_ties_and_off_units():
    np.testing.assert_array_equal(P.disturbance_block([1, 1], [40, 40]), [40, 0])
    np.testing.assert_array_equal(P.disturbance_block([0, 1], [90, 40]), [0, 40])
    np.testing.assert_array_equal(P.disturbance_block([0, 0], [0, 0]), [0, 0])


def test_feature_vector_layout():
    x = P.feature_vector([1, 0, 1], [20.0, 0.0, 35.0])
    u, d, p = P.split_features(x, 3)
    np.testing.assert_array_equal(u, [1, 0, 1])
    np.testing.assert_array_equal(d, [0, 0, 35.0])
    np.testing.assert_array_equal(p, [20.0, 0, 35.0])


def test_security_flag():
    assert P.security_flag(0.4, 0.5) == 1
    assert P.security_flag(0.6, 0.1) == 0
    assert P.security_flag(0.1, 0.51) == 0


# ---------------------------------------------------------------- forward pass


def test_zero_weights_give_head_bias():
    m = tiny_net(np.zeros((3, 4)), np.zeros(4), np.zeros((4, 2)), head_b=(0.2, 0.7))
    assert P.forward(m, np.ones(3)) == (0.2, 0.7)


def test_hand_forward_pass():
    m = tiny_net([[2.0]], [-1.0], [[3.0, 3.0]])
    assert P.preactivations(m, [1.0])[0][0, 0] == pytest.approx(1.0)
    assert P.forward(m, [1.0]) == (pytest.approx(3.0), pytest.approx(3.0))


def test_negative_preactivation_clamped():
    m = tiny_net([[-2.0]], [-1.0], [[3.0, 3.0]], head_b=(0.5, 0.25))
    assert P.preactivations(m, [1.0])[0][0, 0] == pytest.approx(-3.0)
    assert P.forward(m, [1.0]) == (0.5, 0.25)


def test_wrong_feature_dimension():
    with pytest.raises(P.PredictorError):
        P.forward(tiny_net([[1.0]], [0.0], [[1.0, 1.0]]), [1.0, 2.0])


def test_folded_first_layer_matches_scaling():
    rng = np.random.default_rng(0)
    m = P.init_predictor(5, (4, 3), seed=1)
    P.fit_scaling(m, rng.uniform(0, 50, (20, 5)))
    W, b = m.folded_first_layer()
    x = rng.uniform(0, 50, 5)
    np.testing.assert_allclose(x @ W + b, P.preactivations(m, x)[0][0], atol=1e-12)


def test_fit_scaling_box_widens_range():
    m = P.init_predictor(2, (3,))
    P.fit_scaling(m, np.array([[0.2, 5.0], [0.8, 7.0]]), box=(np.zeros(2), np.array([1.0, 10.0])))
    np.testing.assert_array_equal(m.x_min, [0.0, 0.0])
    np.testing.assert_array_equal(m.x_max, [1.0, 10.0])


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    m = P.init_predictor(4, (5, 3), seed=2)
    X, Y = rng.uniform(0, 1, (7, 4)), rng.uniform(0, 1, (7, 2))
    _, dW, db, dhw, dhb = P.loss_and_grads(m, X, Y)
    h = 1e-6
    for arr, grad in [(m.weights[0], dW[0]), (m.weights[1], dW[1]), (m.biases[1], db[1]), (m.head_w, dhw),
                      (m.head_b, dhb)]:
        for idx in [tuple(rng.integers(s) for s in arr.shape) for _ in range(4)]:
            old = arr[idx]
            arr[idx] = old + h
            up = P.mse_loss(m, X, Y)
            arr[idx] = old - h
            dn = P.mse_loss(m, X, Y)
            arr[idx] = old
            assert grad[idx] == pytest.approx((up - dn) / (2 * h), rel=1e-4, abs=1e-7)


# ---------------------------------------------------------------- training


def _toy(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 6))
    Y = np.stack([X @ np.linspace(0.1, 0.6, 6), X @ np.linspace(0.5, 0.0, 6) + 0.1], axis=1)
    return X, Y


def test_dense_loss_decreases_first_epochs():
    X, Y = _toy()
    m = P.init_predictor(6, (16, 16), seed=0)
    start = P.mse_loss(m, X, Y)
    # full-batch steps at the default rate
    losses = P.train_dense(m, X, Y, P.TrainConfig(epochs=10, batch_size=len(X)), seed=0)
    seq = [start] + losses
    assert all(b < a for a, b in zip(seq, seq[1:]))


def test_schedule_boundaries_and_midpoint():
    s = P.PruneSchedule(s0=0.0, s_final=0.8, e0=10, delta_e=5, steps=8, epochs=60)
    assert P.sparsity_at_epoch(s, 10) == 0.0
    assert P.sparsity_at_epoch(s, s.end) == 0.8
    assert P.sparsity_at_epoch(s, 10 + 20) == pytest.approx(0.7)
    with pytest.raises(P.PredictorError):
        P.sparsity_at_epoch(s, 9)


@settings(max_examples=50, deadline=None)
@given(s0=st.floats(0.0, 0.5), extra=st.floats(0.0, 0.45), e=st.floats(0.0, 1.0))
def test_schedule_monotone_and_bounded(s0, extra, e):
    s = P.PruneSchedule(s0=s0, s_final=s0 + extra, e0=5, delta_e=3, steps=10, epochs=40)
    a = P.sparsity_at_epoch(s, 5 + e * 30)
    b = P.sparsity_at_epoch(s, min(35, 5 + e * 30 + 1))
    assert s.s0 - 1e-12 <= a <= b + 1e-12 <= s.s_final + 2e-12


def test_schedule_validation():
    with pytest.raises(ValueError):
        P.PruneSchedule(s0=0.5, s_final=0.4)
    with pytest.raises(ValueError):
        P.PruneSchedule(e0=190, delta_e=10, steps=10, epochs=200)


def test_sparse_training_hits_target_and_masks_stick(monkeypatch):
    X, Y = _toy()
    m = P.init_predictor(6, (16, 16), seed=0)
    P.train_dense(m, X, Y, P.TrainConfig(epochs=5), seed=0)
    snapshots = []
    real = P._epoch

    def spy(model, *args):
        out = real(model, *args)
        snapshots.append([w.copy() for w in model.weights])
        return out

    monkeypatch.setattr(P, "_epoch", spy)
    sched = P.PruneSchedule(s_final=0.8, e0=2, delta_e=2, steps=5, epochs=15)
    P.train_sparse(m, X, Y, sched, seed=1)
    for w in m.weights:
        assert abs(int(np.sum(w == 0.0)) - 0.8 * w.size) <= 1
    for q in range(len(m.weights)):
        zero_before = np.zeros(m.weights[q].shape, dtype=bool)
        for snap in snapshots:
            assert np.all(snap[q][zero_before] == 0.0)
            zero_before |= snap[q] == 0.0


def test_monotone_projection():
    m = P.init_predictor(4, (6, 5), seed=3, monotone=True)
    assert np.all(m.weights[1] >= 0) and np.all(m.head_w >= 0)
    m.weights[1][0, 0] = -1.0
    m.head_w[0, 0] = -2.0
    m.project()
    assert m.weights[1][0, 0] == 0.0 and m.head_w[0, 0] == 0.0
    X, Y = _toy(50)
    m = P.init_predictor(6, (8, 8), seed=0, monotone=True)
    P.train_dense(m, X, Y, P.TrainConfig(epochs=3, lr=0.05), seed=0)
    assert np.all(m.weights[1] >= 0) and np.all(m.head_w >= 0)


def test_save_load_round_trip(tmp_path):
    m = P.init_predictor(3, (4,), seed=5, monotone=True)
    m.lb, m.ub = P.compute_neuron_bounds(m, np.zeros(3), np.ones(3))
    m.active = [np.array([True, False, True, False])]
    path = tmp_path / "m.json"
    P.save_predictor(m, path)
    back = P.load_predictor(path)
    assert back.monotone
    np.testing.assert_array_equal(back.weights[0], m.weights[0])
    np.testing.assert_array_equal(back.active[0], m.active[0])
    assert P.forward(back, [0.3, 0.1, 0.9]) == P.forward(m, [0.3, 0.1, 0.9])


# ---------------------------------------------------------------- discriminator and sampling


def test_discriminator_separable():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (200, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0.1).astype(int)
    keep = np.abs(X[:, 0] + 0.5 * X[:, 1] - 0.1) > 0.1  # leave a margin
    X, y = X[keep], y[keep]
    d = P.train_discriminator(X, y, seed=0, epochs=400)
    post = d.posterior(X)
    assert np.all((post >= 0) & (post <= 1))
    assert np.mean((post > 0.5) == y) == 1.0


def test_discriminator_needs_both_classes():
    with pytest.raises(P.PredictorError):
        P.train_discriminator(np.zeros((4, 2)), [1, 1, 1, 1])


def test_secure_label_is_one():
    s = P.LabeledSample(np.zeros(3), 0.2, 0.3, P.security_flag(0.2, 0.3))
    assert s.f_sec == 1


def test_select_near_half_and_extremes():
    post = [0.1, 0.45, 0.9]
    hi, lo = P.select_by_posterior(post, 1, 0)
    assert list(hi) == [1]
    _, lo = P.select_by_posterior(post, 0, 1)
    assert list(lo) == [0]
    d = identity_disc()
    pool = np.array([[_logit(p)] for p in (0.6, 0.9, 0.55)])
    hi, _ = P.select_samples(d, pool, 1, 0)
    assert list(hi) == [2]


def test_select_whole_pool():
    hi, lo = P.select_by_posterior([0.3, 0.5, 0.7, 0.2], 4, 0)
    assert sorted(hi) == [0, 1, 2, 3] and lo.size == 0
    with pytest.raises(P.PredictorError):
        P.select_by_posterior([0.3, 0.5], 2, 1)


@settings(max_examples=60, deadline=None)
@given(post=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40), data=st.data())
def test_selection_matches_brute_force(post, data):
    n = len(post)
    k_sec = data.draw(st.integers(0, n))
    k_insec = data.draw(st.integers(0, n - k_sec))
    hi, lo = P.select_by_posterior(post, k_sec, k_insec)
    # brute force: sort by distance from 0.5, ties to the lowest index
    dist = [round(abs(p - 0.5), 12) for p in post]
    order = sorted(range(n), key=lambda i: (dist[i], i))
    assert [dist[i] for i in hi] == [dist[i] for i in order[:k_sec]]
    rest = [i for i in range(n) if i not in set(hi)]
    far = sorted(rest, key=lambda i: (-dist[i], i))
    assert [dist[i] for i in lo] == [dist[i] for i in far[:k_insec]]
    assert not set(hi) & set(lo)


# ---------------------------------------------------------------- bounds and activity


def test_positive_weight_bounds():
    w = np.array([[0.5], [1.5], [2.0]])
    m = tiny_net(w, [0.3], [[1.0, 1.0]])
    lb, ub = P.compute_neuron_bounds(m, np.zeros(3), np.ones(3))
    assert ub[0][0] == pytest.approx(4.3)
    assert lb[0][0] == pytest.approx(0.3)


def test_zero_weight_bounds():
    m = tiny_net(np.zeros((3, 2)), [0.4, -0.2], np.zeros((2, 2)))
    lb, ub = P.compute_neuron_bounds(m, np.zeros(3), np.ones(3))
    np.testing.assert_array_equal(lb[0], [0.4, -0.2])
    np.testing.assert_array_equal(ub[0], [0.4, -0.2])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_bounds_contain_sampled_preactivations(seed):
    rng = np.random.default_rng(seed)
    m = P.init_predictor(6, (8, 6), seed=seed)
    lo = rng.uniform(-2, 0, 6)
    hi = lo + rng.uniform(0, 3, 6)
    P.fit_scaling(m, np.vstack([lo, hi]))
    lb, ub = P.compute_neuron_bounds(m, lo, hi)
    X = rng.uniform(lo, hi, (1000, 6))
    for q, z in enumerate(P.preactivations(m, X)):
        assert np.all(z >= lb[q] - 1e-9) and np.all(z <= ub[q] + 1e-9)


def test_bad_box():
    m = P.init_predictor(2, (2,))
    with pytest.raises(P.PredictorError):
        P.compute_neuron_bounds(m, [1.0, 0.0], [0.0, 1.0])
    with pytest.raises(P.PredictorError):
        P.compute_neuron_bounds(m, [0.0, 0.0], [np.inf, 1.0])


def test_positivity_counts():
    m = tiny_net([[1.0, -1.0, 1.0]], [0.0, 0.0, -2.5], np.zeros((3, 2)))
    X = np.array([[1.0], [2.0], [3.0], [-1.0]])
    eps = P.positivity_index(m, X)[0]
    np.testing.assert_allclose(eps, [0.75, 0.25, 0.25])
    assert P.positivity_index(m, X[:3])[0][0] == 1.0
    assert P.positivity_index(m, X[3:])[0][0] == 0.0


def test_active_selection_threshold():
    act = P.select_active_neurons([np.array([0.3, 0.25, 0.1])], 0.25)[0]
    np.testing.assert_array_equal(act, [True, True, False])
    assert not P.select_active_neurons([np.array([0.1, 0.2])], 0.25)[0].any()


def test_validation_accuracy_counts():
    m = tiny_net([[1.0]], [0.0], [[1.0, 1.0]])
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    assert P.validation_accuracy(m, X, np.hstack([X, X]), 0.05) == (100.0, 100.0)
    Y = np.hstack([X, X])
    Y[2] = [3.0, 5.0]
    assert P.validation_accuracy(m, X, Y, 0.1) == (75.0, 100.0)


def test_tolerance_sweep_rows():
    m = tiny_net([[1.0]], [0.0], [[1.0, 1.0]])
    X = np.array([[1.0], [2.0]])
    rows = P.tolerance_sweep(m, X, np.hstack([X, X * 1.07]))
    assert [r["tolerance"] for r in rows] == [0.10, 0.09, 0.08, 0.07, 0.06, 0.05]
    assert rows[0]["rocof_pct"] == 100.0 and rows[-1]["rocof_pct"] == 0.0


def test_split_is_seeded_and_disjoint():
    a = P.split_indices(50, 0.2, 3)
    b = P.split_indices(50, 0.2, 3)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1].size == 10 and not set(a[0]) & set(a[1])
