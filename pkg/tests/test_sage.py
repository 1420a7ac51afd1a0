import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_small_graph
from gnn_watermark.graph import build_graph
from gnn_watermark.keyed_rand import RandomStream
from gnn_watermark.sage import (
    AdamState,
    SageModel,
    TrainConfig,
    accuracy,
    adam_step,
    backward,
    cross_entropy,
    forward,
    mean_aggregate,
    predict_labels,
    sample_neighbors,
    train,
)
from gnn_watermark.trigger import make_trigger


def finite_difference_errors(m, g, batch, labels, mode="full", k=2, seed=9, h=1e-5):
    state = RandomStream(seed).state

    def stream():
        return RandomStream.from_state(state)

    _, cache = forward(m, g, batch, mode, k, stream())
    grads = backward(m, cache, labels)
    errs = []
    for name, p in m.params().items():
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = cross_entropy(forward(m, g, batch, mode, k, stream())[0], labels)
            p[idx] = old - h
            down = cross_entropy(forward(m, g, batch, mode, k, stream())[0], labels)
            p[idx] = old
            fd = (up - down) / (2 * h)
            an = grads[name][idx]
            scale = max(abs(fd), abs(an))
            errs.append(0.0 if scale < 1e-10 else abs(fd - an) / scale)
    return np.array(errs)


def test_mean_aggregate_examples():
    assert mean_aggregate([2, 4], []).tolist() == [2, 4]
    assert mean_aggregate([0, 0], [[2, 2], [4, 4]]).tolist() == [2, 2]
    x = np.array([1.5, -3.0])
    assert np.allclose(mean_aggregate(x, [x, x]), x)
    with pytest.raises(ValueError):
        mean_aggregate([1, 2], [[1, 2, 3]])


def test_sample_neighbors_rules():
    g = build_graph(4, [(0, 1)], np.zeros((4, 1)))
    assert sample_neighbors(g, 3, 5, RandomStream(0)) == []
    assert sample_neighbors(g, 0, 5, RandomStream(0)) == [1] * 5


def test_sample_neighbors_uniform():
    star = build_graph(11, [(0, j) for j in range(1, 11)], np.zeros((11, 1)))
    s = RandomStream(77)
    trials = 10_000
    counts = np.zeros(11)
    for _ in range(trials):
        for v in sample_neighbors(star, 0, 5, s):
            counts[v] += 1
    total = trials * 5
    sigma = math.sqrt(total * 0.1 * 0.9)
    assert np.all(np.abs(counts[1:] - total * 0.1) <= 3 * sigma)


def test_zero_weights_give_uniform_probs():
    g = random_small_graph(0, n=6, d=3, c=4)
    probs, _ = forward(SageModel.zeros(3, 5, 4), g, np.arange(6))
    assert np.allclose(probs, 0.25)
    assert predict_labels(SageModel.zeros(3, 5, 4), g).tolist() == [0] * 6


def hand_model():
    return SageModel(
        w1=np.array([[1.0, -1.0], [0.5, 1.0]]), b1=np.array([0.0, -2.0]),
        w2=np.array([[1.0, 0.0], [1.0, 1.0]]), b2=np.array([0.5, 0.5]),
        w_out=np.array([[1.0, -1.0], [0.0, 2.0]]), b_out=np.array([0.0, 0.0]),
    )


def test_single_node_hand_computation():
    x = [1.0, 2.0]
    # layer 1: z = [1*1 + 2*0.5, 1*-1 + 2*1] + [0, -2] = [2, -1] -> relu [2, 0]
    h1 = [max(0.0, x[0] * 1.0 + x[1] * 0.5 + 0.0), max(0.0, x[0] * -1.0 + x[1] * 1.0 - 2.0)]
    # layer 2: z = [2*1 + 0*1, 2*0 + 0*1] + 0.5 = [2.5, 0.5]
    h2 = [max(0.0, h1[0] * 1.0 + h1[1] * 1.0 + 0.5), max(0.0, h1[0] * 0.0 + h1[1] * 1.0 + 0.5)]
    logits = [h2[0] * 1.0 + h2[1] * 0.0, h2[0] * -1.0 + h2[1] * 2.0]
    z = math.exp(logits[0]) + math.exp(logits[1])
    expected = [math.exp(logits[0]) / z, math.exp(logits[1]) / z]

    g = build_graph(1, [], [x], labels=[0], num_classes=2)
    probs, _ = forward(hand_model(), g, [0])
    assert probs[0] == pytest.approx(expected, abs=1e-12)
    assert predict_labels(hand_model(), g).tolist() == [int(np.argmax(expected))]


def test_isolated_node_depends_only_on_itself():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 3))
    g = build_graph(4, [(0, 1), (1, 2)], x, labels=[0, 1, 0, 1], num_classes=2)
    m = SageModel.initialize(3, 2, h=4, seed=1)
    p_before = forward(m, g, [3])[0]
    x2 = x.copy()
    x2[:3] = rng.normal(size=(3, 3))
    p_after = forward(m, g.with_features(x2), [3])[0]
    assert np.array_equal(p_before, p_after)


def test_zero_scaled_isolated_matches_zero_feature_node():
    m = SageModel.initialize(3, 2, h=4, seed=1)
    a = build_graph(1, [], [[3.0, -1.0, 2.0]])
    b = build_graph(1, [], [[0.0, 0.0, 0.0]])
    assert np.array_equal(forward(m, a.with_features(a.features * 0), [0])[0], forward(m, b, [0])[0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_softmax_rows_sum_to_one(seed):
    g = random_small_graph(seed, n=7, d=3, c=3)
    m = SageModel.initialize(3, 3, h=5, seed=seed)
    for name in ("w1", "w2", "w_out"):
        getattr(m, name)[...] *= 10.0
    probs, _ = forward(m, g, np.arange(7), "sampled", 3, RandomStream(seed))
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_full_forward_permutation_equivariant():
    g = random_small_graph(3, n=8, d=3, c=3, p=0.4)
    m = SageModel.initialize(3, 3, h=6, seed=2)
    perm = np.random.default_rng(1).permutation(8)
    inv = np.argsort(perm)
    edges = [(int(inv[a]), int(inv[b])) for a, b in g.edge_list()]
    gp = build_graph(8, edges, g.features[perm], labels=g.labels[perm], num_classes=3)
    p = forward(m, g, np.arange(8))[0]
    pp = forward(m, gp, np.arange(8))[0]
    assert np.allclose(pp, p[perm], atol=1e-12)


def test_forward_dim_mismatch():
    g = random_small_graph(0, d=4)
    with pytest.raises(ValueError):
        forward(SageModel.zeros(5, 2, 2), g, [0])


def test_cross_entropy_examples():
    assert cross_entropy(np.array([[0.0, 1.0]]), [1]) == 0.0
    assert cross_entropy(np.full((3, 7), 1 / 7), [0, 3, 6]) == pytest.approx(math.log(7))
    probs = np.array([[0.5, 0.5], [0.75, 0.25]])
    assert cross_entropy(probs, [0, 1]) == pytest.approx((-math.log(0.5) - math.log(0.25)) / 2)
    assert cross_entropy(probs, [0, 1]) == pytest.approx(1.0397207708399179)


def test_gradient_check_full():
    g = random_small_graph(1)
    m = SageModel.initialize(4, 2, h=3, seed=5)
    # keep every pre-activation clear of the relu kink so central differences are valid
    _, cache = forward(m, g, np.arange(5))
    assert min(np.abs(cache.z1).min(), np.abs(cache.z2).min()) > 1e-3
    errs = finite_difference_errors(m, g, np.arange(5), g.labels)
    assert np.mean(errs <= 1e-5) >= 0.99


def test_gradient_check_sampled_replayed():
    g = random_small_graph(2, n=6, p=0.6)
    m = SageModel.initialize(4, 2, h=3, seed=4)
    errs = finite_difference_errors(m, g, np.array([0, 2, 3, 5]), g.labels[[0, 2, 3, 5]], mode="sampled")
    assert np.mean(errs <= 1e-5) >= 0.99


def test_saturated_prediction_gives_tiny_gradients():
    g = build_graph(1, [], [[1.0, 1.0]], labels=[0], num_classes=2)
    m = hand_model()
    m.w_out[:, 0] = 100.0
    probs, cache = forward(m, g, [0])
    assert probs[0, 0] == pytest.approx(1.0)
    grads = backward(m, cache, [0])
    assert max(np.abs(v).max() for v in grads.values()) < 1e-12


def test_backward_rejects_stale_cache():
    g = random_small_graph(0)
    m = SageModel.initialize(4, 2, h=3, seed=0)
    _, cache = forward(m, g, np.arange(5))
    grads = backward(m, cache, g.labels)
    adam_step(m.params(), grads, AdamState.zeros_like(m.params()), TrainConfig())
    m.version += 1
    with pytest.raises(ValueError):
        backward(m, cache, g.labels)
    with pytest.raises(ValueError):
        backward(SageModel.initialize(4, 2, h=3, seed=0), cache, g.labels[:3])


def test_adam_zero_gradient_is_noop():
    p = {"w": np.array([1.0, -2.0])}
    st_ = AdamState.zeros_like(p)
    adam_step(p, {"w": np.zeros(2)}, st_, TrainConfig())
    assert p["w"].tolist() == [1.0, -2.0]
    assert st_.t == 1


def test_adam_first_step():
    cfg = TrainConfig(learning_rate=0.01)
    p = {"x": np.array([0.0])}
    adam_step(p, {"x": np.array([1.0])}, AdamState.zeros_like(p), cfg)
    # m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
    assert p["x"][0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-12)


def test_adam_deterministic():
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=3) for _ in range(10)]
    results = []
    for _ in range(2):
        p = {"x": np.ones(3)}
        s = AdamState.zeros_like(p)
        for g in grads:
            adam_step(p, {"x": g}, s, TrainConfig())
        results.append(p["x"].copy())
    assert np.array_equal(results[0], results[1])


def test_train_zero_epochs_returns_init(host):
    g, masks = host
    init = SageModel.initialize(g.feature_dim, 2, h=8, seed=0)
    model, history = train(init, g, masks, None, TrainConfig(epochs=0))
    assert history == [] and model.equals(init)


def test_train_separable_synthetic(host, unmarked):
    g, masks = host
    assert accuracy(unmarked, g, masks.val_ids) >= 0.95
    assert accuracy(unmarked, g, masks.test_ids) >= 0.95


def test_train_deterministic(host):
    g, masks = host
    cfg = TrainConfig(epochs=5, seed=8, hidden_dim=8)
    init = SageModel.initialize(g.feature_dim, 2, 8, 8)
    a, ha = train(init, g, masks, None, cfg)
    b, hb = train(init, g, masks, None, cfg)
    assert a.equals(b)
    assert [r.train_loss for r in ha] == [r.train_loss for r in hb]


def test_trigger_learned(host_trigger, marked):
    model, history = marked
    assert np.array_equal(predict_labels(model, host_trigger.graph), host_trigger.watermark)
    assert history[-1].trigger_loss < history[0].trigger_loss
    assert model.is_finite()


def test_trigger_memorized_without_early_stopping(host):
    g, masks = host
    t = make_trigger(b"k2", 10, 0.0, 0.3, g.feature_dim, 2)
    cfg = TrainConfig(epochs=40, seed=2, hidden_dim=32)
    model, _ = train(SageModel.initialize(g.feature_dim, 2, 32, 2), g, masks, t, cfg, early_stopping=False)
    assert np.array_equal(predict_labels(model, t.graph), t.watermark)


def test_train_requires_labels(host):
    g, masks = host
    with pytest.raises(ValueError):
        train(SageModel.zeros(g.feature_dim, 4, 2), g.with_labels(None), masks, None, TrainConfig(epochs=1))


def test_history_records_every_epoch(host):
    g, masks = host
    t = make_trigger(b"k3", 5, 0.2, 0.1, g.feature_dim, 2)
    cfg = TrainConfig(epochs=7, seed=1, hidden_dim=8, early_stop_patience=100)
    _, history = train(SageModel.initialize(g.feature_dim, 2, 8, 1), g, masks, t, cfg)
    assert [r.epoch for r in history] == list(range(1, 8))
    assert all(0.0 <= r.trigger_accuracy <= 1.0 for r in history)


def test_n1_trigger_trains(host):
    g, masks = host
    t = make_trigger(b"one", 1, 0.0, 0.1, g.feature_dim, 2)
    cfg = TrainConfig(epochs=3, seed=1, hidden_dim=8)
    model, _ = train(SageModel.initialize(g.feature_dim, 2, 8, 1), g, masks, t, cfg)
    assert predict_labels(model, t.graph).shape == (1,)
