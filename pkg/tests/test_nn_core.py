import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fxhybrid.errors import DataError
from fxhybrid.nn import (
    AdamState,
    GradientTape,
    LstmParams,
    RnnParams,
    Tensor,
    adam_update,
    dense,
    glorot_uniform,
    gradient_check,
    lstm_sequence,
    lstm_step,
    mse,
    relu,
    rnn_sequence,
    rnn_step,
    sgd_update,
    softmax,
)
from fxhybrid.nn import tape as T


def lstm_params(m, n, rng=None, scale=0.5):
    if rng is None:
        z = lambda *s: np.zeros(s)
    else:
        z = lambda *s: scale * rng.standard_normal(s)
    return LstmParams(z(m, m + n), z(m, m + n), z(m, m + n), z(m, m + n), z(m), z(m), z(m), z(m))


def test_lstm_zero_params():
    p = lstm_params(3, 2)
    h, s = lstm_step(p, np.zeros(3), np.zeros(3), np.array([4.0, -1.0]))
    np.testing.assert_array_equal(h, 0)
    np.testing.assert_array_equal(s, 0)


def test_lstm_carry_halves():
    p = lstm_params(1, 1)
    h, s = lstm_step(p, np.zeros(1), np.array([2.0]), np.array([0.3]))
    assert s[0] == 1.0
    assert h[0] == pytest.approx(0.5 * math.tanh(1.0), abs=1e-15)
    assert h[0] == pytest.approx(0.3808, abs=1e-4)


def test_lstm_saturated_forget_gate_carries_state():
    p = lstm_params(1, 1)
    p = LstmParams(p.W_f, p.W_i, p.W_o, np.array([[0.0, 1.0]]), np.array([20.0]), p.b_i, p.b_o, p.b_s)
    _, s = lstm_step(p, np.zeros(1), np.array([2.0]), np.array([0.4]))
    assert s[0] == pytest.approx(2.0 + 0.5 * math.tanh(0.4), abs=1e-8)


def test_lstm_shape_errors():
    p = lstm_params(3, 2)
    with pytest.raises(DataError):
        lstm_step(p, np.zeros(3), np.zeros(3), np.zeros(4))
    with pytest.raises(DataError):
        LstmParams(np.zeros((3, 5)), np.zeros((3, 5)), np.zeros((3, 5)), np.zeros((3, 4)),
                   np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))


def test_rnn_examples():
    p = RnnParams(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros(2))
    np.testing.assert_array_equal(rnn_step(p, np.ones(2), np.ones(1)), 0)
    p = RnnParams(np.zeros((1, 1)), np.eye(1), np.zeros(1))
    assert rnn_step(p, np.zeros(1), np.array([0.5]))[0] == pytest.approx(0.4621, abs=1e-4)
    with pytest.raises(DataError):
        rnn_step(p, np.zeros(2), np.array([0.5]))


def test_sequence_ops_match_step_functions(rng):
    m, n, B, steps = 4, 3, 2, 5
    p = lstm_params(m, n, rng)
    x = rng.standard_normal((B, steps, n))
    H = lstm_sequence(x, p.W_f, p.W_i, p.W_o, p.W_s, p.b_f, p.b_i, p.b_o, p.b_s).value
    h, s = np.zeros((B, m)), np.zeros((B, m))
    for t in range(steps):
        h, s = lstm_step(p, h, s, x[:, t])
        np.testing.assert_allclose(H[:, t], h, atol=1e-13)
    r = RnnParams(rng.standard_normal((m, m)), rng.standard_normal((m, n)), rng.standard_normal(m))
    H = rnn_sequence(x, r.W_hh, r.W_xh, r.bias).value
    h = np.zeros((B, m))
    for t in range(steps):
        h = rnn_step(r, h, x[:, t])
        np.testing.assert_allclose(H[:, t], h, atol=1e-13)


def test_softmax_examples():
    np.testing.assert_allclose(softmax(np.full(5, 2.0)), 0.2)
    np.testing.assert_allclose(softmax([math.log(1), math.log(3)]), [0.25, 0.75], atol=1e-15)
    out = softmax([1000.0, 1001.0])
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, softmax([0.0, 1.0]), atol=1e-15)
    with pytest.raises(DataError):
        softmax([])


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-500, 500)), st.floats(-100, 100))
@settings(max_examples=60, deadline=None)
def test_softmax_is_a_distribution_and_shift_invariant(x, c):
    p = softmax(x)
    assert p.min() >= 0 and abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(softmax(x + c), p, atol=1e-12)


def test_adam_examples():
    params = {"w": np.array([1.0, -2.0])}
    out, st_ = adam_update(params, {"w": np.zeros(2)}, AdamState(), lr=0.1)
    np.testing.assert_array_equal(out["w"], params["w"])
    assert st_.step == 1
    out, _ = adam_update(params, {"w": np.array([3.0, -0.01])}, AdamState(), lr=0.01)
    np.testing.assert_allclose(out["w"] - params["w"], [-0.01, 0.01], rtol=1e-5)


def test_adam_constant_gradient_is_monotone():
    p, s = {"w": np.array([0.0])}, AdamState()
    prev = 0.0
    for _ in range(50):
        p, s = adam_update(p, {"w": np.array([1.0])}, s, lr=0.01)
        assert p["w"][0] < prev
        prev = p["w"][0]


def test_adam_is_functional():
    params = {"w": np.ones(3)}
    state = AdamState()
    adam_update(params, {"w": np.ones(3)}, state)
    np.testing.assert_array_equal(params["w"], 1.0)
    assert state.step == 0 and not state.m


def test_optimizer_shape_checks():
    with pytest.raises(DataError):
        adam_update({"w": np.ones(2)}, {"w": np.ones(3)}, AdamState())
    with pytest.raises(DataError):
        sgd_update({"w": np.ones(2)}, {"v": np.ones(2)})
    out, _ = sgd_update({"w": np.ones(2)}, {"w": np.ones(2)}, lr=0.5)
    np.testing.assert_array_equal(out["w"], 0.5)


def test_glorot_limits(rng):
    w = glorot_uniform(rng, (30, 20))
    assert w.shape == (30, 20)
    assert np.abs(w).max() <= math.sqrt(6 / 50)


def test_tape_gradient_of_simple_graph():
    x = Tensor(np.array([1.0, -2.0, 3.0]), name="x")
    with GradientTape() as tape:
        y = T.sum_all(T.mul(relu(x), x))
    (g,) = tape.gradient(y, [x])
    np.testing.assert_array_equal(g, [2.0, 0.0, 6.0])


def test_gradcheck_quadratic_is_exact():
    # entries bounded away from 0: for tiny |g| the FD roundoff ulp(L)/2h dominates
    r = np.random.default_rng(0)
    theta = {"a": r.choice([-1, 1], (4, 3)) * r.uniform(0.5, 2, (4, 3)), "b": np.arange(1.0, 6.0)}
    fn = lambda p: T.mul(T.add(T.sum_all(T.mul(p["a"], p["a"])), T.sum_all(T.mul(p["b"], p["b"]))), 0.5)
    res = gradient_check(fn, theta)
    assert res.max_rel_error < 1e-9
    assert res.coords_checked == 17


def test_gradcheck_single_lstm_step(rng):
    m, n = 5, 3
    p = lstm_params(m, n, rng)
    names = [f"W_{g}" for g in "fios"] + [f"b_{g}" for g in "fios"]
    params = {k: getattr(p, k) for k in names}
    x = rng.standard_normal((1, 1, n))
    target = rng.standard_normal((1, 1, m))

    def loss(q):
        H = lstm_sequence(x, *(q[k] for k in names))
        return mse(H, target)

    assert gradient_check(loss, params).max_rel_error < 1e-4


def test_gradcheck_dense_relu_crossing_kinks(rng):
    W, b = rng.standard_normal((6, 4)), rng.standard_normal(6) * 0.1
    x = rng.standard_normal((8, 4))
    y = rng.standard_normal((8, 6))
    res = gradient_check(lambda q: mse(relu(dense(x, q["W"], q["b"])), y), {"W": W, "b": b})
    assert res.max_rel_error < 1e-6


def test_gradcheck_detects_a_wrong_gradient():
    # a deliberately broken op: forward x**2, backward claims 3x
    def bad_square(t):
        t = T.as_tensor(t)
        return T._make(t.value ** 2, [t], lambda g: [3.0 * t.value * g], "bad")

    res = gradient_check(lambda q: T.sum_all(bad_square(q["x"])), {"x": np.array([1.0, 2.0])})
    assert res.max_rel_error > 0.1
