import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from landprobe.policies import (
    GaussianLinearPolicy,
    MixedPolicy,
    ParamVector,
    SoftmaxTabularPolicy,
    action_probs,
    categorical_entropy,
    categorical_entropy_grad,
    load_checkpoint,
    save_checkpoint,
    softmax_probs,
)


def test_zero_logits_uniform():
    pol = SoftmaxTabularPolicy(np.zeros((4, 3)))
    np.testing.assert_array_equal(action_probs(pol, 1), np.full(4, 0.25))


def test_large_logit_no_overflow():
    theta = np.zeros((4, 2))
    theta[2, 0] = 50.0
    p = action_probs(SoftmaxTabularPolicy(theta), 0)
    assert p[2] >= 1 - 1e-12
    assert np.all(np.isfinite(p))


def test_mix_endpoints():
    rng = np.random.default_rng(0)
    base = SoftmaxTabularPolicy(rng.normal(size=(4, 5)) * 3)
    np.testing.assert_array_equal(MixedPolicy(base, 1.0).probs(), np.full((5, 4), 0.25))
    np.testing.assert_array_equal(MixedPolicy(base, 0.0).probs(), base.probs())
    p = MixedPolicy(base, 0.2).probs()
    assert np.all(p >= 0.2 / 4 - 1e-15)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        MixedPolicy(base, 1.5)


def test_action_probs_index_bounds():
    with pytest.raises(IndexError):
        action_probs(SoftmaxTabularPolicy(np.zeros((2, 2))), 5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-20, 20)), st.floats(-100, 100))
def test_softmax_shift_invariance(theta, shift):
    p = softmax_probs(theta)
    q = softmax_probs(theta + shift)
    assert np.max(np.abs(p - q)) <= 1e-9
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_entropy_values():
    assert categorical_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4), abs=1e-15)
    assert categorical_entropy(np.array([0.0, 1.0, 0.0])) == 0.0


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(0, 1)))
def test_entropy_range(w):
    if w.sum() == 0:
        w = np.ones(5)
    h = categorical_entropy(w / w.sum())
    assert -1e-12 <= h <= math.log(5) + 1e-12


def test_entropy_gradient_finite_differences():
    rng = np.random.default_rng(5)
    theta = rng.normal(size=(4, 3))
    pol = SoftmaxTabularPolicy(theta)
    s, h = 1, 1e-6
    g = categorical_entropy_grad(pol, s)
    fd = np.zeros(4)
    for a in range(4):
        tp, tm = theta.copy(), theta.copy()
        tp[a, s] += h
        tm[a, s] -= h
        fd[a] = (categorical_entropy(softmax_probs(tp)[s]) - categorical_entropy(softmax_probs(tm)[s])) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6


def test_softmax_score_finite_differences():
    rng = np.random.default_rng(2)
    theta = rng.normal(size=(3, 4))
    pol = SoftmaxTabularPolicy(theta)
    s, a, h = 2, 1, 1e-6
    fd = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += h
        tm[idx] -= h
        fd[idx] = (np.log(softmax_probs(tp)[s, a]) - np.log(softmax_probs(tm)[s, a])) / (2 * h)
    np.testing.assert_allclose(pol.score(s, a), fd, atol=1e-8)
    np.testing.assert_array_equal(pol.score_many([s], [a])[0], pol.score(s, a))


def test_gaussian_log_prob_grad_cases():
    pol = GaussianLinearPolicy(np.array([[0.3]]), sigma=1.0, low=[-10], high=[10])
    obs = np.array([2.0])
    mean = pol.mean(obs)
    np.testing.assert_array_equal(pol.log_prob_grad(obs, mean), [[0.0]])
    assert pol.log_prob_grad(obs, mean + 0.5)[0, 0] == pytest.approx(1.0)


def test_gaussian_log_prob_grad_finite_differences():
    rng = np.random.default_rng(9)
    theta = rng.normal(size=(2, 5))
    obs = rng.normal(size=5)
    a = rng.normal(size=2)
    pol = GaussianLinearPolicy(theta, sigma=0.7)
    g = pol.log_prob_grad(obs, a)
    h = 1e-6
    fd = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += h
        tm[idx] -= h
        fd[idx] = (GaussianLinearPolicy(tp, 0.7).log_prob(obs, a) - GaussianLinearPolicy(tm, 0.7).log_prob(obs, a)) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6


def test_gaussian_sigma_zero():
    pol = GaussianLinearPolicy(np.ones((2, 3)), sigma=0.0)
    obs = np.array([0.1, 0.2, 1.0])
    pre, act = pol.sample(obs, np.array([5.0, -5.0]))
    np.testing.assert_array_equal(pre, pol.mean(obs))
    with pytest.raises(ValueError):
        pol.log_prob_grad(obs, pre)
    with pytest.raises(ValueError):
        GaussianLinearPolicy(np.ones((2, 3)), sigma=-1.0)


def test_gaussian_clip_and_entropy():
    pol = GaussianLinearPolicy(np.zeros((2, 1)), sigma=0.5)
    pre, act = pol.sample(np.array([1.0]), np.array([10.0, -10.0]))
    np.testing.assert_array_equal(act, [1.0, -1.0])
    np.testing.assert_array_equal(pre, [5.0, -5.0])
    assert pol.entropy() == pytest.approx(2 * 0.5 * math.log(2 * math.pi * math.e * 0.25))


def test_checkpoint_round_trip(tmp_path):
    pv = ParamVector(np.arange(6.0), "gaussian_linear", (2, 3), sigma=0.5, meta={"iter": 3})
    save_checkpoint(tmp_path / "c.json", pv)
    back = load_checkpoint(tmp_path / "c.json")
    np.testing.assert_array_equal(back.array(), pv.array())
    assert (back.policy_kind, back.dims, back.sigma, back.meta) == ("gaussian_linear", (2, 3), 0.5, {"iter": 3})


def test_param_vector_layout_checks():
    with pytest.raises(ValueError):
        ParamVector(np.zeros(5), "softmax_tabular", (2, 3))
    with pytest.raises(ValueError):
        ParamVector(np.array([np.nan, 0.0]), "softmax_tabular", (1, 2))
