import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geneq.errors import NumericError, ShapeError
from geneq.optim import AdamState, adam_step
from oracles import adam_reference

vectors = arrays(np.float64, st.integers(1, 9), elements=st.floats(-1e3, 1e3))


def test_zero_gradient_is_fixed_point():
    s = AdamState.zeros(3)
    p = np.array([1.0, -2.0, 3.0])
    s2, p2 = adam_step(s, p, np.zeros(3))
    np.testing.assert_array_equal(p2, p)
    assert s2.step_count == 1


@given(vectors)
def test_first_step_is_a_sign_step(g):
    s = AdamState.zeros(g.size, learning_rate=10.0)
    _, p = adam_step(s, np.zeros(g.size), g)
    nz = np.abs(g) > 1e-3
    step = np.abs(p[nz])
    assert np.all(step <= 10.0) and np.all(step >= 9.9)
    np.testing.assert_array_equal(np.sign(p[nz]), -np.sign(g[nz]))


def test_quadratic_convergence():
    s = AdamState.zeros(1, learning_rate=0.1)
    p = np.array([0.0])
    for _ in range(500):
        s, p = adam_step(s, p, 2.0 * (p - 3.0))
    assert abs(p[0] - 3.0) < 1e-2


def test_matches_scalar_loop_oracle(rng):
    target = rng.normal(size=5)
    weights = rng.uniform(0.5, 4.0, size=5)

    def grad(p):
        return 2.0 * weights * (p - target) + np.cos(p)

    p0 = rng.normal(size=5)
    s, p = AdamState.zeros(5, learning_rate=0.05), p0.copy()
    for _ in range(200):
        s, p = adam_step(s, p, grad(p))
    np.testing.assert_allclose(p, adam_reference(grad, p0, 200, 0.05), rtol=1e-12, atol=1e-12)


def test_matches_torch_adam(rng):
    torch = pytest.importorskip("torch")
    p0 = rng.normal(size=4)
    t = torch.tensor(p0, dtype=torch.float64, requires_grad=True)
    opt = torch.optim.Adam([t], lr=0.3)
    s, p = AdamState.zeros(4, learning_rate=0.3), p0.copy()
    for _ in range(50):
        opt.zero_grad()
        loss = torch.sum(torch.sin(t) * t**2)
        loss.backward()
        opt.step()
        g = np.cos(p) * p**2 + 2 * p * np.sin(p)
        s, p = adam_step(s, p, g)
    np.testing.assert_allclose(p, t.detach().numpy(), rtol=1e-10, atol=1e-12)


def test_lr_scale_per_element():
    s = AdamState.zeros(2, learning_rate=10.0)
    _, p = adam_step(s, np.zeros(2), np.array([1.0, 1.0]), lr_scale=np.array([1.0, 0.1]))
    np.testing.assert_allclose(p, [-10.0, -1.0], rtol=1e-6)


@given(vectors, st.floats(1e-3, 1e3))
def test_gradient_scale_keeps_sign_pattern(g, c):
    s = AdamState.zeros(g.size)
    _, a = adam_step(s, np.zeros(g.size), g)
    _, b = adam_step(s, np.zeros(g.size), c * g)
    np.testing.assert_array_equal(np.sign(a), np.sign(b))


@given(vectors, vectors)
def test_deterministic_and_moments_nonnegative(p, g):
    if p.size != g.size:
        return
    s = AdamState.zeros(p.size)
    s1, p1 = adam_step(s, p, g)
    s2, p2 = adam_step(s, p, g)
    assert p1.tobytes() == p2.tobytes()
    assert np.all(s1.second_moment >= 0)
    assert np.array_equal(s1.first_moment, s2.first_moment)


def test_nonfinite_gradient_names_index():
    s = AdamState.zeros(3)
    with pytest.raises(NumericError, match="index 1"):
        adam_step(s, np.zeros(3), np.array([0.0, np.nan, 0.0]))


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step(AdamState.zeros(3), np.zeros(3), np.zeros(2))


def test_fresh_resets_but_keeps_hyperparameters():
    s = AdamState.zeros(2, learning_rate=0.5)
    s, _ = adam_step(s, np.zeros(2), np.ones(2))
    f = s.fresh(4)
    assert f.step_count == 0 and f.learning_rate == 0.5
    assert f.first_moment.shape == (4,) and not f.first_moment.any()
