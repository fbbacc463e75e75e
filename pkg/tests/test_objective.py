import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import central_diff, fd_check, precise_norm, random_psd
from phident.config import IdentConfig
from phident.core import Dimensions, Layout, ParamVector, build_factors, param_vector, realize
from phident.exceptions import DimensionError, EvaluationError
from phident.objective import objective, penalty_gradient, sample_context, sample_norm_gradient
from phident.transfer import FrdDataset, eval_ph, sample_frd


def _norm_oracle(theta, s0, H0, S_given=None, N_given=None):
    """Spectral norm of the error computed from scratch (dense solve + full SVD)."""
    sys = build_factors(theta, S_given, N_given).system()
    D = s0 * sys.E - (sys.J - sys.R)
    H = (sys.B + sys.P).T @ np.linalg.solve(D, sys.B - sys.P) + sys.S + sys.N
    return np.linalg.svd(H0 - H, compute_uv=False)[0]


def _check_norm_gradient(g, theta, s0, H0, S_given=None, N_given=None, rtol=1e-5):
    return fd_check(
        g, lambda x: _norm_oracle(theta.with_theta(x), s0, H0, S_given, N_given), theta.theta, rtol=rtol,
        f_precise=lambda x: precise_norm(build_factors(theta.with_theta(x), S_given, N_given), s0, H0),
    )


def _random_case(rng, n, m, layout=Layout.STANDARD, fix_E=False):
    d = Dimensions(n, m)
    theta = ParamVector(rng.standard_normal(d.n_free(layout, fix_E)), d, layout, fix_E)
    s0 = complex(rng.uniform(-1, 1), rng.uniform(-10, 10))
    H0 = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return theta, s0, H0


def test_sample_gradient_fd_n4_m2(rng):
    theta, s0, H0 = _random_case(rng, 4, 2)
    sigma, g = sample_norm_gradient(theta, s0, H0)
    assert sigma == pytest.approx(_norm_oracle(theta, s0, H0), rel=1e-12)
    assert _check_norm_gradient(g, theta, s0, H0, rtol=1e-6) <= 1


@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_sample_gradient_fd_property(n, m, seed):
    theta, s0, H0 = _random_case(np.random.default_rng(seed), n, m)
    _, g = sample_norm_gradient(theta, s0, H0)
    assert _check_norm_gradient(g, theta, s0, H0) <= 1


def test_scalar_example_gradient():
    theta = param_vector([1, 1, 0, 1, 1], 1, 1)
    sigma, g = sample_norm_gradient(theta, 0.0, np.array([[3.0]]))
    assert sigma == pytest.approx(1.0, abs=1e-15)
    g_fd = central_diff(lambda x: _norm_oracle(theta.with_theta(x), 0.0, np.array([[3.0]])), theta.theta)
    np.testing.assert_allclose(g, g_fd, atol=1e-7)


@pytest.mark.parametrize("n, m", [(2, 1), (3, 2), (4, 3)])
def test_fixed_layout_gradient(rng, n, m):
    S = random_psd(rng, m)
    X = rng.standard_normal((m, m))
    N = X - X.T
    theta, s0, H0 = _random_case(rng, n, m, Layout.FIXED_FEEDTHROUGH)
    _, g = sample_norm_gradient(theta, s0, H0, S, N)
    assert _check_norm_gradient(g, theta, s0, H0, S, N, rtol=1e-6) <= 1


def test_fixed_identity_E_gradient(rng):
    theta, s0, H0 = _random_case(rng, 3, 2, fix_E=True)
    _, g = sample_norm_gradient(theta, s0, H0)
    assert _check_norm_gradient(g, theta, s0, H0, rtol=1e-6) <= 1


def test_zero_residual_gives_zero_gradient(rng):
    theta, s0, _ = _random_case(rng, 3, 2)
    H0 = eval_ph(realize(theta), s0)
    sigma, g = sample_norm_gradient(theta, s0, H0)
    assert sigma <= 1e-12
    if sigma == 0.0:
        assert not np.any(g)


def test_context_invariants(rng):
    theta, s0, H0 = _random_case(rng, 3, 2)
    ctx = sample_context(theta, s0, H0)
    sys = realize(theta)
    assert np.linalg.norm(ctx.u_hat) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(ctx.v_hat) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(ctx.D0 @ ctx.a, (sys.B - sys.P) @ ctx.v_hat, atol=1e-12)
    np.testing.assert_allclose(ctx.D0.conj().T @ ctx.b, (sys.B + sys.P) @ ctx.u_hat, atol=1e-12)
    M = np.outer(np.concatenate([ctx.a, ctx.v_hat]), np.concatenate([-ctx.b, ctx.u_hat]).conj())
    np.testing.assert_allclose(ctx.M, M)
    assert not ctx.tie


def test_singular_resolvent_raises():
    theta = param_vector(np.zeros(5), 1, 1)
    with pytest.raises(EvaluationError):
        sample_norm_gradient(theta, 0.0, np.zeros((1, 1)))


def test_h0_dimension_checked():
    with pytest.raises(DimensionError):
        sample_norm_gradient(param_vector(np.ones(5), 1, 1), 1j, np.zeros((2, 2)))


def _dataset(rng, m, ns):
    omegas = np.sort(rng.uniform(0.01, 10, ns))
    H = rng.standard_normal((ns, m, m)) + 1j * rng.standard_normal((ns, m, m))
    return FrdDataset(omegas, H)


def test_objective_gradient_fd_n5_m2(rng):
    d = Dimensions(5, 2)
    theta = ParamVector(rng.standard_normal(d.n_theta), d)
    data = _dataset(rng, 2, 20)

    def f(x):
        th = theta.with_theta(x)
        return sum(_norm_oracle(th, s, H) ** 2 for s, H in zip(data.s_values, data.responses))

    def f_precise(x):
        fac = build_factors(theta.with_theta(x))
        return sum(precise_norm(fac, s, H) ** 2 for s, H in zip(data.s_values, data.responses))

    rep = objective(theta, data)
    assert rep.value == pytest.approx(f(theta.theta), rel=1e-12)
    assert fd_check(rep.gradient, f, theta.theta, rtol=1e-6, f_precise=f_precise) <= 1


def test_objective_sum_decomposition(rng):
    d = Dimensions(3, 2)
    theta = ParamVector(rng.standard_normal(d.n_theta), d)
    data = _dataset(rng, 2, 15)
    rep = objective(theta, data)
    parts = [objective(theta, FrdDataset([w], [H])) for w, H in zip(data.omegas, data.responses)]
    assert rep.value == pytest.approx(sum(p.value for p in parts), rel=1e-12)
    np.testing.assert_allclose(rep.gradient, sum(p.gradient for p in parts), rtol=1e-10, atol=1e-12)
    assert rep.value == pytest.approx(np.sum(rep.per_sample_errors ** 2), rel=1e-12)


def test_single_sample_matches_norm(rng):
    theta, s0, H0 = _random_case(rng, 3, 1)
    data = FrdDataset([s0.imag if s0.imag > 0 else 1.0], [H0])
    sigma, _ = sample_norm_gradient(theta, data.s_values[0], H0)
    assert objective(theta, data).value == pytest.approx(sigma ** 2, rel=1e-12)


def test_objective_zero_at_generator(rng):
    d = Dimensions(3, 2)
    theta = ParamVector(rng.standard_normal(d.n_theta), d)
    data = sample_frd(realize(theta), np.logspace(-2, 1, 30))
    rep = objective(theta, data)
    assert rep.value <= 1e-20
    assert np.linalg.norm(rep.gradient) <= 1e-10


def test_penalty_examples(rng):
    d = Dimensions(3, 2)
    theta = ParamVector(rng.standard_normal(d.n_theta), d)
    S = realize(theta).S
    val, g = penalty_gradient(theta, S, 0.5)
    assert val <= 1e-28 and np.linalg.norm(g) <= 1e-12
    val, g = penalty_gradient(theta, np.zeros((2, 2)), 0.0)
    assert val == 0.0 and not np.any(g)


def test_penalty_gradient_fd(rng):
    d = Dimensions(3, 2)
    theta = ParamVector(rng.standard_normal(d.n_theta), d)
    S_given = random_psd(rng, 2)

    def f(x):
        return 0.1 * np.linalg.norm(realize(theta.with_theta(x)).S - S_given, 2) ** 2

    val, g = penalty_gradient(theta, S_given, 0.1)
    assert val == pytest.approx(f(theta.theta), rel=1e-12)
    assert fd_check(g, f, theta.theta, rtol=1e-6) <= 1
    seg_start = d.n_E + d.n_J
    outside = np.r_[g[:seg_start], g[seg_start + d.n_W:]]
    assert not np.any(outside)


def test_reg_objective_adds_penalty(rng):
    d = Dimensions(2, 1)
    theta = ParamVector(rng.standard_normal(d.n_theta), d)
    data = _dataset(rng, 1, 10)
    cfg = IdentConfig(2, variant="reg", lam=0.3)
    plain = objective(theta, data)
    reg = objective(theta, data, cfg)
    pen, pgrad = penalty_gradient(theta, np.zeros((1, 1)), 0.3)
    assert reg.penalty == pytest.approx(pen)
    assert reg.value == pytest.approx(plain.value + pen, rel=1e-12)
    np.testing.assert_allclose(reg.gradient, plain.gradient + pgrad)


def test_tie_flagged():
    # H = 1/(s+1) I at s = 0 against H0 = 0 gives a doubled top singular value
    d = Dimensions(2, 2)
    sys_theta = np.zeros(d.n_theta)
    seg = [d.n_E, d.n_J, d.n_W, d.n_B, d.n_N]
    start = np.cumsum([0] + seg)
    sys_theta[start[0]:start[1]] = [1, 0, 1]
    sys_theta[start[2]:start[3]] = [1, 0, 0, 0, 1, 0, 0, 0, 0, 0]
    sys_theta[start[3]:start[4]] = [1, 0, 0, 1]
    theta = ParamVector(sys_theta, d)
    rep = objective(theta, FrdDataset([1e-3], [np.zeros((2, 2))]))
    assert rep.ties == 1
