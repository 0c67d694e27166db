"""Mean and covariance evolution tests.

Oracles: the mean ODE has an exact parametric solution (param_profile below),
c at the critical point has the closed form dbar*lam(y*)^2/lam'(y*), and the
dip variance Gamma_ss is cross-checked in-suite by Monte Carlo on the exact
deferred-decision peeling chain (the census law of configuration-model
peeling).  Frozen alpha values are regressions of this verified pipeline.
"""
import math

import numpy as np
import pytest

from fss.ensemble import (
    critical_point,
    de_evolve,
    make_regular,
    parse_ensemble,
)
from fss.asymptotics import (
    AsymptoticsError,
    _System,
    alpha,
    covariance_evolution,
    initial_state,
    mean_evolution,
)


def param_profile(e, eps, y):
    """Exact mean profile at parameter y in (0,1]; y=1 is the start.

    x = eps*lam(y); tau = eps*(1 - L(y)); v_d = eps*Lam_d*y^d; r_j for j >= 2
    is binomial thinning of the check degrees at x; r_1 balances the edges.
    Substitution shows this solves dz/dtau = f(z) with the tau=0 condition.
    """
    lam = e.lam
    x = eps * lam(y)
    tau = eps * (1.0 - e.L(y))
    nf = lam.node_fractions()
    v = np.array([eps * nf[d] * y ** d for d in sorted(nf)])
    cf = e.rho.node_fractions()
    r = np.zeros(e.k_max)
    for j in range(2, e.k_max + 1):
        tot = sum(
            p * math.comb(d, j) * x ** j * (1.0 - x) ** (d - j)
            for d, p in cf.items() if d >= j
        )
        r[j - 1] = j * e.check_fraction * tot
    dbar = 1.0 / lam.integral()
    r[0] = dbar * eps * lam(y) * (y - 1.0 + e.rho(1.0 - x))
    return tau, v, r


def y_of_tau(e, eps, tau):
    """Invert tau = eps*(1 - L(y)); tau decreases in y."""
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if eps * (1.0 - e.L(mid)) >= tau:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_initial_state_full_erasure():
    e = make_regular(3, 6)
    for mode in ("conditional", "binomial"):
        st, cov = initial_state(e, 1.0, mode=mode)
        assert st.tau == 0.0
        assert st.v_total == pytest.approx(1.0, abs=1e-15)
        assert st.r[5] == pytest.approx(3.0, abs=1e-15)  # all edges at degree 6
        assert np.all(st.r[:5] == 0.0)
        assert st.s == 0.0
        assert np.all(cov.gamma == 0.0)


def test_initial_state_thinning_formula():
    e = make_regular(3, 6)
    eps = 0.42944
    st, _ = initial_state(e, eps)
    # one edge per degree-one check: r1 = (m/n)*C(6,1)*eps*(1-eps)^5
    assert st.s == pytest.approx(3.0 * eps * (1.0 - eps) ** 5, rel=1e-12)
    tau, v, r = param_profile(e, eps, 1.0)
    assert tau == 0.0
    np.testing.assert_allclose(st.v, v, atol=1e-14)
    np.testing.assert_allclose(st.r, r, atol=1e-14)


def test_initial_state_mode_trace_gap():
    e = make_regular(3, 6)
    for eps in (0.2, 0.42944, 0.8):
        _, gc = initial_state(e, eps, mode="conditional")
        _, gb = initial_state(e, eps, mode="binomial")
        diff = gb.gamma - gc.gamma
        assert np.trace(diff) > 0.0
        # the added term is a rank-one nonnegative outer product
        w = np.linalg.eigvalsh(diff)
        assert w[-1] > 0.0
        assert abs(w[:-1]).max() < 1e-12 * w[-1]


def test_initial_mode_gap_matches_channel_sensitivity():
    # Gamma_b - Gamma_c = eps(1-eps) * g g^T with g = d(mean profile)/d(eps)
    e = parse_ensemble("3:0.5,4:0.5/6:1.0")
    eps, h = 0.41, 1e-5
    sys_ = _System(e)
    zp, _ = sys_.initial(eps + h, "conditional")
    zm, _ = sys_.initial(eps - h, "conditional")
    g = (zp - zm) / (2.0 * h)
    _, gc = initial_state(e, eps, mode="conditional")
    _, gb = initial_state(e, eps, mode="binomial")
    want = eps * (1.0 - eps) * np.outer(g, g)
    got = gb.gamma - gc.gamma
    assert np.abs(got - want).max() < 1e-8 * np.abs(want).max()


def test_initial_state_validation():
    e = make_regular(3, 6)
    with pytest.raises(AsymptoticsError):
        initial_state(e, 0.0)
    with pytest.raises(AsymptoticsError):
        initial_state(e, 1.2)
    with pytest.raises(AsymptoticsError, match="mode"):
        initial_state(e, 0.4, mode="typical")


def test_mean_evolution_matches_parametric_solution():
    cases = [("3,6", 0.40), ("3,6", 0.45), ("3:0.5,4:0.5/6:1.0", None)]
    for text, eps in cases:
        e = parse_ensemble(text)
        if eps is None:
            eps = critical_point(e).epsilon_star - 0.03
        res = mean_evolution(e, eps)
        for st in res.states[:-3:400]:
            y = y_of_tau(e, eps, st.tau)
            _, v, r = param_profile(e, eps, y)
            np.testing.assert_allclose(st.v, v, atol=1e-9)
            np.testing.assert_allclose(st.r, r, atol=1e-9)


def test_mean_evolution_statuses_and_residual():
    e = make_regular(3, 6)
    dec = mean_evolution(e, 0.40)
    assert dec.status == "decoded"
    assert dec.states[-1].v_total < 1e-6
    assert min(st.s for st in dec.states[:-1]) > 0.0

    st = mean_evolution(e, 0.45)
    assert st.status == "stalled"
    # the stall point is the DE fixed point: v = eps * L(y_inf)
    x_inf = de_evolve(e, 0.45)
    y_inf = 1.0 - e.rho(1.0 - x_inf)
    assert st.states[-1].v_total == pytest.approx(0.45 * e.L(y_inf), abs=5e-4)


def test_mean_evolution_tangent_dip_at_threshold():
    e = make_regular(3, 6)
    cp = critical_point(e)
    res = mean_evolution(e, cp.epsilon_star)
    r1 = [s.s for s in res.states]
    i = int(np.argmin(r1))
    assert 0 < i < len(r1) - 1
    assert abs(r1[i]) < 1e-7
    assert res.states[i].tau == pytest.approx(cp.epsilon_star - cp.nu_star, abs=5e-4)
    assert res.states[i].v_total == pytest.approx(cp.nu_star, abs=5e-4)


def test_mean_evolution_validation():
    e = make_regular(3, 6)
    with pytest.raises(AsymptoticsError):
        mean_evolution(e, 1.0)
    with pytest.raises(AsymptoticsError):
        mean_evolution(e, 0.4, step=0.0)


def test_edge_balance_along_trajectory():
    for text in ("3,6", "4,5", "3:0.5,4:0.5/6:1.0"):
        e = parse_ensemble(text)
        eps = 0.9 * critical_point(e).epsilon_star
        res = mean_evolution(e, eps)
        dv = np.array(sorted(e.lam.node_fractions()), dtype=float)
        states = list(res.states[::500]) + [res.states[-1]]
        for st in states:
            assert abs(st.r.sum() - float(dv @ st.v)) < 1e-9


def test_covariance_evolution_at_threshold():
    e = make_regular(3, 6)
    cp = critical_point(e)
    res = covariance_evolution(e, cp.epsilon_star)
    assert res.tau_star == pytest.approx(0.22646687, abs=1e-6)
    assert res.sigma_star == pytest.approx(0.18619870, abs=1e-6)
    # initial matrix and the dip matrix are PSD; the decode endgame (v -> 0,
    # far past the dip) degenerates and is only flagged, not used
    assert res.gammas[0].min_eigenvalue() > -1e-9
    g_star = res.gamma_star
    assert np.abs(g_star - g_star.T).max() < 1e-12
    assert np.linalg.eigvalsh(g_star).min() > -1e-9
    assert isinstance(res.psd_ok, bool)


def test_covariance_step_halving_stability():
    e = make_regular(3, 6)
    eps = critical_point(e).epsilon_star
    a = covariance_evolution(e, eps, step=1e-4)
    b = covariance_evolution(e, eps, step=5e-5)
    assert abs(a.sigma_star - b.sigma_star) / b.sigma_star < 1e-4


def test_covariance_sub_threshold_dip():
    # regression anchored by the exact-chain Monte Carlo cross-check
    e = make_regular(3, 6)
    eps = critical_point(e).epsilon_star - 0.02
    res = covariance_evolution(e, eps)
    assert res.status == "decoded"
    assert res.tau_star == pytest.approx(0.22731096, abs=1e-6)
    assert res.sigma_star == pytest.approx(0.20295770, abs=1e-6)


def test_covariance_no_dip_far_below_threshold():
    e = make_regular(3, 6)
    res = covariance_evolution(e, 0.30)
    assert res.tau_star is None and res.sigma_star is None


def test_covariance_validation():
    e = make_regular(3, 6)
    with pytest.raises(AsymptoticsError, match="mode"):
        covariance_evolution(e, 0.4, mode="other")


def test_alpha_36_both_modes():
    e = make_regular(3, 6)
    cp = critical_point(e)
    rc = alpha(e, mode="conditional")
    assert rc.alpha == pytest.approx(0.262633151915, abs=2e-6)
    assert rc.c == pytest.approx(1.5 * cp.y_star ** 3, abs=1e-7)  # closed form
    assert rc.tau_star == pytest.approx(cp.epsilon_star - cp.nu_star, abs=1e-6)
    assert rc.nu_star == pytest.approx(cp.nu_star, abs=1e-12)
    assert rc.sigma_star == pytest.approx(0.18619870, abs=1e-6)
    rb = alpha(e, mode="binomial")
    assert rb.alpha == pytest.approx(0.560354738267, abs=2e-6)
    gap = rb.alpha ** 2 - rc.alpha ** 2 - cp.epsilon_star * (1.0 - cp.epsilon_star)
    assert abs(gap) < 1e-9


def test_alpha_34_regression():
    r = alpha(make_regular(3, 4))
    assert r.alpha == pytest.approx(0.256948417964, abs=2e-6)


def test_alpha_mode_identity_612():
    e = make_regular(6, 12)
    cp = critical_point(e)
    rc = alpha(e, mode="conditional")
    rb = alpha(e, mode="binomial")
    assert rc.alpha == pytest.approx(0.220904426980, abs=2e-6)
    gap = rb.alpha ** 2 - rc.alpha ** 2 - cp.epsilon_star * (1.0 - cp.epsilon_star)
    assert abs(gap) < 1e-6


def test_alpha_irregular_closed_form_c_and_identity():
    e = parse_ensemble("3:0.5,4:0.5/6:1.0")
    cp = critical_point(e)
    rc = alpha(e, mode="conditional")
    lam = e.lam
    c_closed = (1.0 / lam.integral()) * lam(cp.y_star) ** 2 / lam.derivative(cp.y_star)
    assert rc.c == pytest.approx(c_closed, abs=1e-7)
    rb = alpha(e, mode="binomial")
    gap = rb.alpha ** 2 - rc.alpha ** 2 - cp.epsilon_star * (1.0 - cp.epsilon_star)
    assert abs(gap) < 1e-6


def test_alpha_errors():
    with pytest.raises(Exception, match="unconditionally stable"):
        alpha(make_regular(2, 4))
    with pytest.raises(AsymptoticsError, match="mode"):
        alpha(make_regular(3, 6), mode="other")


def test_increment_covariance_respects_edge_balance():
    # the per-step increment never changes sum_d d*v_d - sum_j r_j, so the
    # invariant direction w is a null vector of B and of the drift
    e = parse_ensemble("3:0.5,4:0.5/6:1.0")
    sys_ = _System(e)
    w = np.concatenate([sys_.dv, -np.ones(sys_.kmax)])
    res = mean_evolution(e, 0.42)
    for st in (res.states[0], res.states[len(res.states) // 2]):
        z = np.concatenate([st.v, st.r])
        B = sys_.B(z)
        assert np.abs(B @ w).max() < 1e-12
        assert abs(float(w @ sys_.f(z))) < 1e-12
        A = sys_.A(z)
        assert np.abs(w @ A).max() < 1e-6  # finite-difference Jacobian


def _chain_profiles(rng, trials, m, k, nsamp):
    """Exact initial check-degree profiles via multivariate hypergeometric."""
    N = np.zeros((trials, k))
    colors = np.full(m, k, dtype=np.int64)
    draws = rng.multivariate_hypergeometric(colors, nsamp, size=trials, method="marginals")
    for j in range(1, k + 1):
        N[:, j - 1] = (draws == j).sum(axis=1)
    return N


def test_dip_variance_matches_exact_chain():
    # Monte Carlo on the deferred-decision chain: peel one variable per step,
    # route its remaining edges to socket-uniform checks
    l, k = 3, 6
    e = make_regular(l, k)
    eps = critical_point(e).epsilon_star - 0.03
    cov = covariance_evolution(e, eps)
    taus = np.array([st.tau for st in cov.states])
    i_dip = int(np.argmin(np.abs(taus - cov.tau_star)))

    n, trials = 2000, 4000
    rng = np.random.default_rng(7)
    v0 = int(round(n * eps))
    N = _chain_profiles(rng, trials, n * l // k, k, v0 * l)
    J = np.arange(1, k + 1, dtype=float)
    rows = np.arange(trials)
    steps = int(round(n * cov.tau_star))
    for _ in range(steps):
        N[:, 0] -= 1.0
        for _ in range(l - 1):
            C = np.cumsum(N * J, axis=1)
            u = rng.random(trials) * C[:, -1]
            idx = np.minimum((u[:, None] >= C).sum(axis=1), k - 1)
            N[rows, idx] -= 1.0
            hit = idx > 0
            N[rows[hit], idx[hit] - 1] += 1.0
    assert N[:, 0].min() > 0.0  # no trial stalled at this eps margin
    var_mc = n * (N[:, 0] / n).var(ddof=1)
    model = cov.gammas[i_dip].gamma[1, 1]
    assert var_mc == pytest.approx(model, rel=0.10)
