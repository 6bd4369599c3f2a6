import numpy as np
import pytest

from ttflow import tt as ttm
from ttflow.integrators import (
    RankExplosionError,
    RankPolicy,
    StepperConfig,
    adapt_rank,
    eps_values,
    integrate,
    ips_step,
    ops_step,
    prepare_split_state,
    st_svd_step,
    tt_cross_step,
)
from ttflow.problems import Block, SolutionOracle, manufactured_problem
from ttflow.sampling import deim


class ZeroRHS:
    def dense(self, u, t):
        return np.zeros_like(u)

    def targets(self, oracle, block, t):
        return np.zeros_like(oracle.values(block))

    def tt_rhs(self, y, t, tol):
        return ttm.scale(y, 0.0)


class DecayRHS:
    def dense(self, u, t):
        return -u

    def targets(self, oracle, block, t):
        return -oracle.values(block)

    def tt_rhs(self, y, t, tol):
        return ttm.scale(y, -1.0)


class MatrixRHS:
    """Affine matrix field with a generic inhomogeneity; d = 2 oracles."""

    def __init__(self, w):
        self.w = w

    def dense(self, u, t):
        return self.w + 0.1 * u

    def targets(self, oracle, block, t):
        vals = oracle.values(block)
        if block.mode is None:
            li = np.array([a for (a,) in block.left])
            ri = np.array([b for (b,) in block.right])
            return self.w[np.ix_(li, ri)] + 0.1 * vals
        if block.mode == 0:
            ri = np.array([b for (b,) in block.right])
            return self.w[:, ri][None, :, :] + 0.1 * vals
        li = np.array([a for (a,) in block.left])
        return self.w[li, :][:, :, None] + 0.1 * vals


def random_tt(shape, ranks, seed=0):
    return ttm.random_tt(shape, ranks, np.random.default_rng(seed))


@pytest.mark.parametrize("method", ["tt_cross", "ips", "ops", "st_svd"])
def test_zero_field_identity(method):
    y = random_tt((5, 6, 4), (2, 3), seed=5)
    x0 = ttm.contract_to_dense(y)
    cfg = StepperConfig(scheme="euler", dt=0.1, t_end=0.1)
    if method == "tt_cross":
        y1 = tt_cross_step(y, ZeroRHS(), 0.0, 0.1, cfg).y
    elif method == "ips":
        y1 = ips_step(prepare_split_state(y), ZeroRHS(), 0.0, 0.1, cfg).state.to_tt()
    elif method == "ops":
        y1 = ops_step(y, ZeroRHS(), 0.0, 0.1, cfg)
    else:
        y1, _ = st_svd_step(y, ZeroRHS(), 0.0, 0.1,
                            RankPolicy(truncation_tol=1e-13), scheme="euler")
    assert np.abs(ttm.contract_to_dense(y1) - x0).max() < 1e-12


def test_cross_linear_decay_scales_entries():
    y = random_tt((5, 6, 4), (2, 3), seed=5)
    x0 = ttm.contract_to_dense(y)
    cfg = StepperConfig(scheme="euler", dt=0.01, t_end=0.01)
    res = tt_cross_step(y, DecayRHS(), 0.0, 0.01, cfg)
    assert np.abs(ttm.contract_to_dense(res.y) - 0.99 * x0).max() < 1e-12
    assert res.y.ranks == y.ranks


# ---------------------------------------------------------------------------
# d = 2 reductions against independent matrix implementations

def independent_matrix_cross_euler(y0, g, dt, r):
    u, _, vt = np.linalg.svd(y0, full_matrices=False)
    u, v = u[:, :r], vt[:r].T
    rows, cols = deim(u), deim(v)
    cols_data = y0[:, cols] + dt * g(y0, 0.0)[:, cols]
    rows_data = y0[rows, :] + dt * g(y0, 0.0)[rows, :]
    q, rm = np.linalg.qr(cols_data)
    s = np.sign(np.diag(rm))
    q = q * s
    return q @ np.linalg.solve(q[rows, :], rows_data)


def independent_interp_ksl_euler(y0, g, dt, r):
    u, s, vt = np.linalg.svd(y0, full_matrices=False)
    u, v = u[:, :r], vt[:r].T
    cols = deim(v)
    k = u @ np.diag(s[:r])
    k1 = k + dt * np.linalg.solve(v[cols, :], g(k @ v.T, 0.0)[:, cols].T).T
    u1, rh = np.linalg.qr(k1)
    sg = np.sign(np.diag(rh))
    u1, rh = u1 * sg, rh * sg[:, None]
    rows = deim(u1)
    gs = g(u1 @ rh @ v.T, 0.0)[np.ix_(rows, cols)]
    s1 = rh - dt * np.linalg.solve(u1[rows, :], np.linalg.solve(v[cols, :], gs.T).T)
    ell = v @ s1.T
    gl = g(u1 @ ell.T, 0.0)[rows, :]
    ell1 = ell + dt * np.linalg.solve(u1[rows, :], gl).T
    v1, s1h = np.linalg.qr(ell1)
    sg = np.sign(np.diag(s1h))
    return u1 @ (s1h * sg[:, None]).T @ (v1 * sg).T


def independent_orth_ksl_euler(y0, g, dt, r):
    u, s, vt = np.linalg.svd(y0, full_matrices=False)
    u, v = u[:, :r], vt[:r].T
    k = u @ np.diag(s[:r])
    k1 = k + dt * g(k @ v.T, 0.0) @ v
    u1, rh = np.linalg.qr(k1)
    sg = np.sign(np.diag(rh))
    u1, rh = u1 * sg, rh * sg[:, None]
    s1 = rh - dt * u1.T @ g(u1 @ rh @ v.T, 0.0) @ v
    ell = v @ s1.T
    ell1 = ell + dt * g(u1 @ ell.T, 0.0).T @ u1
    v1, s1h = np.linalg.qr(ell1)
    sg = np.sign(np.diag(s1h))
    return u1 @ (s1h * sg[:, None]).T @ (v1 * sg).T


@pytest.fixture(scope="module")
def matrix_setup():
    rng = np.random.default_rng(42)
    r = 3
    u0f = np.linalg.qr(rng.standard_normal((7, r)))[0]
    v0f = np.linalg.qr(rng.standard_normal((6, r)))[0]
    y0m = u0f @ np.diag([1.0, 0.6, 0.3]) @ v0f.T
    w = rng.standard_normal((7, 6))
    return y0m, w, r


def test_cross_step_matches_matrix_cross(matrix_setup):
    y0m, w, r = matrix_setup
    rhs = MatrixRHS(w)
    dt = 1e-3
    ref = independent_matrix_cross_euler(y0m, rhs.dense, dt, r)
    y0 = ttm.tt_svd(y0m, max_ranks=[r])
    cfg = StepperConfig(scheme="euler", dt=dt, t_end=dt)
    mine = ttm.contract_to_dense(tt_cross_step(y0, rhs, 0.0, dt, cfg).y)
    assert np.abs(mine - ref).max() < 1e-12


def test_ips_step_matches_interpolatory_ksl(matrix_setup):
    y0m, w, r = matrix_setup
    rhs = MatrixRHS(w)
    dt = 1e-3
    ref = independent_interp_ksl_euler(y0m, rhs.dense, dt, r)
    y0 = ttm.tt_svd(y0m, max_ranks=[r])
    cfg = StepperConfig(dt=dt, t_end=dt, substep_scheme="euler")
    res = ips_step(prepare_split_state(y0), rhs, 0.0, dt, cfg)
    mine = ttm.contract_to_dense(res.state.to_tt())
    assert np.abs(mine - ref).max() < 1e-12


def test_ops_step_matches_classical_ksl(matrix_setup):
    y0m, w, r = matrix_setup
    rhs = MatrixRHS(w)
    dt = 1e-3
    ref = independent_orth_ksl_euler(y0m, rhs.dense, dt, r)
    y0 = ttm.tt_svd(y0m, max_ranks=[r])
    cfg = StepperConfig(dt=dt, t_end=dt, substep_scheme="euler")
    mine = ttm.contract_to_dense(ops_step(y0, rhs, 0.0, dt, cfg))
    assert np.abs(mine - ref).max() < 1e-12


def test_ops_and_ips_agree_at_first_order(matrix_setup):
    y0m, w, r = matrix_setup
    rhs = MatrixRHS(w)
    y0 = ttm.tt_svd(y0m, max_ranks=[r])
    diffs = []
    for dt in (1e-2, 5e-3):
        cfg = StepperConfig(dt=dt, t_end=dt, substep_scheme="rk4")
        a = ttm.contract_to_dense(ips_step(prepare_split_state(y0), rhs, 0.0, dt, cfg).state.to_tt())
        b = ttm.contract_to_dense(ops_step(y0, rhs, 0.0, dt, cfg))
        diffs.append(np.abs(a - b).max())
    assert diffs[0] < 0.1
    assert diffs[1] < 0.6 * diffs[0]          # first-order gap shrinks with dt


# ---------------------------------------------------------------------------
# manufactured low-rank reproduction and robustness

def test_ips_reproduces_manufactured_path():
    prob = manufactured_problem(shape=(6, 5, 6), ranks=(3, 3), seed=2, amplitude=0.3)
    rhs = prob.rhs
    cfg = StepperConfig(dt=1e-2, t_end=1.0, substep_scheme="rk4", splitting_order=1)
    rec = integrate(prob, "ips", cfg, RankPolicy(), rhs.solution(0.0))
    a1 = ttm.contract_to_dense(rhs.solution(1.0))
    err = np.linalg.norm(ttm.contract_to_dense(rec.final_tt) - a1) / np.linalg.norm(a1)
    assert err <= 1e-8


def test_ips_robust_to_tiny_singular_values():
    prob = manufactured_problem(shape=(6, 5, 6), ranks=(2, 2), seed=3, amplitude=0.3)
    rhs = prob.rhs
    cfg = StepperConfig(dt=1e-2, t_end=0.3, substep_scheme="rk4")
    a_end = ttm.contract_to_dense(rhs.solution(0.3))

    base = integrate(prob, "ips", cfg, RankPolicy(), rhs.solution(0.0))
    err_base = np.linalg.norm(ttm.contract_to_dense(base.final_tt) - a_end) / np.linalg.norm(a_end)

    # append an orthonormal direction carrying a 1e-13 singular value
    y0 = rhs.solution(0.0)
    fam = ttm.orthogonalize_family(y0)
    cores = list(fam.u_cores) + [np.einsum("ab,bic->aic", fam.s_mats[-1], fam.v_cores[-1])]
    u = ttm.left_unfold(cores[0])
    w = np.zeros(u.shape[0])
    w[0] = 1.0
    w -= u @ u[0, :]
    w /= np.linalg.norm(w)
    cores[0] = np.concatenate([cores[0], w.reshape(cores[0].shape[0], cores[0].shape[1], 1)], axis=2)
    rng = np.random.default_rng(9)
    extra_slice = rng.standard_normal((1, cores[1].shape[1], cores[1].shape[2]))
    extra_slice *= 1e-13 / np.linalg.norm(extra_slice)
    cores[1] = np.concatenate([cores[1], extra_slice], axis=0)
    y0_pad = ttm.TensorTrain(cores)
    assert np.abs(ttm.contract_to_dense(y0_pad) - ttm.contract_to_dense(y0)).max() < 1e-12

    padded = integrate(prob, "ips", cfg, RankPolicy(), y0_pad)
    err_pad = np.linalg.norm(ttm.contract_to_dense(padded.final_tt) - a_end) / np.linalg.norm(a_end)
    assert abs(err_pad - err_base) < 0.01 * max(err_base, 1e-12) + 1e-10


# ---------------------------------------------------------------------------
# step-truncation specifics

def test_st_svd_step_against_dense_euler():
    from ttflow.problems import allen_cahn_3d
    prob = allen_cahn_3d(8)
    u0 = prob.u0_dense()
    y0 = ttm.tt_svd(u0, tol=1e-13)
    delta = 1e-8
    pol = RankPolicy(truncation_tol=delta, r_max=200)
    y1, _ = st_svd_step(y0, prob.rhs, 0.0, 1e-3, pol, scheme="euler")
    dense_step = u0 + 1e-3 * prob.rhs.dense(u0, 0.0)
    ref = ttm.contract_to_dense(ttm.tt_svd(dense_step, tol=delta))
    diff = np.linalg.norm(ttm.contract_to_dense(y1) - ref) / np.linalg.norm(ref)
    assert diff <= 5 * delta


def test_hadamard_rank_bookkeeping():
    y = random_tt((5, 6, 4), (3, 2), seed=11)
    sq = ttm.hadamard(y, y)
    assert sq.ranks == (1, 9, 4, 1)


def test_st_svd_rank_guard():
    y = random_tt((6, 6, 6), (3, 3), seed=12)

    class Widen:
        def tt_rhs(self, z, t, tol):
            return ttm.hadamard(z, z)

    with pytest.raises(RankExplosionError):
        st_svd_step(y, Widen(), 0.0, 0.1, RankPolicy(truncation_tol=0.0, r_max=4),
                    scheme="euler")


# ---------------------------------------------------------------------------
# rank adaptation

def test_adapt_rank_unchanged_inside_band():
    rng = np.random.default_rng(13)
    u = np.linalg.qr(rng.standard_normal((8, 3)))[0]
    v = np.linalg.qr(rng.standard_normal((9, 3)))[0]
    x = (u * np.array([1.0, 0.3, 0.05])) @ v.T
    y = ttm.tt_svd(x, max_ranks=[3])
    pol = RankPolicy(adapt=True, eps_lower=1e-3, eps_upper=0.5)
    y2, extra, changed = adapt_rank(y, pol)
    assert not changed and not any(extra)
    assert y2.ranks == y.ranks


def test_adapt_rank_removes_zero_direction():
    rng = np.random.default_rng(14)
    u = np.linalg.qr(rng.standard_normal((8, 3)))[0]
    v = np.linalg.qr(rng.standard_normal((9, 3)))[0]
    x = (u * np.array([1.0, 0.3, 0.0])) @ v.T
    y = ttm.tt_svd(np.asarray(x), max_ranks=[3])
    pol = RankPolicy(adapt=True, eps_lower=1e-7)
    y2, _, changed = adapt_rank(y, pol)
    assert changed and y2.ranks == (1, 2, 1)
    assert np.abs(ttm.contract_to_dense(y2) - x).max() < 1e-12


def test_adapt_rank_growth_paths():
    y = random_tt((6, 6, 6), (2, 2), seed=15)
    pol = RankPolicy(adapt=True, eps_lower=1e-9, eps_upper=1e-8)
    _, extra, _ = adapt_rank(y, pol, mode="cross")
    assert any(extra)
    y2, extra2, changed = adapt_rank(y, pol, mode="splitting")
    assert changed and not any(extra2)
    assert all(r2 >= r for r2, r in zip(y2.ranks, y.ranks))
    assert np.abs(ttm.contract_to_dense(y2) - ttm.contract_to_dense(y)).max() < 1e-12
    # the appended directions carry zero weight
    fam = ttm.orthogonalize_family(y2)
    for k in range(1, 3):
        s = fam.singular_values(k)
        assert s[-1] < 1e-12 * s[0]


def test_cross_entry_budget_per_stage():
    y = random_tt((5, 6, 4), (2, 3), seed=16)

    class CountingRHS:
        def __init__(self):
            self.entries = 0

        def targets(self, oracle, block, t):
            vals = oracle.values(block)
            self.entries += vals.size
            return np.zeros_like(vals)

    rhs = CountingRHS()
    cfg = StepperConfig(scheme="euler", dt=0.01, t_end=0.01)
    tt_cross_step(y, rhs, 0.0, 0.01, cfg)
    r = y.ranks
    expected = sum(r[k] * y.shape[k] * r[k + 1] for k in range(3))
    assert rhs.entries == expected


# ---------------------------------------------------------------------------
# trajectory driver

def test_integrate_t_end_zero_records_initial_state():
    prob = manufactured_problem(shape=(5, 4, 5), ranks=(2, 2), seed=17)
    cfg = StepperConfig(dt=1e-2, t_end=0.0)
    rec = integrate(prob, "tt_cross", cfg, RankPolicy(), prob.rhs.solution(0.0))
    assert len(rec.rows) == 1 and rec.rows[0].t == 0.0
    assert rec.rows[0].ranks == (2, 2)


def test_integrate_convergence_orders_quick():
    """dt-halving on the manufactured problem; coarse two-point ratios."""
    prob = manufactured_problem(shape=(5, 4, 5), ranks=(2, 2), seed=3,
                                amplitude=0.4, lam=0.5)
    rhs = prob.rhs
    y0 = rhs.solution(0.0)
    t_end = 0.2
    a_end = ttm.contract_to_dense(rhs.solution(t_end))
    nrm = np.linalg.norm(a_end)

    def err(method, dt, **kw):
        cfg = StepperConfig(dt=dt, t_end=t_end, **kw)
        rec = integrate(prob, method, cfg, RankPolicy(), y0)
        return np.linalg.norm(ttm.contract_to_dense(rec.final_tt) - a_end) / nrm

    e1 = [err("tt_cross", dt, scheme="euler") for dt in (2e-2, 1e-2)]
    assert 1.6 <= e1[0] / e1[1] <= 2.4
    e2 = [err("tt_cross", dt, scheme="ab2") for dt in (2e-2, 1e-2)]
    assert 3.2 <= e2[0] / e2[1] <= 4.8
    e3 = [err("ips", dt, substep_scheme="euler", splitting_order=1) for dt in (2e-2, 1e-2)]
    assert 1.6 <= e3[0] / e3[1] <= 2.4
    e4 = [err("ips", dt, substep_scheme="rk4", splitting_order=2) for dt in (2e-2, 1e-2)]
    assert 3.2 <= e4[0] / e4[1] <= 4.8


def test_integrate_deterministic_replay():
    prob = manufactured_problem(shape=(5, 4, 5), ranks=(2, 2), seed=18, lam=0.3)
    cfg = StepperConfig(dt=1e-2, t_end=0.1, scheme="ab2")
    rec1 = integrate(prob, "tt_cross", cfg, RankPolicy(), prob.rhs.solution(0.0))
    rec2 = integrate(prob, "tt_cross", cfg, RankPolicy(), prob.rhs.solution(0.0))
    for a, b in zip(rec1.final_tt.cores, rec2.final_tt.cores):
        assert np.array_equal(a, b)
    for ra, rb in zip(rec1.rows, rec2.rows):
        assert ra.ranks == rb.ranks and ra.eps == rb.eps


def test_index_reuse_keeps_accuracy_on_smooth_problem():
    prob = manufactured_problem(shape=(5, 4, 5), ranks=(2, 2), seed=19, lam=0.2)
    rhs = prob.rhs
    y0 = rhs.solution(0.0)
    a_end = ttm.contract_to_dense(rhs.solution(0.2))
    nrm = np.linalg.norm(a_end)
    cfg_fresh = StepperConfig(dt=1e-2, t_end=0.2, scheme="ab2")
    cfg_reuse = StepperConfig(dt=1e-2, t_end=0.2, scheme="ab2",
                              index_refresh="cond_threshold", cond_threshold=1e6)
    e_fresh = np.linalg.norm(ttm.contract_to_dense(
        integrate(prob, "tt_cross", cfg_fresh, RankPolicy(), y0).final_tt) - a_end) / nrm
    e_reuse = np.linalg.norm(ttm.contract_to_dense(
        integrate(prob, "tt_cross", cfg_reuse, RankPolicy(), y0).final_tt) - a_end) / nrm
    assert e_reuse <= 5 * e_fresh + 1e-10


@pytest.mark.parametrize("method", ["ips", "ops"])
def test_zero_field_identity_strang(method):
    y = random_tt((5, 6, 4), (2, 3), seed=5)
    x0 = ttm.contract_to_dense(y)
    cfg = StepperConfig(dt=0.1, t_end=0.1, splitting_order=2, substep_scheme="rk4")
    if method == "ips":
        y1 = ips_step(prepare_split_state(y), ZeroRHS(), 0.0, 0.1, cfg).state.to_tt()
    else:
        y1 = ops_step(y, ZeroRHS(), 0.0, 0.1, cfg)
    assert np.abs(ttm.contract_to_dense(y1) - x0).max() < 1e-12
