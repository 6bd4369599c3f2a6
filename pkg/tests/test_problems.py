import numpy as np
import pytest

from ttflow import tt as ttm
from ttflow.problems import (
    Block,
    SolutionOracle,
    adr_4d,
    allen_cahn_3d,
    apply_axis_dense,
    dense_reference,
    fourier_diff,
    manufactured_problem,
    vlasov_poisson_2d,
)


def test_fourier_diff_first_derivative():
    n, length = 32, 2.0
    d1 = fourier_diff(n, length, 1)
    x = -1.0 + length * np.arange(n) / n
    f = np.sin(2 * np.pi * x / length)
    fp = 2 * np.pi / length * np.cos(2 * np.pi * x / length)
    assert np.abs(d1 @ f - fp).max() < 1e-10
    assert np.abs(d1 @ np.ones(n)).max() < 1e-12
    assert np.abs(d1 + d1.T).max() == 0.0


def test_fourier_diff_second_derivative():
    n, length = 32, 2.0 * np.pi
    d2 = fourier_diff(n, length, 2)
    x = length * np.arange(n) / n
    f = np.sin(2 * np.pi * x / length)
    assert np.abs(d2 @ f + (2 * np.pi / length) ** 2 * f).max() < 1e-10
    assert np.abs(d2 - d2.T).max() == 0.0


def test_fourier_diff_rejects_odd_or_tiny():
    with pytest.raises(ValueError):
        fourier_diff(33, 1.0, 1)
    with pytest.raises(ValueError):
        fourier_diff(2, 1.0, 1)


def test_fourier_diff_shift_invariance():
    # shifting the periodic grid by a full period leaves the operator unchanged
    n = 16
    d_a = fourier_diff(n, 2.0, 1)
    d_b = fourier_diff(n, 2.0, 1)
    assert np.array_equal(d_a, d_b)
    # and differentiation commutes with cyclic shifts
    rng = np.random.default_rng(0)
    f = rng.standard_normal(n)
    assert np.allclose(np.roll(d_a @ f, 3), d_a @ np.roll(f, 3), atol=1e-12)


def random_blocks(shape, rng, count=50):
    """Random fiber blocks plus pivot blocks covering `count` target entries."""
    d = len(shape)
    blocks = []
    for _ in range(count // 10 + 1):
        mode = int(rng.integers(0, d))
        nl = int(rng.integers(1, 3))
        nr = int(rng.integers(1, 3))
        left = tuple(tuple(int(rng.integers(0, shape[t])) for t in range(mode))
                     for _ in range(nl))
        right = tuple(tuple(int(rng.integers(0, shape[t])) for t in range(mode + 1, d))
                      for _ in range(nr))
        blocks.append(Block(left=left or ((),), mode=mode, right=right or ((),)))
    return blocks


@pytest.mark.parametrize("factory,n", [(vlasov_poisson_2d, 16),
                                       (allen_cahn_3d, 8),
                                       (adr_4d, 8)])
def test_dense_and_entrywise_agree(factory, n):
    prob = factory(n)
    rng = np.random.default_rng(42)
    u = prob.u0_dense() + 0.1 * rng.standard_normal(prob.shape)
    y = ttm.tt_svd(u, tol=1e-13)
    gd = prob.rhs.dense(u, 0.0)
    scale = np.abs(gd).max()
    checked = 0
    for block in random_blocks(prob.shape, rng):
        gt = prob.rhs.targets(SolutionOracle(y), block, 0.0)
        idx_arrays = np.broadcast_arrays(
            *[np.asarray(a) for a in _indices_of(block, prob.shape)])
        expected = gd[tuple(idx_arrays)]
        assert np.abs(gt - expected).max() < 1e-12 * max(scale, 1.0)
        checked += gt.size
    assert checked >= 50


def _indices_of(block, shape):
    from ttflow.problems import block_axis_indices
    return block_axis_indices(block, shape)


def test_vlasov_constant_state_and_separable():
    prob = vlasov_poisson_2d(32)
    const = np.ones(prob.shape)
    assert np.abs(prob.rhs.dense(const, 0.0)).max() < 1e-12

    # u(x,v) = a(x) b(v): entries match -v b a' - E(x) a b'
    x = prob.rhs.x
    v = prob.rhs.v
    a = np.exp(np.sin(np.pi * x))
    b = np.cos(np.pi * v)
    u = np.outer(a, b)
    ap = np.pi * np.cos(np.pi * x) * a
    bp = -np.pi * np.sin(np.pi * v)
    g = prob.rhs.dense(u, 0.0)
    expected = -v[None, :] * np.outer(ap, b) - prob.rhs.efield[:, None] * np.outer(a, bp)
    assert np.abs(g - expected).max() < 1e-10 * np.abs(expected).max()


def test_allen_cahn_steady_states():
    prob = allen_cahn_3d(8)
    zero = np.zeros(prob.shape)
    assert np.abs(prob.rhs.dense(zero, 0.0)).max() == 0.0
    one = np.ones(prob.shape)
    assert np.abs(prob.rhs.dense(one, 0.0)).max() < 1e-11


def test_allen_cahn_u0_finite_nonzero():
    prob = allen_cahn_3d(16)
    u0 = prob.u0_dense()
    assert np.all(np.isfinite(u0))
    assert np.linalg.norm(u0) > 0.1


def test_adr_zero_state():
    prob = adr_4d(8)
    zero = np.zeros(prob.shape)
    assert np.abs(prob.rhs.dense(zero, 0.0)).max() == 0.0


def test_adr_coefficients_match_drift_layout():
    prob = adr_4d(8)
    cs = prob.rhs.coefficient_tensors()
    x = prob.rhs.x
    g = lambda a, b: np.exp(np.sin(a) * np.cos(b))
    # first drift component depends on (x2, x3) only
    assert np.allclose(cs[0][0, :, :, 0], 0.5 * g(x[:, None], x[None, :]))
    assert np.allclose(cs[0][3, :, :, 5], cs[0][0, :, :, 0])
    # third component couples the last and first coordinates
    assert np.allclose(cs[2][:, 2, 3, :], 0.5 * g(x[None, :], x[:, None]))


def test_fiber_budget_bound():
    prob = adr_4d(8)
    u = prob.u0_dense()
    y = ttm.tt_svd(u, tol=1e-10)
    oracle = SolutionOracle(y)
    block = Block(left=((0, 1), (2, 3)), mode=2, right=((4,), (5,)))
    out = prob.rhs.targets(oracle, block, 0.0)
    # at most d fibers per target entry (shared bundles between derivatives)
    assert oracle.fibers_served <= 4 * out.size


def test_entrywise_uses_solution_oracle_not_dense():
    # evaluating a small block must not require materializing the tensor
    prob = allen_cahn_3d(8)
    y = ttm.tt_svd(prob.u0_dense(), tol=1e-10)
    oracle = SolutionOracle(y)
    block = Block(left=((1,), (2,)), mode=1, right=((3,), (0,)))
    out = prob.rhs.targets(oracle, block, 0.0)
    assert out.shape == (2, 8, 2)
    assert oracle.fibers_served < 8 ** 3


def test_manufactured_path_consistency():
    prob = manufactured_problem(shape=(5, 4, 5), ranks=(2, 2), seed=1, lam=0.7)
    rhs = prob.rhs
    a0 = ttm.contract_to_dense(rhs.solution(0.3))
    # dense field at the path equals the path derivative
    g = rhs.dense(a0, 0.3)
    adot = ttm.contract_to_dense(rhs.path_derivative(0.3))
    assert np.abs(g - adot).max() < 1e-12
    # finite-difference check of the path derivative
    h = 1e-6
    fd = (ttm.contract_to_dense(rhs.solution(0.3 + h))
          - ttm.contract_to_dense(rhs.solution(0.3 - h))) / (2 * h)
    assert np.abs(fd - adot).max() < 1e-8


def test_dense_reference_zero_field_and_decay():
    prob = manufactured_problem(shape=(4, 4, 4), ranks=(2, 2), seed=2, amplitude=0.0)
    snaps = dense_reference(prob, 0.01, 0.05, [0.0, 0.05])
    assert len(snaps) == 2
    assert np.allclose(snaps[0][1], snaps[1][1], atol=1e-12)

    class Decay:
        def dense(self, u, t):
            return -u

        def u0_dense(self):
            return np.full((4, 4), 2.0)

    class P:
        shape = (4, 4)
        rhs = Decay()

        def u0_dense(self):
            return self.rhs.u0_dense()

    snaps = dense_reference(P(), 1e-3, 1.0, [1.0])
    assert np.abs(snaps[0][1] - 2.0 * np.exp(-1.0)).max() < 1e-9


def test_dense_reference_rk4_order():
    prob = allen_cahn_3d(8)
    exact = dense_reference(prob, 1e-3 / 4, 0.1, [0.1])[0][1]
    errs = []
    for dt in (0.02, 0.01):
        approx = dense_reference(prob, dt, 0.1, [0.1])[0][1]
        errs.append(np.linalg.norm(approx - exact))
    order = np.log2(errs[0] / errs[1])
    assert 3.7 <= order <= 4.3


def test_dense_reference_blowup_guard():
    class Explode:
        def dense(self, u, t):
            return 100.0 * u

        def u0_dense(self):
            return np.ones((4, 4))

    class P:
        shape = (4, 4)
        rhs = Explode()

        def u0_dense(self):
            return self.rhs.u0_dense()

    with pytest.raises(FloatingPointError):
        dense_reference(P(), 0.5, 50.0, [50.0])
