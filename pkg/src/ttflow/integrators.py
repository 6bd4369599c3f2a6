"""Time integration on fixed-rank tensor-train manifolds.

Four steppers share the trajectory driver :func:`integrate`:

* ``tt_cross``  - advance the solution entries on nested cross indices with
  an explicit scheme, then rebuild the train by QR-stabilized cross
  interpolation;
* ``ips``       - interpolatory projector-splitting sweep (Lie-Trotter or
  Strang), each substep solved with a small explicit integrator;
* ``ops``       - orthogonal projector-splitting baseline (dense inner
  products, desk scale);
* ``st_svd``    - explicit step in tensor-train arithmetic followed by
  SVD-based rounding.

Rank adaptation watches the relative size of the smallest singular value of
each unfolding and moves each rank by at most one per step.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import tt as ttm
from .dense import relative_error, unfold
from .problems import Block, Problem, SolutionOracle
from .sampling import (
    NestedIndexSets,
    extend_left_level,
    extend_right_level,
    interface_matrices,
    right_sweep,
    tt_cross_deim,
)
from .tt import TensorTrain


class RankExplosionError(RuntimeError):
    """An intermediate rank exceeded the configured bound."""


@dataclass
class StepperConfig:
    scheme: str = "ab2"            # euler | ab2 | rk4 (cross and step-truncation)
    dt: float = 1e-3
    t_end: float = 1.0
    substep_scheme: str = "rk4"    # euler | rk4 (splitting substeps)
    splitting_order: int = 1       # 1 Lie-Trotter, 2 Strang
    index_refresh: str = "every_step"   # every_step | cond_threshold
    cond_threshold: float = 1e6

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("euler", "ab2", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.substep_scheme not in ("euler", "rk4"):
            raise ValueError(f"unknown substep scheme {self.substep_scheme!r}")
        if self.splitting_order not in (1, 2):
            raise ValueError("splitting_order must be 1 or 2")
        if self.index_refresh not in ("every_step", "cond_threshold"):
            raise ValueError(f"unknown index refresh policy {self.index_refresh!r}")
        if self.cond_threshold <= 1:
            raise ValueError("cond_threshold must exceed 1")


@dataclass
class RankPolicy:
    adapt: bool = False
    eps_lower: float = 1e-7
    eps_upper: float = None        # default: 2x eps_lower (tight band tracks
                                   # the reference numerical rank closely)
    r_min: int = 1
    r_max: object = 64             # int or per-level vector
    truncation_tol: float = 1e-8   # rounding tolerance for TT arithmetic
    oversample: int = 1            # extra cross indices per adapted level
    enforce_caps: bool = False     # round to r_max instead of aborting

    def __post_init__(self):
        if self.eps_upper is None:
            self.eps_upper = 2.0 * self.eps_lower
        if not 0 < self.eps_lower < self.eps_upper < 1:
            raise ValueError("need 0 < eps_lower < eps_upper < 1")

    def caps(self, d: int):
        if self.r_max is None:
            return None
        if np.isscalar(self.r_max):
            return [int(self.r_max)] * (d - 1)
        caps = [int(r) for r in self.r_max]
        if len(caps) == d + 1:
            caps = caps[1:-1]
        if len(caps) != d - 1:
            raise ValueError("r_max must list the d-1 internal ranks")
        return caps


@dataclass
class StepRow:
    t: float
    err: float = None
    ranks: tuple = ()
    eps: tuple = ()
    cond_m: tuple = ()
    cond_n: tuple = ()
    wall: float = 0.0


@dataclass
class TrajectoryRecord:
    problem: str
    method: str
    shape: tuple
    rows: list = field(default_factory=list)
    final_tt: TensorTrain = None

    @property
    def final_rank(self) -> tuple:
        return self.rows[-1].ranks if self.rows else ()


def _assert_finite(y: TensorTrain, where: str):
    for k, core in enumerate(y.cores):
        if not np.all(np.isfinite(core)):
            raise FloatingPointError(f"non-finite values in core {k} during {where}")


def _substep(f, w0, t0: float, dt: float, scheme: str):
    """Advance dW/dt = f(W, t) over one interval with Euler or RK4."""
    if scheme == "euler":
        return w0 + dt * f(w0, t0)
    k1 = f(w0, t0)
    k2 = f(w0 + 0.5 * dt * k1, t0 + 0.5 * dt)
    k3 = f(w0 + 0.5 * dt * k2, t0 + 0.5 * dt)
    k4 = f(w0 + dt * k3, t0 + dt)
    return w0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _solve_left(m: np.ndarray, block: np.ndarray) -> np.ndarray:
    flat = block.reshape(block.shape[0], -1)
    return np.linalg.solve(m, flat).reshape(block.shape)


def _solve_right_t(n: np.ndarray, block: np.ndarray) -> np.ndarray:
    flat = block.reshape(-1, block.shape[-1])
    return np.linalg.solve(n, flat.T).T.reshape(block.shape)


def _conds(mats) -> tuple:
    return tuple(float(np.linalg.cond(m)) for m in mats)


def eps_values(family: ttm.OrthogonalFamily) -> tuple:
    """Relative size of the smallest singular value of each unfolding."""
    out = []
    for k in range(1, family.ndim):
        s = family.singular_values(k)
        out.append(float(s[-1] / np.linalg.norm(s)))
    return tuple(out)


# ---------------------------------------------------------------------------
# cross-collocation integrator

@dataclass
class CrossStepResult:
    y: TensorTrain
    sets: NestedIndexSets
    cond_m: tuple
    cond_n: tuple
    g_now: list = None          # vector-field blocks at the step's start state


def tt_cross_step(y: TensorTrain, rhs, t: float, dt: float, cfg: StepperConfig,
                  family: ttm.OrthogonalFamily = None, sets: NestedIndexSets = None,
                  extra=None, prev=None) -> CrossStepResult:
    """One step: select nested indices, advance the sampled entries, rebuild.

    The sampled subtensors close under the vector field because any entry of
    the solution can be recovered from them by cross interpolation, so
    explicit multistage or multistep schemes apply directly: intermediate
    stages rebuild a provisional train, and ``prev`` (the previous solution
    and time) supplies the second multistep value for AB2. The rebuild uses
    the QR-stabilized interpolant throughout.
    """
    if family is None:
        family = ttm.orthogonalize_family(y)
    if sets is None:
        sets = tt_cross_deim(family, extra)
    d = y.ndim
    blocks = [Block(left=sets.left_at(k), mode=k, right=sets.right_at(k)) for k in range(d)]
    f0 = [ttm.subtensor(y, b.left, b.mode, b.right) for b in blocks]

    def g_at(state: TensorTrain, tau: float):
        oracle = SolutionOracle(state)
        return [np.asarray(rhs.targets(oracle, b, tau), dtype=float) for b in blocks]

    def rebuild(fs):
        return ttm.cross_interpolant_qr(fs, sets.left_positions)

    scheme = cfg.scheme
    if scheme == "ab2" and prev is None:
        scheme = "rk4"                      # startup step
    g_now = None
    if scheme == "euler":
        g_now = g_at(y, t)
        f1 = [f + dt * gg for f, gg in zip(f0, g_now)]
    elif scheme == "ab2":
        g_now = g_at(y, t)
        # the previous field values can be reused when the index sets were,
        # otherwise re-evaluate the old state at the current targets
        g_old = prev[2] if len(prev) > 2 and prev[2] is not None else g_at(prev[0], prev[1])
        f1 = [f + dt * (1.5 * gn - 0.5 * go) for f, gn, go in zip(f0, g_now, g_old)]
    else:                                   # rk4
        k1 = g_at(y, t)
        g_now = k1
        k2 = g_at(rebuild([f + 0.5 * dt * g for f, g in zip(f0, k1)]), t + 0.5 * dt)
        k3 = g_at(rebuild([f + 0.5 * dt * g for f, g in zip(f0, k2)]), t + 0.5 * dt)
        k4 = g_at(rebuild([f + dt * g for f, g in zip(f0, k3)]), t + dt)
        f1 = [f + (dt / 6.0) * (a + 2 * b + 2 * c + e)
              for f, a, b, c, e in zip(f0, k1, k2, k3, k4)]
    y1 = rebuild(f1)
    _assert_finite(y1, f"cross step at t={t:.6g}")
    m_mats, n_mats = interface_matrices(family.u_cores, family.v_cores, sets)
    return CrossStepResult(y=y1, sets=sets, cond_m=_conds(m_mats), cond_n=_conds(n_mats),
                           g_now=g_now)


# ---------------------------------------------------------------------------
# interpolatory projector-splitting integrator

@dataclass
class SplitState:
    """Solution between splitting steps: first core general, the rest
    right-orthogonal, with right cross indices and selected-row matrices."""

    cores: list
    right_sets: tuple
    right_positions: tuple
    n_mats: list

    def to_tt(self) -> TensorTrain:
        return TensorTrain(self.cores)


@dataclass
class _LeftCanonicalState:
    cores: list
    left_sets: tuple
    left_positions: tuple
    m_mats: list


def prepare_split_state(y: TensorTrain, positions=None) -> SplitState:
    """Right-orthogonalize and run the right index sweep.

    ``positions`` reuses previous within-level picks against the fresh
    right-orthogonal bases instead of selecting anew.
    """
    d = y.ndim
    cores = [c.copy() for c in y.cores]
    for j in range(d - 1, 0, -1):
        l, q = ttm.rq_pos(ttm.right_unfold(cores[j]))
        cores[j] = ttm.fold_right(q, q.shape[0], cores[j].shape[1], cores[j].shape[2])
        cores[j - 1] = np.einsum("aib,bc->aic", cores[j - 1], l)
    rsets, rpos, nmats = right_sweep(cores[1:], positions=positions)
    return SplitState(cores=cores, right_sets=rsets, right_positions=rpos, n_mats=nmats)


def _sweep_forward(state: SplitState, rhs, t: float, dt: float,
                   cfg: StepperConfig, fixed_positions=None) -> _LeftCanonicalState:
    """Left-to-right substep sweep; alternating core updates and backward
    gauge solves, extending the left index sets as cores are updated."""
    cores = [c.copy() for c in state.cores]
    d = len(cores)
    k_core = cores[0]
    m_prev = np.ones((1, 1))
    prev_left = ((),)
    left_sets, left_pos, m_mats = [], [], []
    for j in range(d):
        right = state.right_sets[j] if j < d - 1 else ((),)
        n_mat = state.n_mats[j] if j < d - 1 else np.ones((1, 1))
        block = Block(left=tuple(prev_left), mode=j, right=tuple(right))
        m_mat = m_prev

        def k_rhs(w, tau, j=j, block=block, m_mat=m_mat, n_mat=n_mat):
            stage = TensorTrain(cores[:j] + [w] + cores[j + 1:])
            g = np.asarray(rhs.targets(SolutionOracle(stage), block, tau), dtype=float)
            return _solve_right_t(n_mat, _solve_left(m_mat, g))

        k_core = _substep(k_rhs, k_core, t, dt, cfg.substep_scheme)
        if not np.all(np.isfinite(k_core)):
            raise FloatingPointError(f"non-finite core update at position {j}, t={t:.6g}")
        if j == d - 1:
            cores[j] = k_core
            break
        q, r_mat = ttm.qr_pos(ttm.left_unfold(k_core))
        cores[j] = ttm.fold_left(q, k_core.shape[0], k_core.shape[1], q.shape[1])
        new_set, pos, m_prev = extend_left_level(
            m_prev, list(prev_left), cores[j], level=j + 1,
            positions=None if fixed_positions is None else fixed_positions[j])
        left_sets.append(new_set)
        left_pos.append(pos)
        m_mats.append(m_prev)
        prev_left = new_set
        piv = Block(left=new_set, mode=None, right=tuple(right))

        def s_rhs(w, tau, j=j, piv=piv, m_sel=m_prev, n_mat=n_mat):
            stage_core = np.einsum("aib,bc->aic", cores[j], w)
            stage = TensorTrain(cores[:j] + [stage_core] + cores[j + 1:])
            g = np.asarray(rhs.targets(SolutionOracle(stage), piv, tau), dtype=float)
            return -_solve_right_t(n_mat, np.linalg.solve(m_sel, g))

        s_mat = _substep(s_rhs, r_mat, t, dt, cfg.substep_scheme)
        k_core = np.einsum("ab,bic->aic", s_mat, cores[j + 1])
    return _LeftCanonicalState(cores=cores, left_sets=tuple(left_sets),
                               left_positions=tuple(left_pos), m_mats=m_mats)


def _sweep_backward(lstate: _LeftCanonicalState, rhs, t: float, dt: float,
                    cfg: StepperConfig, fixed_positions=None) -> SplitState:
    """Adjoint sweep: substeps in reverse order, rebuilding the right
    index sets; ends in the canonical state for the next step."""
    cores = [c.copy() for c in lstate.cores]
    d = len(cores)
    k_core = cores[d - 1]
    n_prev = np.ones((1, 1))
    prev_right = ((),)
    right_sets = [None] * (d - 1)
    right_pos = [None] * (d - 1)
    n_mats = [None] * (d - 1)
    for j in range(d - 1, -1, -1):
        left = lstate.left_sets[j - 1] if j >= 1 else ((),)
        m_mat = lstate.m_mats[j - 1] if j >= 1 else np.ones((1, 1))
        block = Block(left=tuple(left), mode=j, right=tuple(prev_right))
        n_mat = n_prev

        def k_rhs(w, tau, j=j, block=block, m_mat=m_mat, n_mat=n_mat):
            stage = TensorTrain(cores[:j] + [w] + cores[j + 1:])
            g = np.asarray(rhs.targets(SolutionOracle(stage), block, tau), dtype=float)
            return _solve_right_t(n_mat, _solve_left(m_mat, g))

        k_core = _substep(k_rhs, k_core, t, dt, cfg.substep_scheme)
        if not np.all(np.isfinite(k_core)):
            raise FloatingPointError(f"non-finite core update at position {j}, t={t:.6g}")
        if j == 0:
            cores[0] = k_core
            break
        l_mat, q = ttm.rq_pos(ttm.right_unfold(k_core))
        cores[j] = ttm.fold_right(q, q.shape[0], k_core.shape[1], k_core.shape[2])
        new_set, pos, n_prev = extend_right_level(
            n_prev, list(prev_right), cores[j], level=j,
            positions=None if fixed_positions is None else fixed_positions[j - 1])
        right_sets[j - 1] = new_set
        right_pos[j - 1] = pos
        n_mats[j - 1] = n_prev
        prev_right = new_set
        piv = Block(left=tuple(left), mode=None, right=new_set)

        def s_rhs(w, tau, j=j, piv=piv, m_mat=m_mat, n_sel=n_prev):
            stage_core = np.einsum("ab,bic->aic", w, cores[j])
            stage = TensorTrain(cores[:j] + [stage_core] + cores[j + 1:])
            g = np.asarray(rhs.targets(SolutionOracle(stage), piv, tau), dtype=float)
            return -_solve_right_t(n_sel, np.linalg.solve(m_mat, g))

        s_mat = _substep(s_rhs, l_mat, t, dt, cfg.substep_scheme)
        k_core = np.einsum("aib,bc->aic", cores[j - 1], s_mat)
    return SplitState(cores=cores, right_sets=tuple(right_sets),
                      right_positions=tuple(right_pos), n_mats=n_mats)


@dataclass
class SplitStepResult:
    state: SplitState
    cond_m: tuple
    cond_n: tuple
    left_positions: tuple = ()


def ips_step(state: SplitState, rhs, t: float, dt: float, cfg: StepperConfig,
             reuse_left=None, reuse_right=None) -> SplitStepResult:
    """One interpolatory projector-splitting step (Lie-Trotter or Strang).

    ``reuse_left``/``reuse_right`` carry the previous step's within-level
    picks for the index-reuse refresh policy; the selected-row matrices are
    always rebuilt against the current bases.
    """
    if cfg.splitting_order == 1:
        lstate = _sweep_forward(state, rhs, t, dt, cfg, fixed_positions=reuse_left)
        new_state = prepare_split_state(TensorTrain(lstate.cores), positions=reuse_right)
    else:
        lstate = _sweep_forward(state, rhs, t, 0.5 * dt, cfg, fixed_positions=reuse_left)
        new_state = _sweep_backward(lstate, rhs, t + 0.5 * dt, 0.5 * dt, cfg,
                                    fixed_positions=reuse_right)
    return SplitStepResult(state=new_state, cond_m=_conds(lstate.m_mats),
                           cond_n=_conds(new_state.n_mats),
                           left_positions=lstate.left_positions)


# ---------------------------------------------------------------------------
# orthogonal projector-splitting baseline (dense inner products, desk scale)

def _dense_right_partials(cores) -> list:
    """vr[j] = dense co-range basis over modes j..d-1 (vr[d] = [[1]])."""
    d = len(cores)
    out = [None] * (d + 1)
    out[d] = np.ones((1, 1))
    m = np.ones((1, 1))
    for j in range(d - 1, 0, -1):
        core = cores[j]
        m = np.einsum("aib,Nb->iNa", core, m).reshape(-1, core.shape[0], order="F")
        out[j] = m
    return out


def _ops_sweep(cores_in, rhs, t, dt, cfg, forward=True):
    cores = [c.copy() for c in cores_in]
    d = len(cores)
    shape = tuple(c.shape[1] for c in cores)

    def project_core(stage_cores, j, tau, left_mat, right_mat):
        g = rhs.dense(ttm.contract_to_dense(TensorTrain(stage_cores)), tau)
        g3 = g.reshape(left_mat.shape[0], shape[j], -1, order="F")
        return np.einsum("La,LiR,Rb->aib", left_mat, g3, right_mat)

    def project_gauge(stage_cores, j, tau, left_mat, right_mat):
        g = rhs.dense(ttm.contract_to_dense(TensorTrain(stage_cores)), tau)
        return left_mat.T @ unfold(g, j + 1) @ right_mat

    if forward:
        k_core = cores[0]
        ul = np.ones((1, 1))
        vr = _dense_right_partials(cores)
        for j in range(d):
            right_mat = vr[j + 1]

            def k_rhs(w, tau, j=j, right_mat=right_mat, ul=ul):
                return project_core(cores[:j] + [w] + cores[j + 1:], j, tau, ul, right_mat)

            k_core = _substep(k_rhs, k_core, t, dt, cfg.substep_scheme)
            if j == d - 1:
                cores[j] = k_core
                break
            q, r_mat = ttm.qr_pos(ttm.left_unfold(k_core))
            cores[j] = ttm.fold_left(q, k_core.shape[0], k_core.shape[1], q.shape[1])
            ul = ttm.left_partial_matrix(cores, j + 1)

            def s_rhs(w, tau, j=j, right_mat=right_mat, ul=ul):
                stage_core = np.einsum("aib,bc->aic", cores[j], w)
                return -project_gauge(cores[:j] + [stage_core] + cores[j + 1:], j, tau, ul, right_mat)

            s_mat = _substep(s_rhs, r_mat, t, dt, cfg.substep_scheme)
            k_core = np.einsum("ab,bic->aic", s_mat, cores[j + 1])
        return cores

    # backward: substeps in reverse order, rebuilding right-orthogonal cores
    k_core = cores[d - 1]
    vr_cur = np.ones((1, 1))
    uls = [ttm.left_partial_matrix(cores, j) for j in range(d)]
    for j in range(d - 1, -1, -1):
        ul = uls[j]

        def k_rhs(w, tau, j=j, ul=ul, vr_cur=vr_cur):
            return project_core(cores[:j] + [w] + cores[j + 1:], j, tau, ul, vr_cur)

        k_core = _substep(k_rhs, k_core, t, dt, cfg.substep_scheme)
        if j == 0:
            cores[0] = k_core
            break
        l_mat, q = ttm.rq_pos(ttm.right_unfold(k_core))
        cores[j] = ttm.fold_right(q, q.shape[0], k_core.shape[1], k_core.shape[2])
        vr_full = _dense_right_partials(cores)
        vr_cur = vr_full[j]

        def s_rhs(w, tau, j=j, ul=ul, vr_cur=vr_cur):
            stage_core = np.einsum("ab,bic->aic", w, cores[j])
            return -project_gauge(cores[:j] + [stage_core] + cores[j + 1:], j - 1, tau, ul, vr_cur)

        s_mat = _substep(s_rhs, l_mat, t, dt, cfg.substep_scheme)
        k_core = np.einsum("aib,bc->aic", cores[j - 1], s_mat)
    return cores


def ops_step(y: TensorTrain, rhs, t: float, dt: float, cfg: StepperConfig) -> TensorTrain:
    """Orthogonal projector-splitting step; vector field contracted densely."""
    state = prepare_split_state(y)           # reuse the orthogonalization path
    if cfg.splitting_order == 1:
        cores = _ops_sweep(state.cores, rhs, t, dt, cfg, forward=True)
    else:
        cores = _ops_sweep(state.cores, rhs, t, 0.5 * dt, cfg, forward=True)
        cores = _ops_sweep(cores, rhs, t + 0.5 * dt, 0.5 * dt, cfg, forward=False)
    y1 = TensorTrain(cores)
    _assert_finite(y1, f"orthogonal splitting step at t={t:.6g}")
    return y1


# ---------------------------------------------------------------------------
# step-truncation integrator

def st_svd_step(y: TensorTrain, rhs, t: float, dt: float, policy: RankPolicy,
                scheme: str = "ab2", prev_g: TensorTrain = None, caps=None):
    """Explicit step in TT arithmetic followed by rounding.

    Returns ``(y1, g)`` where ``g`` is the vector field evaluated at (y, t)
    for reuse as the next step's multistep value.
    """
    tol = policy.truncation_tol
    d = y.ndim
    if caps is None and policy.enforce_caps:
        caps = policy.caps(d)

    def clip(z: TensorTrain) -> TensorTrain:
        out = ttm.round_tt(z, tol, caps)
        _check_ranks(out, policy)
        return out

    g = rhs.tt_rhs(y, t, tol)
    if scheme == "ab2" and prev_g is None:
        scheme = "rk4"
    if scheme == "euler":
        y1 = clip(ttm.add(y, ttm.scale(g, dt)))
    elif scheme == "ab2":
        incr = ttm.add(ttm.scale(g, 1.5 * dt), ttm.scale(prev_g, -0.5 * dt))
        y1 = clip(ttm.add(y, incr))
    elif scheme == "rk4":
        k1 = g
        ya = clip(ttm.add(y, ttm.scale(k1, 0.5 * dt)))
        k2 = rhs.tt_rhs(ya, t + 0.5 * dt, tol)
        yb = clip(ttm.add(y, ttm.scale(k2, 0.5 * dt)))
        k3 = rhs.tt_rhs(yb, t + 0.5 * dt, tol)
        yc = clip(ttm.add(y, ttm.scale(k3, dt)))
        k4 = rhs.tt_rhs(yc, t + dt, tol)
        incr = ttm.add(ttm.add(k1, ttm.scale(k4, 1.0)),
                       ttm.scale(ttm.add(k2, k3), 2.0))
        y1 = clip(ttm.add(y, ttm.scale(ttm.round_tt(incr, tol), dt / 6.0)))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    _assert_finite(y1, f"step-truncation step at t={t:.6g}")
    return y1, g


def _check_ranks(y: TensorTrain, policy: RankPolicy):
    caps = policy.caps(y.ndim)
    if caps is None or policy.enforce_caps:
        return
    for k, r in enumerate(y.ranks[1:-1]):
        if r > caps[k]:
            raise RankExplosionError(
                f"rank {r} at level {k + 1} exceeds bound {caps[k]}")


# ---------------------------------------------------------------------------
# rank adaptation

def _feasible_rank(shape, k: int) -> int:
    return int(min(np.prod(shape[:k]), np.prod(shape[k:])))


def adapt_rank(y: TensorTrain, policy: RankPolicy, mode: str = "cross",
               family: ttm.OrthogonalFamily = None, immature=None):
    """Move each level's rank by at most one, guided by eps_k.

    Levels with eps below the lower bound are truncated by one (TT-SVD).
    Levels above the upper bound are raised by one: the cross path requests
    oversampled indices (returned as the ``extra`` vector), the splitting
    path appends a zero-singular-value orthonormal direction directly.

    ``immature`` maps levels to the number of recently added directions
    that are still growing from their O(dt) birth size: such levels are
    protected from truncation, and their growth signal reads the smallest
    mature singular value so the rank can keep climbing one per step while
    the spectrum expands. Returns ``(y, extra, changed)``.
    """
    if family is None:
        family = ttm.orthogonalize_family(y)
    d = y.ndim
    ranks = y.ranks
    caps = policy.caps(d) or [max(ranks) + 1] * (d - 1)
    immature = immature or {}
    shrink, grow = [], []
    for k in range(1, d):
        r = ranks[k]
        rel = family.singular_values(k)
        rel = rel / np.linalg.norm(rel)
        below = int(np.sum(rel < policy.eps_lower))      # newborns or dead weight
        in_flight = min(immature.get(k, 0), below)       # matured ones free their slot
        signal = float(rel[max(r - 1 - below, 0)])       # smallest mature value
        if below > in_flight and r > policy.r_min:
            shrink.append(k)
        elif (signal > policy.eps_upper and in_flight < 3 and r < caps[k - 1]
                and r < _feasible_rank(y.shape, k)):
            grow.append(k)
    changed = bool(shrink)
    if shrink:
        new_caps = [ranks[k] - 1 if k in shrink else ranks[k] for k in range(1, d)]
        y = ttm.round_tt(y, 0.0, new_caps)
    extra = [0] * (d - 1)
    if grow:
        if mode == "cross":
            for k in grow:
                extra[k - 1] = policy.oversample
        else:
            y = _augment_zero_directions(y, grow)
            changed = True
    return y, extra, changed


def _augment_zero_directions(y: TensorTrain, levels) -> TensorTrain:
    """Append an orthonormal basis direction with zero weight at each level."""
    fam = ttm.orthogonalize_family(y)
    cores = list(fam.u_cores) + [np.einsum("ab,bic->aic", fam.s_mats[-1], fam.v_cores[-1])]
    for k in sorted(levels):
        u = ttm.left_unfold(cores[k - 1])
        rows, r = u.shape
        if r >= rows:
            continue
        gaps = 1.0 - np.minimum(np.einsum("ij,ij->i", u, u), 1.0)
        ok = np.flatnonzero(gaps >= 0.25)
        pick = int(ok[0]) if ok.size else int(np.argmax(gaps))
        e = np.zeros(rows)
        e[pick] = 1.0
        w = e - u @ u[pick, :]
        w /= np.linalg.norm(w)
        r0, n, _ = cores[k - 1].shape
        cores[k - 1] = np.concatenate([cores[k - 1], ttm.fold_left(w[:, None], r0, n, 1)], axis=2)
        nxt = cores[k]
        cores[k] = np.concatenate([nxt, np.zeros((1, nxt.shape[1], nxt.shape[2]))], axis=0)
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# trajectory driver

def integrate(problem: Problem, method: str, cfg: StepperConfig, policy: RankPolicy,
              y0: TensorTrain, reference=None, rank_schedule=None) -> TrajectoryRecord:
    """Run one trajectory and record per-step diagnostics.

    ``reference`` is an optional list of (time, dense tensor) snapshots;
    relative errors are recorded at matching step times. Wall time counts
    stepping and adaptation, not error measurement. ``rank_schedule`` (one
    interior-rank tuple per step) forces the cross integrator to follow a
    prescribed rank trajectory, e.g. the one a step-truncation run
    produced, instead of the eps-driven controller.
    """
    if method not in ("tt_cross", "ips", "ops", "st_svd"):
        raise ValueError(f"unknown method {method!r}")
    rhs = problem.rhs
    rec = TrajectoryRecord(problem=problem.name, method=method, shape=problem.shape)
    ref_map = {}
    if reference:
        ref_map = {round(float(tt_), 9): snap for tt_, snap in reference}

    def ref_err(t_now: float, y_now: TensorTrain):
        snap = ref_map.get(round(t_now, 9))
        if snap is None:
            return None
        return relative_error(ttm.contract_to_dense(y_now), snap)

    y = y0
    fam = ttm.orthogonalize_family(y)
    rec.rows.append(StepRow(t=0.0, err=ref_err(0.0, y), ranks=y.ranks[1:-1],
                            eps=eps_values(fam), wall=0.0))

    nsteps = int(round(cfg.t_end / cfg.dt)) if cfg.t_end > 0 else 0
    prev = None                 # (tt, t) for cross AB2
    prev_cross_g = None         # cached cross field blocks (valid while sets reused)
    prev_g = None               # vector field TT for step-truncation AB2
    split_state = None
    sets_cache = None
    reuse = None                # (left, right) position picks for splitting reuse
    newborn_ages = {}           # level -> countdown per recently added direction
    grow_cooldown = 25
    wall = 0.0

    for i in range(nsteps):
        t0 = i * cfg.dt
        t1 = (i + 1) * cfg.dt
        tic = time.perf_counter()
        cond_m = cond_n = ()

        if method == "tt_cross":
            extra = None
            if rank_schedule is not None:
                target = rank_schedule[min(i, len(rank_schedule) - 1)]
                cur = y.ranks[1:-1]
                if any(c > t_ for c, t_ in zip(cur, target)):
                    y = ttm.round_tt(y, 0.0, [min(c, t_) for c, t_ in zip(cur, target)])
                    fam = ttm.orthogonalize_family(y)
                    sets_cache = None
                    cur = y.ranks[1:-1]
                extra = [1 if c < t_ else 0 for c, t_ in zip(cur, target)]
                if any(extra):
                    sets_cache = None
            elif policy.adapt:
                immature = {k: len(v) for k, v in newborn_ages.items() if v}
                y_new, extra, changed = adapt_rank(y, policy, mode="cross", family=fam,
                                                   immature=immature)
                if changed:
                    y, fam = y_new, ttm.orthogonalize_family(y_new)
                    sets_cache = None
                if any(extra):
                    sets_cache = None
                newborn_ages = {k: [c - 1 for c in v if c > 1] for k, v in newborn_ages.items()}
                for lev, e in enumerate(extra, start=1):
                    if e:
                        newborn_ages.setdefault(lev, []).append(grow_cooldown)
            sets = None
            if (cfg.index_refresh == "cond_threshold" and sets_cache is not None
                    and sets_cache.level_sizes() == y.ranks[1:-1]):
                m_mats, n_mats = interface_matrices(fam.u_cores, fam.v_cores, sets_cache)
                worst = max(_conds(m_mats) + _conds(n_mats))
                if worst <= cfg.cond_threshold:
                    sets = sets_cache
            g_carry = prev_cross_g if sets is not None and sets is sets_cache else None
            res = tt_cross_step(y, rhs, t0, cfg.dt, cfg, family=fam, sets=sets,
                                extra=extra, prev=None if prev is None else prev + (g_carry,))
            prev = (y, t0)
            y = res.y
            sets_cache = res.sets
            prev_cross_g = res.g_now
            cond_m, cond_n = res.cond_m, res.cond_n
        elif method == "ips":
            if policy.adapt:
                y_cur = split_state.to_tt() if split_state is not None else y
                y_new, _, changed = adapt_rank(y_cur, policy, mode="splitting",
                                               family=fam if split_state is None else None)
                if changed or split_state is None:
                    split_state = prepare_split_state(y_new)
                    reuse = None
            elif split_state is None:
                split_state = prepare_split_state(y)
            res = ips_step(split_state, rhs, t0, cfg.dt, cfg,
                           reuse_left=None if reuse is None else reuse[0],
                           reuse_right=None if reuse is None else reuse[1])
            split_state = res.state
            y = split_state.to_tt()
            cond_m, cond_n = res.cond_m, res.cond_n
            if cfg.index_refresh == "cond_threshold" and max(cond_m + cond_n) <= cfg.cond_threshold:
                reuse = (res.left_positions, split_state.right_positions)
            else:
                reuse = None
        elif method == "ops":
            if policy.adapt:
                y, _, _ = adapt_rank(y, policy, mode="splitting", family=fam)
            y = ops_step(y, rhs, t0, cfg.dt, cfg)
        else:                    # st_svd
            y, prev_g = st_svd_step(y, rhs, t0, cfg.dt, policy,
                                    scheme=cfg.scheme, prev_g=prev_g)

        wall += time.perf_counter() - tic
        fam = ttm.orthogonalize_family(y)
        rec.rows.append(StepRow(t=t1, err=ref_err(t1, y), ranks=y.ranks[1:-1],
                                eps=eps_values(fam), cond_m=cond_m, cond_n=cond_n,
                                wall=wall))

    rec.final_tt = y
    return rec
