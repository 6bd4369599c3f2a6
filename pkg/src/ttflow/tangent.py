"""Projections onto tangent spaces of fixed-rank tensor-train manifolds.

Both projectors are assembled from one orthogonalized gauge family of the
base point. The orthogonal projector contracts the target against the
orthonormal partial-product bases and is Frobenius-optimal; the
interpolatory (oblique) variant replaces those contractions with sampled
fibers through nested cross indices and pivot-block solves, touching only
``sum_k r_{k-1} n_k r_k + sum_k r_k^2`` target entries. Results are kept as
per-core first-order variations in the left/right-orthogonal gauge.
"""

from dataclasses import dataclass

import numpy as np

from .dense import unfold
from .sampling import NestedIndexSets, interface_matrices, tt_cross_deim
from .tt import (
    OrthogonalFamily,
    TensorTrain,
    left_partial_matrix,
    orthogonalize_family,
    pivot_matrix,
    subtensor,
)


class FrameConditionError(ValueError):
    """Interface matrices too ill-conditioned; refresh the interpolation indices."""

    def __init__(self, level: int, cond: float):
        self.level = level
        self.cond = cond
        super().__init__(
            f"interface matrix at level {level} has condition {cond:.3e}; "
            "refresh the interpolation indices at the current base point"
        )


@dataclass
class TangentVector:
    """First-order core variations against a fixed orthogonalized base point."""

    variations: list

    def scaled(self, alpha: float) -> "TangentVector":
        return TangentVector([alpha * v for v in self.variations])


@dataclass
class TangentFrame:
    """Orthogonalized bases of a base point, plus optional cross-index data.

    Interpolatory frames carry nested index sets together with the selected-
    row matrices M_k = U_{<=k}(I_k,:) and N_k = V_{>k}(I_k,:) and their
    condition numbers; orthogonal frames carry only the gauge family.
    """

    family: OrthogonalFamily
    sets: NestedIndexSets = None
    m_mats: list = None
    n_mats: list = None
    m_conds: tuple = ()
    n_conds: tuple = ()

    @property
    def ndim(self) -> int:
        return self.family.ndim

    @property
    def shape(self) -> tuple:
        return self.family.shape

    @property
    def interpolatory(self) -> bool:
        return self.sets is not None


def build_frame(y: TensorTrain, sets: NestedIndexSets = None, interpolatory: bool = True,
                cond_limit: float = 1e12) -> TangentFrame:
    """Orthogonalize the base point and (optionally) attach cross indices.

    ``sets=None`` with ``interpolatory=True`` selects fresh indices by the
    nested DEIM sweep; passing existing sets reuses them against the new
    bases. Frames whose interface matrices exceed ``cond_limit`` are
    rejected.
    """
    family = orthogonalize_family(y)
    if not interpolatory:
        return TangentFrame(family=family)
    if sets is None:
        sets = tt_cross_deim(family)
    m_mats, n_mats = interface_matrices(family.u_cores, family.v_cores, sets)
    m_conds = tuple(float(np.linalg.cond(m)) for m in m_mats)
    n_conds = tuple(float(np.linalg.cond(n)) for n in n_mats)
    for lev, c in enumerate(m_conds, start=1):
        if not np.isfinite(c) or c > cond_limit:
            raise FrameConditionError(lev, c)
    for lev, c in enumerate(n_conds, start=1):
        if not np.isfinite(c) or c > cond_limit:
            raise FrameConditionError(lev, c)
    return TangentFrame(family=family, sets=sets, m_mats=m_mats, n_mats=n_mats,
                        m_conds=m_conds, n_conds=n_conds)


class DenseBlockOracle:
    """Serve sampled blocks of a dense tensor, counting entries served."""

    def __init__(self, x: np.ndarray):
        self.x = np.asarray(x, dtype=float)
        self.entries_served = 0

    def block(self, left, mode, right) -> np.ndarray:
        d = self.x.ndim
        out = np.empty((len(left), self.x.shape[mode], len(right)))
        for a, lt in enumerate(left):
            for b, rt in enumerate(right):
                sl = lt + (slice(None),) + rt
                out[a, :, b] = self.x[sl]
        self.entries_served += out.size
        return out

    def pivot(self, left, right) -> np.ndarray:
        out = np.empty((len(left), len(right)))
        for a, lt in enumerate(left):
            for b, rt in enumerate(right):
                out[a, b] = self.x[lt + rt]
        self.entries_served += out.size
        return out


class TTBlockOracle:
    """Serve sampled blocks of a tensor train via cached interface products."""

    def __init__(self, y: TensorTrain):
        self.y = y
        self.entries_served = 0

    def block(self, left, mode, right) -> np.ndarray:
        out = subtensor(self.y, left, mode, right)
        self.entries_served += out.size
        return out

    def pivot(self, left, right) -> np.ndarray:
        out = pivot_matrix(self.y, left, right)
        self.entries_served += out.size
        return out


def _as_oracle(z):
    if isinstance(z, np.ndarray):
        return DenseBlockOracle(z)
    if isinstance(z, TensorTrain):
        return TTBlockOracle(z)
    return z


def _solve_left(m: np.ndarray, block: np.ndarray) -> np.ndarray:
    """inv(m) contracted on the leading axis of ``block``."""
    flat = block.reshape(block.shape[0], -1)
    return np.linalg.solve(m, flat).reshape(block.shape)


def _solve_right_t(n: np.ndarray, block: np.ndarray) -> np.ndarray:
    """``block @ inv(n).T`` on the trailing axis."""
    flat = block.reshape(-1, block.shape[-1])
    return np.linalg.solve(n, flat.T).T.reshape(block.shape)


def interpolatory_project(frame: TangentFrame, z) -> TangentVector:
    """Oblique tangent projection from sampled crosses of the target.

    Requests exactly the blocks ``Z(I^{<=k-1}, :, I^{>k})`` and pivot grids
    ``Z(I^{<=k}, I^{>k})``; the result interpolates the target on every
    sampled cross and fixes the base point.
    """
    if not frame.interpolatory:
        raise ValueError("frame was built without interpolation indices")
    oracle = _as_oracle(z)
    sets = frame.sets
    fam = frame.family
    d = frame.ndim
    variations = []
    for k in range(d):                       # 0-based mode k = math level k+1
        left = sets.left_at(k)
        right = sets.right_at(k)
        block = oracle.block(left, k, right)
        if k > 0:
            block = _solve_left(frame.m_mats[k - 1], block)
        if k < d - 1:
            block = _solve_right_t(frame.n_mats[k], block)
            piv = oracle.pivot(sets.left[k], sets.right[k])
            ds = _solve_right_t(frame.n_mats[k], np.linalg.solve(frame.m_mats[k], piv))
            block = block - np.einsum("aib,bc->aic", fam.u_cores[k], ds)
        variations.append(block)
    return TangentVector(variations)


def _right_partials(frame: TangentFrame) -> dict:
    """Dense co-range bases V_{>k} for k = 1..d-1 (desk scale)."""
    d = frame.ndim
    out = {d: np.ones((1, 1))}
    m = np.ones((1, 1))
    for j in range(d - 1, 0, -1):
        core = frame.family.v_cores[j - 1]
        m = np.einsum("aib,Nb->iNa", core, m).reshape(-1, core.shape[0], order="F")
        out[j] = m
    return out


def orthogonal_project(frame: TangentFrame, z: np.ndarray) -> TangentVector:
    """Frobenius-optimal tangent projection (dense contractions, desk scale)."""
    z = np.asarray(z, dtype=float)
    if z.shape != frame.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {frame.shape}")
    d = frame.ndim
    fam = frame.family
    ul = [left_partial_matrix(fam.u_cores, k) for k in range(d)]
    vr = _right_partials(frame)
    shape = frame.shape
    variations = []
    for k in range(d):
        nl = int(np.prod(shape[:k]))
        z3 = z.reshape(nl, shape[k], -1, order="F")
        block = np.einsum("La,LiR,Rb->aib", ul[k], z3, vr[k + 1])
        if k < d - 1:
            ds = ul[k + 1].T @ unfold(z, k + 1) @ vr[k + 1]
            block = block - np.einsum("aib,bc->aic", fam.u_cores[k], ds)
        variations.append(block)
    return TangentVector(variations)


def realize_dense(tv: TangentVector, frame: TangentFrame, max_size: int = 2_000_000) -> np.ndarray:
    """Materialize sum_k U_{<=k-1} dC_k V_{>k} (test support, small shapes)."""
    shape = frame.shape
    total = int(np.prod(shape))
    if total > max_size:
        raise ValueError(f"refusing to materialize {total} entries")
    d = frame.ndim
    fam = frame.family
    ul = [left_partial_matrix(fam.u_cores, k) for k in range(d)]
    vr = _right_partials(frame)
    out = np.zeros(shape)
    for k in range(d):
        term = np.einsum("La,aib,Rb->LiR", ul[k], tv.variations[k], vr[k + 1])
        out += term.reshape(shape, order="F")
    return out


def matrix_tangent_project(u: np.ndarray, v: np.ndarray, s: np.ndarray,
                           rows, cols, z: np.ndarray) -> np.ndarray:
    """Interpolatory tangent projection for the matrix case (d = 2).

    ``u, v`` have orthonormal columns spanning range and co-range of the
    base point ``u s v^T``; ``rows, cols`` are interpolation index sets with
    ``u[rows]`` and ``v[cols]`` invertible. The output agrees with ``z`` on
    every selected row and column. The gauge factor ``s`` does not enter the
    projector; it is accepted to mirror the base-point decomposition.
    """
    del s
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    ur = u[rows, :]
    vc = v[cols, :]
    zc_vt = np.linalg.solve(vc, z[:, cols].T)          # inv(vc).T applied: (r, n1)^T pieces
    term1 = zc_vt.T @ v.T
    mid = np.linalg.solve(ur, np.linalg.solve(vc, z[np.ix_(rows, cols)].T).T)
    term2 = u @ mid @ v.T
    term3 = u @ np.linalg.solve(ur, z[rows, :])
    return term1 - term2 + term3
