"""Greedy sparse index selection.

DEIM picks interpolation rows for a tall basis one column at a time,
keeping the selected square block well conditioned. The tensor-train sweep
applies DEIM to restricted partial-product bases, producing families of
nested multi-indices that parameterize cross-interpolatory projectors. The
restricted bases are always assembled from interface matrices and single
cores, never from the exponentially large partial products themselves.
"""

from dataclasses import dataclass

import numpy as np

from .tt import OrthogonalFamily


def composite_split(l: int, dims) -> tuple:
    """Split ``l = p + a*q`` for dims ``(a, b)`` (first index fastest)."""
    a, b = int(dims[0]), int(dims[1])
    if not 0 <= l < a * b:
        raise ValueError(f"composite index {l} out of range for dims {dims}")
    return l % a, l // a


def composite_join(p: int, q: int, dims) -> int:
    a, b = int(dims[0]), int(dims[1])
    if not (0 <= p < a and 0 <= q < b):
        raise ValueError(f"pair ({p}, {q}) out of range for dims {dims}")
    return p + a * q


def deim(v: np.ndarray) -> np.ndarray:
    """Greedy row selection for an n x r full-column-rank basis.

    The first row maximizes |v_1|; each later row maximizes the residual of
    column j against the interpolation on the rows already chosen. Ties
    resolve to the lowest index, so the output is deterministic.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        raise ValueError("basis must be a matrix")
    n, r = v.shape
    if r < 1 or n < r:
        raise ValueError(f"need n >= r >= 1, got {v.shape}")
    pos = np.empty(r, dtype=int)
    pos[0] = int(np.argmax(np.abs(v[:, 0])))
    for j in range(1, r):
        sel = pos[:j]
        try:
            c = np.linalg.solve(v[np.ix_(sel, range(j))], v[sel, j])
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"rank-deficient basis detected at column {j}") from exc
        resid = v[:, j] - v[:, :j] @ c
        lj = int(np.argmax(np.abs(resid)))
        if lj in sel:
            raise ValueError(f"rank-deficient basis detected at column {j}")
        pos[j] = lj
    return pos


def deim_oversampled(v: np.ndarray, m: int) -> np.ndarray:
    """DEIM positions extended greedily to m distinct rows.

    Each extra row maximizes its alignment with the least-resolved
    direction of the selected block, i.e. |v_i . u_min| where u_min is the
    smallest right singular vector of the rows chosen so far; this is the
    first-order growth of the block's smallest singular value when row i is
    appended. Ties resolve to the lowest unselected index. Appending rows
    never decreases the smallest singular value of the selected block.
    """
    v = np.asarray(v, dtype=float)
    n, r = v.shape
    if m < r:
        raise ValueError(f"oversample count {m} below basis rank {r}")
    if m > n:
        raise ValueError(f"oversample count {m} exceeds row count {n}")
    pos = list(deim(v))
    for _ in range(m - r):
        _, _, vt = np.linalg.svd(v[pos], full_matrices=False)
        score = np.abs(v @ vt[-1])
        score[pos] = -1.0
        pos.append(int(np.argmax(score)))
    return np.asarray(pos, dtype=int)


@dataclass(frozen=True)
class NestedIndexSets:
    """Nested left/right multi-index families for cross interpolation.

    ``left[k-1]`` holds the level-k left multi-indices (length-k tuples over
    modes 1..k) and ``right[k-1]`` the level-k right multi-indices (length
    d-k tuples over modes k+1..d), for k = 1..d-1, all 0-based. Every left
    member extends a previous-level member by one trailing index and every
    right member prefixes one index onto a next-level member; the composite
    within-level DEIM picks recording that parenthood are kept alongside.
    """

    shape: tuple
    left: tuple
    right: tuple
    left_positions: tuple
    right_positions: tuple

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def level_sizes(self) -> tuple:
        return tuple(len(s) for s in self.left)

    def left_at(self, mode: int):
        """Row family for a block with free axis ``mode`` (0-based)."""
        return ((),) if mode == 0 else self.left[mode - 1]

    def right_at(self, mode: int):
        return ((),) if mode == self.ndim - 1 else self.right[mode]

    def is_nested(self) -> bool:
        for k in range(1, len(self.left)):
            prev = set(self.left[k - 1])
            if any(t[:-1] not in prev for t in self.left[k]):
                return False
        for k in range(len(self.right) - 1):
            nxt = set(self.right[k + 1])
            if any(t[1:] not in nxt for t in self.right[k]):
                return False
        for fam in (self.left, self.right):
            if any(len(set(s)) != len(s) for s in fam):
                return False
        return True


def _pick(mat: np.ndarray, extra: int, side: str, level: int) -> np.ndarray:
    want = mat.shape[1] + extra
    want = min(want, mat.shape[0])
    try:
        return deim(mat) if want == mat.shape[1] else deim_oversampled(mat, want)
    except ValueError as exc:
        raise ValueError(f"index selection failed at {side} level {level}: {exc}") from exc


def extend_left_level(m_prev: np.ndarray, prev_set, u_core: np.ndarray,
                      extra: int = 0, level: int = 0, positions=None):
    """One left-sweep step: restrict, pick rows, split composites.

    Returns the new multi-index set, the within-level composite picks, and
    the selected-row matrix (the next restriction / interface matrix).
    Passing ``positions`` reuses previous picks against the current basis
    instead of running the selection again.
    """
    uhat = np.einsum("la,aib->lib", m_prev, u_core)
    nl, n, r = uhat.shape
    mat = uhat.reshape(nl * n, r, order="F")
    pos = np.asarray(positions, dtype=int) if positions is not None \
        else _pick(mat, extra, "left", level)
    new_set = []
    for l in pos:
        p, i = composite_split(int(l), (nl, n))
        new_set.append(prev_set[p] + (i,))
    return tuple(new_set), tuple(int(x) for x in pos), mat[pos, :]


def extend_right_level(n_prev: np.ndarray, prev_set, v_core: np.ndarray,
                       extra: int = 0, level: int = 0, positions=None):
    """One right-sweep step, prefixing a grid index onto next-level members."""
    vhat = np.einsum("cib,ab->iac", v_core, n_prev)
    n, nr, r = vhat.shape
    mat = vhat.reshape(n * nr, r, order="F")
    pos = np.asarray(positions, dtype=int) if positions is not None \
        else _pick(mat, extra, "right", level)
    new_set = []
    for l in pos:
        i, q = composite_split(int(l), (n, nr))
        new_set.append((i,) + prev_set[q])
    return tuple(new_set), tuple(int(x) for x in pos), mat[pos, :]


def left_sweep(u_cores, extra=None):
    """Left-to-right nested selection over left-orthogonal cores U_1..U_{d-1}."""
    nlev = len(u_cores)
    if extra is None:
        extra = [0] * nlev
    sets, positions, mats = [], [], []
    m_prev = np.ones((1, 1))
    prev_set = [()]
    for k in range(nlev):
        new_set, pos, m_prev = extend_left_level(m_prev, prev_set, u_cores[k],
                                                 extra=int(extra[k]), level=k + 1)
        sets.append(new_set)
        positions.append(pos)
        mats.append(m_prev)
        prev_set = list(new_set)
    return tuple(sets), tuple(positions), mats


def right_sweep(v_cores, extra=None, positions=None):
    """Right-to-left nested selection over right-orthogonal cores V_2..V_d."""
    nlev = len(v_cores)
    if extra is None:
        extra = [0] * nlev
    sets = [None] * nlev
    out_positions = [None] * nlev
    mats = [None] * nlev
    n_prev = np.ones((1, 1))
    prev_set = [()]
    for lev in range(nlev, 0, -1):
        new_set, pos, n_prev = extend_right_level(
            n_prev, prev_set, v_cores[lev - 1], extra=int(extra[lev - 1]), level=lev,
            positions=None if positions is None else positions[lev - 1])
        sets[lev - 1] = new_set
        out_positions[lev - 1] = pos
        mats[lev - 1] = n_prev
        prev_set = list(new_set)
    return tuple(sets), tuple(out_positions), mats


def tt_cross_deim(family: OrthogonalFamily, extra=None) -> NestedIndexSets:
    """Nested index selection by DEIM sweeps over restricted orthogonal bases.

    The left sweep restricts each left-orthogonal partial product to the
    multi-indices already chosen one level down, applies DEIM to the small
    ``len(prev) * n_k x r_k`` restriction, and splits the composite picks
    into (parent, new index) pairs; the right sweep mirrors this. ``extra``
    optionally oversamples levels (``extra[k-1]`` additional picks at level
    k) to raise the interpolation rank. Both sweeps touch only interface
    matrices and single cores.
    """
    d = family.ndim
    if extra is None:
        extra = [0] * (d - 1)
    lsets, lpos, _ = left_sweep(family.u_cores, extra)
    rsets, rpos, _ = right_sweep(family.v_cores, extra)
    return NestedIndexSets(
        shape=family.shape,
        left=lsets,
        right=rsets,
        left_positions=lpos,
        right_positions=rpos,
    )


def interface_matrices(u_cores, v_cores, sets: NestedIndexSets):
    """Selected-row matrices M_k = U_{<=k}(I_k, :) and N_k = V_{>k}(I_k, :).

    Assembled incrementally from the parenthood encoded in the composite
    positions, so new bases can be combined with reused index sets without
    ever forming the dense partial products.
    """
    d = sets.ndim
    m_list = []
    m_prev = np.ones((1, 1))
    size = 1
    for k in range(d - 1):
        u = u_cores[k]
        n = u.shape[1]
        pos = np.asarray(sets.left_positions[k], dtype=int)
        p, i = pos % size, pos // size
        m_prev = np.einsum("la,alb->lb", m_prev[p], u[:, i, :])
        m_list.append(m_prev)
        size = len(pos)

    n_list = [None] * (d - 1)
    n_prev = np.ones((1, 1))
    size = 1
    for lev in range(d - 1, 0, -1):
        v = v_cores[lev - 1]
        n = v.shape[1]
        pos = np.asarray(sets.right_positions[lev - 1], dtype=int)
        i, q = pos % n, pos // n
        n_prev = np.einsum("amb,mb->ma", v[:, i, :], n_prev[q])
        n_list[lev - 1] = n_prev
        size = len(pos)
    return m_list, n_list
