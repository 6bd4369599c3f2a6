"""Tensor-train representation and operations.

A tensor train stores a d-way tensor as a chain of 3-way cores
``C_k`` of shape ``(r_{k-1}, n_k, r_k)`` with boundary ranks 1, so that

    Y(i_1, ..., i_d) = C_1(i_1) C_2(i_2) ... C_d(i_d),

where ``C_k(i_k)`` is the ``r_{k-1} x r_k`` slice at index ``i_k``. Core
unfoldings follow the colexicographic convention of :mod:`ttflow.dense`:
the left unfolding is ``(r_{k-1} n_k) x r_k`` with composite row index
``alpha + r_{k-1} * i``, the right unfolding is ``r_{k-1} x (n_k r_k)``
with composite column index ``i + n_k * alpha``.

Tensor trains are treated as immutable values; every operation returns a
new instance.
"""

from dataclasses import dataclass
import struct

import numpy as np


class RankDeficiencyError(ValueError):
    """A core unfolding was numerically rank deficient during orthogonalization."""


class SingularInterfaceError(ValueError):
    """A cross-interpolation pivot or interface matrix is (near) singular."""

    def __init__(self, level: int, cond: float, what: str = "pivot"):
        self.level = level
        self.cond = cond
        super().__init__(f"{what} matrix at level {level} is ill-conditioned (cond ~ {cond:.3e})")


class TensorTrain:
    """Chain of 3-way cores; the low-rank solution representation."""

    def __init__(self, cores):
        cores = tuple(np.asarray(c, dtype=float) for c in cores)
        if not cores:
            raise ValueError("tensor train needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} must be 3-way, got shape {c.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise ValueError(f"rank mismatch between cores {k} and {k + 1}")
        self.cores = cores

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> tuple:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple:
        """Full rank vector (1, r_1, ..., r_{d-1}, 1)."""
        return (1,) + tuple(c.shape[2] for c in self.cores)

    def entry(self, idx) -> float:
        return float(entries(self, np.asarray(idx, dtype=int)[None, :])[0])

    def __repr__(self):
        return f"TensorTrain(shape={self.shape}, ranks={self.ranks})"


def left_unfold(core: np.ndarray) -> np.ndarray:
    r0, n, r1 = core.shape
    return core.reshape(r0 * n, r1, order="F")


def right_unfold(core: np.ndarray) -> np.ndarray:
    r0, n, r1 = core.shape
    return core.reshape(r0, n * r1, order="F")


def fold_left(mat: np.ndarray, r0: int, n: int, r1: int) -> np.ndarray:
    return mat.reshape(r0, n, r1, order="F")


def fold_right(mat: np.ndarray, r0: int, n: int, r1: int) -> np.ndarray:
    return mat.reshape(r0, n, r1, order="F")


def qr_pos(a: np.ndarray):
    """Reduced QR with the sign convention diag(R) >= 0 (deterministic output)."""
    q, r = np.linalg.qr(a)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s, r * s[:, None]


def rq_pos(a: np.ndarray):
    """Factor ``a = L Q`` with orthonormal rows of Q and diag(L) >= 0."""
    q, r = qr_pos(a.T)
    return r.T, q.T


# ---------------------------------------------------------------------------
# entry / fiber / subtensor evaluation

def entries(tt: TensorTrain, idx: np.ndarray) -> np.ndarray:
    """Evaluate a batch of entries; ``idx`` is (m, d) of 0-based indices."""
    idx = np.asarray(idx, dtype=int)
    if idx.ndim != 2 or idx.shape[1] != tt.ndim:
        raise ValueError(f"index array must be (m, {tt.ndim})")
    shape = tt.shape
    for t in range(tt.ndim):
        col = idx[:, t]
        if col.size and (col.min() < 0 or col.max() >= shape[t]):
            raise ValueError(f"index out of range along mode {t}")
    e = np.ones((idx.shape[0], 1))
    for t, core in enumerate(tt.cores):
        s = core[:, idx[:, t], :]                      # (r_t, m, r_{t+1})
        e = np.einsum("ma,amb->mb", e, s)
    return e[:, 0]


def left_interface(cores, idx_tuples) -> np.ndarray:
    """Rows ``C_1(i_1) ... C_a(i_a)`` for each length-a multi-index; (len, r_a)."""
    m = len(idx_tuples)
    e = np.ones((m, 1))
    a = len(idx_tuples[0]) if m else 0
    for t in range(a):
        it = np.fromiter((tup[t] for tup in idx_tuples), dtype=int, count=m)
        s = cores[t][:, it, :]
        e = np.einsum("ma,amb->mb", e, s)
    return e


def right_interface(cores, idx_tuples) -> np.ndarray:
    """Columns ``C_{d-m+1}(i) ... C_d(i)`` for trailing multi-indices; (r, len)."""
    m = len(idx_tuples)
    w = len(idx_tuples[0]) if m else 0
    d = len(cores)
    e = np.ones((1, m))
    for t in range(w - 1, -1, -1):
        it = np.fromiter((tup[t] for tup in idx_tuples), dtype=int, count=m)
        s = cores[d - w + t][:, it, :]                 # (r_prev, m, r_next)
        e = np.einsum("amb,bm->am", s, e)
    return e


def subtensor(tt: TensorTrain, left, mode: int, right) -> np.ndarray:
    """Evaluate ``Y(left, :, right)`` as a (len(left), n_mode, len(right)) array.

    ``left`` holds multi-indices for modes ``0..mode-1`` (use ``[()]`` when
    mode is 0) and ``right`` for modes ``mode+1..d-1`` (``[()]`` when mode is
    the last). Interfaces are formed once per call, not per entry.
    """
    d = tt.ndim
    if not 0 <= mode < d:
        raise ValueError(f"mode {mode} out of range")
    if len(left) == 0 or len(right) == 0:
        raise ValueError("index sets must be nonempty (use [()] at the boundary)")
    if len(left[0]) != mode or len(right[0]) != d - mode - 1:
        raise ValueError("multi-index lengths inconsistent with mode")
    li = left_interface(tt.cores, left)
    ri = right_interface(tt.cores, right)
    return np.einsum("la,aib,br->lir", li, tt.cores[mode], ri)


def pivot_matrix(tt: TensorTrain, left, right) -> np.ndarray:
    """Evaluate ``Y(left, right)`` pairs grid as (len(left), len(right))."""
    li = left_interface(tt.cores, left)
    ri = right_interface(tt.cores, right)
    return li @ ri


def extract_fiber(tt: TensorTrain, mode: int, fixed) -> np.ndarray:
    """Mode fiber with all other indices fixed; ``fixed`` is length d (mode slot ignored)."""
    d = tt.ndim
    lt = tuple(int(fixed[t]) for t in range(mode))
    rt = tuple(int(fixed[t]) for t in range(mode + 1, d))
    block = subtensor(tt, [lt], mode, [rt])
    return block[0, :, 0]


def contract_to_dense(tt: TensorTrain, max_size: int = 50_000_000) -> np.ndarray:
    """Materialize all entries (guarded against accidental huge allocations)."""
    total = int(np.prod(tt.shape))
    if total > max_size:
        raise ValueError(f"refusing to materialize {total} entries (> {max_size})")
    m = np.ones((1, 1))
    for core in tt.cores:
        m = np.einsum("Na,aib->Nib", m, core).reshape(-1, core.shape[2], order="F")
    return m[:, 0].reshape(tt.shape, order="F")


# ---------------------------------------------------------------------------
# orthogonalization

@dataclass
class OrthogonalizedTT:
    """Gauge ``Y = U_{<=k} S_k V_{>k}`` with orthonormal partial products."""

    position: int
    left_cores: list      # U_1..U_k, left-orthogonal
    s: np.ndarray         # r_k x r_k
    right_cores: list     # V_{k+1}..V_d, right-orthogonal
    degenerate: bool = False

    def to_tt(self) -> TensorTrain:
        first_right = np.einsum("ab,bic->aic", self.s, self.right_cores[0])
        return TensorTrain(list(self.left_cores) + [first_right] + list(self.right_cores[1:]))


@dataclass
class OrthogonalFamily:
    """All-position orthogonalized gauges sharing one pair of QR sweeps.

    ``u_cores[k-1]`` is the left-orthogonal core U_k (k = 1..d-1),
    ``v_cores[j]`` is the right-orthogonal core V_{j+2} ... i.e. V_2..V_d,
    and ``s_mats[k-1]`` is the square gauge factor S_k linking them.
    """

    shape: tuple
    ranks: tuple
    u_cores: list
    s_mats: list
    v_cores: list
    degenerate_levels: tuple = ()

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def at(self, k: int) -> OrthogonalizedTT:
        d = self.ndim
        if not 1 <= k <= d - 1:
            raise ValueError(f"orthogonalization position k={k} out of range")
        return OrthogonalizedTT(
            position=k,
            left_cores=list(self.u_cores[:k]),
            s=self.s_mats[k - 1],
            right_cores=list(self.v_cores[k - 1:]),
            degenerate=bool(self.degenerate_levels),
        )

    def singular_values(self, k: int) -> np.ndarray:
        """Singular values of the k-th unfolding (those of S_k)."""
        return np.linalg.svd(self.s_mats[k - 1], compute_uv=False)

    def right_canonical_tt(self) -> TensorTrain:
        """The tensor with cores 2..d right-orthogonal (splitting-sweep start state)."""
        first = np.einsum("aib,bc->aic", self.u_cores[0], self.s_mats[0])
        return TensorTrain([first] + list(self.v_cores))


def _check_degenerate(r: np.ndarray, ref: float) -> bool:
    if r.size == 0:
        return True
    return float(np.min(np.abs(np.diag(r)))) < 1e-14 * max(ref, 1e-300)


def orthogonalize_family(tt: TensorTrain) -> OrthogonalFamily:
    """Build U_{<=k}, S_k, V_{>k} for every k with one right and one left sweep."""
    d = tt.ndim
    if d < 2:
        raise ValueError("orthogonalization needs d >= 2")
    cores = [c.copy() for c in tt.cores]
    degenerate = set()

    # right-to-left sweep: make cores 2..d right-orthogonal
    for j in range(d - 1, 0, -1):
        l, q = rq_pos(right_unfold(cores[j]))
        if _check_degenerate(l, float(np.linalg.norm(cores[j]))):
            degenerate.add(j)
        r0, n, r1 = cores[j].shape
        cores[j] = fold_right(q, q.shape[0], n, r1)
        cores[j - 1] = np.einsum("aib,bc->aic", cores[j - 1], l)

    # left-to-right sweep: peel off U_k and S_k = R_k
    u_cores, s_mats = [], []
    carry = cores[0]
    for k in range(d - 1):
        q, r = qr_pos(left_unfold(carry))
        if _check_degenerate(r, float(np.linalg.norm(carry))):
            degenerate.add(k)
        r0, n, r1 = carry.shape
        rk = q.shape[1]
        u_cores.append(fold_left(q, r0, n, rk))
        s_mats.append(r)
        if k < d - 2:
            carry = np.einsum("ab,bic->aic", r, cores[k + 1])

    return OrthogonalFamily(
        shape=tt.shape,
        ranks=tt.ranks,
        u_cores=u_cores,
        s_mats=s_mats,
        v_cores=cores[1:],
        degenerate_levels=tuple(sorted(degenerate)),
    )


def orthogonalize(tt: TensorTrain, k: int) -> OrthogonalizedTT:
    """Orthogonalized gauge at position k; exact reconstruction, deterministic QR."""
    return orthogonalize_family(tt).at(k)


def left_partial_matrix(cores, upto: int) -> np.ndarray:
    """Dense ``U_{<=upto}`` matrix of shape (n_1...n_upto, r_upto); upto=0 gives [[1]]."""
    m = np.ones((1, 1))
    for t in range(upto):
        core = cores[t]
        m = np.einsum("Na,aib->Nib", m, core).reshape(-1, core.shape[2], order="F")
    return m


def right_partial_matrix(cores, frm: int) -> np.ndarray:
    """Dense ``V_{>frm}`` matrix of shape (n_{frm+1}...n_d, r_frm); frm=d gives [[1]]."""
    d = len(cores)
    m = np.ones((1, 1))
    for t in range(d - 1, frm - 1, -1):
        core = cores[t]
        m = np.einsum("aib,Nb->iNa", core, m).reshape(-1, core.shape[0], order="F")
    return m


# ---------------------------------------------------------------------------
# TT-SVD construction and rounding

def _select_rank(s: np.ndarray, budget, cap) -> int:
    r = len(s)
    if budget is not None:
        tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tails[i] = ||s[i:]||
        keep = len(s)
        while keep > 1 and tails[keep - 1] <= budget:
            keep -= 1
        r = keep
    if cap is not None:
        r = min(r, int(cap))
    while r > 1 and s[r - 1] == 0.0:
        r -= 1
    return max(r, 1)


def tt_svd(x: np.ndarray, tol: float = None, max_ranks=None) -> TensorTrain:
    """Sequential-SVD construction of a TT from a dense tensor.

    With a relative tolerance ``tol`` the per-unfolding truncation budget is
    ``tol * ||x||_F / sqrt(d-1)`` so the total error satisfies
    ``||x - tt|| <= tol * ||x||``. ``max_ranks`` caps each r_k instead of or
    in addition to the tolerance.
    """
    x = np.asarray(x, dtype=float)
    d = x.ndim
    if d == 1:
        return TensorTrain([x[None, :, None]])
    if tol is None and max_ranks is None:
        tol = 0.0
    budget = None
    if tol is not None:
        norm = float(np.linalg.norm(x.ravel()))
        if norm == 0.0:
            raise ValueError("tolerance-controlled TT-SVD of the zero tensor")
        budget = tol * norm / np.sqrt(d - 1)
    caps = list(max_ranks) if max_ranks is not None else [None] * (d - 1)
    if len(caps) == d + 1:       # accept full rank vectors (1, r_1, .., r_{d-1}, 1)
        caps = caps[1:-1]
    if len(caps) != d - 1:
        raise ValueError("max_ranks must list the d-1 internal ranks")

    cores = []
    c = x.reshape(x.shape[0], -1, order="F")
    r_prev = 1
    for k in range(d - 1):
        u, s, vt = np.linalg.svd(c, full_matrices=False)
        r = _select_rank(s, budget, caps[k])
        cores.append(fold_left(u[:, :r], r_prev, x.shape[k], r))
        c = s[:r, None] * vt[:r]
        if k < d - 2:
            c = c.reshape(r * x.shape[k + 1], -1, order="F")
        r_prev = r
    cores.append(fold_left(c.reshape(r_prev * x.shape[-1], 1, order="F"), r_prev, x.shape[-1], 1))
    return TensorTrain(cores)


def round_tt(tt: TensorTrain, tol: float, max_ranks=None) -> TensorTrain:
    """TT rounding: right-orthogonalize, then a left-to-right truncated-SVD sweep."""
    d = tt.ndim
    if d == 1:
        return TensorTrain([c.copy() for c in tt.cores])
    cores = [c.copy() for c in tt.cores]
    scale_proxy = max(float(np.linalg.norm(c)) for c in cores)
    for j in range(d - 1, 0, -1):
        l, q = rq_pos(right_unfold(cores[j]))
        r0, n, r1 = cores[j].shape
        cores[j] = fold_right(q, q.shape[0], n, r1)
        cores[j - 1] = np.einsum("aib,bc->aic", cores[j - 1], l)
    norm = float(np.linalg.norm(cores[0]))
    # a contraction this far below the core scale is cancellation roundoff
    if norm <= 1e-14 * scale_proxy:
        return TensorTrain([np.zeros((1, n, 1)) for n in tt.shape])
    budget = tol * norm / np.sqrt(d - 1)
    caps = list(max_ranks) if max_ranks is not None else [None] * (d - 1)
    if len(caps) == d + 1:
        caps = caps[1:-1]
    for k in range(d - 1):
        u, s, vt = np.linalg.svd(left_unfold(cores[k]), full_matrices=False)
        r = _select_rank(s, budget, caps[k])
        r0, n, _ = cores[k].shape
        cores[k] = fold_left(u[:, :r], r0, n, r)
        carry = s[:r, None] * vt[:r]
        cores[k + 1] = np.einsum("ab,bic->aic", carry, cores[k + 1])
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# arithmetic

def scale(tt: TensorTrain, alpha: float) -> TensorTrain:
    cores = [c.copy() for c in tt.cores]
    cores[0] = cores[0] * alpha
    return TensorTrain(cores)


def add(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Sum with block-diagonal cores; rank vector is the sum of the inputs'."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a.ndim
    if d == 1:
        return TensorTrain([a.cores[0] + b.cores[0]])
    cores = []
    for k in range(d):
        ca, cb = a.cores[k], b.cores[k]
        n = ca.shape[1]
        if k == 0:
            cores.append(np.concatenate([ca, cb], axis=2))
        elif k == d - 1:
            cores.append(np.concatenate([ca, cb], axis=0))
        else:
            blk = np.zeros((ca.shape[0] + cb.shape[0], n, ca.shape[2] + cb.shape[2]))
            blk[: ca.shape[0], :, : ca.shape[2]] = ca
            blk[ca.shape[0]:, :, ca.shape[2]:] = cb
            cores.append(blk)
    return TensorTrain(cores)


def hadamard(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Entrywise product; cores are slice-wise Kronecker products (ranks multiply)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        # kron per slice i: (pa*pb, n, qa*qb), row composite (alpha_a, alpha_b)
        blk = np.einsum("aib,cid->acibd", ca, cb)
        pa, pb = ca.shape[0], cb.shape[0]
        qa, qb = ca.shape[2], cb.shape[2]
        cores.append(blk.reshape(pa * pb, ca.shape[1], qa * qb))
    return TensorTrain(cores)


def mode_apply(tt: TensorTrain, mat: np.ndarray, mode: int) -> TensorTrain:
    """Apply a matrix along one mode (rank unchanged)."""
    cores = [c.copy() for c in tt.cores]
    cores[mode] = np.einsum("ij,ajb->aib", mat, cores[mode])
    return TensorTrain(cores)


def constant_tt(shape, value: float = 1.0) -> TensorTrain:
    cores = [np.ones((1, n, 1)) for n in shape]
    cores[0] = cores[0] * value
    return TensorTrain(cores)


def rank_one(vectors) -> TensorTrain:
    """Separable tensor from per-mode vectors."""
    return TensorTrain([np.asarray(v, dtype=float)[None, :, None] for v in vectors])


def random_tt(shape, ranks, rng: np.random.Generator) -> TensorTrain:
    """Gaussian-core tensor train; full TT-rank with probability one."""
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) == len(shape) - 1:
        ranks = (1,) + ranks + (1,)
    cores = [rng.standard_normal((ranks[k], shape[k], ranks[k + 1])) for k in range(len(shape))]
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# cross interpolation

def _right_solve(block: np.ndarray, piv: np.ndarray) -> np.ndarray:
    """Contract ``block @ inv(piv)`` along the trailing axis."""
    flat = block.reshape(-1, block.shape[-1])
    out = np.linalg.solve(piv.T, flat.T).T
    return out.reshape(block.shape)


def cross_interpolant(oracle, shape, idx_sets, cond_limit: float = 1e14) -> TensorTrain:
    """Tensor CUR: cores from sampled fibers and pivot-block inverses.

    ``oracle(idx)`` evaluates the target tensor at an (m, d) array of
    multi-indices. ``idx_sets`` provides nested left/right multi-index
    families; the result interpolates the target on all sampled crosses and
    reproduces it exactly when the target has matching TT-rank.
    """
    d = len(shape)
    cores = []
    for k in range(d):
        left = idx_sets.left_at(k)
        right = idx_sets.right_at(k)
        block = oracle(_block_indices(shape, left, k, right)).reshape(
            len(left), shape[k], len(right))
        if k < d - 1:
            piv = oracle(_pivot_indices(idx_sets.left[k], idx_sets.right[k])).reshape(
                len(idx_sets.left[k]), len(idx_sets.right[k]))
            cond = np.linalg.cond(piv)
            if not np.isfinite(cond) or cond > cond_limit:
                raise SingularInterfaceError(k + 1, cond)
            cores.append(_right_solve(block, piv))
        else:
            cores.append(block)
    return TensorTrain(cores)


def cross_interpolant_qr(subtensors, l_positions) -> TensorTrain:
    """QR-stabilized cross interpolant from the sampled subtensors.

    ``subtensors[k]`` is ``Y(left_k, :, right_k)`` and ``l_positions[k]`` the
    within-level composite pivot rows of its left unfolding. Equals the plain
    CUR interpolant in exact arithmetic but is conditioned by the selected
    rows of an orthonormal factor rather than by the pivot blocks.
    """
    d = len(subtensors)
    cores = []
    for k, block in enumerate(subtensors):
        block = np.asarray(block, dtype=float)
        if block.ndim == 2:
            block = block[:, :, None]
        if k == d - 1:
            cores.append(block)
            break
        l0, n, r = block.shape
        q, rr = qr_pos(block.reshape(l0 * n, r, order="F"))
        qhat = q[np.asarray(l_positions[k], dtype=int), :]
        cond = np.linalg.cond(qhat)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularInterfaceError(k + 1, cond, what="selected orthonormal rows")
        core = np.linalg.solve(qhat.T, q.T).T          # q @ inv(qhat)
        cores.append(fold_left(core, l0, n, qhat.shape[1]))
    return TensorTrain(cores)


def _block_indices(shape, left, mode, right) -> np.ndarray:
    """All multi-indices of a block (left, :, right), flattened C-style over (l, i, r)."""
    d = len(shape)
    nl, n, nr = len(left), shape[mode], len(right)
    out = np.empty((nl, n, nr, d), dtype=int)
    la = np.asarray([list(t) for t in left], dtype=int).reshape(nl, mode)
    ra = np.asarray([list(t) for t in right], dtype=int).reshape(nr, d - mode - 1)
    out[..., :mode] = la[:, None, None, :]
    out[..., mode] = np.arange(n)[None, :, None]
    out[..., mode + 1:] = ra[None, None, :, :]
    return out.reshape(-1, d)


def _pivot_indices(left, right) -> np.ndarray:
    nl, nr = len(left), len(right)
    kl = len(left[0])
    d = kl + len(right[0])
    out = np.empty((nl, nr, d), dtype=int)
    la = np.asarray([list(t) for t in left], dtype=int)
    ra = np.asarray([list(t) for t in right], dtype=int)
    out[..., :kl] = la[:, None, :]
    out[..., kl:] = ra[None, :, :]
    return out.reshape(-1, d)


def tt_entry_oracle(tt: TensorTrain):
    """Entry evaluator over a tensor train, for cross interpolation."""
    return lambda idx: entries(tt, idx)


def dense_entry_oracle(x: np.ndarray):
    arr = np.asarray(x, dtype=float)

    def oracle(idx):
        idx = np.asarray(idx, dtype=int)
        return arr[tuple(idx[:, t] for t in range(arr.ndim))]

    return oracle


# ---------------------------------------------------------------------------
# checkpoint format: magic "TTCK", u32 version, u32 d, u64 shape, u64 ranks,
# cores as little-endian f64 in colexicographic order

_MAGIC = b"TTCK"
_VERSION = 1


def save_checkpoint(tt: TensorTrain, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", tt.ndim))
        fh.write(np.asarray(tt.shape, dtype="<u8").tobytes())
        fh.write(np.asarray(tt.ranks, dtype="<u8").tobytes())
        for core in tt.cores:
            fh.write(np.asarray(core.ravel(order="F"), dtype="<f8").tobytes())


def load_checkpoint(path) -> TensorTrain:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (d,) = struct.unpack("<I", fh.read(4))
        shape = np.frombuffer(fh.read(8 * d), dtype="<u8").astype(int)
        ranks = np.frombuffer(fh.read(8 * (d + 1)), dtype="<u8").astype(int)
        cores = []
        for k in range(d):
            cnt = ranks[k] * shape[k] * ranks[k + 1]
            buf = np.frombuffer(fh.read(8 * cnt), dtype="<f8")
            cores.append(buf.reshape(ranks[k], shape[k], ranks[k + 1], order="F").copy())
    return TensorTrain(cores)
