"""Periodic PDE discretizations with dense and entry-wise right-hand sides.

Each problem exposes the semi-discrete vector field G three ways:

* ``dense(u, t)`` on the full tensor (reference path),
* ``targets(oracle, block, t)`` at a sampled block of entries, pulling any
  needed solution fibers from a :class:`SolutionOracle` (low-rank path),
* ``tt_rhs(y, t, tol)`` in tensor-train arithmetic (step-truncation path).

Spatial derivatives use explicit Fourier differentiation matrices applied
to fibers, so the dense and entry-wise paths agree to roundoff on any
common index set.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tt as ttm
from .tt import TensorTrain


def fourier_diff(n: int, length: float, order: int) -> np.ndarray:
    """Periodic Fourier differentiation matrix on n uniform points, period `length`."""
    if n % 2 != 0 or n < 4:
        raise ValueError(f"even n >= 4 required, got {n}")
    scale = 2.0 * np.pi / length
    j = np.arange(n)
    diff = j[:, None] - j[None, :]
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    if order == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            mat = 0.5 * sign / np.tan(np.pi * diff / n)
        np.fill_diagonal(mat, 0.0)
        return scale * mat
    if order == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            mat = -sign / (2.0 * np.sin(np.pi * diff / n) ** 2)
        np.fill_diagonal(mat, -n * n / 12.0 - 1.0 / 6.0)
        return scale * scale * mat
    raise ValueError(f"derivative order must be 1 or 2, got {order}")


def apply_axis_dense(mat: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
    """Contract a matrix against one axis of a dense tensor."""
    return np.moveaxis(np.tensordot(mat, u, axes=(1, axis)), 0, axis)


# ---------------------------------------------------------------------------
# sampled blocks and the solution oracle

@dataclass(frozen=True)
class Block:
    """A sampled set of entries: left tuples x (free mode | nothing) x right tuples.

    ``mode=None`` denotes the pivot grid pairing every left with every right
    multi-index; otherwise the block has a free axis at ``mode`` and shape
    ``(len(left), n_mode, len(right))``.
    """

    left: tuple
    mode: object          # int or None
    right: tuple

    def n_left_modes(self) -> int:
        return len(self.left[0])


def block_axis_indices(block: Block, shape):
    """Per-axis target indices, broadcastable to the block's value shape."""
    d = len(shape)
    a = block.n_left_modes()
    la = np.asarray([list(t) for t in block.left], dtype=int).reshape(len(block.left), a)
    ra = np.asarray([list(t) for t in block.right], dtype=int).reshape(len(block.right), -1)
    out = [None] * d
    if block.mode is None:
        for t in range(a):
            out[t] = la[:, t][:, None]
        for t in range(a, d):
            out[t] = ra[:, t - a][None, :]
    else:
        for t in range(a):
            out[t] = la[:, t][:, None, None]
        out[block.mode] = np.arange(shape[block.mode], dtype=int)[None, :, None]
        for t in range(block.mode + 1, d):
            out[t] = ra[:, t - block.mode - 1][None, None, :]
    return out


class SolutionOracle:
    """Serve values and fiber-wise matrix applications of a tensor train.

    ``apply_matrix(block, axis, mat)`` returns the block of ``mat`` applied
    along ``axis`` fibers of the represented tensor, sampled at the block's
    targets. Freed-axis fiber bundles are cached per (block, axis), so e.g.
    first- and second-derivative matrices along the same axis share one
    bundle; ``fibers_served`` counts the distinct fibers materialized.
    """

    def __init__(self, y: TensorTrain):
        self.y = y
        self.fibers_served = 0
        self._bundles = {}
        self._values = {}

    def values(self, block: Block) -> np.ndarray:
        if block not in self._values:
            if block.mode is None:
                out = ttm.pivot_matrix(self.y, block.left, block.right)
                self.fibers_served += out.size
            else:
                out = ttm.subtensor(self.y, block.left, block.mode, block.right)
                self.fibers_served += len(block.left) * len(block.right)
            self._values[block] = out
        return self._values[block]

    def apply_matrix(self, block: Block, axis: int, mat: np.ndarray) -> np.ndarray:
        if block.mode is not None and axis == block.mode:
            return np.einsum("ij,ljr->lir", mat, self.values(block), optimize=True)
        bundle = self._bundle(block, axis)
        idx = block_axis_indices(block, self.y.shape)[axis]
        rows = mat[idx.ravel(), :]
        a = block.n_left_modes()
        if block.mode is None:
            if axis < a:
                return np.einsum("lj,ljR->lR", rows, bundle, optimize=True)
            return np.einsum("Rj,ljR->lR", rows, bundle, optimize=True)
        if axis < a:
            return np.einsum("lj,ljiR->liR", rows, bundle, optimize=True)
        return np.einsum("Rj,ljiR->liR", rows, bundle, optimize=True)

    # bundle(block, axis)[..., j, ...] holds the tensor value with the target's
    # axis coordinate replaced by j; leading axes (left, freed) or trailing
    # (freed broadcast over right) per the einsums above.
    def _bundle(self, block: Block, axis: int):
        key = (block, axis)
        if key in self._bundles:
            return self._bundles[key]
        cores = self.y.cores
        d = self.y.ndim
        a = block.n_left_modes()
        nl, nr = len(block.left), len(block.right)
        if axis < a:
            # prefix up to axis, freed core, fixed walk to a, then the rest
            pre = ttm.left_interface(cores, [t[:axis] for t in block.left])
            b = np.einsum("la,ajb->ljb", pre, cores[axis], optimize=True)
            for t in range(axis + 1, a):
                it = np.fromiter((tup[t] for tup in block.left), dtype=int, count=nl)
                b = np.einsum("lja,alb->ljb", b, cores[t][:, it, :], optimize=True)
            ri = ttm.right_interface(cores, block.right)
            if block.mode is None:
                bundle = np.einsum("ljq,qR->ljR", b, ri, optimize=True)
            else:
                bundle = np.einsum("ljq,qir,rR->ljiR", b, cores[block.mode], ri, optimize=True)
            self.fibers_served += bundle.size // bundle.shape[1]
        else:
            # tail past axis, freed core, fixed walk back to the block edge
            first_right = a if block.mode is None else block.mode + 1
            pos = axis - first_right
            tail_tuples = [t[pos + 1:] for t in block.right]
            ri = ttm.right_interface(cores, tail_tuples)
            c = np.einsum("ajb,bR->Rja", cores[axis], ri, optimize=True)
            for t in range(axis - 1, first_right - 1, -1):
                it = np.fromiter((tup[t - first_right] for tup in block.right), dtype=int, count=nr)
                c = np.einsum("aRb,Rjb->Rja", cores[t][:, it, :], c, optimize=True)
            li = ttm.left_interface(cores, block.left)
            if block.mode is None:
                bundle = np.einsum("la,Rja->ljR", li, c, optimize=True)
            else:
                bundle = np.einsum("la,aiq,Rjq->ljiR", li, cores[block.mode], c, optimize=True)
            self.fibers_served += bundle.size // bundle.shape[1]
        self._bundles[key] = bundle
        return bundle


# ---------------------------------------------------------------------------
# problem container

@dataclass
class Problem:
    """Discretized periodic PDE: grid geometry, initial condition, vector field."""

    name: str
    shape: tuple
    lengths: tuple
    origins: tuple
    rhs: object
    params: dict = field(default_factory=dict)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def grids(self):
        return [self.origins[k] + self.lengths[k] * np.arange(self.shape[k]) / self.shape[k]
                for k in range(self.ndim)]

    def u0_dense(self) -> np.ndarray:
        return self.rhs.u0_dense()


# ---------------------------------------------------------------------------
# 2D prescribed-field Vlasov equation

class VlasovRHS:
    """G(u) = -v du/dx - E(x) du/dv with E(x) = 0.5 sin(pi x) on [-1,1]^2."""

    def __init__(self, n: int):
        self.n = n
        self.x = -1.0 + 2.0 * np.arange(n) / n
        self.v = self.x.copy()
        self.d1 = fourier_diff(n, 2.0, 1)
        self.efield = 0.5 * np.sin(np.pi * self.x)

    def u0_dense(self) -> np.ndarray:
        return np.exp(-20.0 * (self.x[:, None] ** 2 + self.v[None, :] ** 2))

    def dense(self, u: np.ndarray, t: float) -> np.ndarray:
        return (-(self.d1 @ u) * self.v[None, :]
                - (u @ self.d1.T) * self.efield[:, None])

    def targets(self, oracle: SolutionOracle, block: Block, t: float) -> np.ndarray:
        ux = oracle.apply_matrix(block, 0, self.d1)
        uv = oracle.apply_matrix(block, 1, self.d1)
        idx = block_axis_indices(block, (self.n, self.n))
        return -self.v[idx[1]] * ux - self.efield[idx[0]] * uv

    def tt_rhs(self, y: TensorTrain, t: float, tol: float) -> TensorTrain:
        adv_x = ttm.hadamard(ttm.mode_apply(y, self.d1, 0), ttm.rank_one([np.ones(self.n), self.v]))
        adv_v = ttm.hadamard(ttm.mode_apply(y, self.d1, 1), ttm.rank_one([self.efield, np.ones(self.n)]))
        return ttm.round_tt(ttm.add(ttm.scale(adv_x, -1.0), ttm.scale(adv_v, -1.0)), tol)


def vlasov_poisson_2d(n: int = 64) -> Problem:
    rhs = VlasovRHS(n)
    return Problem(name="vp2d", shape=(n, n), lengths=(2.0, 2.0), origins=(-1.0, -1.0),
                   rhs=rhs, params={"efield": "0.5*sin(pi*x)"})


# ---------------------------------------------------------------------------
# 3D Allen-Cahn equation

def _ac_g(x1, x2, x3):
    # singular factors overflow to inf at isolated grid points; the quotient
    # then collapses to 0, which is the correct limiting value
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        num = (np.exp(-np.tan(x1) ** 2) + np.exp(-np.tan(x2) ** 2) + np.exp(-np.tan(x3) ** 2))
        num = num * np.sin(x1 + x2 + x3)
        den = 1.0 + np.exp(np.abs(1.0 / np.sin(-x1 / 2))) \
                  + np.exp(np.abs(1.0 / np.sin(-x2 / 2))) \
                  + np.exp(np.abs(1.0 / np.sin(-x3 / 2)))
        out = num / den
    return np.where(np.isfinite(out), out, 0.0)


class AllenCahnRHS:
    """G(u) = alpha * Lap(u) + u - u^3 on [0, 2pi]^3."""

    def __init__(self, n: int, alpha: float = 0.1):
        self.n = n
        self.alpha = alpha
        self.x = 2.0 * np.pi * np.arange(n) / n
        self.d2 = fourier_diff(n, 2.0 * np.pi, 2)

    def u0_dense(self) -> np.ndarray:
        x1 = self.x[:, None, None]
        x2 = self.x[None, :, None]
        x3 = self.x[None, None, :]
        return (_ac_g(x1, x2, x3) - _ac_g(2 * x1, x2, x3)
                + _ac_g(x1, 2 * x2, x3) - _ac_g(x1, x2, 2 * x3))

    def dense(self, u: np.ndarray, t: float) -> np.ndarray:
        lap = sum(apply_axis_dense(self.d2, u, k) for k in range(3))
        return self.alpha * lap + u - u ** 3

    def targets(self, oracle: SolutionOracle, block: Block, t: float) -> np.ndarray:
        vals = oracle.values(block)
        lap = sum(oracle.apply_matrix(block, k, self.d2) for k in range(3))
        return self.alpha * lap + vals - vals ** 3

    def tt_rhs(self, y: TensorTrain, t: float, tol: float) -> TensorTrain:
        lap = ttm.mode_apply(y, self.d2, 0)
        for k in (1, 2):
            lap = ttm.add(lap, ttm.mode_apply(y, self.d2, k))
        cubic = ttm.round_tt(ttm.hadamard(y, ttm.round_tt(ttm.hadamard(y, y), tol)), tol)
        g = ttm.add(ttm.add(ttm.scale(lap, self.alpha), y), ttm.scale(cubic, -1.0))
        return ttm.round_tt(g, tol)


def allen_cahn_3d(n: int = 64, alpha: float = 0.1) -> Problem:
    rhs = AllenCahnRHS(n, alpha)
    return Problem(name="ac3d", shape=(n,) * 3, lengths=(2 * np.pi,) * 3,
                   origins=(0.0,) * 3, rhs=rhs, params={"alpha": alpha})


# ---------------------------------------------------------------------------
# 4D advection-diffusion-reaction equation

class AdrRHS:
    """G(u) = div(mu u) + sigma Lap(u) + R(u) with R(u) = -0.1 u / (1 + u^2).

    The drift components mu_k = g(.,.)/2 with g(x,y) = exp(sin x cos y) do
    not depend on their own coordinate, so each divergence term reduces to
    mu_k times the first derivative along axis k.
    """

    def __init__(self, n: int, sigma: float = 0.25):
        self.n = n
        self.sigma = sigma
        self.x = 2.0 * np.pi * np.arange(n) / n
        self.d1 = fourier_diff(n, 2.0 * np.pi, 1)
        self.d2 = fourier_diff(n, 2.0 * np.pi, 2)
        # mu depends on (x2,x3), (x3,x4), (x4,x1), (x2,x3) for k = 1..4
        self._mu_args = [(1, 2), (2, 3), (3, 0), (1, 2)]

    @staticmethod
    def _g(a, b):
        return np.exp(np.sin(a) * np.cos(b))

    def u0_dense(self) -> np.ndarray:
        s = [np.sin(self.x).reshape([-1 if t == k else 1 for t in range(4)]) for k in range(4)]
        return np.exp(s[0] * s[1] * s[2] * s[3])

    def _mu_dense(self, k: int) -> np.ndarray:
        ia, ib = self._mu_args[k]
        sh_a = [-1 if t == ia else 1 for t in range(4)]
        sh_b = [-1 if t == ib else 1 for t in range(4)]
        return 0.5 * self._g(self.x.reshape(sh_a), self.x.reshape(sh_b))

    def coefficient_tensors(self) -> list:
        n = self.n
        return [np.broadcast_to(self._mu_dense(k), (n,) * 4).copy() for k in range(4)]

    def coefficient_tts(self, tol: float = 1e-6) -> list:
        return [ttm.tt_svd(c, tol=tol) for c in self.coefficient_tensors()]

    @staticmethod
    def reaction(u):
        return -0.1 * u / (1.0 + u ** 2)

    def dense(self, u: np.ndarray, t: float) -> np.ndarray:
        out = self.reaction(u)
        for k in range(4):
            out = out + self._mu_dense(k) * apply_axis_dense(self.d1, u, k)
            out = out + self.sigma * apply_axis_dense(self.d2, u, k)
        return out

    def targets(self, oracle: SolutionOracle, block: Block, t: float) -> np.ndarray:
        vals = oracle.values(block)
        idx = block_axis_indices(block, (self.n,) * 4)
        out = self.reaction(vals)
        for k in range(4):
            ia, ib = self._mu_args[k]
            mu = 0.5 * self._g(self.x[idx[ia]], self.x[idx[ib]])
            out = out + mu * oracle.apply_matrix(block, k, self.d1)
            out = out + self.sigma * oracle.apply_matrix(block, k, self.d2)
        return out

    def tt_rhs(self, y: TensorTrain, t: float, tol: float) -> TensorTrain:
        if not hasattr(self, "_coeff_tts"):
            self._coeff_tts = self.coefficient_tts(tol=min(tol, 1e-6))
        g = None
        for k in range(4):
            adv = ttm.round_tt(ttm.hadamard(self._coeff_tts[k], ttm.mode_apply(y, self.d1, k)), tol)
            term = ttm.add(adv, ttm.scale(ttm.mode_apply(y, self.d2, k), self.sigma))
            g = term if g is None else ttm.round_tt(ttm.add(g, term), tol)
        # fractional reaction has no reliable low-rank arithmetic; evaluate
        # densely and recompress (viable at this problem size only)
        dense_r = self.reaction(ttm.contract_to_dense(y))
        g = ttm.add(g, ttm.tt_svd(dense_r, tol=tol))
        return ttm.round_tt(g, tol)


def adr_4d(n: int = 32, sigma: float = 0.25) -> Problem:
    rhs = AdrRHS(n, sigma)
    return Problem(name="adr4d", shape=(n,) * 4, lengths=(2 * np.pi,) * 4,
                   origins=(0.0,) * 4, rhs=rhs, params={"sigma": sigma})


# ---------------------------------------------------------------------------
# manufactured rank-r path (exactness and convergence-order studies)

class ManufacturedRHS:
    """G(X, t) = dA/dt + lam * (X o X - A(t) o A(t)) + forcing * W.

    A(t) is a fixed-rank train with one smoothly varying core. With zero
    forcing the exact solution starting at A(0) is A(t) itself and stays on
    the manifold; lam > 0 makes the field genuinely nonlinear in X while
    the low-rank modeling error stays zero along the path. A nonzero
    ``forcing`` adds a fixed tensor W with components off the tangent
    space, driving the dynamics away from the prescribed path (convergence
    studies then measure against a fine-step solution of the projected
    flow).
    """

    def __init__(self, shape, ranks, seed: int = 0, amplitude: float = 0.3,
                 lam: float = 0.0, omega: float = 1.0, forcing: float = 0.0):
        rng = np.random.default_rng(seed)
        d = len(shape)
        self.shape = tuple(shape)
        self.lam = lam
        self.omega = omega
        self.amplitude = amplitude
        self.forcing = forcing
        base = ttm.random_tt(shape, ranks, rng)
        self.base_cores = [c / np.sqrt(c.shape[1]) for c in base.cores]
        self.moving = d // 2
        self.perturb = rng.standard_normal(self.base_cores[self.moving].shape)
        self.perturb /= np.sqrt(self.perturb.shape[1])
        w_ranks = [min(3, r) + 1 for r in ranks] if forcing else None
        self.w = ttm.random_tt(shape, w_ranks, rng) if forcing else None

    def solution(self, t: float) -> TensorTrain:
        cores = [c.copy() for c in self.base_cores]
        cores[self.moving] = cores[self.moving] + self.amplitude * np.sin(self.omega * t) * self.perturb
        return TensorTrain(cores)

    def path_derivative(self, t: float) -> TensorTrain:
        cores = [c.copy() for c in self.base_cores]
        cores[self.moving] = self.amplitude * self.omega * np.cos(self.omega * t) * self.perturb
        return TensorTrain(cores)

    def u0_dense(self) -> np.ndarray:
        return ttm.contract_to_dense(self.solution(0.0))

    def dense(self, u: np.ndarray, t: float) -> np.ndarray:
        out = ttm.contract_to_dense(self.path_derivative(t))
        if self.lam:
            a = ttm.contract_to_dense(self.solution(t))
            out = out + self.lam * (u * u - a * a)
        if self.forcing:
            out = out + self.forcing * ttm.contract_to_dense(self.w)
        return out

    def _block_of(self, y: TensorTrain, block: Block) -> np.ndarray:
        if block.mode is None:
            return ttm.pivot_matrix(y, block.left, block.right)
        return ttm.subtensor(y, block.left, block.mode, block.right)

    def targets(self, oracle: SolutionOracle, block: Block, t: float) -> np.ndarray:
        out = self._block_of(self.path_derivative(t), block)
        if self.lam:
            vals = oracle.values(block)
            a = self._block_of(self.solution(t), block)
            out = out + self.lam * (vals * vals - a * a)
        if self.forcing:
            out = out + self.forcing * self._block_of(self.w, block)
        return out

    def tt_rhs(self, y: TensorTrain, t: float, tol: float) -> TensorTrain:
        g = self.path_derivative(t)
        if self.lam:
            sq = ttm.round_tt(ttm.hadamard(y, y), tol)
            a = self.solution(t)
            asq = ttm.round_tt(ttm.hadamard(a, a), tol)
            g = ttm.add(g, ttm.scale(ttm.round_tt(ttm.add(sq, ttm.scale(asq, -1.0)), tol), self.lam))
        if self.forcing:
            g = ttm.add(g, ttm.scale(self.w, self.forcing))
        return ttm.round_tt(g, tol)


def manufactured_problem(shape=(6, 6, 6), ranks=(2, 2), seed: int = 0,
                         amplitude: float = 0.3, lam: float = 0.0,
                         forcing: float = 0.0) -> Problem:
    rhs = ManufacturedRHS(shape, ranks, seed=seed, amplitude=amplitude, lam=lam,
                          forcing=forcing)
    return Problem(name="manufactured", shape=tuple(shape), lengths=(1.0,) * len(shape),
                   origins=(0.0,) * len(shape), rhs=rhs,
                   params={"amplitude": amplitude, "lam": lam, "forcing": forcing,
                           "seed": seed})


# ---------------------------------------------------------------------------
# dense reference integration

def dense_reference(problem: Problem, dt: float, t_end: float, sample_times):
    """Dense RK4 trajectory snapshots at the requested sample times."""
    u = problem.u0_dense()
    rhs = problem.rhs
    norm0 = np.linalg.norm(u.ravel())
    sample_times = [float(s) for s in sample_times]
    snaps = []
    t = 0.0
    nsteps = int(round(t_end / dt)) if t_end > 0 else 0
    pending = sorted(sample_times)

    def take(t_now):
        while pending and abs(pending[0] - t_now) <= 1e-9 + 1e-12 * max(1.0, abs(t_now)):
            snaps.append((pending.pop(0), u.copy()))

    take(t)
    for i in range(nsteps):
        k1 = rhs.dense(u, t)
        k2 = rhs.dense(u + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs.dense(u + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs.dense(u + dt * k3, t + dt)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (i + 1) * dt
        if np.linalg.norm(u.ravel()) > 1e6 * max(norm0, 1e-300):
            raise FloatingPointError(f"dense reference blew up at t = {t:.6g}")
        take(t)
    return snaps
