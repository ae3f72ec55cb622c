"""Cluster-path moment recursions, optimal gain trees, and reference filters.

The central object is the gain tree: for every cluster path of length k and
every mode i it holds the joint weight ``p``, the indicator-weighted second
moment ``Y`` of the estimation error, and the optimal filter gain ``M``.
``Y / p`` is the error covariance conditional on (path, mode).

Sign convention: the measurement-update term
``A Y L' (L Y L' + p H H')^{-1} L Y A'`` enters the moment recursion with a
MINUS sign.  The subtraction is what the completion-of-squares argument
forces, and it is the only convention under which the singleton-cluster
endpoint reproduces the standard Kalman Riccati difference equation.

Internally the recursion runs on the normalized pair ``(Ybar, p)`` with
``Ybar = Y / p``: the inner matrix ``L Ybar L' + H H'`` is then bounded below
by ``H H' > 0`` regardless of how small the path probability gets, so deep
trees stay well conditioned.  Raw ``Y`` is materialized on demand.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .markov import ZERO_WEIGHT, PathKey
from .model import Clustering, MjlsModel, model_from_dict, model_to_dict, partition_label

DEFAULT_BUDGET_SCALARS = 2 ** 26
BUDGET_ENV_VAR = "CLMMSE_BUDGET_SCALARS"

TREE_FORMAT = "clmmse-gain-tree"
TREE_VERSION = 1


class UnreachableNodeError(LookupError):
    """A (path, mode) pair with probability zero was looked up.

    Observing such a pair contradicts the model, so lookups fail loudly
    instead of returning the stored zero placeholder.
    """


class BudgetExceededError(RuntimeError):
    """Tree construction would exceed the configured memory budget."""


# ---------------------------------------------------------------------------
# Small linear-algebra helpers (batched over leading axes)
# ---------------------------------------------------------------------------

def _t(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _forward_sub(lo: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = lo.shape[-1]
    out = np.empty(np.broadcast_shapes(lo.shape[:-2], b.shape[:-2]) + b.shape[-2:], dtype=float)
    for i in range(m):
        acc = b[..., i, :] - np.einsum("...t,...tr->...r", lo[..., i, :i], out[..., :i, :])
        out[..., i, :] = acc / lo[..., i, i][..., None]
    return out


def _backward_sub(lo: np.ndarray, b: np.ndarray) -> np.ndarray:
    # solves lo' x = b with lo lower triangular
    m = lo.shape[-1]
    out = np.empty(np.broadcast_shapes(lo.shape[:-2], b.shape[:-2]) + b.shape[-2:], dtype=float)
    for i in reversed(range(m)):
        acc = b[..., i, :] - np.einsum("...t,...tr->...r", lo[..., i + 1:, i], out[..., i + 1:, :])
        out[..., i, :] = acc / lo[..., i, i][..., None]
    return out


def spd_solve(phi: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``phi @ x = rhs`` for symmetric positive definite ``phi``.

    Batched over leading axes.  Factorizes via Cholesky (no explicit
    inverse) and raises ``numpy.linalg.LinAlgError`` when ``phi`` is not
    positive definite.
    """
    chol = np.linalg.cholesky(phi)
    return _backward_sub(chol, _forward_sub(chol, rhs))


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + _t(a))


@dataclass(frozen=True)
class _Stacks:
    """Per-mode matrices stacked along axis 0 for batched updates."""

    A: np.ndarray    # (N, n, n)
    G: np.ndarray    # (N, n, q)
    L: np.ndarray    # (N, p, n)
    H: np.ndarray    # (N, p, q)
    GGt: np.ndarray  # (N, n, n)
    HHt: np.ndarray  # (N, p, p)


def mode_stacks(model: MjlsModel) -> _Stacks:
    A = np.stack([m.A for m in model.modes])
    G = np.stack([m.G for m in model.modes])
    L = np.stack([m.L for m in model.modes])
    H = np.stack([m.H for m in model.modes])
    return _Stacks(A=A, G=G, L=L, H=H, GGt=G @ _t(G), HHt=H @ _t(H))


# ---------------------------------------------------------------------------
# Path addressing within depth-major storage
# ---------------------------------------------------------------------------

def path_to_index(path: PathKey, n_clusters: int) -> int:
    idx = 0
    for ell in path:
        if not 1 <= ell <= n_clusters:
            raise ValueError(f"cluster index {ell} out of range 1..{n_clusters}")
        idx = idx * n_clusters + (ell - 1)
    return idx


def index_to_path(idx: int, depth: int, n_clusters: int) -> PathKey:
    digits = []
    for _ in range(depth):
        digits.append(idx % n_clusters + 1)
        idx //= n_clusters
    return tuple(reversed(digits))


# ---------------------------------------------------------------------------
# Node views and trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeData:
    """Per-mode data of one tree node (one cluster path).

    ``Y`` holds the joint second moments, ``Ybar`` the conditional
    covariances (zero placeholders where ``reachable`` is False), ``M``
    the gains.  ``M`` is None on nodes of trees that carry no gains.
    """

    path: PathKey
    p: np.ndarray          # (N,)
    Y: np.ndarray          # (N, n, n)
    Ybar: np.ndarray       # (N, n, n)
    reachable: np.ndarray  # (N,) bool
    M: np.ndarray | None = None  # (N, n, p_dim)


class MomentTree:
    """Second moments of the estimation error indexed by (cluster path, mode).

    Depth-major storage: depth k holds ``n_clusters**k`` nodes addressed by
    the base-``n_clusters`` digits of the path.
    """

    def __init__(self, model: MjlsModel, clustering: Clustering, horizon: int,
                 p_by_depth: list[np.ndarray], ybar_by_depth: list[np.ndarray]):
        self.model = model
        self.clustering = clustering
        self.horizon = int(horizon)
        self._p = p_by_depth
        self._ybar = ybar_by_depth
        for arr in (*p_by_depth, *ybar_by_depth):
            arr.setflags(write=False)

    @property
    def n_clusters(self) -> int:
        return self.clustering.n_clusters

    def node_count(self, k: int) -> int:
        return self.n_clusters ** k

    def probabilities(self, k: int) -> np.ndarray:
        """Joint weights of all depth-k nodes, shape (n_clusters**k, N)."""
        return self._p[k]

    def conditional_moments(self, k: int) -> np.ndarray:
        """Normalized second moments at depth k, shape (nodes, N, n, n)."""
        return self._ybar[k]

    def _locate(self, path: PathKey) -> tuple[int, int]:
        k = len(path)
        if k > self.horizon:
            raise ValueError(f"path length {k} exceeds horizon {self.horizon}")
        return k, path_to_index(tuple(path), self.n_clusters)

    def node(self, path: PathKey) -> NodeData:
        k, idx = self._locate(tuple(path))
        p = self._p[k][idx]
        ybar = self._ybar[k][idx]
        return NodeData(
            path=tuple(path), p=p, Y=p[:, None, None] * ybar, Ybar=ybar,
            reachable=p >= ZERO_WEIGHT, M=self._node_gains(k, idx),
        )

    def _node_gains(self, k: int, idx: int) -> np.ndarray | None:
        return None

    def second_moment(self, path: PathKey, mode: int) -> np.ndarray:
        """Raw joint moment Y at (path, mode); zero on unreachable pairs."""
        k, idx = self._locate(tuple(path))
        return self._p[k][idx, mode - 1] * self._ybar[k][idx, mode - 1]

    def expected_sq_error(self, k: int) -> float:
        """E||x(k) - xhat(k)||^2: the trace of Y summed over depth-k nodes and modes."""
        if not 0 <= k <= self.horizon:
            raise ValueError(f"k={k} outside 0..{self.horizon}")
        traces = np.trace(self._ybar[k], axis1=-2, axis2=-1)
        return float((self._p[k] * traces).sum())


class GainTree(MomentTree):
    """Moment tree augmented with the optimal gains.

    Gains are materialized for depths ``0..horizon-1`` (the ones the
    horizon-s filter applies); the horizon-depth node's gains are derived on
    demand by :func:`compute_gain` when its :class:`NodeData` is requested.
    """

    def __init__(self, model, clustering, horizon, p_by_depth, ybar_by_depth,
                 gain_by_depth: list[np.ndarray], factorization_count: int):
        super().__init__(model, clustering, horizon, p_by_depth, ybar_by_depth)
        self._gain = gain_by_depth
        for arr in gain_by_depth:
            arr.setflags(write=False)
        self.factorization_count = int(factorization_count)

    @property
    def stored_gain_count(self) -> int:
        """Number of gain matrices physically stored (depths 0..horizon-1)."""
        return sum(g.shape[0] * g.shape[1] for g in self._gain)

    def gains(self, k: int) -> np.ndarray:
        """Stored gains at depth k < horizon, shape (nodes, N, n, p_dim)."""
        return self._gain[k]

    def gain(self, path: PathKey, mode: int) -> np.ndarray:
        """Gain applied when (path, theta) = (path, mode); unreachable pairs raise."""
        k, idx = self._locate(tuple(path))
        if not 1 <= mode <= self.model.n_modes:
            raise ValueError(f"mode {mode} out of range 1..{self.model.n_modes}")
        if self._p[k][idx, mode - 1] < ZERO_WEIGHT:
            raise UnreachableNodeError(
                f"path {tuple(path)} with mode {mode} has probability zero under the model"
            )
        if k == self.horizon:
            return self._node_gains(k, idx)[mode - 1]
        return self._gain[k][idx, mode - 1]

    def _node_gains(self, k: int, idx: int) -> np.ndarray:
        if k < self.horizon:
            return self._gain[k][idx]
        # Horizon-depth gains exist in theory but are never applied by the
        # horizon-s filter, so they are not stored; derive them here.
        p = self._p[k][idx]
        ybar = self._ybar[k][idx]
        out = np.zeros((self.model.n_modes, self.model.n, self.model.p_dim))
        for i in np.nonzero(p >= ZERO_WEIGHT)[0]:
            out[i] = compute_gain(p[i] * ybar[i], p[i], i + 1, self.model)
        return out


def expected_sq_error(tree: MomentTree, k: int) -> float:
    """Mean square estimation error at time k implied by the tree."""
    return tree.expected_sq_error(k)


def conditional_covariance(node: NodeData, mode: int) -> np.ndarray:
    """Error covariance conditional on (node path, mode); Y divided by p."""
    if node.p[mode - 1] < ZERO_WEIGHT:
        raise UnreachableNodeError(
            f"path {node.path} with mode {mode} has probability zero; "
            "no conditional covariance exists"
        )
    return node.Ybar[mode - 1]


# ---------------------------------------------------------------------------
# Single-node operations (raw form, direct transliteration of the recursion)
# ---------------------------------------------------------------------------

def compute_gain(Y: np.ndarray, p: float, mode: int, model: MjlsModel) -> np.ndarray:
    """Optimal gain for one (path, mode): A Y L' (L Y L' + p H H')^{-1}.

    Returns zero when p = 0 (the gain is immaterial there).  Raises
    ``numpy.linalg.LinAlgError`` when the inner matrix is not positive
    definite, which signals violated model assumptions.
    """
    m = model.modes[mode - 1]
    if p < ZERO_WEIGHT:
        return np.zeros((model.n, model.p_dim))
    Y = np.asarray(Y, dtype=float)
    phi = m.L @ Y @ m.L.T + p * (m.H @ m.H.T)
    try:
        w = spd_solve(phi, m.L @ Y @ m.A.T)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"inner matrix not positive definite for mode {mode} (p={p:.3e})"
        ) from None
    return w.T


def init_root_node(model: MjlsModel) -> NodeData:
    """Depth-0 node: p = pi0 and Y_i = pi0_i * Psi for each mode."""
    N, n = model.n_modes, model.n
    p = model.initial_dist.copy()
    reach = p >= ZERO_WEIGHT
    ybar = np.where(reach[:, None, None], model.init_cov[None], 0.0)
    Y = p[:, None, None] * ybar
    M = np.zeros((N, n, model.p_dim))
    for i in np.nonzero(reach)[0]:
        M[i] = compute_gain(Y[i], p[i], i + 1, model)
    return NodeData(path=(), p=p, Y=Y, Ybar=ybar, reachable=reach, M=M)


def riccati_step(parent: NodeData, ell: int, model: MjlsModel,
                 clustering: Clustering) -> NodeData:
    """One step of the coupled Riccati recursion, in raw (unnormalized) form.

    For each child mode i:

        Y_i = sum over j in cluster ell with p_j > 0 of
              P[j, i] * ( A_j Y_j A_j' + p_j G_j G_j'
                          - A_j Y_j L_j' (L_j Y_j L_j' + p_j H_j H_j')^{-1} L_j Y_j A_j' )

    This route exists independently of the batched normalized construction
    in :func:`build_tree`; the two are cross-checked in the test-suite.
    """
    if not 1 <= int(ell) <= clustering.n_clusters:
        raise ValueError(f"cluster index {ell} out of range 1..{clustering.n_clusters}")
    N, n = model.n_modes, model.n
    block = clustering.blocks0()[int(ell) - 1]
    p_child = parent.p[block] @ model.transition[block, :]
    Y_child = np.zeros((N, n, n))
    for j in block:
        pj = parent.p[j]
        if pj < ZERO_WEIGHT:
            continue
        m = model.modes[j]
        Yj = parent.Y[j]
        phi = m.L @ Yj @ m.L.T + pj * (m.H @ m.H.T)
        try:
            w = spd_solve(phi, m.L @ Yj @ m.A.T)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                f"inner matrix not positive definite at path {parent.path}, mode {j + 1}"
            ) from None
        update = m.A @ Yj @ m.A.T + pj * (m.G @ m.G.T) - (m.L @ Yj @ m.A.T).T @ w
        Y_child += model.transition[j][:, None, None] * update[None]
    Y_child = _symmetrize(Y_child)
    reach = p_child >= ZERO_WEIGHT
    Y_child[~reach] = 0.0
    ybar = np.zeros_like(Y_child)
    ybar[reach] = Y_child[reach] / p_child[reach, None, None]
    M = np.zeros((N, n, model.p_dim))
    for i in np.nonzero(reach)[0]:
        M[i] = compute_gain(Y_child[i], p_child[i], i + 1, model)
    return NodeData(path=parent.path + (int(ell),), p=p_child, Y=Y_child,
                    Ybar=ybar, reachable=reach, M=M)


# ---------------------------------------------------------------------------
# Batched construction
# ---------------------------------------------------------------------------

def _storage_scalars(N: int, n: int, p_dim: int, n_clusters: int, s: int) -> int:
    nodes_all = sum(n_clusters ** k for k in range(s + 1))
    nodes_gain = sum(n_clusters ** k for k in range(s))
    return nodes_all * N * (1 + n * n) + nodes_gain * N * n * p_dim


def _budget(budget_scalars: int | None) -> int:
    if budget_scalars is not None:
        return int(budget_scalars)
    env = os.environ.get(BUDGET_ENV_VAR)
    return int(env) if env else DEFAULT_BUDGET_SCALARS


def _check_budget(model: MjlsModel, n_clusters: int, s: int, budget_scalars: int | None):
    need = _storage_scalars(model.n_modes, model.n, model.p_dim, n_clusters, s)
    cap = _budget(budget_scalars)
    if need > cap:
        nc, N = n_clusters, model.n_modes
        gains = s * N if nc == 1 else N * (nc ** s - 1) // (nc - 1)
        raise BudgetExceededError(
            f"tree for n_clusters={nc}, s={s} needs {need} stored scalars "
            f"({gains} gain matrices; storage grows as N*n_clusters^k per depth), "
            f"exceeding the budget of {cap}; raise {BUDGET_ENV_VAR} to override"
        )


def _gain_and_update_batch(stacks: _Stacks, ybar: np.ndarray, reach: np.ndarray):
    """Per-(node, mode) optimal gains and Riccati updates of the normalized moments.

    Only reachable pairs are factorized; returns (gains, updates, count) with
    zeros in the unreachable slots.
    """
    m, N = reach.shape
    n = ybar.shape[-1]
    p_dim = stacks.L.shape[1]
    gains = np.zeros((m, N, n, p_dim))
    updates = np.zeros((m, N, n, n))
    nodes, modes = np.nonzero(reach)
    if nodes.size == 0:
        return gains, updates, 0
    Yb = ybar[nodes, modes]
    A, L = stacks.A[modes], stacks.L[modes]
    LY = L @ Yb
    LYAt = LY @ _t(A)
    phi = LY @ _t(L) + stacks.HHt[modes]
    try:
        w = spd_solve(phi, LYAt)
    except np.linalg.LinAlgError:
        bad = _first_non_pd(phi)
        raise np.linalg.LinAlgError(
            "inner matrix not positive definite at node index "
            f"{nodes[bad]}, mode {modes[bad] + 1}"
        ) from None
    M = _t(w)
    upd = A @ Yb @ _t(A) + stacks.GGt[modes] - M @ LYAt
    gains[nodes, modes] = M
    updates[nodes, modes] = upd
    return gains, updates, int(nodes.size)


def _first_non_pd(phi: np.ndarray) -> int:
    for idx in range(phi.shape[0]):
        try:
            np.linalg.cholesky(phi[idx])
        except np.linalg.LinAlgError:
            return idx
    return 0


def _children(P: np.ndarray, blocks0, p_k: np.ndarray, updates: np.ndarray):
    """Mix per-parent-mode updates into every child (cluster, mode) slot.

    Child weights are w_j = p_j * P[j, i] normalized to sum exactly one over
    the contributing parent modes, absorbing rounding in the probability
    recursion.
    """
    m, N = p_k.shape
    nc = len(blocks0)
    n = updates.shape[-1]
    p_next = np.empty((m * nc, N))
    yb_next = np.empty((m * nc, N, n, n))
    for c, block in enumerate(blocks0):
        alpha = p_k[:, block]
        w_raw = alpha[:, :, None] * P[block, :][None]
        p_child = w_raw.sum(axis=1)
        w = np.where(alpha[:, :, None] >= ZERO_WEIGHT, w_raw, 0.0)
        tot = w.sum(axis=1, keepdims=True)
        w = np.divide(w, tot, out=np.zeros_like(w), where=tot >= ZERO_WEIGHT)
        yb = np.einsum("xjI,xjab->xIab", w, updates[:, block])
        yb = _symmetrize(yb)
        yb[p_child < ZERO_WEIGHT] = 0.0
        p_next[c::nc] = p_child
        yb_next[c::nc] = yb
    return p_next, yb_next


def build_tree(model: MjlsModel, clustering: Clustering, s: int, *,
               budget_scalars: int | None = None) -> GainTree:
    """Precompute the full gain tree for horizon ``s``.

    Populates every node at depths 0..s with (p, Y) and stores the gains the
    horizon-s filter applies (depths 0..s-1).  Construction is deterministic.
    Refuses to allocate when the depth-major storage would exceed the scalar
    budget (``budget_scalars`` argument, else ``CLMMSE_BUDGET_SCALARS``, else
    2**26).
    """
    if s < 0:
        raise ValueError("horizon must be >= 0")
    if clustering.n_modes != model.n_modes:
        raise ValueError(
            f"clustering is over {clustering.n_modes} modes, model has {model.n_modes}"
        )
    _check_budget(model, clustering.n_clusters, s, budget_scalars)
    stacks = mode_stacks(model)
    blocks0 = clustering.blocks0()
    P = model.transition

    p0 = model.initial_dist.reshape(1, -1).copy()
    reach0 = p0 >= ZERO_WEIGHT
    yb0 = np.where(reach0[:, :, None, None], model.init_cov[None, None], 0.0)
    p_by_depth = [p0]
    ybar_by_depth = [yb0]
    gain_by_depth: list[np.ndarray] = []
    factorizations = 0
    for _ in range(s):
        p_k = p_by_depth[-1]
        gains, updates, count = _gain_and_update_batch(
            stacks, ybar_by_depth[-1], p_k >= ZERO_WEIGHT
        )
        factorizations += count
        gain_by_depth.append(gains)
        p_next, yb_next = _children(P, blocks0, p_k, updates)
        p_by_depth.append(p_next)
        ybar_by_depth.append(yb_next)
    return GainTree(model, clustering, s, p_by_depth, ybar_by_depth,
                    gain_by_depth, factorizations)


# ---------------------------------------------------------------------------
# Moment propagation for arbitrary feasible gain policies
# ---------------------------------------------------------------------------

GainPolicy = Union["GainTree", Callable[[PathKey, int], np.ndarray]]


def zero_gain_policy(model: MjlsModel) -> Callable[[PathKey, int], np.ndarray]:
    """The trivial policy M = 0 (pure prediction)."""
    zero = np.zeros((model.n, model.p_dim))
    return lambda path, mode: zero


def _policy_gain_arrays(model: MjlsModel, clustering: Clustering, policy: GainPolicy,
                        s: int, p_by_depth: list[np.ndarray]) -> list[np.ndarray]:
    """Materialize a policy into depth-major gain arrays for reachable pairs."""
    if isinstance(policy, GainTree):
        if policy.clustering != clustering:
            raise ValueError("policy tree was built for a different clustering")
        if policy.horizon < s:
            raise ValueError(f"policy tree horizon {policy.horizon} < requested {s}")
        return [policy.gains(k) for k in range(s)]
    nc = clustering.n_clusters
    out = []
    for k in range(s):
        p_k = p_by_depth[k]
        gains = np.zeros((p_k.shape[0], model.n_modes, model.n, model.p_dim))
        for idx, i in zip(*np.nonzero(p_k >= ZERO_WEIGHT)):
            path = index_to_path(int(idx), k, nc)
            try:
                gains[idx, i] = np.asarray(policy(path, int(i) + 1), dtype=float).reshape(
                    model.n, model.p_dim
                )
            except KeyError:
                raise KeyError(
                    f"gain policy has no entry for reachable path {path}, mode {int(i) + 1}"
                ) from None
        out.append(gains)
    return out


def _probability_slabs(model: MjlsModel, clustering: Clustering, s: int) -> list[np.ndarray]:
    blocks0 = clustering.blocks0()
    nc = clustering.n_clusters
    P = model.transition
    p_by_depth = [model.initial_dist.reshape(1, -1).copy()]
    for _ in range(s):
        p_k = p_by_depth[-1]
        p_next = np.empty((p_k.shape[0] * nc, model.n_modes))
        for c, block in enumerate(blocks0):
            p_next[c::nc] = p_k[:, block] @ P[block, :]
        p_by_depth.append(p_next)
    return p_by_depth


def propagate_x(model: MjlsModel, clustering: Clustering, policy: GainPolicy,
                s: int) -> MomentTree:
    """Second moments X of the estimation error under an arbitrary feasible policy.

    ``policy`` is either a :class:`GainTree` (its stored gains are used) or a
    callable ``(path, mode) -> gain`` that must cover every reachable pair.
    With the tree's own optimal gains the result reproduces Y node for node;
    for any other feasible policy X dominates Y in the positive semidefinite
    order.
    """
    if s < 0:
        raise ValueError("horizon must be >= 0")
    p_by_depth = _probability_slabs(model, clustering, s)
    gain_by_depth = _policy_gain_arrays(model, clustering, policy, s, p_by_depth)
    stacks = mode_stacks(model)
    blocks0 = clustering.blocks0()
    P = model.transition

    reach0 = p_by_depth[0] >= ZERO_WEIGHT
    xb0 = np.where(reach0[:, :, None, None], model.init_cov[None, None], 0.0)
    xbar_by_depth = [xb0]
    for k in range(s):
        p_k = p_by_depth[k]
        reach = p_k >= ZERO_WEIGHT
        nodes, modes = np.nonzero(reach)
        updates = np.zeros_like(xbar_by_depth[-1])
        if nodes.size:
            Xb = xbar_by_depth[-1][nodes, modes]
            M = gain_by_depth[k][nodes, modes]
            F = stacks.A[modes] - M @ stacks.L[modes]
            D = stacks.G[modes] - M @ stacks.H[modes]
            updates[nodes, modes] = F @ Xb @ _t(F) + D @ _t(D)
        _, xb_next = _children(P, blocks0, p_k, updates)
        xbar_by_depth.append(xb_next)
    return MomentTree(model, clustering, s, p_by_depth, xbar_by_depth)


# ---------------------------------------------------------------------------
# Reference recursions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KalmanRun:
    """Riccati covariances Z(0..m) and gains K(0..m-1) along one mode path."""

    Z: tuple[np.ndarray, ...]
    K: tuple[np.ndarray, ...]


def kalman_reference(model: MjlsModel, theta_path: Sequence[int]) -> KalmanRun:
    """Path-wise Kalman recursion: Z(0) = Psi and, with j = theta(k),

        Z(k+1) = A_j Z A_j' + G_j G_j' - A_j Z L_j' (L_j Z L_j' + H_j H_j')^{-1} L_j Z A_j'
        K(k)   = A_j Z L_j' (L_j Z L_j' + H_j H_j')^{-1}
    """
    Z = [model.init_cov.copy()]
    K = []
    for j in theta_path:
        m = model.modes[int(j) - 1]
        Zk = Z[-1]
        phi = m.L @ Zk @ m.L.T + m.H @ m.H.T
        w = spd_solve(phi, m.L @ Zk @ m.A.T)
        K.append(w.T)
        Znext = m.A @ Zk @ m.A.T + m.G @ m.G.T - (m.L @ Zk @ m.A.T).T @ w
        Z.append(_symmetrize(Znext))
    return KalmanRun(Z=tuple(Z), K=tuple(K))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def model_digest(model: MjlsModel) -> str:
    doc = json.dumps(model_to_dict(model), separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()


def save_tree(tree: GainTree, path) -> None:
    """Write a gain tree to an NPZ container with a JSON header.

    Arrays round-trip bit-exactly; the header carries the format version,
    the full model document, its digest, the clustering, and the horizon.
    """
    header = {
        "format": TREE_FORMAT,
        "version": TREE_VERSION,
        "horizon": tree.horizon,
        "n_clusters": tree.n_clusters,
        "clustering": [list(b) for b in tree.clustering.clusters],
        "clustering_label": partition_label(tree.clustering),
        "model": model_to_dict(tree.model),
        "model_sha256": model_digest(tree.model),
        "factorization_count": tree.factorization_count,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for k in range(tree.horizon + 1):
        arrays[f"p_{k}"] = tree.probabilities(k)
        arrays[f"ybar_{k}"] = tree.conditional_moments(k)
    for k in range(tree.horizon):
        arrays[f"gain_{k}"] = tree.gains(k)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_tree(path) -> GainTree:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != TREE_FORMAT:
            raise ValueError(f"{path}: not a gain-tree container")
        if header.get("version") != TREE_VERSION:
            raise ValueError(
                f"{path}: unsupported container version {header.get('version')}"
            )
        model = model_from_dict(header["model"])
        clustering = Clustering(tuple(tuple(b) for b in header["clustering"]),
                                model.n_modes)
        s = int(header["horizon"])
        p_by_depth = [data[f"p_{k}"].copy() for k in range(s + 1)]
        ybar_by_depth = [data[f"ybar_{k}"].copy() for k in range(s + 1)]
        gain_by_depth = [data[f"gain_{k}"].copy() for k in range(s)]
    return GainTree(model, clustering, s, p_by_depth, ybar_by_depth,
                    gain_by_depth, header["factorization_count"])
