"""Trajectory sampling and Monte Carlo estimation of filter errors.

A single noise vector w(k) ~ N(0, I) drives both the state and the output at
step k, exactly as the plant is defined; G H' = 0 keeps the two components
orthogonal.  Monte Carlo runs draw all trials as one batch from streams
addressed by (seed, purpose), with the trial index selecting a fixed row of
the batch, so results are deterministic given the seed and invariant to how
trials would be scheduled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .markov import PathKey, ZERO_WEIGHT, stream
from .model import Clustering, MjlsModel
from .riccati import (GainPolicy, GainTree, _policy_gain_arrays, _probability_slabs,
                      mode_stacks, index_to_path)

PURPOSE_CHAIN = 0
PURPOSE_INIT = 1
PURPOSE_NOISE = 2


@dataclass(frozen=True)
class Trajectory:
    theta: np.ndarray  # (s+1,) 1-based modes
    x: np.ndarray      # (s+1, n)
    y: np.ndarray      # (s, p)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int


def psd_sqrt(psi: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix via its eigendecomposition."""
    w, v = np.linalg.eigh(np.asarray(psi, dtype=float))
    if w.size and w[0] < -1e-9 * max(1.0, abs(w[-1])):
        raise np.linalg.LinAlgError(f"covariance not PSD (min eig {w[0]:.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_trajectory(model: MjlsModel, s: int, rng: np.random.Generator) -> Trajectory:
    """Draw one trajectory: theta, then x(0), then the shared noises w(0..s-1)."""
    from .markov import sample_chain

    theta = sample_chain(model, s, rng)
    root = psd_sqrt(model.init_cov)
    x = np.empty((s + 1, model.n))
    y = np.empty((s, model.p_dim))
    x[0] = model.init_mean + root @ rng.standard_normal(model.n)
    w = rng.standard_normal((s, model.q_dim))
    for k in range(s):
        m = model.modes[theta[k] - 1]
        y[k] = m.L @ x[k] + m.H @ w[k]
        x[k + 1] = m.A @ x[k] + m.G @ w[k]
    return Trajectory(theta=theta, x=x, y=y)


# ---------------------------------------------------------------------------
# Batched sampling and filtering
# ---------------------------------------------------------------------------

def _sample_chains_batch(model, s, trials, rng) -> np.ndarray:
    """(trials, s+1) array of 0-based modes."""
    theta = np.empty((trials, s + 1), dtype=np.int64)
    cum0 = np.cumsum(model.initial_dist)
    theta[:, 0] = np.minimum(
        np.searchsorted(cum0, rng.random(trials), side="right"), model.n_modes - 1
    )
    cum = np.cumsum(model.transition, axis=1)
    for k in range(s):
        rows = cum[theta[:, k]]
        u = rng.random(trials)
        theta[:, k + 1] = np.minimum(
            (u[:, None] >= rows).sum(axis=1), model.n_modes - 1
        )
    return theta

def _sample_batch(model: MjlsModel, s: int, trials: int, seed: int):
    """All trials at once: theta (trials, s+1) 0-based, x (trials, s+1, n), y (trials, s, p)."""
    theta = _sample_chains_batch(model, s, trials, stream(seed, 0, PURPOSE_CHAIN))
    root = psd_sqrt(model.init_cov)
    x0 = model.init_mean + stream(seed, 0, PURPOSE_INIT).standard_normal(
        (trials, model.n)
    ) @ root.T
    w = stream(seed, 0, PURPOSE_NOISE).standard_normal((trials, s, model.q_dim))
    stacks = mode_stacks(model)
    x = np.empty((trials, s + 1, model.n))
    y = np.empty((trials, s, model.p_dim))
    x[:, 0] = x0
    for k in range(s):
        A = stacks.A[theta[:, k]]
        G = stacks.G[theta[:, k]]
        L = stacks.L[theta[:, k]]
        H = stacks.H[theta[:, k]]
        y[:, k] = (L @ x[:, k, :, None] + H @ w[:, k, :, None])[..., 0]
        x[:, k + 1] = (A @ x[:, k, :, None] + G @ w[:, k, :, None])[..., 0]
    return theta, x, y


def _filter_batch(model, clustering, gain_by_depth, theta, y):
    """Vectorized predictor over all trials; returns xhat (trials, s+1, n) and
    node_idx (trials, s+1), the depth-major index of each trial's cluster path."""
    trials, s = y.shape[0], y.shape[1]
    nc = clustering.n_clusters
    block_of_mode = np.empty(model.n_modes, dtype=np.int64)
    for c, b in enumerate(clustering.blocks0()):
        block_of_mode[b] = c
    stacks = mode_stacks(model)
    xhat = np.empty((trials, s + 1, model.n))
    xhat[:, 0] = model.init_mean
    node_idx = np.zeros((trials, s + 1), dtype=np.int64)
    for k in range(s):
        th = theta[:, k]
        M = gain_by_depth[k][node_idx[:, k], th]
        A, L = stacks.A[th], stacks.L[th]
        innov = y[:, k, :, None] - L @ xhat[:, k, :, None]
        xhat[:, k + 1] = (A @ xhat[:, k, :, None] + M @ innov)[..., 0]
        node_idx[:, k + 1] = node_idx[:, k] * nc + block_of_mode[th]
    return xhat, node_idx


def monte_carlo_mse(model: MjlsModel, clustering: Clustering, tree: GainTree,
                    s: int, trials: int, seed: int) -> McEstimate:
    """Sample mean of ||x(s) - xhat(s)||^2 over independent trials."""
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    if tree.horizon < s:
        raise ValueError(f"tree horizon {tree.horizon} < requested s={s}")
    if tree.clustering != clustering:
        raise ValueError("tree was built for a different clustering")
    theta, x, y = _sample_batch(model, s, trials, seed)
    gains = [tree.gains(k) for k in range(s)]
    xhat, _ = _filter_batch(model, clustering, gains, theta, y)
    sq = ((x[:, s] - xhat[:, s]) ** 2).sum(axis=1)
    return McEstimate(
        mean=float(sq.mean()),
        std_error=float(sq.std(ddof=1) / np.sqrt(trials)),
        trials=int(trials),
        seed=int(seed),
    )


def empirical_path_moments(model: MjlsModel, clustering: Clustering, policy: GainPolicy,
                           s: int, trials: int, seed: int):
    """Sample estimates of the joint moments E[xtilde xtilde' 1{path, mode}].

    Returns a dict mapping (path, mode) to (matrix, count) for every depth
    0..s, where matrix = per-cell sum of outer products divided by the total
    number of trials (so unreachable cells estimate the zero matrix).
    """
    n_cells = clustering.n_clusters ** s * model.n_modes
    if trials < 100 * n_cells:
        warnings.warn(
            f"only {trials} trials for {n_cells} depth-{s} cells; "
            "expected per-cell counts fall below 100", stacklevel=2,
        )
    p_by_depth = _probability_slabs(model, clustering, s)
    gains = _policy_gain_arrays(model, clustering, policy, s, p_by_depth)
    theta, x, y = _sample_batch(model, s, trials, seed)
    xhat, node_idx = _filter_batch(model, clustering, gains, theta, y)
    err = x - xhat
    nc = clustering.n_clusters
    out: dict[tuple[PathKey, int], tuple[np.ndarray, int]] = {}
    for k in range(s + 1):
        cell = node_idx[:, k] * model.n_modes + theta[:, k]
        sums = np.zeros((nc ** k * model.n_modes, model.n, model.n))
        counts = np.zeros(nc ** k * model.n_modes, dtype=np.int64)
        outer = err[:, k, :, None] * err[:, k, None, :]
        np.add.at(sums, cell, outer)
        np.add.at(counts, cell, 1)
        for flat in range(sums.shape[0]):
            path = index_to_path(flat // model.n_modes, k, nc)
            mode = flat % model.n_modes + 1
            out[(path, mode)] = (sums[flat] / trials, int(counts[flat]))
    return out
