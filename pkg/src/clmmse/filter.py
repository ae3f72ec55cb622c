"""Online execution of the clustered-information filter.

The estimator is a one-step predictor in Luenberger form,

    xhat(k+1) = A_theta(k) xhat(k) + M_k (y(k) - L_theta(k) xhat(k)),

with xhat(0) = xbar and M_k looked up in a prebuilt gain tree at the node
(rho(0..k-1), theta(k)).  The gain applied at time k is therefore a function
of the observed cluster path and the current mode only.  The equivalent
general recursive form z(k+1) = F_k z(k) + Gbar_k y(k) with
F_k = A - M_k L and Gbar_k = M_k is provided for cross-checking.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .markov import PathKey
from .model import MjlsModel, cluster_index
from .riccati import GainTree


@dataclass(frozen=True)
class FilterState:
    xhat: np.ndarray
    k: int
    path: PathKey  # observed clusters rho(0..k-1)


@dataclass(frozen=True)
class GeneralEstimatorState:
    z: np.ndarray
    k: int
    path: PathKey


def init_filter(model: MjlsModel) -> FilterState:
    return FilterState(xhat=model.init_mean.copy(), k=0, path=())


def _check_step(state, tree: GainTree):
    if state.k != len(state.path):
        raise ValueError("corrupt state: path length does not match time index")
    if state.k >= tree.horizon:
        raise ValueError(f"horizon exceeded: tree was built for s={tree.horizon}")


def filter_step(state: FilterState, theta_k: int, y_k, tree: GainTree) -> FilterState:
    """Advance the predictor one step on the observation (theta(k), y(k)).

    Raises ``UnreachableNodeError`` when the observed (path, mode) pair has
    probability zero under the model, and ``ValueError`` past the horizon.
    """
    _check_step(state, tree)
    M = tree.gain(state.path, theta_k)
    m = tree.model.modes[theta_k - 1]
    y = np.asarray(y_k, dtype=float).reshape(tree.model.p_dim)
    xhat = m.A @ state.xhat + M @ (y - m.L @ state.xhat)
    return FilterState(xhat=xhat, k=state.k + 1,
                       path=state.path + (cluster_index(tree.clustering, theta_k),))


def run_filter(model: MjlsModel, tree: GainTree, theta, y) -> np.ndarray:
    """Fold filter_step over (theta(0..m-1), y(0..m-1)); returns xhat(0..m)."""
    theta = np.asarray(theta, dtype=int)
    y = np.asarray(y, dtype=float).reshape(-1, model.p_dim)
    if theta.shape[0] != y.shape[0]:
        raise ValueError(f"theta has {theta.shape[0]} entries but y has {y.shape[0]}")
    state = init_filter(model)
    out = [state.xhat]
    for k in range(theta.shape[0]):
        state = filter_step(state, int(theta[k]), y[k], tree)
        out.append(state.xhat)
    return np.stack(out)


def init_general_estimator(model: MjlsModel) -> GeneralEstimatorState:
    return GeneralEstimatorState(z=model.init_mean.copy(), k=0, path=())


def general_form_step(state: GeneralEstimatorState, theta_k: int, y_k,
                      tree: GainTree) -> GeneralEstimatorState:
    """One step of z(k+1) = (A - M L) z(k) + M y(k) with the tree's gain."""
    _check_step(state, tree)
    M = tree.gain(state.path, theta_k)
    m = tree.model.modes[theta_k - 1]
    y = np.asarray(y_k, dtype=float).reshape(tree.model.p_dim)
    F = m.A - M @ m.L
    z = F @ state.z + M @ y
    return GeneralEstimatorState(z=z, k=state.k + 1,
                                 path=state.path + (cluster_index(tree.clustering, theta_k),))


def run_general_estimator(model: MjlsModel, tree: GainTree, theta, y) -> np.ndarray:
    theta = np.asarray(theta, dtype=int)
    y = np.asarray(y, dtype=float).reshape(-1, model.p_dim)
    state = init_general_estimator(model)
    out = [state.z]
    for k in range(theta.shape[0]):
        state = general_form_step(state, int(theta[k]), y[k], tree)
        out.append(state.z)
    return np.stack(out)


# ---------------------------------------------------------------------------
# Trajectory CSV interchange
# ---------------------------------------------------------------------------

def write_trajectory_csv(path, theta, y) -> None:
    """Rows k, theta, y_1..y_p for k = 0..m-1."""
    theta = np.asarray(theta, dtype=int)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    p_dim = y.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "theta"] + [f"y_{j + 1}" for j in range(p_dim)])
        for k in range(y.shape[0]):
            writer.writerow([k, int(theta[k])] + [repr(float(v)) for v in y[k]])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["k", "theta"]:
            raise ValueError(f"{path}: expected header k,theta,y_1,...")
        rows = [row for row in reader if row]
    theta = np.array([int(row[1]) for row in rows], dtype=int)
    y = np.array([[float(v) for v in row[2:]] for row in rows], dtype=float)
    return theta, y


def write_estimates_csv(path, xhat) -> None:
    """Rows k, xhat_1..xhat_n for k = 0..m."""
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    n = xhat.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k"] + [f"xhat_{j + 1}" for j in range(n)])
        for k in range(xhat.shape[0]):
            writer.writerow([k] + [repr(float(v)) for v in xhat[k]])
