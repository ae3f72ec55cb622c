"""Cluster-path probability bookkeeping and Markov chain sampling.

A cluster path is the tuple of 1-based cluster observations
``(rho(0), ..., rho(k-1))``.  The joint weights
``alpha[i] = Pr(rho(0)=l0, ..., rho(k-1)=l_{k-1}, theta(k)=i+1)`` are kept
unnormalized, exactly as the moment recursions consume them; conditional
quantities are formed on demand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Clustering, MjlsModel

PathKey = tuple[int, ...]

# Joint path-mode weights below this are treated as exactly zero by every
# branch condition (underflow guard for the "probability = 0" case split).
ZERO_WEIGHT = 1e-300


@dataclass(frozen=True)
class PathDistribution:
    """Unnormalized joint law of (cluster path, current mode)."""

    path: PathKey
    alpha: np.ndarray  # length N; alpha[i] pairs the path with theta(k) = i+1

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "path", tuple(int(l) for l in self.path))


def root_distribution(model: MjlsModel) -> PathDistribution:
    """Depth-0 weights: the initial mode law under the empty path."""
    return PathDistribution(path=(), alpha=model.initial_dist)


def step_distribution(parent: PathDistribution, ell: int, model: MjlsModel,
                      clustering: Clustering) -> PathDistribution:
    """Extend a path by observing cluster ``ell`` at the parent's time step.

    child alpha[i] = sum over modes j in cluster ell of parent.alpha[j] * P[j, i].
    An all-zero child is valid data: it marks a path the chain cannot take.
    """
    if not 1 <= int(ell) <= clustering.n_clusters:
        raise ValueError(f"cluster index {ell} out of range 1..{clustering.n_clusters}")
    block = clustering.blocks0()[int(ell) - 1]
    alpha = parent.alpha[block] @ model.transition[block, :]
    return PathDistribution(path=parent.path + (int(ell),), alpha=alpha)


def marginal_mode_distribution(model: MjlsModel, k: int) -> np.ndarray:
    """Law of theta(k) with the cluster observations marginalized out."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return model.initial_dist @ np.linalg.matrix_power(model.transition, int(k))


def stream(seed: int, trial: int = 0, purpose: int = 0) -> np.random.Generator:
    """Reproducible generator addressed by (seed, trial, purpose).

    Streams with distinct addresses are statistically independent, so
    parallel work can draw from disjoint addresses with no shared state.
    Determinism holds per build of numpy; cross-build bit-equality is not
    promised.
    """
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(purpose)))
    )


def sample_chain(model: MjlsModel, s: int, rng: np.random.Generator) -> np.ndarray:
    """Draw theta(0..s) (1-based modes) from the chain."""
    if s < 0:
        raise ValueError("s must be >= 0")
    theta = np.empty(s + 1, dtype=np.int64)
    cum0 = np.cumsum(model.initial_dist)
    theta[0] = min(int(np.searchsorted(cum0, rng.random(), side="right")), model.n_modes - 1) + 1
    for k in range(s):
        row = np.cumsum(model.transition[theta[k] - 1])
        theta[k + 1] = min(int(np.searchsorted(row, rng.random(), side="right")),
                           model.n_modes - 1) + 1
    return theta
