"""Shared generators for randomized models, clusterings, and gain policies."""

import numpy as np

from clmmse.model import Clustering, MjlsModel, ModeMatrices


def make_random_model(rng, max_modes=4, max_n=3, max_p=2, structural_zeros=False):
    """A random admissible model: G H' = 0 holds structurally (disjoint noise
    channels) and H H' > 0 is guaranteed by a diagonal block of H."""
    N = int(rng.integers(1, max_modes + 1))
    n = int(rng.integers(1, max_n + 1))
    p = int(rng.integers(1, max_p + 1))
    qg = int(rng.integers(1, 3))
    qh = p + int(rng.integers(0, 2))
    q = qg + qh
    modes = []
    for _ in range(N):
        A = rng.uniform(-1.0, 1.0, (n, n))
        rho = max(abs(np.linalg.eigvals(A)).max(), 1e-3)
        A = A / max(1.0, 1.1 * rho)
        G = np.zeros((n, q))
        G[:, :qg] = rng.uniform(-1.0, 1.0, (n, qg))
        H = np.zeros((p, q))
        H[:, qg:qg + p] = np.diag(rng.uniform(0.8, 1.6, p))
        H[:, qg + p:] = 0.3 * rng.uniform(-1.0, 1.0, (p, qh - p))
        L = rng.uniform(-1.0, 1.0, (p, n))
        modes.append(ModeMatrices(A=A, G=G, L=L, H=H))
    P = rng.uniform(0.05, 1.0, (N, N))
    pi0 = rng.uniform(0.05, 1.0, N)
    if structural_zeros and N >= 2:
        P[int(rng.integers(0, N)), int(rng.integers(0, N))] = 0.0
        pi0[int(rng.integers(0, N))] = 0.0
        P = np.where(P.sum(axis=1, keepdims=True) > 0, P, 1.0)
    P /= P.sum(axis=1, keepdims=True)
    pi0 /= pi0.sum()
    B = rng.uniform(-1.0, 1.0, (n, n))
    return MjlsModel(
        n=n, p_dim=p, q_dim=q, modes=tuple(modes),
        transition=P, initial_dist=pi0,
        init_mean=rng.uniform(-1.0, 1.0, n),
        init_cov=B @ B.T + 0.1 * np.eye(n),
    )


def random_clustering(rng, n_modes):
    """A uniform-ish random set partition of {1..n_modes}."""
    labels = [0]
    for _ in range(1, n_modes):
        labels.append(int(rng.integers(0, max(labels) + 2)))
    blocks = [[] for _ in range(max(labels) + 1)]
    for i, b in enumerate(labels):
        blocks[b].append(i + 1)
    return Clustering(tuple(tuple(b) for b in blocks), n_modes)


def raw_moments(tree, k):
    """Joint second moments Y at depth k, shape (nodes, N, n, n)."""
    return tree.probabilities(k)[:, :, None, None] * tree.conditional_moments(k)


def rel_fro(a, b, floor=1e-300):
    """Relative Frobenius distance max over leading axes."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    num = np.sqrt(((a - b) ** 2).sum(axis=(-2, -1)))
    den = np.maximum(
        np.maximum(np.sqrt((a ** 2).sum(axis=(-2, -1))),
                   np.sqrt((b ** 2).sum(axis=(-2, -1)))),
        floor,
    )
    return float((num / den).max())
