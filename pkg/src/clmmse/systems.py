"""Benchmark systems used by the test-suite and the experiment scripts."""

from __future__ import annotations

import numpy as np

from .model import MjlsModel, ModeMatrices


def three_mode_random_walk(l_gain: float = 1.0) -> MjlsModel:
    """Three identical scalar random-walk modes (A = 1, unit process noise).

    The state and output noises share one 2-vector w with G = [1, 0] and
    H = [0, 1], so G H' = 0 and G G' = H H' = 1.  ``l_gain`` scales the
    output map; with ``l_gain = 0`` the optimal filter is the open-loop
    predictor (all gains vanish).
    """
    mode = ModeMatrices(A=[[1.0]], G=[[1.0, 0.0]], L=[[l_gain]], H=[[0.0, 1.0]])
    return MjlsModel(
        n=1, p_dim=1, q_dim=2,
        modes=(mode, mode, mode),
        transition=[[0.5, 0.4, 0.1],
                    [1.0, 0.0, 0.0],
                    [0.5, 0.0, 0.5]],
        initial_dist=[0.5, 0.3, 0.2],
        init_mean=[0.0],
        init_cov=[[1.0]],
    )


def _four_mode(modes) -> MjlsModel:
    return MjlsModel(
        n=2, p_dim=1, q_dim=2,
        modes=modes,
        transition=[[0.3, 0.2, 0.1, 0.4],
                    [0.3, 0.2, 0.3, 0.2],
                    [0.1, 0.1, 0.5, 0.3],
                    [0.2, 0.2, 0.1, 0.5]],
        initial_dist=[0.25, 0.25, 0.25, 0.25],
        init_mean=[0.0, 0.0],
        init_cov=[[1.0, 0.0], [0.0, 1.0]],
    )


def four_mode_benchmark() -> MjlsModel:
    """Four-mode planar benchmark; the modes differ only in two entries of A.

    The scalar output noise lives on the second channel of w (H = [0, 1])
    while the process noise drives the first (G column 0), keeping G H' = 0.
    The initial law is uniform with zero mean and unit covariance.
    """
    a = {
        1: [[0.0, -0.405], [0.81, 0.81]],
        2: [[0.0, -0.2673], [0.81, 1.134]],
        3: [[0.0, -0.81], [0.81, 0.972]],
        4: [[0.0, -0.1863], [0.81, 0.891]],
    }
    G = [[0.5, 0.0], [0.0, 0.0]]
    L = [[1.0, 0.0]]
    H = [[0.0, 1.0]]
    return _four_mode(tuple(ModeMatrices(A=a[i], G=G, L=L, H=H) for i in (1, 2, 3, 4)))


def four_mode_benchmark_scaled() -> MjlsModel:
    """The four-mode benchmark with every matrix of mode 4 multiplied by 10."""
    base = four_mode_benchmark()
    m4 = base.modes[3]
    scaled = ModeMatrices(A=10 * m4.A, G=10 * m4.G, L=10 * m4.L, H=10 * m4.H)
    return _four_mode(base.modes[:3] + (scaled,))
