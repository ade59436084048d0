"""Independent dense-matrix reference implementations for the tests.

Deliberately naive: full 9x9/3x9 products and an explicit 3x3 inverse,
so the production code (index tricks, Cholesky solves, fused kernels) is
checked against straightforward textbook arithmetic rather than itself.
"""

import numpy as np


def transition(dt: float) -> np.ndarray:
    block = np.array([
        [1.0, dt, 0.5 * dt * dt],
        [0.0, 1.0, dt],
        [0.0, 0.0, 1.0],
    ])
    return np.kron(np.eye(3), block)


def observation() -> np.ndarray:
    H = np.zeros((3, 9))
    H[0, 0] = H[1, 3] = H[2, 6] = 1.0
    return H


def step_reference(x, P, z, dt, Q, R):
    """Full predict + update cycle, dense matrices throughout.

    Returns (x_post, P_post, innovation, nis).
    """
    A = transition(dt)
    H = observation()
    x_prior = A @ x
    P_prior = A @ P @ A.T + Q
    P_prior = 0.5 * (P_prior + P_prior.T)
    S = H @ P_prior @ H.T + R
    S_inv = np.linalg.inv(S)
    K = P_prior @ H.T @ S_inv
    nu = z - H @ x_prior
    x_post = x_prior + K @ nu
    P_post = (np.eye(9) - K @ H) @ P_prior
    P_post = 0.5 * (P_post + P_post.T)
    nis = float(nu @ S_inv @ nu)
    return x_post, P_post, nu, nis


def splitmix64_reference(seed: int, index: int) -> int:
    """Plain-integer splitmix64 for counter `index` (1-based), no numpy."""
    mask = (1 << 64) - 1
    z = (seed + index * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


def random_psd(rng, n, scale=1.0):
    """Random symmetric positive semidefinite matrix."""
    B = rng.standard_normal((n, n))
    return scale * (B @ B.T) / n
