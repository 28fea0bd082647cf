"""Shared oracles and builders for the test suite.

The oracles here are deliberately independent of the library's own code
paths: dense matrices for the grid operators, an interior-point solve for
the TV prox, and closed-form prox maps for the toy two-block problem used
to exercise the solver engine without inner-solver noise.
"""

import numpy as np
import pytest

from ibalm.bregman import EUCLIDEAN, KernelSpec, ProblemSpec


def dense_grad_matrix(m: int, n: int) -> np.ndarray:
    """Stacked [Dx; Dy] forward-difference matrix with wrap-around, acting
    on row-major flattened images."""
    N = m * n
    A = np.zeros((2 * N, N))
    for i in range(m):
        for j in range(n):
            row = i * n + j
            A[row, ((i + 1) % m) * n + j] += 1.0
            A[row, row] -= 1.0
            A[N + row, i * n + ((j + 1) % n)] += 1.0
            A[N + row, row] -= 1.0
    return A


def field_to_stacked(p: np.ndarray) -> np.ndarray:
    return np.concatenate([p[0].ravel(), p[1].ravel()])


def tv_prox_oracle(c: np.ndarray, tau: float) -> np.ndarray:
    """Brute-force reference for argmin TV(l) + tau/2 |l - c|^2 via an
    interior-point SOCP solve (independent of the ADMM path)."""
    cp = pytest.importorskip("cvxpy")
    m, n = c.shape
    l = cp.Variable((m, n))
    dx = cp.vstack([l[(i + 1) % m, :] - l[i, :] for i in range(m)])
    dy = cp.hstack(
        [cp.reshape(l[:, (j + 1) % n] - l[:, j], (m, 1), order="C") for j in range(n)]
    )
    stacked = cp.vstack(
        [cp.reshape(dx, (1, m * n), order="C"), cp.reshape(dy, (1, m * n), order="C")]
    )
    objective = cp.sum(cp.norm(stacked, axis=0)) + tau / 2 * cp.sum_squares(l - c)
    cp.Problem(cp.Minimize(objective)).solve(
        solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12
    )
    return np.asarray(l.value)


def quadratic_problem(a1: float, a2: float, beta: float, offset: np.ndarray) -> ProblemSpec:
    """Two-block toy: theta_i = a_i/2 |x_i|^2 around a quadratic coupling
    beta/2 |x1 - x2 - offset|^2.  Both prox maps are exact closed forms, so
    engine tests see no inner-solver error."""

    def prox1(u, tilt, tau, kernel, other):
        return (tau * u - tilt) / (a1 + tau)

    def prox2(u, tilt, tau, kernel, other):
        return (tau * u - tilt) / (a2 + tau)

    return ProblemSpec(
        theta1_prox_solver=prox1,
        theta2_prox_solver=prox2,
        grad_h_minus_x1=lambda x1, x2: -beta * (x1 - x2 - offset),
        grad_h_minus_x2=lambda x1, x2: beta * (x1 - x2 - offset),
        lip1=lambda x2: beta,
        lip2=lambda x1: beta,
        phi_value=lambda x1, x2: float(
            0.5 * a1 * (x1 ** 2).sum()
            + 0.5 * beta * ((x1 - x2 - offset) ** 2).sum()
            + 0.5 * a2 * (x2 ** 2).sum()
        ),
    )


@pytest.fixture
def euclidean_kernels() -> tuple[KernelSpec, KernelSpec]:
    return (KernelSpec(EUCLIDEAN), KernelSpec(EUCLIDEAN))


def synthetic_lowlight(m: int, n: int, gamma: float = 2.5) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic bright/dark pair: a smooth shaded scene and its
    gamma-darkened observation."""
    yy, xx = np.meshgrid(np.linspace(0, 1, m), np.linspace(0, 1, n), indexing="ij")
    bright = np.clip(
        0.3 + 0.35 * xx + 0.25 * np.exp(-((xx - 0.6) ** 2 + (yy - 0.4) ** 2) / 0.08)
        + 0.1 * np.sin(6 * np.pi * xx) * np.sin(4 * np.pi * yy),
        0.05, 0.98,
    )
    return bright, bright ** gamma
