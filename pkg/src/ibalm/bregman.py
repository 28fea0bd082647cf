"""Inertial Bregman alternating linearized minimization (iBALM).

Generic two-block engine for objectives of the form
``Phi(x1, x2) = theta1(x1) + h+(x1, x2) - h-(x1, x2) + theta2(x2)``:
each outer iteration extrapolates both blocks, folds the gradient of the
concave part ``h-`` into a linear tilt, and solves one Bregman proximal
subproblem per block.  Alongside the iterates the engine evaluates the two
inequalities that certify a run: the Lyapunov descent of the auxiliary
function Theta and the bound on an explicit subgradient element of Theta,
both recorded per iteration in the trace.

The step-size schedule is not free: ``tau_i^k`` is derived from the
extrapolation bounds through the delta constants (see :func:`compute_delta`
and :func:`compute_tau`), and the engine aborts with a diagnostic error if
the resulting run ever violates the descent inequality beyond tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "EUCLIDEAN",
    "METRIC_QUADRATIC",
    "KernelSpec",
    "ProblemSpec",
    "SolverParams",
    "IterateState",
    "TraceRow",
    "IterateTrace",
    "DescentReport",
    "DescentViolationError",
    "SubproblemError",
    "compute_delta",
    "compute_tau",
    "tau_upper_bounds",
    "extrapolate",
    "theta_value",
    "ibalm_step",
    "ibalm_solve",
    "ama_solve",
    "descent_check",
    "subgradient_residual",
    "lemma2_gamma",
    "experimental_tau_preset",
    "TRACE_CSV_HEADER",
]

EUCLIDEAN = "euclidean"
METRIC_QUADRATIC = "metric_quadratic"

# Relative tolerance absorbing inner-solver inexactness in the descent check.
DESCENT_RTOL = 1e-8

GradFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
LipFn = Callable[[np.ndarray], float]
# prox solver: (u, tilt, tau, kernel, other_block) -> minimizer of
#   g(x) + <x, tilt> + tau * D_kernel(x, u)
ProxFn = Callable[[np.ndarray, np.ndarray, float, "KernelSpec", np.ndarray], np.ndarray]


class DescentViolationError(RuntimeError):
    """The Lyapunov function increased beyond tolerance; parameters are off."""

    def __init__(self, k: int, margin: float, tolerance: float, theta: float):
        self.k = k
        self.margin = margin
        self.tolerance = tolerance
        self.theta = theta
        super().__init__(
            f"descent violated at iteration {k}: margin {margin:.3e} "
            f"< -{tolerance:.3e} (Theta = {theta:.6e})"
        )


class SubproblemError(RuntimeError):
    """An inner subproblem solver failed to converge."""


@dataclass(frozen=True)
class KernelSpec:
    """Bregman kernel of one block.

    ``euclidean`` means ``psi = |.|^2 / 2`` (gradient is the identity, both
    moduli equal 1).  ``metric_quadratic`` means ``psi = |.|^2_M / 2`` for a
    symmetric positive definite map applied by ``metric_apply(x, tau)``; the
    map may depend on the current step size ``tau``.  ``strong_convexity`` is
    a lower bound on the smallest eigenvalue valid for every ``tau`` the
    solver will use, and ``gradient_lipschitz`` bounds the largest one
    (a callable of ``tau`` when the metric is step-size dependent).
    """

    kind: str = EUCLIDEAN
    metric_apply: Callable[[np.ndarray, float], np.ndarray] | None = None
    strong_convexity: float = 1.0
    gradient_lipschitz: float | Callable[[float], float] = 1.0

    def __post_init__(self):
        if self.kind == EUCLIDEAN:
            if self.metric_apply is not None:
                raise ValueError("euclidean kernel takes no metric_apply")
            if self.strong_convexity != 1.0 or self.gradient_lipschitz != 1.0:
                raise ValueError("euclidean kernel has unit moduli")
        elif self.kind == METRIC_QUADRATIC:
            if self.metric_apply is None:
                raise ValueError("metric_quadratic kernel requires metric_apply")
            if self.strong_convexity <= 0:
                raise ValueError("strong_convexity must be positive")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def grad(self, x: np.ndarray, tau: float) -> np.ndarray:
        """Gradient of the kernel at ``x`` for the step size ``tau``."""
        if self.kind == EUCLIDEAN:
            return x
        return self.metric_apply(x, tau)

    def lipschitz(self, tau: float) -> float:
        gl = self.gradient_lipschitz
        return float(gl(tau)) if callable(gl) else float(gl)


@dataclass(frozen=True)
class ProblemSpec:
    """Callbacks describing one two-block composite problem.

    ``grad_h_minus_x1(x1, x2)`` and ``grad_h_minus_x2(x1, x2)`` are the
    partial gradients of the concave part; ``lip1(x2)`` / ``lip2(x1)`` return
    their partial Lipschitz moduli, which must stay within the caps declared
    in :class:`SolverParams`.  ``grad_h_plus_*`` may be omitted when the
    convex smooth part is zero.  The objective must be bounded below on the
    iterates; the engine checks finiteness along the run.
    """

    theta1_prox_solver: ProxFn
    theta2_prox_solver: ProxFn
    grad_h_minus_x1: GradFn
    grad_h_minus_x2: GradFn
    lip1: LipFn
    lip2: LipFn
    phi_value: Callable[[np.ndarray, np.ndarray], float]
    grad_h_plus_x1: GradFn | None = None
    grad_h_plus_x2: GradFn | None = None


def _constant_pair(value) -> tuple:
    if np.isscalar(value):
        return (float(value), float(value))
    a, b = value
    return (float(a), float(b))


@dataclass(frozen=True)
class SolverParams:
    """Extrapolation bounds, schedules, and derived step-size data.

    ``alpha_bar`` must satisfy ``alpha_bar_i < (1 - epsilon) rho_i / 2``
    strictly; the constructor rejects violations.  ``lambda_plus`` caps the
    Lipschitz callbacks of the problem.  Schedules ``alpha_k`` / ``beta_k``
    may be a pair of constants or a pair of callables of the iteration
    index; ``None`` selects the defaults ``min(0.2, 0.99 alpha_bar_i)`` and
    ``min(0.5, beta_bar_i)``.

    The default bounds sit snugly above the default schedules
    (``alpha_bar = 0.2021 rho``, ``beta_bar = 0.5``) rather than at the
    loosest admissible values: the delta constants, and through them every
    step size, grow with the bounds, so slack bounds buy nothing but a
    slower schedule.
    """

    lambda_plus: tuple[float, float]
    epsilon: float = 0.1
    rho: tuple[float, float] = (1.0, 1.0)
    alpha_bar: tuple[float, float] | None = None
    beta_bar: tuple[float, float] | None = None
    alpha_k: tuple | float | None = None
    beta_k: tuple | float | None = None
    tau_floor: float = 1e-8
    max_iters: int = 500
    step_tol: float = 1e-5

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        object.__setattr__(self, "rho", _constant_pair(self.rho))
        object.__setattr__(self, "lambda_plus", _constant_pair(self.lambda_plus))
        if min(self.rho) <= 0:
            raise ValueError("strong-convexity moduli must be positive")
        if min(self.lambda_plus) < 0:
            raise ValueError("Lipschitz caps must be nonnegative")
        if self.alpha_bar is None:
            bar = tuple(min(0.2021, 0.99 * (1.0 - self.epsilon) / 2.0) * r
                        for r in self.rho)
            object.__setattr__(self, "alpha_bar", bar)
        else:
            object.__setattr__(self, "alpha_bar", _constant_pair(self.alpha_bar))
        if self.beta_bar is None:
            object.__setattr__(self, "beta_bar", (0.5, 0.5))
        else:
            object.__setattr__(self, "beta_bar", _constant_pair(self.beta_bar))
        for i in range(2):
            limit = (1.0 - self.epsilon) * self.rho[i] / 2.0
            if not 0.0 <= self.alpha_bar[i] < limit:
                raise ValueError(
                    f"alpha_bar[{i}] = {self.alpha_bar[i]} must lie in "
                    f"[0, {limit}) = [0, (1 - epsilon) rho / 2)"
                )
            if self.beta_bar[i] < 0:
                raise ValueError("beta_bar must be nonnegative")
        if self.tau_floor <= 0:
            raise ValueError("tau_floor must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_tol < 0:
            raise ValueError("step_tol must be nonnegative")

    def _schedule(self, spec, bars, k: int, name: str) -> tuple[float, float]:
        if spec is None:
            if name == "alpha":
                vals = tuple(min(0.2, 0.99 * b) for b in bars)
            else:
                vals = tuple(min(0.5, b) for b in bars)
        elif callable(spec):
            vals = _constant_pair(spec(k))
        elif np.isscalar(spec):
            vals = (float(spec), float(spec))
        else:
            vals = tuple(float(s(k)) if callable(s) else float(s) for s in spec)
        for i, v in enumerate(vals):
            if not 0.0 <= v <= bars[i] + 1e-15:
                raise ValueError(
                    f"{name}_k[{i}] = {v} at k = {k} leaves [0, {bars[i]}]"
                )
        return vals

    def alpha_at(self, k: int) -> tuple[float, float]:
        return self._schedule(self.alpha_k, self.alpha_bar, k, "alpha")

    def beta_at(self, k: int) -> tuple[float, float]:
        return self._schedule(self.beta_k, self.beta_bar, k, "beta")

    def with_zero_inertia(self) -> "SolverParams":
        """Same bounds, extrapolation schedules forced to zero."""
        return replace(self, alpha_k=(0.0, 0.0), beta_k=(0.0, 0.0))


def compute_delta(params: SolverParams) -> tuple[float, float]:
    """Per-block delta constants derived from the extrapolation bounds.

    ``delta_i = (alpha_bar_i + beta_bar_i rho_i) /
    ((1 - epsilon) rho_i - 2 alpha_bar_i) * lambda_plus_i``; the denominator
    is positive by construction of :class:`SolverParams`.
    """
    out = []
    for i in range(2):
        num = params.alpha_bar[i] + params.beta_bar[i] * params.rho[i]
        den = (1.0 - params.epsilon) * params.rho[i] - 2.0 * params.alpha_bar[i]
        out.append(num / den * params.lambda_plus[i])
    return (out[0], out[1])


def tau_upper_bounds(params: SolverParams) -> tuple[float, float]:
    """Upper bounds ``tau_i^+`` that the per-iteration step sizes never exceed."""
    d = compute_delta(params)
    out = []
    for i in range(2):
        num = (1.0 + params.epsilon) * d[i] + (1.0 + params.beta_bar[i]) * params.lambda_plus[i]
        out.append(max(num / (params.rho[i] - params.alpha_bar[i]), params.tau_floor))
    return (out[0], out[1])


def _tau_block(i: int, k: int, params: SolverParams, L: float,
               delta: tuple[float, float]) -> float:
    if not 0.0 <= L <= params.lambda_plus[i] * (1.0 + 1e-12) + 1e-300:
        raise ValueError(
            f"Lipschitz callback returned {L}, outside [0, {params.lambda_plus[i]}]"
        )
    a = params.alpha_at(k)[i]
    b = params.beta_at(k)[i]
    tau = ((1.0 + params.epsilon) * delta[i] + (1.0 + b) * L) / (params.rho[i] - a)
    return max(tau, params.tau_floor)


def compute_tau(k: int, params: SolverParams, L1: float, L2: float) -> tuple[float, float]:
    """Step sizes ``(tau_1^k, tau_2^k)`` for iteration ``k``.

    ``L1`` and ``L2`` are the current Lipschitz moduli of the concave-part
    gradients (block 2 evaluated at the fresh block-1 iterate); values
    outside the declared caps raise.  Results are floored at ``tau_floor``.
    """
    d = compute_delta(params)
    t1 = _tau_block(0, k, params, L1, d)
    t2 = _tau_block(1, k, params, L2, d)
    up = tau_upper_bounds(params)
    assert t1 <= up[0] * (1 + 1e-12) and t2 <= up[1] * (1 + 1e-12)
    return (t1, t2)


def experimental_tau_preset(epsilon: float, coupling_weight: float,
                            alpha_i: float, beta_i: float) -> float:
    """Looser closed-form step size used in the reported parameter study.

    Evaluates ``((1 + eps) / eps) (2.5 + beta_i - 2 eps) b / (1 - alpha_i)``
    for the quadratic coupling weight ``b``.  Reference preset only; the
    solver derives its steps from :func:`compute_tau`.
    """
    return (1.0 + epsilon) / epsilon * (2.5 + beta_i - 2.0 * epsilon) \
        * coupling_weight / (1.0 - alpha_i)


def extrapolate(x: np.ndarray, x_prev: np.ndarray, coeff: float) -> np.ndarray:
    """``x + coeff (x - x_prev)``."""
    x = np.asarray(x, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    if x.shape != x_prev.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_prev.shape}")
    if coeff < 0:
        raise ValueError("extrapolation coefficient must be nonnegative")
    return x + coeff * (x - x_prev)


@dataclass
class IterateState:
    """Current and previous iterates of both blocks plus the counter."""

    x1: np.ndarray
    x2: np.ndarray
    x1_prev: np.ndarray
    x2_prev: np.ndarray
    k: int = 0

    def __post_init__(self):
        if self.x1.shape != self.x1_prev.shape or self.x2.shape != self.x2_prev.shape:
            raise ValueError("current/previous iterate shapes differ")

    @classmethod
    def from_init(cls, x1: np.ndarray, x2: np.ndarray) -> "IterateState":
        """Start with zero initial inertia (previous iterates equal current)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return cls(x1.copy(), x2.copy(), x1.copy(), x2.copy(), k=0)

    def w_norm(self) -> float:
        return math.sqrt(
            float((self.x1 ** 2).sum()) + float((self.x2 ** 2).sum())
            + float((self.x1_prev ** 2).sum()) + float((self.x2_prev ** 2).sum())
        )


TRACE_CSV_HEADER = "iter,phi,theta,step_norm,tau1,tau2,descent_margin,subgrad_residual,elapsed_ms"


@dataclass
class TraceRow:
    k: int
    phi: float
    theta: float
    step_norm: float
    tau1: float
    tau2: float
    descent_margin: float
    subgrad_residual: float
    elapsed_ms: float


@dataclass
class IterateTrace:
    """Per-iteration diagnostics of one solver run."""

    initial_phi: float
    initial_theta: float
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def thetas(self, include_initial: bool = True) -> np.ndarray:
        vals = [r.theta for r in self.rows]
        return np.array(([self.initial_theta] if include_initial else []) + vals)

    def phis(self, include_initial: bool = True) -> np.ndarray:
        vals = [r.phi for r in self.rows]
        return np.array(([self.initial_phi] if include_initial else []) + vals)

    def step_norms(self) -> np.ndarray:
        return np.array([r.step_norm for r in self.rows])

    def write_csv(self, path, header_comment: str | None = None,
                  deterministic_elapsed: bool = False) -> None:
        """Write the trace; ``deterministic_elapsed`` zeroes the timing column
        so identical runs produce byte-identical files."""
        lines = []
        if header_comment is not None:
            lines.append("# " + header_comment)
        lines.append(TRACE_CSV_HEADER)
        for r in self.rows:
            ms = 0.0 if deterministic_elapsed else r.elapsed_ms
            lines.append(
                f"{r.k},{r.phi:.12e},{r.theta:.12e},{r.step_norm:.12e},"
                f"{r.tau1:.12e},{r.tau2:.12e},{r.descent_margin:.12e},"
                f"{r.subgrad_residual:.12e},{ms:.12e}"
            )
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def theta_value(state: IterateState, problem: ProblemSpec,
                delta: tuple[float, float], phi: float | None = None) -> float:
    """Auxiliary (Lyapunov) function: the objective plus weighted squared
    distances to the previous iterates."""
    if phi is None:
        phi = problem.phi_value(state.x1, state.x2)
    d1, d2 = delta
    return (
        float(phi)
        + 0.5 * d1 * float(((state.x1 - state.x1_prev) ** 2).sum())
        + 0.5 * d2 * float(((state.x2 - state.x2_prev) ** 2).sum())
    )


def _step(state: IterateState, problem: ProblemSpec, params: SolverParams,
          kernels: tuple[KernelSpec, KernelSpec], delta: tuple[float, float],
          inertia_on: bool = True) -> tuple[IterateState, float, float]:
    k = state.k
    a1, a2 = params.alpha_at(k)
    b1, b2 = params.beta_at(k)
    if not inertia_on:
        a1 = a2 = b1 = b2 = 0.0

    tau1 = _tau_block(0, k, params, float(problem.lip1(state.x2)), delta)
    y1 = extrapolate(state.x1, state.x1_prev, a1)
    z1 = extrapolate(state.x1, state.x1_prev, b1)
    t1 = -problem.grad_h_minus_x1(z1, state.x2) - tau1 * (y1 - state.x1)
    try:
        x1_new = problem.theta1_prox_solver(state.x1, t1, tau1, kernels[0], state.x2)
    except SubproblemError as err:
        raise SubproblemError(f"block-1 subproblem at iteration {k}: {err}") from err

    tau2 = _tau_block(1, k, params, float(problem.lip2(x1_new)), delta)
    y2 = extrapolate(state.x2, state.x2_prev, a2)
    z2 = extrapolate(state.x2, state.x2_prev, b2)
    t2 = -problem.grad_h_minus_x2(x1_new, z2) - tau2 * (y2 - state.x2)
    try:
        x2_new = problem.theta2_prox_solver(state.x2, t2, tau2, kernels[1], x1_new)
    except SubproblemError as err:
        raise SubproblemError(f"block-2 subproblem at iteration {k}: {err}") from err

    new = IterateState(x1_new, x2_new, state.x1, state.x2, k + 1)
    return new, tau1, tau2


def ibalm_step(state: IterateState, problem: ProblemSpec, params: SolverParams,
               kernels: tuple[KernelSpec, KernelSpec]) -> IterateState:
    """One outer iteration: block 1 then block 2, the latter seeing the
    fresh block-1 iterate."""
    new, _, _ = _step(state, problem, params, kernels, compute_delta(params))
    return new


def _step_norm_sq(old: IterateState, new: IterateState) -> float:
    return (
        float(((new.x1 - old.x1) ** 2).sum())
        + float(((new.x2 - old.x2) ** 2).sum())
        + float(((old.x1 - old.x1_prev) ** 2).sum())
        + float(((old.x2 - old.x2_prev) ** 2).sum())
    )


def subgradient_residual(state_k: IterateState, state_k1: IterateState,
                         problem: ProblemSpec, params: SolverParams,
                         kernels: tuple[KernelSpec, KernelSpec],
                         inertia_on: bool = True) -> float:
    """Norm of the explicit subgradient element of Theta at the new iterate.

    Rebuilds the extrapolation points and step sizes of the transition
    ``state_k -> state_k1`` from the schedules, substitutes the subproblem
    optimality conditions, and stacks the four component vectors.  Along a
    compliant run the result never exceeds ``lemma2_gamma(...) * step_norm``.
    Pass ``inertia_on=False`` for transitions produced by the zero-inertia
    baseline (extrapolation points collapse to the iterates while the step
    sizes keep the scheduled values).
    """
    k = state_k.k
    delta = compute_delta(params)
    a1, a2 = params.alpha_at(k)
    b1, b2 = params.beta_at(k)
    if not inertia_on:
        a1 = a2 = b1 = b2 = 0.0
    x1k, x2k = state_k.x1, state_k.x2
    x1n, x2n = state_k1.x1, state_k1.x2
    tau1 = _tau_block(0, k, params, float(problem.lip1(x2k)), delta)
    tau2 = _tau_block(1, k, params, float(problem.lip2(x1n)), delta)
    y1 = extrapolate(x1k, state_k.x1_prev, a1)
    z1 = extrapolate(x1k, state_k.x1_prev, b1)
    y2 = extrapolate(x2k, state_k.x2_prev, a2)
    z2 = extrapolate(x2k, state_k.x2_prev, b2)

    g1 = problem.grad_h_minus_x1(z1, x2k) - problem.grad_h_minus_x1(x1n, x2n)
    if problem.grad_h_plus_x1 is not None:
        g1 = g1 + problem.grad_h_plus_x1(x1n, x2n) - problem.grad_h_plus_x1(x1n, x2k)
    A1 = (
        g1 + tau1 * (y1 - x1k) + delta[0] * (x1n - x1k)
        - tau1 * (kernels[0].grad(x1n, tau1) - kernels[0].grad(x1k, tau1))
    )
    A2 = (
        problem.grad_h_minus_x2(x1n, z2) - problem.grad_h_minus_x2(x1n, x2n)
        + tau2 * (y2 - x2k) + delta[1] * (x2n - x2k)
        - tau2 * (kernels[1].grad(x2n, tau2) - kernels[1].grad(x2k, tau2))
    )
    B1 = delta[0] * (x1k - x1n)
    B2 = delta[1] * (x2k - x2n)
    return math.sqrt(
        float((A1 ** 2).sum()) + float((A2 ** 2).sum())
        + float((B1 ** 2).sum()) + float((B2 ** 2).sum())
    )


def lemma2_gamma(params: SolverParams, smooth_lipschitz: float,
                 h_minus_lipschitz: float, kernel1_lipschitz: float,
                 kernel2_lipschitz: float) -> float:
    """Constant bounding ``subgradient_residual / step_norm`` along a run.

    ``smooth_lipschitz`` bounds the full gradient of ``h`` on the iterate
    region, ``h_minus_lipschitz`` the gradient of ``h-`` alone, and the two
    kernel arguments are the gradient-Lipschitz moduli of the block kernels
    (the largest value used during the run for a step-size dependent metric).
    """
    d1, d2 = compute_delta(params)
    t1p, t2p = tau_upper_bounds(params)
    lam2 = params.lambda_plus[1]
    gamma_tilde = max(
        smooth_lipschitz + lam2 + 2.0 * d2 + t2p * kernel2_lipschitz,
        t1p * params.alpha_bar[0] + params.beta_bar[0] * h_minus_lipschitz,
        2.0 * d1 + t1p * kernel1_lipschitz,
        lam2 * params.beta_bar[1] + t2p * params.alpha_bar[1],
    )
    return 2.0 * math.sqrt(2.0) * gamma_tilde


def _solve_loop(problem: ProblemSpec, params: SolverParams,
                kernels: tuple[KernelSpec, KernelSpec], init: IterateState,
                inertia_on: bool) -> tuple[IterateState, IterateTrace]:
    delta = compute_delta(params)
    delta_min = 0.5 * params.epsilon * min(delta)
    phi0 = float(problem.phi_value(init.x1, init.x2))
    theta = theta_value(init, problem, delta, phi=phi0)
    if not math.isfinite(theta):
        raise ValueError("objective is not finite at the initial point")
    trace = IterateTrace(initial_phi=phi0, initial_theta=theta)

    state = init
    for _ in range(params.max_iters):
        tic = time.perf_counter()
        new, tau1, tau2 = _step(state, problem, params, kernels, delta, inertia_on)
        step_sq = _step_norm_sq(state, new)
        phi = float(problem.phi_value(new.x1, new.x2))
        theta_new = theta_value(new, problem, delta, phi=phi)
        if not math.isfinite(theta_new):
            raise ValueError(f"objective became non-finite at iteration {state.k}")
        margin = theta - theta_new - delta_min * step_sq
        tolerance = DESCENT_RTOL * (1.0 + abs(theta_new))
        if margin < -tolerance:
            raise DescentViolationError(state.k, margin, tolerance, theta_new)
        residual = subgradient_residual(state, new, problem, params, kernels,
                                        inertia_on)
        elapsed_ms = (time.perf_counter() - tic) * 1e3
        step_norm = math.sqrt(step_sq)
        trace.rows.append(TraceRow(new.k, phi, theta_new, step_norm,
                                   tau1, tau2, margin, residual, elapsed_ms))
        rel = step_norm / (1.0 + state.w_norm())
        state, theta = new, theta_new
        if rel < params.step_tol:
            break
    return state, trace


def ibalm_solve(problem: ProblemSpec, params: SolverParams,
                kernels: tuple[KernelSpec, KernelSpec],
                init: IterateState) -> tuple[IterateState, IterateTrace]:
    """Run the solver until the relative step norm drops below ``step_tol``
    or ``max_iters`` is reached.

    Raises :class:`DescentViolationError` the moment the Lyapunov descent
    inequality fails beyond ``1e-8 (1 + |Theta|)``; that signals a
    parameterization bug or an inner solver run too loosely, and continuing
    would produce an uncertified trace.
    """
    return _solve_loop(problem, params, kernels, init, inertia_on=True)


def ama_solve(problem: ProblemSpec, params: SolverParams,
              kernels: tuple[KernelSpec, KernelSpec],
              init: IterateState) -> tuple[IterateState, IterateTrace]:
    """Baseline with both extrapolation coefficients forced to zero under
    the same parameter setting: the step sizes keep the values the
    schedules dictate, so the two runs differ only in the inertia.  A step
    size above its schedule value only widens the descent margins, so the
    baseline inherits every certificate of the inertial run.
    """
    return _solve_loop(problem, params, kernels, init, inertia_on=False)


@dataclass
class DescentReport:
    """Per-iteration re-check of the Lyapunov descent inequality."""

    margins: np.ndarray
    tolerances: np.ndarray
    violations: list[int]
    worst_margin: float

    @property
    def ok(self) -> bool:
        return not self.violations


def descent_check(trace: IterateTrace, delta: tuple[float, float],
                  epsilon: float) -> DescentReport:
    """Recompute the descent margins of a finished trace.

    Works from the recorded theta and step-norm columns (not the stored
    margins), so a tampered or corrupted trace is flagged.
    """
    delta_min = 0.5 * epsilon * min(delta)
    thetas = trace.thetas(include_initial=True)
    steps = trace.step_norms()
    margins = thetas[:-1] - thetas[1:] - delta_min * steps ** 2
    tolerances = DESCENT_RTOL * (1.0 + np.abs(thetas[1:]))
    violations = [trace.rows[i].k for i in np.nonzero(margins < -tolerances)[0]]
    worst = float(margins.min()) if margins.size else 0.0
    return DescentReport(margins, tolerances, violations, worst)
