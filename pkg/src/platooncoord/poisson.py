"""Closed-form policy solution under exponential inter-arrivals.

The threshold pair (theta, c) solves a 2x2 nonlinear system obtained from
the value function's boundary conditions; the plateau value is eliminated
analytically via Z = G(theta) / (1 - gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import (
    CostConstants,
    CostParams,
    CostDomainError,
    SINGULARITY_GUARD,
    platoon_bonus,
    reward_merge,
    reward_merge_derivative,
)
from .dp import SolverError
from .quadrature import adaptive_simpson, adaptive_simpson_batch

RESIDUAL_TOL = 1e-8
MAX_ITERATIONS = 200
MAX_HALVINGS = 30


@dataclass(frozen=True)
class PoissonSolution:
    theta: float
    c: float
    z: float
    rate: float
    residual_norm: float
    iterations: int = 0


def _integrand(p: CostParams, rate: float):
    k = rate * (1.0 - p.gamma)
    w1, w2, alpha, d1, v = p.w1, p.w2, p.alpha, p.d1, p.v
    bonus_term = p.eta * p.phi * p.d2
    base = d1 / v

    def f(t: np.ndarray) -> np.ndarray:
        speed = d1 / (base - t)
        g = w1 * t + w2 * (alpha * d1 * v**2 - alpha * d1 * speed**2 + bonus_term)
        gprime = w1 - 2.0 * w2 * alpha * speed**3
        return np.exp(-k * t) * (gprime - rate * g)

    return f


def _exp_integral(c: float, theta: float, p: CostParams, rate: float, z: float) -> float:
    tol = 1e-12 * (1.0 + abs(z))
    return adaptive_simpson(_integrand(p, rate), c, theta, tol)


def residuals(
    theta: float,
    c: float,
    rate: float,
    p: CostParams,
    consts: CostConstants,
) -> tuple[float, float]:
    """Residual pair of the boundary-condition system at (theta, c).

    The first residual is the plateau-continuity condition at theta, the
    second the stationarity of the value function at its peak c.
    """
    if theta > consts.t0 - SINGULARITY_GUARD:
        raise CostDomainError(f"theta {theta!r} at or beyond the traversal time")
    g0 = platoon_bonus(p)
    k = rate * (1.0 - p.gamma)
    z = reward_merge(theta, p) / (1.0 - p.gamma)
    integral = _exp_integral(c, theta, p, rate, z)
    r1 = z - math.exp(k * theta) * (integral + (z + g0) * math.exp(-k * c))
    r2 = (
        reward_merge_derivative(c, p)
        - rate * reward_merge(c, p)
        + k * (z + g0)
    )
    return r1, r2


class _System:
    """Residual evaluation with integral reuse across Newton steps.

    The integrand does not depend on (theta, c), so the finite-difference
    Jacobian only needs four sliver integrals at the interval edges on top
    of the current full integral.
    """

    def __init__(self, rate: float, p: CostParams, consts: CostConstants):
        self.rate = rate
        self.p = p
        self.consts = consts
        self.k = rate * (1.0 - p.gamma)
        self.g0 = platoon_bonus(p)
        self.f = _integrand(p, rate)

    def z_of(self, theta: float) -> float:
        return reward_merge(theta, self.p) / (1.0 - self.p.gamma)

    def tol(self, z: float) -> float:
        return 1e-12 * (1.0 + abs(z))

    def integral(self, c: float, theta: float, z: float) -> float:
        return adaptive_simpson(self.f, c, theta, self.tol(z), initial_splits=256)

    def shifted_integral(
        self, integral: float, theta: float, c: float,
        theta_new: float, c_new: float, z: float,
    ) -> float:
        """Move both endpoints by integrating only over the swept edges."""
        deltas = adaptive_simpson_batch(
            self.f,
            [(theta, theta_new), (c, c_new)],
            self.tol(z),
            initial_splits=32,
        )
        return integral + float(deltas[0]) - float(deltas[1])

    def residual_pair(self, theta: float, c: float, integral: float) -> np.ndarray:
        z = self.z_of(theta)
        r1 = z - math.exp(self.k * theta) * (
            integral + (z + self.g0) * math.exp(-self.k * c)
        )
        r2 = (
            reward_merge_derivative(c, self.p)
            - self.rate * reward_merge(c, self.p)
            + self.k * (z + self.g0)
        )
        return np.array([r1, r2])

    def jacobian(self, theta: float, c: float, integral: float) -> np.ndarray:
        ht = 1e-6 * max(1.0, abs(theta))
        hc = 1e-6 * max(1.0, abs(c))
        z = self.z_of(theta)
        slivers = adaptive_simpson_batch(
            self.f,
            [(theta, theta + ht), (theta - ht, theta), (c, c + hc), (c - hc, c)],
            self.tol(z),
            initial_splits=2,
        )
        jac = np.empty((2, 2))
        jac[:, 0] = (
            self.residual_pair(theta + ht, c, integral + slivers[0])
            - self.residual_pair(theta - ht, c, integral - slivers[1])
        ) / (2.0 * ht)
        jac[:, 1] = (
            self.residual_pair(theta, c + hc, integral - slivers[2])
            - self.residual_pair(theta, c - hc, integral + slivers[3])
        ) / (2.0 * hc)
        return jac


def solve(
    rate: float,
    p: CostParams,
    consts: CostConstants,
    init: tuple[float, float] | None = None,
) -> PoissonSolution:
    """Damped-Newton root-find for (theta, c) with a finite-difference
    Jacobian. ``init`` warm-starts the iteration (e.g. from the previous
    vehicle's solution); the default start sits just inside the proven
    bounds."""
    if not rate > 0.0:
        raise ValueError(f"rate must be positive, got {rate!r}")
    if init is None:
        x = np.array([consts.theta_n - 0.1, consts.c_n - 0.1])
    else:
        x = np.array([init[0], init[1]], dtype=float)

    theta_cap = consts.t0 - 1e-6
    theta_floor = consts.theta_n_prime - 50.0
    system = _System(rate, p, consts)

    def norm_scale(theta: float) -> float:
        return max(1.0, abs(system.z_of(min(theta, theta_cap))))

    integral = system.integral(x[1], x[0], system.z_of(x[0]))
    fx = system.residual_pair(x[0], x[1], integral)
    for iteration in range(MAX_ITERATIONS):
        fnorm = float(np.max(np.abs(fx)))
        if fnorm <= RESIDUAL_TOL * norm_scale(x[0]):
            sol = PoissonSolution(
                theta=float(x[0]),
                c=float(x[1]),
                z=system.z_of(float(x[0])),
                rate=rate,
                residual_norm=fnorm / norm_scale(x[0]),
                iterations=iteration,
            )
            _check_bounds(sol, consts)
            return sol

        jac = system.jacobian(float(x[0]), float(x[1]), integral)
        try:
            direction = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Jacobian at iterate {x.tolist()}") from exc

        scale = 1.0
        for _ in range(MAX_HALVINGS):
            trial = x + scale * direction
            if trial[0] >= theta_cap or trial[0] <= theta_floor:
                scale *= 0.5
                continue
            z_trial = system.z_of(float(trial[0]))
            integral_trial = system.shifted_integral(
                integral, float(x[0]), float(x[1]), float(trial[0]), float(trial[1]), z_trial
            )
            f_trial = system.residual_pair(float(trial[0]), float(trial[1]), integral_trial)
            if float(np.max(np.abs(f_trial))) < fnorm:
                x, fx, integral = trial, f_trial, integral_trial
                break
            scale *= 0.5
        else:
            raise SolverError(
                f"line search stalled at iterate {x.tolist()} "
                f"(residual {fnorm:.3g}, rate {rate:.6g})"
            )

    raise SolverError(
        f"no convergence in {MAX_ITERATIONS} iterations; last iterate "
        f"{x.tolist()} with residual {float(np.max(np.abs(fx))):.3g}"
    )


def _check_bounds(sol: PoissonSolution, consts: CostConstants, slack: float = 1e-6):
    if not (consts.theta_n_prime - slack <= sol.c <= consts.c_n + slack):
        raise SolverError(
            f"c={sol.c:.6f} violates [{consts.theta_n_prime:.6f}, {consts.c_n:.6f}]"
        )
    if not (consts.c_n - slack <= sol.theta <= consts.theta_n + slack):
        raise SolverError(
            f"theta={sol.theta:.6f} violates [{consts.c_n:.6f}, {consts.theta_n:.6f}]"
        )


def closed_form_value(
    s: float, sol: PoissonSolution, p: CostParams, consts: CostConstants
) -> float:
    """The analytic value function of the solved policy; constant Z above
    theta."""
    if s > consts.t0 - SINGULARITY_GUARD:
        raise CostDomainError(f"state {s!r} at or beyond the traversal time")
    if s >= sol.theta:
        return sol.z
    g0 = platoon_bonus(p)
    k = sol.rate * (1.0 - p.gamma)
    integral = _exp_integral(sol.c, s, p, sol.rate, sol.z)
    return math.exp(k * s) * (integral + (sol.z + g0) * math.exp(-k * sol.c))
