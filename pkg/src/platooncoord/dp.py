"""Grid-based value-function machinery and the two general-arrival solvers.

Two solvers are provided: plateau-bounded value iteration (synchronous
sweeps with the value held constant above the one-stage threshold) and the
candidate-threshold recursive approximation, which exploits the known
threshold structure to avoid iteration entirely.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .arrivals import ArrivalModel, Exponential, atoms_of
from .cost import (
    CostConstants,
    CostParams,
    SINGULARITY_GUARD,
    platoon_bonus,
    reward_cruise,
    reward_merge,
)


class SolverError(RuntimeError):
    """Raised when a solver fails to converge or its inputs are unusable."""


@dataclass(frozen=True)
class StateGrid:
    """Uniform grid of predicted-headway states on [m, n] [s]."""

    m: float
    n: float
    step: float

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError(f"step must be positive, got {self.step!r}")
        if not self.m < self.n:
            raise ValueError("grid lower bound must be below upper bound")
        count = (self.n - self.m) / self.step
        if abs(count - round(count)) > 1e-9:
            raise ValueError("(n - m) must be an integer multiple of step")

    @property
    def size(self) -> int:
        return int(round((self.n - self.m) / self.step)) + 1

    def nodes(self) -> np.ndarray:
        return self.m + self.step * np.arange(self.size)

    def check_brackets(self, consts: CostConstants) -> None:
        if not (self.m < consts.c_n and consts.theta_n < self.n):
            raise ValueError(
                f"grid [{self.m}, {self.n}] must bracket "
                f"c_n={consts.c_n:.3f} and theta_n={consts.theta_n:.3f}"
            )


@dataclass
class ValueFunction:
    """Value estimate on a state grid; constant V(n) beyond the upper bound."""

    grid: StateGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError("values must have one entry per grid node")

    def __call__(self, s: float) -> float:
        if s < self.grid.m - 1e-9:
            raise ValueError(f"state {s!r} below the grid lower bound")
        if s >= self.grid.n:
            return float(self.values[-1])
        pos = (s - self.grid.m) / self.grid.step
        i = min(int(pos), self.grid.size - 2)
        frac = pos - i
        return float((1.0 - frac) * self.values[i] + frac * self.values[i + 1])


@dataclass(frozen=True)
class ThresholdPolicy:
    """Merge when the predicted headway is at most theta; otherwise cruise
    with the constant time reduction c."""

    theta: float
    c: float


class _ExponentialQuadrature:
    """Trapezoidal weights for the exponential headway density on a grid.

    Weights are normalized per node (quadrature mass plus beyond-grid tail
    equals one) so a constant value function is reproduced exactly.
    """

    def __init__(self, grid: StateGrid, rate: float):
        self.grid = grid
        self.rate = rate
        step = grid.step
        size = grid.size
        self.decay = np.exp(-rate * step)
        self.f0 = rate
        j = np.arange(size)
        # tail[i] = P(X > (size-1-i) * step); density at the matching offset
        # is rate * tail.
        self.tail = np.exp(-rate * step * (size - 1 - j))
        trap = np.zeros(size)
        r = self.decay
        spans = size - 1 - j  # number of intervals from node i to the top
        inner = np.where(
            spans >= 2, r * (1.0 - r ** np.maximum(spans - 1, 0)) / (1.0 - r), 0.0
        )
        trap = np.where(
            spans >= 1,
            step * self.f0 * (0.5 + inner + 0.5 * self.tail),
            0.0,
        )
        self.mass = trap + self.tail

    def matrix(self) -> np.ndarray:
        """Dense operator K with (K @ V)[i] = normalized quadrature of
        f(x) V(node_i + x)."""
        size = self.grid.size
        step = self.grid.step
        K = np.zeros((size, size))
        offsets = self.f0 * np.exp(-self.rate * step * np.arange(size))
        for i in range(size):
            span = size - 1 - i
            if span == 0:
                K[i, -1] = 1.0
                continue
            w = step * offsets[: span + 1].copy()
            w[0] *= 0.5
            w[-1] *= 0.5
            K[i, i:] = w
            K[i, -1] += self.tail[i]
            K[i] /= self.mass[i]
        return K

    def backward_values(self, values: np.ndarray, top_index: int, g_nodes: np.ndarray,
                        gamma: float) -> None:
        """Fill values[i] = G_i + gamma * E[V] for i below top_index, in place.

        The running discounted sum over higher nodes makes each node O(1).
        The zero-offset trapezoid endpoint would reference the value being
        computed; it is replaced by one-sided extrapolation from above.
        """
        size = self.grid.size
        step = self.grid.step
        f0 = self.f0
        r = self.decay
        v_top = values[-1]
        running = 0.0  # sum_{j > i} f((j-i)*step) * V_j
        for i in range(size - 2, -1, -1):
            running = r * (f0 * values[i + 1] + running)
            if i >= top_index:
                continue
            if i + 2 < size:
                v_self = 2.0 * values[i + 1] - values[i + 2]
            else:
                v_self = values[i + 1]
            raw = step * (0.5 * f0 * v_self + running - 0.5 * f0 * self.tail[i] * v_top)
            ev = (raw + self.tail[i] * v_top) / self.mass[i]
            values[i] = g_nodes[i] + gamma * ev


class _AtomQuadrature:
    """Point-mass expectation on a grid for discrete/constant headways."""

    def __init__(self, grid: StateGrid, atoms):
        self.grid = grid
        self.atoms = []
        size = grid.size
        for h, prob in atoms:
            pos = h / grid.step
            base = int(pos)
            frac = pos - base
            self.atoms.append((prob, base, frac))
        self.size = size

    def matrix(self) -> np.ndarray:
        size = self.size
        K = np.zeros((size, size))
        idx = np.arange(size)
        for prob, base, frac in self.atoms:
            lo = np.minimum(idx + base, size - 1)
            hi = np.minimum(idx + base + 1, size - 1)
            K[idx, lo] += prob * (1.0 - frac)
            K[idx, hi] += prob * frac
        return K

    def at(self, values: np.ndarray, i: int) -> float:
        top = self.size - 1
        acc = 0.0
        for prob, base, frac in self.atoms:
            lo = min(i + base, top)
            hi = min(i + base + 1, top)
            acc += prob * ((1.0 - frac) * values[lo] + frac * values[hi])
        return acc

    def backward_values(self, values: np.ndarray, top_index: int, g_nodes: np.ndarray,
                        gamma: float) -> None:
        for i in range(top_index - 1, -1, -1):
            values[i] = g_nodes[i] + gamma * self.at(values, i)


def _quadrature(grid: StateGrid, model: ArrivalModel):
    atoms = atoms_of(model)
    if atoms is not None:
        return _AtomQuadrature(grid, atoms)
    assert isinstance(model, Exponential)
    return _ExponentialQuadrature(grid, model.rate)


def expected_value(vf: ValueFunction, a: float, model: ArrivalModel) -> float:
    """E[V(a + X)] under the arrival model, with V(s) = V(n) beyond the grid.

    For continuous (exponential) models this is normalized trapezoidal
    quadrature on the grid's own step plus an analytic tail term; for
    discrete models it is the exact weighted sum over atoms.
    """
    grid = vf.grid
    if not grid.m - 1e-9 <= a <= grid.n + 1e-9:
        raise ValueError(f"evaluation point {a!r} outside grid [{grid.m}, {grid.n}]")
    atoms = atoms_of(model)
    if atoms is not None:
        return sum(prob * vf(a + h) for h, prob in atoms)
    assert isinstance(model, Exponential)
    rate = model.rate
    step = grid.step
    span = int((grid.n - a) / step + 1e-9)
    if span == 0:
        return float(vf.values[-1])
    x = step * np.arange(span + 1)
    f = rate * np.exp(-rate * x)
    w = np.full(span + 1, step)
    w[0] = w[-1] = 0.5 * step
    vals = np.array([vf(a + xi) for xi in x])
    tail = np.exp(-rate * step * span)
    mass = float(np.sum(w * f)) + tail
    return (float(np.sum(w * f * vals)) + tail * float(vf.values[-1])) / mass


def _reward_nodes(nodes: np.ndarray, p: CostParams):
    """Merge/cruise rewards at grid nodes; NaN where the singularity guard
    is violated."""
    g = np.full(nodes.shape, np.nan)
    ok = nodes <= p.t0 - SINGULARITY_GUARD
    speed = p.d1 / (p.d1 / p.v - nodes[ok])
    g[ok] = p.w1 * nodes[ok] + p.w2 * (
        p.alpha * p.d1 * p.v**2 - p.alpha * p.d1 * speed**2 + p.eta * p.phi * p.d2
    )
    h = g - platoon_bonus(p)
    return g, h


def bellman_backup(
    vf: ValueFunction,
    s: float,
    model: ArrivalModel,
    p: CostParams,
    consts: CostConstants,
) -> tuple[float, float, bool]:
    """One-state Bellman update: best value, its action, and whether the
    merge branch won. Non-merge actions range over grid nodes strictly
    below min(s, t0 - step); ties prefer merging."""
    grid = vf.grid
    gamma = p.gamma
    nodes = grid.nodes()
    cutoff = min(s, consts.t0 - grid.step)
    candidates = nodes[nodes < cutoff - 1e-12]
    best_val = -np.inf
    best_action = None
    for a in candidates:
        q = reward_cruise(float(a), p) + gamma * expected_value(vf, float(a), model)
        if q > best_val:
            best_val = q
            best_action = float(a)
    merged = False
    if s <= consts.t0 - SINGULARITY_GUARD:
        q_merge = reward_merge(s, p) + gamma * expected_value(vf, s, model)
        if q_merge >= best_val:
            best_val = q_merge
            best_action = s
            merged = True
    if best_action is None:
        raise SolverError(f"no feasible action at state {s!r}")
    return best_val, best_action, merged


@dataclass
class SolveResult:
    policy: ThresholdPolicy
    value_function: ValueFunction
    z: float
    iterations: int
    wall_time_s: float


def _policy_from_values(grid, K, g_nodes, h_nodes, values, gamma, consts):
    """Greedy threshold extraction from a converged value table."""
    nodes = grid.nodes()
    ev = K @ values
    action_ok = nodes < consts.t0 - grid.step - 1e-12
    q1 = np.where(action_ok, h_nodes + gamma * ev, -np.inf)
    run_max = np.maximum.accumulate(q1)
    c_hat = float(nodes[int(np.argmax(q1))])
    qm = np.where(
        nodes <= consts.t0 - SINGULARITY_GUARD, g_nodes + gamma * ev, -np.inf
    )
    merge_wins = np.zeros(grid.size, dtype=bool)
    merge_wins[1:] = qm[1:] >= run_max[:-1]
    merge_wins[0] = qm[0] > -np.inf
    merged_idx = np.flatnonzero(merge_wins)
    if merged_idx.size == 0:
        raise SolverError("greedy policy never merges; grid does not bracket theta")
    theta_hat = float(nodes[merged_idx[-1]])
    return ThresholdPolicy(theta=theta_hat, c=c_hat), merge_wins


def greedy_actions(
    vf: ValueFunction, model: ArrivalModel, p: CostParams, consts: CostConstants
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node greedy decision on a value table: (merge flags, actions)."""
    grid = vf.grid
    nodes = grid.nodes()
    quad = _quadrature(grid, model)
    K = quad.matrix()
    g_nodes, h_nodes = _reward_nodes(nodes, p)
    ev = K @ vf.values
    action_ok = nodes < consts.t0 - grid.step - 1e-12
    q1 = np.where(action_ok, h_nodes + p.gamma * ev, -np.inf)
    run_max = np.maximum.accumulate(q1)
    run_arg = np.zeros(grid.size, dtype=int)
    best = q1[0]
    for i in range(1, grid.size):
        if q1[i] > best:
            best = q1[i]
            run_arg[i] = i
        else:
            run_arg[i] = run_arg[i - 1]
    qm = np.where(
        nodes <= consts.t0 - SINGULARITY_GUARD, g_nodes + p.gamma * ev, -np.inf
    )
    merged = np.zeros(grid.size, dtype=bool)
    actions = np.empty(grid.size)
    for i in range(grid.size):
        non_merge = run_max[i - 1] if i > 0 else -np.inf
        if qm[i] >= non_merge:
            merged[i] = True
            actions[i] = nodes[i]
        else:
            actions[i] = nodes[run_arg[i - 1]]
    return merged, actions


def bvi_sweep(
    values: np.ndarray,
    K: np.ndarray,
    g_nodes: np.ndarray,
    h_nodes: np.ndarray,
    nodes: np.ndarray,
    gamma: float,
    consts: CostConstants,
    top_index: int,
    step: float,
) -> np.ndarray:
    """One synchronous sweep of plateau-bounded value iteration."""
    ev = K @ values
    action_ok = nodes < consts.t0 - step - 1e-12
    q1 = np.where(action_ok, h_nodes + gamma * ev, -np.inf)
    qm = g_nodes + gamma * ev
    new = values.copy()
    for i in range(top_index + 1):
        non_merge = np.max(q1[:i]) if i > 0 else -np.inf
        new[i] = qm[i] if qm[i] >= non_merge else non_merge
    new[top_index + 1 :] = new[top_index]
    return new


def solve_bvi(
    grid: StateGrid,
    model: ArrivalModel,
    p: CostParams,
    consts: CostConstants,
    epsilon: float = 0.002,
    max_sweeps: int = 100000,
) -> SolveResult:
    """Plateau-bounded value iteration to tolerance epsilon."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    grid.check_brackets(consts)
    start = time.perf_counter()
    nodes = grid.nodes()
    quad = _quadrature(grid, model)
    K = quad.matrix()
    g_nodes, h_nodes = _reward_nodes(nodes, p)
    top_index = int(np.searchsorted(nodes, consts.theta_n + 1e-9) - 1)
    values = np.zeros(grid.size)
    iterations = 0
    while True:
        new = bvi_sweep(
            values, K, g_nodes, h_nodes, nodes, p.gamma, consts, top_index, grid.step
        )
        delta = float(np.max(np.abs(new - values)))
        values = new
        iterations += 1
        if delta < epsilon:
            break
        if iterations >= max_sweeps:
            raise SolverError(
                f"value iteration did not converge in {max_sweeps} sweeps "
                f"(last delta {delta:.3g})"
            )
    policy, _ = _policy_from_values(grid, K, g_nodes, h_nodes, values, p.gamma, consts)
    vf = ValueFunction(grid, values)
    z = float(values[-1])  # plateau value
    return SolveResult(
        policy=policy,
        value_function=vf,
        z=z,
        iterations=iterations,
        wall_time_s=time.perf_counter() - start,
    )


def solve_ra(
    grid: StateGrid,
    model: ArrivalModel,
    p: CostParams,
    consts: CostConstants,
) -> SolveResult:
    """Recursive approximation: scan candidate thresholds in [c_n, theta_n],
    build each candidate's value function by a single backward pass, and
    select the candidate whose peak best matches the plateau identity."""
    grid.check_brackets(consts)
    start = time.perf_counter()
    nodes = grid.nodes()
    quad = _quadrature(grid, model)
    g_nodes, _ = _reward_nodes(nodes, p)
    g0 = platoon_bonus(p)
    candidate_idx = np.flatnonzero(
        (nodes >= consts.c_n - 1e-9) & (nodes <= consts.theta_n + 1e-9)
    )
    if candidate_idx.size == 0:
        raise SolverError("no grid node lies in [c_n, theta_n]")

    best = None
    for ti in candidate_idx:
        z_i = g_nodes[ti] / (1.0 - p.gamma)
        values = np.empty(grid.size)
        values[ti:] = z_i
        quad.backward_values(values, ti, g_nodes, p.gamma)
        peak_idx = int(np.argmax(values))
        residual = abs(values[peak_idx] - (z_i + g0))
        if best is None or residual <= best[0]:
            best = (residual, ti, peak_idx, z_i, values)

    _, ti, peak_idx, z_i, values = best
    policy = ThresholdPolicy(theta=float(nodes[ti]), c=float(nodes[peak_idx]))
    return SolveResult(
        policy=policy,
        value_function=ValueFunction(grid, values),
        z=z_i,
        iterations=int(candidate_idx.size),
        wall_time_s=time.perf_counter() - start,
    )


DEFAULT_GRID = StateGrid(m=-100.0, n=400.0, step=0.25)
REDUCED_GRID = StateGrid(m=-50.0, n=150.0, step=1.0)
DEFAULT_EPSILON = 0.002
