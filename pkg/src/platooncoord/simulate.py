"""Discrete-event junction simulation with renewal arrivals and
per-vehicle platooning policies.

Arrivals are generated per hour from a flow schedule (merged Poisson
stream of both branches); the predicted-headway state propagates through
S_{k+1} = X_{k+1} + U_k with the realized time reduction U_k.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .arrivals import RNG_ALGORITHM, RateEstimator, make_rng
from .cost import CostConstants, CostParams
from .dp import SolverError, ThresholdPolicy
from . import poisson

SAFETY_REACTION_TIME = 2.3  # s, follower arrives this late when merging
MAX_SPEED = 40.0  # m/s, freeway speed cap
FUEL_CUBIC = 3.51e-7  # L/s per (m/s)^3
FUEL_LINEAR = 4.07e-4  # L/s per (m/s)

DEFAULT_SCHEDULE_RESOURCE = "i210_134_hourly_flows.csv"


def fuel_rate(speed: float) -> float:
    """Fuel burn [L/s] at a given speed [m/s]."""
    return FUEL_CUBIC * speed**3 + FUEL_LINEAR * speed


@dataclass(frozen=True)
class FlowSchedule:
    """Hourly two-branch flows plus the coordinable-vehicle scale factor."""

    rows: tuple[tuple[int, float, float], ...]
    scale: float = 1.0

    def __post_init__(self):
        if len(self.rows) != 24:
            raise ValueError(f"expected 24 hourly rows, got {len(self.rows)}")
        if any(f1 < 0.0 or f2 < 0.0 for _, f1, f2 in self.rows):
            raise ValueError("flows must be non-negative")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError(f"scale must lie in (0, 1], got {self.scale!r}")

    def rate_at(self, t: float) -> float:
        """Merged coordinable arrival rate [veh/s] at simulation time t."""
        hour = int(t // 3600.0) % 24
        _, f1, f2 = self.rows[hour]
        return self.scale * (f1 + f2) / 3600.0

    def average_flow(self) -> float:
        """Scaled average merged flow [veh/hour]."""
        return self.scale * sum(f1 + f2 for _, f1, f2 in self.rows) / len(self.rows)

    def with_scale(self, scale: float) -> "FlowSchedule":
        return FlowSchedule(rows=self.rows, scale=scale)

    def with_average_flow(self, flow_vph: float) -> "FlowSchedule":
        base = sum(f1 + f2 for _, f1, f2 in self.rows) / len(self.rows)
        return self.with_scale(flow_vph / base)

    @classmethod
    def from_csv(cls, path, scale: float = 1.0) -> "FlowSchedule":
        with open(path, newline="") as fh:
            return cls._parse(fh, scale)

    @classmethod
    def bundled(cls, scale: float = 1.0) -> "FlowSchedule":
        """The packaged I-210/134 hourly flow table."""
        ref = resources.files("platooncoord.data") / DEFAULT_SCHEDULE_RESOURCE
        with ref.open("r", newline="") as fh:
            return cls._parse(fh, scale)

    @classmethod
    def _parse(cls, fh, scale: float) -> "FlowSchedule":
        reader = csv.DictReader(fh)
        expected = {"hour", "flow1_vph", "flow2_vph"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValueError(f"schedule CSV must have columns {sorted(expected)}")
        rows = tuple(
            (int(row["hour"]), float(row["flow1_vph"]), float(row["flow2_vph"]))
            for row in reader
        )
        return cls(rows=rows, scale=scale)


@dataclass(frozen=True)
class Baseline:
    """No speed adaptation; platoons only form by chance within the safety
    reaction time."""

    name: str = field(default="baseline", init=False)


@dataclass(frozen=True)
class PolicyA:
    """Inter-arrival threshold policy, acceleration only."""

    tau: float
    name: str = field(default="policy_a", init=False)

    def __post_init__(self):
        if self.tau < 0.0:
            raise ValueError(f"tau must be >= 0, got {self.tau!r}")


@dataclass(frozen=True)
class PolicyB:
    """Static threshold policy (theta, c) on the predicted headway."""

    policy: ThresholdPolicy
    name: str = field(default="policy_b", init=False)


@dataclass(frozen=True)
class RealTimeStrategy:
    """Per-vehicle re-estimated arrival rate with a warm-started re-solve
    of the closed-form threshold equations."""

    beta: float = 0.9
    m_steps: int = 50
    # Re-solve only when the estimated rate moved by more than this relative
    # amount; 0 re-solves on every arrival.
    resolve_rel_change: float = 0.0
    name: str = field(default="rts", init=False)


PolicySpec = Baseline | PolicyA | PolicyB | RealTimeStrategy


@dataclass
class VehicleRecord:
    k: int
    t: float
    x: float
    s: float
    u: float
    merged: bool
    speed: float
    coord_fuel: float
    cruise_fuel: float
    travel_time: float
    cost: float
    theta: float | None = None
    c: float | None = None


@dataclass
class SimulationResult:
    policy_id: str
    seed: int
    rng_algorithm: str
    records: list[VehicleRecord]
    n_vehicles: int
    total_cost: float
    total_fuel: float
    total_time: float
    avg_cost: float | None
    avg_cost_per_km: float | None
    avg_fuel: float | None
    avg_time: float | None
    platoon_histogram: dict[int, int]

    def to_json(self) -> dict:
        return {
            "policy": self.policy_id,
            "seed": self.seed,
            "rng": self.rng_algorithm,
            "n_vehicles": self.n_vehicles,
            "total_cost": self.total_cost,
            "total_fuel_l": self.total_fuel,
            "total_time_s": self.total_time,
            "avg_cost": self.avg_cost,
            "avg_cost_per_km": self.avg_cost_per_km,
            "avg_fuel_l": self.avg_fuel,
            "avg_time_s": self.avg_time,
            "platoon_histogram": {str(k): v for k, v in sorted(self.platoon_histogram.items())},
        }


def generate_arrivals(
    schedule: FlowSchedule, seed: int, duration: float = 86400.0
) -> tuple[np.ndarray, np.ndarray]:
    """Detector times T_k and gaps X_k of the merged coordinable stream.

    Each hour is an independent Poisson stream at that hour's scaled rate;
    restriction and restart at hour boundaries leave the process exact.
    """
    rng = make_rng(seed)
    times: list[float] = []
    n_hours = int(math.ceil(duration / 3600.0))
    for hour in range(n_hours):
        start = 3600.0 * hour
        end = min(start + 3600.0, duration)
        rate = schedule.rate_at(start)
        if rate <= 0.0:
            continue
        t = start + rng.exponential(1.0 / rate)
        while t < end:
            times.append(t)
            t += rng.exponential(1.0 / rate)
    t_arr = np.array(times)
    x_arr = np.diff(t_arr, prepend=0.0)
    return t_arr, x_arr


def step_state(prev_s: float, applied_u: float, next_x: float) -> float:
    """Predicted-headway recursion S_{k+1} = X_{k+1} + U_k."""
    if applied_u > prev_s + 1e-9:
        raise ValueError("applied time reduction cannot exceed the headway")
    return next_x + applied_u


def merge_speed(u: float, p: CostParams) -> float:
    """Spatial-average coordinating-zone speed for time reduction u."""
    denom = p.d1 / p.v - u
    if denom <= 0.0:
        raise ValueError(f"time reduction {u!r} implies non-positive traversal time")
    return p.d1 / denom


def threshold_decision(
    pol: ThresholdPolicy, s: float, p: CostParams
) -> tuple[float, bool]:
    """Realized (U, merged) for a threshold policy, including the safety
    buffer on merges and the speed-cap fallback to cruising."""
    if s <= pol.theta:
        u = s - SAFETY_REACTION_TIME
        if merge_speed(u, p) <= MAX_SPEED:
            return u, True
    return pol.c, False


def account_costs(
    k: int,
    t: float,
    x: float,
    s: float,
    u: float,
    merged: bool,
    p: CostParams,
) -> VehicleRecord:
    """Complete a vehicle record from its realized time reduction."""
    speed = merge_speed(u, p)
    if speed > MAX_SPEED + 1e-9:
        raise ValueError(f"speed {speed!r} exceeds the cap {MAX_SPEED!r}")
    coord_time = p.d1 / speed
    coord_fuel = coord_time * fuel_rate(speed)
    cruise_time = p.d2 / p.v
    cruise_fuel = cruise_time * fuel_rate(p.v)
    if merged:
        cruise_fuel *= 1.0 - p.eta
    travel_time = coord_time + cruise_time
    cost = p.w2 * (coord_fuel + cruise_fuel) + p.w1 * travel_time
    return VehicleRecord(
        k=k,
        t=t,
        x=x,
        s=s,
        u=u,
        merged=merged,
        speed=speed,
        coord_fuel=coord_fuel,
        cruise_fuel=cruise_fuel,
        travel_time=travel_time,
        cost=cost,
    )


class _RtsState:
    """Estimator plus warm-started solver state for the real-time strategy."""

    def __init__(self, spec: RealTimeStrategy, p: CostParams, consts: CostConstants):
        self.estimator = RateEstimator(beta=spec.beta, m_steps=spec.m_steps)
        self.spec = spec
        self.p = p
        self.consts = consts
        self.solution: poisson.PoissonSolution | None = None

    def decide(self, s: float, x: float) -> tuple[float, bool, float, float]:
        self.estimator.observe(x)
        rate = self.estimator.estimate()
        sol = self.solution
        needs_solve = sol is None or self.spec.resolve_rel_change <= 0.0
        if not needs_solve:
            needs_solve = (
                abs(rate - sol.rate) > self.spec.resolve_rel_change * sol.rate
            )
        if needs_solve:
            init = (sol.theta, sol.c) if sol is not None else None
            try:
                sol = poisson.solve(rate, self.p, self.consts, init=init)
            except SolverError:
                # A bad warm start can strand the iteration; retry cold once.
                if init is None:
                    raise
                sol = poisson.solve(rate, self.p, self.consts, init=None)
            self.solution = sol
        pol = ThresholdPolicy(theta=sol.theta, c=sol.c)
        u, merged = threshold_decision(pol, s, self.p)
        return u, merged, sol.theta, sol.c


def apply_policy(
    policy: PolicySpec,
    s: float,
    x: float,
    p: CostParams,
    rts_state: _RtsState | None = None,
) -> tuple[float, bool, float | None, float | None]:
    """Realized (U, merged, theta_k, c_k) for one vehicle."""
    if isinstance(policy, Baseline):
        return 0.0, 0.0 <= s <= SAFETY_REACTION_TIME, None, None
    if isinstance(policy, PolicyA):
        if x < policy.tau and 0.0 <= s < p.t0 and merge_speed(s, p) <= MAX_SPEED:
            return s, True, None, None
        return 0.0, False, None, None
    if isinstance(policy, PolicyB):
        u, merged = threshold_decision(policy.policy, s, p)
        return u, merged, policy.policy.theta, policy.policy.c
    if isinstance(policy, RealTimeStrategy):
        if rts_state is None:
            raise ValueError("real-time strategy requires solver state")
        return rts_state.decide(s, x)
    raise TypeError(f"unknown policy spec: {policy!r}")


def simulate(
    schedule: FlowSchedule,
    policy: PolicySpec,
    p: CostParams,
    consts: CostConstants,
    seed: int,
    duration: float = 86400.0,
) -> SimulationResult:
    """Run a single-junction day (or ``duration`` seconds) under one policy."""
    t_arr, x_arr = generate_arrivals(schedule, seed, duration)
    rts_state = (
        _RtsState(policy, p, consts) if isinstance(policy, RealTimeStrategy) else None
    )

    records: list[VehicleRecord] = []
    histogram: dict[int, int] = {}
    platoon_size = 0
    prev_u = 0.0
    prev_s = math.inf
    for k, (t, x) in enumerate(zip(t_arr, x_arr), start=1):
        s = step_state(prev_s, prev_u, x) if k > 1 else x
        u, merged, theta_k, c_k = apply_policy(policy, s, x, p, rts_state)
        record = account_costs(k, t, x, s, u, merged, p)
        record.theta = theta_k
        record.c = c_k
        records.append(record)
        if merged and platoon_size > 0:
            platoon_size += 1
        else:
            if platoon_size > 0:
                histogram[platoon_size] = histogram.get(platoon_size, 0) + 1
            platoon_size = 1
        prev_u, prev_s = u, s
    if platoon_size > 0:
        histogram[platoon_size] = histogram.get(platoon_size, 0) + 1

    n = len(records)
    total_cost = sum(r.cost for r in records)
    total_fuel = sum(r.coord_fuel + r.cruise_fuel for r in records)
    total_time = sum(r.travel_time for r in records)
    span_km = (p.d1 + p.d2) / 1000.0
    return SimulationResult(
        policy_id=policy.name,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM,
        records=records,
        n_vehicles=n,
        total_cost=total_cost,
        total_fuel=total_fuel,
        total_time=total_time,
        avg_cost=total_cost / n if n else None,
        avg_cost_per_km=total_cost / (n * span_km) if n else None,
        avg_fuel=total_fuel / n if n else None,
        avg_time=total_time / n if n else None,
        platoon_histogram=histogram,
    )


def calibrate_policy_a(
    schedule: FlowSchedule,
    p: CostParams,
    consts: CostConstants,
    seed: int,
    duration: float = 86400.0,
    taus: np.ndarray | None = None,
) -> float:
    """Grid-search the inter-arrival threshold minimizing simulated average
    cost on a calibration run at the given flow."""
    if taus is None:
        taus = np.arange(0.0, 30.0 + 1e-9, 0.5)
    best_tau = float(taus[0])
    best_ac = math.inf
    for tau in taus:
        result = simulate(schedule, PolicyA(tau=float(tau)), p, consts, seed, duration)
        if result.avg_cost is not None and result.avg_cost < best_ac:
            best_ac = result.avg_cost
            best_tau = float(tau)
    return best_tau


def write_vehicle_csv(path, result: SimulationResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["k", "T", "X", "S", "U", "merged", "v_k", "fuel_L", "time_s", "cost"]
        )
        for r in result.records:
            writer.writerow(
                [
                    r.k,
                    f"{r.t:.6f}",
                    f"{r.x:.6f}",
                    f"{r.s:.6f}",
                    f"{r.u:.6f}",
                    int(r.merged),
                    f"{r.speed:.6f}",
                    f"{r.coord_fuel + r.cruise_fuel:.8f}",
                    f"{r.travel_time:.6f}",
                    f"{r.cost:.8f}",
                ]
            )
