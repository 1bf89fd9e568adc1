"""Evaluation and comparative statics for liquidation strategies.

The revenue of agent i against fixed competitors, after integrating the
price dynamics by parts, splits into a constant x_i s0 - (gamma/2) x_i^2, a
deterministic integral of products of inventories and trading rates, and the
martingale sigma * int X_i dW. Mean-variance and CARA objectives therefore
reduce to a handful of integrals, which this module computes in closed form
for exponential-sum strategies and by composite Simpson quadrature on grids.

Also here: Monte Carlo revenue simulation (counter-based RNG so runs are
reproducible), the predatory / liquidity-provision classification, effective
liquidation times, one-parameter scans, and a deviation probe that certifies
the no-profitable-deviation property of computed equilibria.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import bvp, closed_form
from .errors import (
    GridMismatch,
    HorizonMismatch,
    InvalidParam,
    LiquidationGameError,
    NeverReached,
)
from .model import (
    AgentSpec,
    ExpSumStrategy,
    GridStrategy,
    Horizon,
    MarketParams,
    Problem,
    Strategy,
    validate_problem,
)

__all__ = [
    "EvaluationResult",
    "MonteCarloConfig",
    "MonteCarloResult",
    "RoleClassification",
    "ScanResult",
    "DeviationReport",
    "mean_variance",
    "mean_variance_sampled",
    "monte_carlo_revenues",
    "classify_role",
    "effective_liquidation_time",
    "parameter_scan",
    "compute_equilibrium",
    "deviation_report",
    "non_monotone",
]


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationResult:
    """Objective values of one agent's strategy against fixed competitors."""

    expected_revenue: float
    variance: float
    mean_variance_value: float
    cara_value: Optional[float]
    constant_part: float

    def to_dict(self) -> dict:
        return {
            "expected_revenue": self.expected_revenue,
            "variance": self.variance,
            "mean_variance_value": self.mean_variance_value,
            "cara_value": self.cara_value,
            "constant_part": self.constant_part,
        }


@dataclass(frozen=True)
class MonteCarloConfig:
    paths: int = 10_000
    time_steps: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.paths < 100:
            raise InvalidParam("paths", "need at least 100 paths")
        if self.time_steps < 8:
            raise InvalidParam("time_steps", "need at least 8 time steps")


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    variance: float
    cara_mean: Optional[float]
    mean_se: float
    variance_se: float
    cara_se: float
    truncation_time: Optional[float]
    tail_variance_bound: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "cara_mean": self.cara_mean,
            "mean_se": self.mean_se,
            "variance_se": self.variance_se,
            "cara_se": self.cara_se,
            "truncation_time": self.truncation_time,
            "tail_variance_bound": self.tail_variance_bound,
        }


@dataclass(frozen=True)
class RoleClassification:
    """Sign of an empty-handed agent's equilibrium position.

    margin = alpha sigma^2 lam - 2 gamma^2. Positive margin means the agent
    provides liquidity (buys into the others' selling, position > 0 when the
    aggregate is positive); negative means predatory trading (shorts first).
    """

    role: str
    margin: float

    def to_dict(self) -> dict:
        return {"role": self.role, "margin": self.margin}


@dataclass(frozen=True)
class ScanResult:
    value: float
    probe_value: float
    status: str


@dataclass(frozen=True, eq=False)
class DeviationReport:
    """Outcome of perturbing one agent's strategy in many directions.

    The objective is exactly quadratic along each direction, so
    value(eps) - value(0) = first_order * eps + curvature * eps^2 holds
    identically; an equilibrium shows first_order ~ 0 and curvature < 0.
    """

    agent_index: int
    first_order: np.ndarray
    curvature: np.ndarray
    epsilon_grid: np.ndarray
    value_changes: np.ndarray
    scale: float


# ---------------------------------------------------------------------------
# exact integrals of exponential-sum products
# ---------------------------------------------------------------------------


def _tm_exp_integral(m: int, s: float, T: float) -> float:
    """int_0^T t^m exp(s t) dt for s <= 0."""
    if abs(s) * T < 0.5:
        acc = 0.0
        term = 1.0  # (sT)^j / j!
        for j in range(30):
            if j > 0:
                term *= s * T / j
            acc += term / (m + j + 1)
        return acc * T ** (m + 1)
    val = math.expm1(s * T) / s
    for k in range(1, m + 1):
        val = (T**k * math.exp(s * T) - k * val) / s
    return val


def _tm_exp_anchored_end(m: int, s: float, T: float) -> float:
    """int_0^T t^m exp(s (t - T)) dt for s >= 0."""
    return sum(
        math.comb(m, k) * T ** (m - k) * (-1.0) ** k * _tm_exp_integral(k, -s, T)
        for k in range(m + 1)
    )


def _poly_coeffs(a1: float, d1: int, a2: float, d2: int):
    """(t - a1)^d1 (t - a2)^d2 expanded in powers of t, degrees in {0, 1}."""
    if d1 == 0 and d2 == 0:
        return (1.0,)
    if d1 == 1 and d2 == 1:
        return (a1 * a2, -(a1 + a2), 1.0)
    a = a1 if d1 == 1 else a2
    return (-a, 1.0)


def _pair_integral(term1, term2, T: Optional[float]) -> float:
    c1, r1, a1, d1 = term1
    c2, r2, a2, d2 = term2
    if c1 == 0.0 or c2 == 0.0:
        return 0.0
    s = r1 + r2
    beta = _poly_coeffs(a1, d1, a2, d2)
    if T is None:
        # infinite horizon: strictly decaying terms only
        scale = c1 * c2 * math.exp(-r1 * a1 - r2 * a2)
        return scale * sum(
            b * math.factorial(m) / (-s) ** (m + 1) for m, b in enumerate(beta)
        )
    if s >= 0:
        scale = c1 * c2 * math.exp(r1 * (T - a1) + r2 * (T - a2))
        return scale * sum(b * _tm_exp_anchored_end(m, s, T) for m, b in enumerate(beta))
    scale = c1 * c2 * math.exp(-r1 * a1 - r2 * a2)
    return scale * sum(b * _tm_exp_integral(m, s, T) for m, b in enumerate(beta))


def _terms_of(s: ExpSumStrategy):
    return list(zip(s.coefs, s.rates, s.anchors, s.degrees))


def _dterms_of(s: ExpSumStrategy):
    """Term list of the derivative; degree-1 terms split into two."""
    out = []
    for c, r, a, d in _terms_of(s):
        if d == 0:
            out.append((c * r, r, a, 0))
        else:
            out.append((c, r, a, 0))
            out.append((c * r, r, a, 1))
    return out


def _product_integral(terms1, terms2, T: Optional[float]) -> float:
    return sum(_pair_integral(p, q, T) for p in terms1 for q in terms2)


_CONST_ONE = [(1.0, 0.0, 0.0, 0)]


# ---------------------------------------------------------------------------
# quadrature weights
# ---------------------------------------------------------------------------


def _simpson_weights(n_nodes: int, dt: float) -> np.ndarray:
    """Composite Simpson weights; odd interval counts get a 3/8 tail."""
    n_int = n_nodes - 1
    if n_int < 3:
        raise InvalidParam("grid", "need at least 3 intervals for quadrature")
    w = np.zeros(n_nodes)
    if n_int % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (dt / 3.0)
    head = n_int - 3  # even, possibly zero
    if head:
        w[0] = 1.0
        w[1:head:2] = 4.0
        w[2:head:2] = 2.0
        w[head] += 1.0
        w[:head + 1] *= dt / 3.0
    w[head:] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * dt / 8.0)
    return w


# ---------------------------------------------------------------------------
# objective evaluation
# ---------------------------------------------------------------------------


def _cara_from_moments(alpha: float, mean: float, var: float) -> float:
    if alpha <= 0:
        return mean
    return (1.0 - math.exp(-alpha * mean + alpha**2 * var / 2.0)) / alpha


def _result_from_integrals(
    problem: Problem,
    agent_index: int,
    y0: float,
    i_drift: float,
    i_pos_other_rates: float,
    i_rate_other_rates: float,
    i_rate_sq: float,
    i_pos_sq: float,
) -> EvaluationResult:
    m = problem.market
    alpha = problem.agents[agent_index].alpha
    const = y0 * m.s0 - 0.5 * m.gamma * y0**2
    expected = (
        const
        + i_drift
        + m.gamma * i_pos_other_rates
        - m.lam * i_rate_other_rates
        - m.lam * i_rate_sq
    )
    var = m.sigma**2 * i_pos_sq
    mv = expected - 0.5 * alpha * var
    return EvaluationResult(
        expected_revenue=expected,
        variance=var,
        mean_variance_value=mv,
        cara_value=_cara_from_moments(alpha, expected, var),
        constant_part=const,
    )


def _check_horizon(strategy: Strategy, horizon: Horizon) -> None:
    hz = strategy.horizon
    if hz.is_finite != horizon.is_finite:
        raise HorizonMismatch("strategy horizon does not match the problem")
    if horizon.is_finite and abs(hz.T - horizon.T) > 1e-12 * max(1.0, horizon.T):
        raise HorizonMismatch(f"strategy horizon {hz.T} != problem horizon {horizon.T}")


def mean_variance(
    strategy_i: Strategy,
    others: Sequence[Strategy],
    problem: Problem,
    agent_index: int,
    quad_steps: int = 2000,
) -> EvaluationResult:
    """Objective of agent agent_index playing strategy_i against others.

    Exponential-sum profiles with zero or constant drift are integrated in
    closed form; any grid strategy or sampled drift routes through composite
    Simpson on a shared grid. others must hold the n-1 competitor strategies
    in agent order with agent_index skipped.
    """
    others = list(others)
    if len(others) != problem.n - 1:
        raise InvalidParam("others", "need one strategy per competitor")
    if not 0 <= agent_index < problem.n:
        raise InvalidParam("agent_index", "out of range")
    profile = list(others)
    profile.insert(agent_index, strategy_i)
    for s in profile:
        _check_horizon(s, problem.horizon)

    drift = problem.market.drift
    all_exp = all(isinstance(s, ExpSumStrategy) for s in profile)
    if not problem.horizon.is_finite:
        if not all_exp:
            raise HorizonMismatch("infinite-horizon evaluation needs exponential sums")
        ti = _terms_of(strategy_i)
        di = _dterms_of(strategy_i)
        dj = [q for s in others for q in _dterms_of(s)]
        return _result_from_integrals(
            problem,
            agent_index,
            strategy_i.initial_position(),
            0.0,
            _product_integral(ti, dj, None),
            _product_integral(di, dj, None),
            _product_integral(di, di, None),
            _product_integral(ti, ti, None),
        )

    T = problem.T
    if all_exp and drift.kind in ("zero", "constant"):
        ti = _terms_of(strategy_i)
        di = _dterms_of(strategy_i)
        dj = [q for s in others for q in _dterms_of(s)]
        b0 = drift(0.0) if drift.kind == "constant" else 0.0
        i_drift = b0 * _product_integral(ti, _CONST_ONE, T) if b0 else 0.0
        return _result_from_integrals(
            problem,
            agent_index,
            strategy_i.initial_position(),
            i_drift,
            _product_integral(ti, dj, T),
            _product_integral(di, dj, T),
            _product_integral(di, di, T),
            _product_integral(ti, ti, T),
        )

    grids = [s for s in profile if isinstance(s, GridStrategy)]
    if grids:
        t = grids[0].grid
        for s in grids[1:]:
            if s.grid.shape != t.shape or not np.array_equal(s.grid, t):
                raise GridMismatch("grid strategies must share one grid")
    else:
        t = np.linspace(0.0, T, quad_steps + 1)
    pos = np.empty((problem.n, t.size))
    rate = np.empty_like(pos)
    for k, s in enumerate(profile):
        if isinstance(s, GridStrategy):
            pos[k] = s.positions
            rate[k] = s.node_rates()
        else:
            pos[k] = s.position(t)
            rate[k] = s.rate(t)
    return mean_variance_sampled(t, pos, rate, problem, agent_index)


def mean_variance_sampled(
    t: np.ndarray,
    positions: np.ndarray,
    rates: np.ndarray,
    problem: Problem,
    agent_index: int,
) -> EvaluationResult:
    """Objective from a fully sampled profile (the CSV evaluation path).

    positions and rates are (n_agents, n_nodes) samples on the uniform grid
    t. The same quadrature runs whether samples come from a solver or from a
    re-read output file, so round-tripping an emitted CSV reproduces the
    sidecar evaluation bit for bit.
    """
    t = np.asarray(t, dtype=float)
    positions = np.asarray(positions, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if positions.shape != (problem.n, t.size) or rates.shape != positions.shape:
        raise GridMismatch("sampled profile shape mismatch")
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise GridMismatch("quadrature grid must be uniform")
    w = _simpson_weights(t.size, float(steps[0]))
    b = np.asarray(problem.market.drift(t), dtype=float) * np.ones_like(t)
    xi = positions[agent_index]
    vi = rates[agent_index]
    s_other = rates.sum(axis=0) - vi
    return _result_from_integrals(
        problem,
        agent_index,
        float(xi[0]),
        float(w @ (xi * b)),
        float(w @ (xi * s_other)),
        float(w @ (vi * s_other)),
        float(w @ (vi * vi)),
        float(w @ (xi * xi)),
    )


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _slowest_rate(profile: Sequence[ExpSumStrategy]) -> float:
    return max(float(np.max(s.rates)) for s in profile)


def monte_carlo_revenues(
    strategy_i: Strategy,
    others: Sequence[Strategy],
    problem: Problem,
    config: MonteCarloConfig,
    agent_index: int,
) -> MonteCarloResult:
    """Simulate revenues of agent agent_index; moments with standard errors.

    Only the martingale part sigma * int X_i dW is random, so each path draws
    Brownian increments (Philox counter-based generator keyed by the seed,
    identical output for identical config) and adds the deterministic
    expected revenue. Infinite horizons are truncated where the slowest mode
    has decayed by e^-40; the variance left in the tail is reported.
    """
    analytic = mean_variance(strategy_i, others, problem, agent_index)
    if problem.horizon.is_finite:
        t_end = problem.T
        trunc: Optional[float] = None
        tail = 0.0
    else:
        profile = [strategy_i, *others]
        trunc = 40.0 / abs(_slowest_rate(profile))
        t_end = trunc
        # X_i(t_end + u) as an exponential sum in u; a degree-1 term splits
        shifted = []
        for c, r, a, d in _terms_of(strategy_i):
            lead = c * math.exp(r * (t_end - a))
            if d == 0:
                shifted.append((lead, r, 0.0, 0))
            else:
                shifted.append((lead * (t_end - a), r, 0.0, 0))
                shifted.append((lead, r, 0.0, 1))
        tail = problem.market.sigma**2 * _product_integral(shifted, shifted, None)
    t = np.linspace(0.0, t_end, config.time_steps + 1)
    xi = np.asarray(strategy_i.position(t), dtype=float)
    dt = t[1] - t[0]

    rng = np.random.Generator(np.random.Philox(key=config.seed))
    increments = rng.standard_normal((config.paths, config.time_steps)) * math.sqrt(dt)
    stochastic = problem.market.sigma * (increments @ xi[:-1])
    revenues = analytic.expected_revenue + stochastic

    alpha = problem.agents[agent_index].alpha
    mean = float(np.mean(revenues))
    mean_se = float(np.std(revenues, ddof=1) / math.sqrt(config.paths))
    centered_sq = (revenues - mean) ** 2
    variance = float(np.sum(centered_sq) / (config.paths - 1))
    variance_se = float(np.std(centered_sq, ddof=1) / math.sqrt(config.paths))
    if alpha > 0:
        utils = (1.0 - np.exp(-alpha * revenues)) / alpha
    else:
        utils = revenues
    cara_mean = float(np.mean(utils))
    cara_se = float(np.std(utils, ddof=1) / math.sqrt(config.paths))
    return MonteCarloResult(
        mean=mean,
        variance=variance,
        cara_mean=cara_mean,
        mean_se=mean_se,
        variance_se=variance_se,
        cara_se=cara_se,
        truncation_time=trunc,
        tail_variance_bound=float(tail),
    )


# ---------------------------------------------------------------------------
# classification, liquidation time, scans
# ---------------------------------------------------------------------------


def classify_role(market: MarketParams, alpha: float) -> RoleClassification:
    """Classify an inventory-less agent by margin = alpha sigma^2 lam - 2 gamma^2."""
    if alpha < 0:
        raise InvalidParam("alpha", "risk aversion must be >= 0")
    lhs = alpha * market.sigma**2 * market.lam
    rhs = 2.0 * market.gamma**2
    margin = lhs - rhs
    scale = max(lhs, rhs)
    if abs(margin) <= 1e-12 * scale or scale == 0.0:
        role = "inactive"
    elif margin > 0:
        role = "liquidity_provision"
    else:
        role = "predatory"
    return RoleClassification(role=role, margin=margin)


def effective_liquidation_time(strategy: Strategy, fraction: float = 0.99) -> float:
    """First time after which |X| stays within (1 - fraction) of |X(0)|."""
    if not 0.0 < fraction < 1.0:
        raise InvalidParam("fraction", "must lie in (0, 1)")
    x0 = abs(strategy.initial_position())
    if x0 == 0.0:
        raise InvalidParam("strategy", "initial position is zero; fraction undefined")
    threshold = (1.0 - fraction) * x0

    if strategy.horizon.is_finite:
        t_hi = strategy.horizon.T
    else:
        # |X(t)| <= envelope(t) = sum_k |c_k (t-a_k)^{d_k} e^{r_k (t-a_k)}|,
        # which is decreasing once every term is (t >= a_k + d_k/|r_k|)
        terms = _terms_of(strategy)

        def envelope(t: float) -> float:
            return sum(
                abs(c) * abs(t - a) ** d * math.exp(r * (t - a))
                for c, r, a, d in terms
            )

        slowest = max(r for _, r, _, _ in terms)
        t_hi = max(a + d / abs(r) for _, r, a, d in terms) + 1.0 / abs(slowest)
        for _ in range(200):
            if envelope(t_hi) <= threshold:
                break
            t_hi *= 2.0
        else:
            raise NeverReached("decay envelope never fell below the threshold")

    t = np.linspace(0.0, t_hi, 4097)
    above = np.abs(np.asarray(strategy.position(t))) > threshold
    if not np.any(above):
        return 0.0
    last = int(np.where(above)[0][-1])
    if last == t.size - 1:
        raise NeverReached("position exceeds the threshold at the end of the window")
    lo, hi = t[last], t[last + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if abs(float(strategy.position(mid))) > threshold:
            lo = mid
        else:
            hi = mid
    return float(hi)


def compute_equilibrium(problem: Problem, grid_steps: int = 400):
    """Solve the game, preferring closed forms; returns (strategies, route)."""
    m = problem.market
    if problem.horizon.is_finite:
        usable_closed = (
            m.drift.is_zero
            and problem.equal_alpha
            and float(problem.alphas[0]) * m.sigma**2 > 0.0
        )
        if usable_closed:
            return (
                closed_form.equal_alpha_finite(m, problem.agents, problem.T),
                "closed_form",
            )
        system = bvp.assemble(problem)
        sol = bvp.solve_finite(system, problem.x0, problem.T, grid_steps, problem=problem)
        return list(sol.strategies), "bvp"
    if problem.equal_alpha:
        return closed_form.equal_alpha_infinite(m, problem.agents), "closed_form"
    first, second, _ = closed_form.two_player_infinite(
        m, problem.agents[0], problem.agents[1]
    )
    return [first, second], "closed_form"


_SCAN_PARAMS = ("alpha_sigma2", "lambda", "gamma", "n", "T")


def _scan_problem(problem: Problem, parameter: str, value: float) -> Problem:
    m = problem.market
    if parameter == "lambda":
        market = MarketParams(lam=value, gamma=m.gamma, sigma=m.sigma, s0=m.s0, drift=m.drift)
        return validate_problem(market, problem.agents, problem.horizon)
    if parameter == "gamma":
        market = MarketParams(lam=m.lam, gamma=value, sigma=m.sigma, s0=m.s0, drift=m.drift)
        return validate_problem(market, problem.agents, problem.horizon)
    if parameter == "T":
        return validate_problem(m, problem.agents, Horizon.finite(value))
    if parameter == "alpha_sigma2":
        if m.sigma <= 0:
            raise InvalidParam("sigma", "alpha_sigma2 scan needs sigma > 0")
        alpha = value / m.sigma**2
        agents = [AgentSpec(x0=a.x0, alpha=alpha) for a in problem.agents]
        return validate_problem(m, agents, problem.horizon)
    if parameter == "n":
        count = int(round(value))
        if count < 1 or count != value:
            raise InvalidParam("n", "agent count must be a positive integer")
        lead = problem.agents[0]
        total = float(np.sum(problem.x0))
        if count == 1:
            agents = [lead]
        else:
            rest = (total - lead.x0) / (count - 1)
            agents = [lead] + [AgentSpec(x0=rest, alpha=lead.alpha)] * (count - 1)
        return validate_problem(m, agents, problem.horizon)
    raise InvalidParam("parameter", f"must be one of {_SCAN_PARAMS}")


def parameter_scan(
    problem: Problem,
    parameter: str,
    values,
    probe: Tuple[int, float],
    grid_steps: int = 400,
):
    """Recompute the equilibrium along one parameter axis and probe it.

    probe is (agent_index, time); the probe value is that agent's inventory.
    Scanning "n" keeps agent 1 fixed and splits the remaining aggregate
    inventory evenly; "alpha_sigma2" sets one common risk aversion. Failures
    at individual points are recorded in the status column, not raised.
    """
    if parameter not in _SCAN_PARAMS:
        raise InvalidParam("parameter", f"must be one of {_SCAN_PARAMS}")
    agent_index, t_probe = probe
    out = []
    for v in values:
        try:
            p2 = _scan_problem(problem, parameter, float(v))
            if not 0 <= agent_index < p2.n:
                raise InvalidParam("probe", "agent index out of range")
            strategies, _ = compute_equilibrium(p2, grid_steps)
            probe_value = float(strategies[agent_index].position(t_probe))
            out.append(ScanResult(value=float(v), probe_value=probe_value, status="ok"))
        except LiquidationGameError as exc:
            out.append(
                ScanResult(value=float(v), probe_value=float("nan"), status=type(exc).__name__)
            )
    return out


def non_monotone(values, rel_tol: float = 1e-9) -> Tuple[bool, bool]:
    """(has increase, has decrease) beyond rel_tol * max(1, |values|)."""
    v = np.asarray(values, dtype=float)
    tol = rel_tol * max(1.0, float(np.max(np.abs(v))))
    d = np.diff(v)
    return bool(np.any(d > tol)), bool(np.any(d < -tol))


# ---------------------------------------------------------------------------
# deviation probe
# ---------------------------------------------------------------------------


def _deviation_window(problem: Problem, profile) -> float:
    if problem.horizon.is_finite:
        return problem.T
    return 40.0 / abs(_slowest_rate(profile))


def deviation_report(
    problem: Problem,
    strategies: Sequence[Strategy],
    agent_index: int,
    n_directions: int = 200,
    epsilons: Sequence[float] = (1e-2, 1e-3),
    seed: int = 0,
    grid_steps: int = 4096,
) -> DeviationReport:
    """Probe the no-profitable-deviation property for one agent.

    Directions are sine bumps sin(k pi t / T) for k = 1..20 plus random
    piecewise-linear bumps vanishing at both ends (knots on quadrature
    nodes, so every Simpson pair sees a single linear piece). The objective
    is quadratic along each direction; its exact first-order coefficient and
    curvature are integrated per direction, and value changes follow from
    them identically. Infinite horizons need no truncation correction since
    bumps have compact support.
    """
    strategies = list(strategies)
    if len(strategies) != problem.n:
        raise InvalidParam("strategies", "full profile required")
    if not 0 <= agent_index < problem.n:
        raise InvalidParam("agent_index", "out of range")
    grid_steps = int(grid_steps)
    if grid_steps % 32:
        grid_steps += 32 - grid_steps % 32

    window = _deviation_window(problem, strategies)
    t = np.linspace(0.0, window, grid_steps + 1)
    dt = t[1] - t[0]
    w = _simpson_weights(t.size, float(dt))

    m = problem.market
    alpha = problem.agents[agent_index].alpha
    pos_i = rate_i = None
    s_other = np.zeros(t.size)
    for k, s in enumerate(strategies):
        if isinstance(s, GridStrategy):
            if s.n_steps != grid_steps or abs(s.grid[-1] - window) > 1e-12 * max(1.0, window):
                p = s.position(t)
                r = s.rate(t)
            else:
                p, r = s.positions, s.node_rates()
        else:
            p, r = s.position(t), s.rate(t)
        if k == agent_index:
            pos_i, rate_i = np.asarray(p, float), np.asarray(r, float)
        else:
            s_other = s_other + np.asarray(r, float)
    b = np.asarray(m.drift(t), dtype=float) * np.ones_like(t)

    # first-order integrand pair: a = int eta g1 - int eta' g2
    g1 = b + m.gamma * s_other - alpha * m.sigma**2 * pos_i
    g2 = m.lam * s_other + 2.0 * m.lam * rate_i

    n_sine = min(20, n_directions)
    n_pl = n_directions - n_sine
    first_order = np.empty(n_directions)
    curvature = np.empty(n_directions)

    ks = np.arange(1, n_sine + 1)
    eta = np.sin(np.outer(ks, np.pi * t / window))
    eta_dot = (ks[:, None] * np.pi / window) * np.cos(np.outer(ks, np.pi * t / window))
    first_order[:n_sine] = eta @ (w * g1) - eta_dot @ (w * g2)
    curvature[:n_sine] = -0.5 * alpha * m.sigma**2 * (window / 2.0) - m.lam * (
        (ks * np.pi / window) ** 2 * (window / 2.0)
    )

    if n_pl:
        rng = np.random.Generator(np.random.Philox(key=seed))
        n_spans = 16
        span_len = grid_steps // n_spans
        knots_idx = np.arange(0, grid_steps + 1, span_len)
        knot_vals = np.zeros((n_pl, n_spans + 1))
        knot_vals[:, 1:-1] = rng.standard_normal((n_pl, n_spans - 1))
        slopes = np.diff(knot_vals, axis=1) / (span_len * dt)
        # per-span smooth integrals of g1, (t - t_a) g1, g2
        A1 = np.empty(n_spans)
        B1 = np.empty(n_spans)
        A2 = np.empty(n_spans)
        for sp in range(n_spans):
            lo, hi = knots_idx[sp], knots_idx[sp + 1]
            ws = _simpson_weights(hi - lo + 1, float(dt))
            seg = slice(lo, hi + 1)
            A1[sp] = ws @ g1[seg]
            B1[sp] = ws @ ((t[seg] - t[lo]) * g1[seg])
            A2[sp] = ws @ g2[seg]
        first_order[n_sine:] = (
            knot_vals[:, :-1] @ A1 + slopes @ B1 - slopes @ A2
        )
        span_dt = span_len * dt
        v_a = knot_vals[:, :-1]
        v_b = knot_vals[:, 1:]
        int_eta_sq = (span_dt / 3.0) * np.sum(v_a**2 + v_a * v_b + v_b**2, axis=1)
        int_eta_dot_sq = span_dt * np.sum(slopes**2, axis=1)
        curvature[n_sine:] = -0.5 * alpha * m.sigma**2 * int_eta_sq - m.lam * int_eta_dot_sq

    base = mean_variance(
        strategies[agent_index],
        [s for k, s in enumerate(strategies) if k != agent_index],
        problem,
        agent_index,
    )
    scale = max(1.0, abs(base.mean_variance_value))
    eps_grid = np.array(sorted({e for mag in epsilons for e in (mag, -mag)}))
    value_changes = first_order[:, None] * eps_grid[None, :] + curvature[:, None] * eps_grid[None, :] ** 2
    return DeviationReport(
        agent_index=agent_index,
        first_order=first_order,
        curvature=curvature,
        epsilon_grid=eps_grid,
        value_changes=value_changes,
        scale=scale,
    )
