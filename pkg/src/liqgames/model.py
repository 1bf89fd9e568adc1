"""Domain types for n-agent optimal liquidation under linear price impact.

The market model: trading at rate dX/dt moves the quoted price permanently
(coefficient gamma per unit of net inventory change, shared by all agents)
and costs a temporary spread proportional to the aggregate trading rate
(coefficient lam). Each agent i starts from inventory x0_i, must reach zero
by the horizon, and scores revenue by mean minus (alpha_i/2) times variance.

This module holds parameter records, the two strategy representations
(exponential sums and sampled grids), problem validation, and JSON I/O.
All types are immutable after construction; arrays are frozen read-only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    HorizonMismatch,
    InvalidParam,
    OutOfDomain,
    UnsupportedCase,
)

__all__ = [
    "DriftSpec",
    "MarketParams",
    "AgentSpec",
    "Horizon",
    "Problem",
    "ExpSumStrategy",
    "GridStrategy",
    "SpectralData",
    "Strategy",
    "validate_problem",
    "eval_strategy",
    "system_matrix",
    "alphas_equal",
    "problem_to_dict",
    "problem_from_dict",
    "load_problem",
    "dump_problem",
]

# Tolerance for "equal risk aversion" routing decisions.
_ALPHA_EQ_RTOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Deterministic drift b(t) of the unaffected price.

    kind is one of "zero", "constant", "sampled". Sampled drifts are linearly
    interpolated between a strictly increasing sample grid.
    """

    kind: str
    value: float = 0.0
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sampled"):
            raise InvalidParam("drift", f"unknown kind {self.kind!r}")
        if self.kind == "sampled":
            if self.grid is None or self.values is None:
                raise InvalidParam("drift", "sampled drift needs grid and values")
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or g.shape != v.shape or g.size < 2:
                raise InvalidParam("drift", "grid and values must be 1d, equal length >= 2")
            if not np.all(np.diff(g) > 0):
                raise InvalidParam("drift", "sample grid must be strictly increasing")
            object.__setattr__(self, "grid", _freeze(g))
            object.__setattr__(self, "values", _freeze(v))
        else:
            object.__setattr__(self, "grid", None)
            object.__setattr__(self, "values", None)

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls(kind="zero")

    @classmethod
    def constant(cls, value: float) -> "DriftSpec":
        return cls(kind="constant", value=float(value))

    @classmethod
    def sampled(cls, grid, values) -> "DriftSpec":
        return cls(kind="sampled", grid=grid, values=values)

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "constant":
            return self.value == 0.0
        return bool(np.all(self.values == 0.0))

    def covers(self, T: float) -> bool:
        """Whether b(t) is defined on all of [0, T]."""
        if self.kind != "sampled":
            return True
        return self.grid[0] <= 0.0 and self.grid[-1] >= T

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(t)
        elif self.kind == "constant":
            out = np.full_like(t, self.value)
        else:
            out = np.interp(t, self.grid, self.values)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"type": "zero"}
        if self.kind == "constant":
            return {"type": "constant", "value": self.value}
        return {
            "type": "sampled",
            "grid": [float(x) for x in self.grid],
            "values": [float(x) for x in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriftSpec":
        if not isinstance(d, dict) or "type" not in d:
            raise InvalidParam("drift", "expected an object with a 'type' field")
        kind = d["type"]
        if kind == "zero":
            return cls.zero()
        if kind == "constant":
            return cls.constant(d.get("value", 0.0))
        if kind == "sampled":
            return cls.sampled(d.get("grid"), d.get("values"))
        raise InvalidParam("drift", f"unknown kind {kind!r}")


@dataclass(frozen=True, eq=False)
class MarketParams:
    """Market impact and price parameters.

    lam    temporary impact coefficient, > 0
    gamma  permanent impact coefficient, >= 0
    sigma  price volatility, >= 0
    s0     initial unaffected price
    drift  deterministic drift of the unaffected price
    """

    lam: float
    gamma: float
    sigma: float
    s0: float = 0.0
    drift: DriftSpec = field(default_factory=DriftSpec.zero)

    def __post_init__(self):
        for name in ("lam", "gamma", "sigma", "s0"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise InvalidParam(name, "must be a finite number")
            object.__setattr__(self, name, float(v))
        if self.lam <= 0:
            raise InvalidParam("lambda", "temporary impact must be > 0")
        if self.gamma < 0:
            raise InvalidParam("gamma", "permanent impact must be >= 0")
        if self.sigma < 0:
            raise InvalidParam("sigma", "volatility must be >= 0")
        if not isinstance(self.drift, DriftSpec):
            raise InvalidParam("drift", "must be a DriftSpec")


@dataclass(frozen=True)
class AgentSpec:
    """One agent: initial inventory x0 and risk aversion alpha >= 0."""

    x0: float
    alpha: float

    def __post_init__(self):
        for name in ("x0", "alpha"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise InvalidParam(name, "must be a finite number")
            object.__setattr__(self, name, float(v))
        if self.alpha < 0:
            raise InvalidParam("alpha", "risk aversion must be >= 0")


@dataclass(frozen=True)
class Horizon:
    """Trading horizon: finite with deadline T, or infinite."""

    T: Optional[float] = None

    def __post_init__(self):
        if self.T is not None:
            if not (isinstance(self.T, (int, float)) and math.isfinite(self.T)):
                raise InvalidParam("T", "must be a finite number")
            if self.T <= 0:
                raise InvalidParam("T", "horizon length must be > 0")
            object.__setattr__(self, "T", float(self.T))

    @classmethod
    def finite(cls, T: float) -> "Horizon":
        return cls(T=T)

    @classmethod
    def infinite(cls) -> "Horizon":
        return cls(T=None)

    @property
    def is_finite(self) -> bool:
        return self.T is not None

    def to_dict(self) -> dict:
        if self.is_finite:
            return {"type": "finite", "T": self.T}
        return {"type": "infinite"}

    @classmethod
    def from_dict(cls, d: dict) -> "Horizon":
        if not isinstance(d, dict) or "type" not in d:
            raise InvalidParam("horizon", "expected an object with a 'type' field")
        if d["type"] == "finite":
            if "T" not in d:
                raise InvalidParam("horizon", "finite horizon needs T")
            return cls.finite(d["T"])
        if d["type"] == "infinite":
            return cls.infinite()
        raise InvalidParam("horizon", f"unknown type {d['type']!r}")


def alphas_equal(alphas) -> bool:
    a = np.asarray(alphas, dtype=float)
    return float(np.ptp(a)) <= _ALPHA_EQ_RTOL * max(1.0, float(np.max(np.abs(a))))


@dataclass(frozen=True, eq=False)
class Problem:
    """A validated liquidation game. Construct through validate_problem."""

    market: MarketParams
    agents: Tuple[AgentSpec, ...]
    horizon: Horizon

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def x0(self) -> np.ndarray:
        return np.array([a.x0 for a in self.agents])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a.alpha for a in self.agents])

    @property
    def equal_alpha(self) -> bool:
        return alphas_equal(self.alphas)

    @property
    def T(self) -> Optional[float]:
        return self.horizon.T


def validate_problem(market: MarketParams, agents: Sequence[AgentSpec], horizon: Horizon) -> Problem:
    """Check a parameter set for solvability and return the validated problem.

    Finite horizons accept any number of agents with alpha >= 0 and any drift
    covering [0, T]. Infinite horizons require sigma > 0, alpha > 0 for every
    agent, vanishing drift, and either equal risk aversions or exactly two
    agents.
    """
    if not isinstance(market, MarketParams):
        raise InvalidParam("market", "must be a MarketParams")
    agents = tuple(agents)
    if len(agents) == 0:
        raise InvalidParam("agents", "at least one agent required")
    for a in agents:
        if not isinstance(a, AgentSpec):
            raise InvalidParam("agents", "entries must be AgentSpec")
    if not isinstance(horizon, Horizon):
        raise InvalidParam("horizon", "must be a Horizon")

    if horizon.is_finite:
        if not market.drift.covers(horizon.T):
            raise InvalidParam("drift", "sampled drift does not cover [0, T]")
    else:
        if market.sigma <= 0:
            raise InvalidParam("sigma", "infinite horizon requires sigma > 0")
        if any(a.alpha <= 0 for a in agents):
            raise InvalidParam("alpha", "infinite horizon requires alpha > 0 for every agent")
        if not market.drift.is_zero:
            raise InvalidParam("drift", "infinite horizon requires zero drift")
        if len(agents) > 2 and not alphas_equal([a.alpha for a in agents]):
            raise UnsupportedCase(
                "infinite horizon with more than two agents requires equal risk aversion"
            )
    return Problem(market=market, agents=agents, horizon=horizon)


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExpSumStrategy:
    """Inventory path X(t) = sum_k c_k (t - a_k)^{d_k} exp(r_k (t - a_k)).

    Each term stores the anchor time a_k at which its coefficient is the
    term's value, so positive-rate terms (anchored at the horizon end) are
    never evaluated by exponentiating a positive quantity; that keeps the
    representation exact for arbitrarily stiff rate constants. Degrees above
    zero only occur for the risk-neutral single-agent limit, whose linear
    path is the rate-zero double root of the mode equation.

    Finite-horizon strategies must end at zero inventory; infinite-horizon
    strategies must have strictly decaying terms.
    """

    coefs: np.ndarray
    rates: np.ndarray
    anchors: np.ndarray
    horizon: Horizon
    degrees: np.ndarray = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefs, dtype=float))
        r = np.atleast_1d(np.asarray(self.rates, dtype=float))
        a = np.atleast_1d(np.asarray(self.anchors, dtype=float))
        d = self.degrees
        d = np.zeros_like(c, dtype=int) if d is None else np.atleast_1d(np.asarray(d, dtype=int))
        if not (c.shape == r.shape == a.shape == d.shape):
            raise InvalidParam("terms", "coefs, rates, anchors, degrees must align")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r)) and np.all(np.isfinite(a))):
            raise InvalidParam("terms", "term data must be finite")
        if np.any(d < 0) or np.any(d > 1):
            raise InvalidParam("terms", "term degree must be 0 or 1")
        object.__setattr__(self, "coefs", _freeze(c))
        object.__setattr__(self, "rates", _freeze(r))
        object.__setattr__(self, "anchors", _freeze(a))
        frozen_d = np.array(d, dtype=int, copy=True)
        frozen_d.flags.writeable = False
        object.__setattr__(self, "degrees", frozen_d)
        if not isinstance(self.horizon, Horizon):
            raise InvalidParam("horizon", "must be a Horizon")
        if self.horizon.is_finite:
            x_end = abs(self.position(self.horizon.T))
            if x_end > 1e-12 * max(1.0, abs(self.position(0.0))):
                raise InvalidParam("terms", "finite-horizon strategy must end at zero inventory")
        else:
            if np.any(self.rates >= 0):
                raise InvalidParam("rates", "infinite-horizon terms must decay strictly")

    @classmethod
    def from_terms(cls, terms: Sequence[Tuple[float, float]], horizon: Horizon) -> "ExpSumStrategy":
        """Build from plain (coefficient, rate) pairs anchored at t = 0."""
        terms = list(terms)
        c = [p[0] for p in terms]
        r = [p[1] for p in terms]
        return cls(coefs=c, rates=r, anchors=np.zeros(len(terms)), horizon=horizon)

    @property
    def terms(self):
        """Plain (coefficient, rate) view; only exact for degree-0 terms."""
        math_coefs = self.coefs * np.exp(-self.rates * self.anchors)
        return list(zip(math_coefs.tolist(), self.rates.tolist()))

    def _accumulate(self, t, order: int):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, r, a, d in zip(self.coefs, self.rates, self.anchors, self.degrees):
            u = t - a
            e = np.exp(r * u)
            if order == 0:
                out += c * e * (u if d == 1 else 1.0)
            elif order == 1:
                out += c * e * ((1.0 + r * u) if d == 1 else r)
            else:
                out += c * e * ((2.0 * r + r * r * u) if d == 1 else r * r)
        return out if out.ndim else float(out)

    def position(self, t):
        return self._accumulate(t, 0)

    def rate(self, t):
        """Trading rate dX/dt."""
        return self._accumulate(t, 1)

    def accel(self, t):
        """Second derivative of the inventory path."""
        return self._accumulate(t, 2)

    def initial_position(self) -> float:
        return float(self.position(0.0))

    def scaled(self, factor: float) -> "ExpSumStrategy":
        return replace(self, coefs=self.coefs * factor)

    def plus(self, other: "ExpSumStrategy") -> "ExpSumStrategy":
        if other.horizon != self.horizon:
            raise HorizonMismatch("strategies do not share a horizon")
        return ExpSumStrategy(
            coefs=np.concatenate([self.coefs, other.coefs]),
            rates=np.concatenate([self.rates, other.rates]),
            anchors=np.concatenate([self.anchors, other.anchors]),
            degrees=np.concatenate([self.degrees, other.degrees]),
            horizon=self.horizon,
        )

    def term_dicts(self):
        return [
            {"coef": float(c), "rate": float(r), "anchor": float(a), "degree": int(d)}
            for c, r, a, d in zip(self.coefs, self.rates, self.anchors, self.degrees)
        ]


@dataclass(frozen=True, eq=False)
class GridStrategy:
    """Inventory path sampled on a uniform grid over [0, T].

    Positions are linearly interpolated. The trading rate at the nodes is
    reconstructed by centered differences in the interior and second-order
    one-sided differences at the ends, then interpolated linearly in between.
    The final position must be exactly zero.
    """

    grid: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if g.ndim != 1 or g.shape != p.shape:
            raise InvalidParam("grid", "grid and positions must be 1d and equal length")
        if g.size < 9:
            raise InvalidParam("grid", "need at least 8 intervals")
        if g[0] != 0.0:
            raise InvalidParam("grid", "grid must start at 0")
        steps = np.diff(g)
        if not np.all(steps > 0):
            raise InvalidParam("grid", "grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise InvalidParam("grid", "grid must be uniform")
        if p[-1] != 0.0:
            raise InvalidParam("positions", "final position must be exactly zero")
        if not np.all(np.isfinite(p)):
            raise InvalidParam("positions", "positions must be finite")
        object.__setattr__(self, "grid", _freeze(g))
        object.__setattr__(self, "positions", _freeze(p))

    @property
    def horizon(self) -> Horizon:
        return Horizon.finite(float(self.grid[-1]))

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def node_rates(self) -> np.ndarray:
        p, h = self.positions, self.dt
        out = np.empty_like(p)
        out[1:-1] = (p[2:] - p[:-2]) / (2.0 * h)
        out[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h)
        out[-1] = (3.0 * p[-1] - 4.0 * p[-2] + p[-3]) / (2.0 * h)
        return out

    def position(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.grid, self.positions)
        return out if out.ndim else float(out)

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.grid, self.node_rates())
        return out if out.ndim else float(out)

    def initial_position(self) -> float:
        return float(self.positions[0])


Strategy = Union[ExpSumStrategy, GridStrategy]


def eval_strategy(strategy: Strategy, t):
    """Evaluate (position, trading rate) at time t, scalar or array.

    Raises OutOfDomain outside [0, T] for finite horizons or for t < 0 on
    infinite horizons.
    """
    ta = np.asarray(t, dtype=float)
    hz = strategy.horizon
    if np.any(ta < 0.0):
        raise OutOfDomain("t must be >= 0")
    if hz.is_finite and np.any(ta > hz.T * (1.0 + 1e-12)):
        raise OutOfDomain(f"t must be <= {hz.T}")
    return strategy.position(t), strategy.rate(t)


# ---------------------------------------------------------------------------
# spectral data and system matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Mode structure of the equilibrium dynamics for one parameter set.

    theta_plus/theta_minus are the growth/decay rates of the inventory
    differences from the average; rho_plus/rho_minus drive the aggregate.
    kappa is the single-agent decay rate sqrt(alpha sigma^2 / (2 lam)). xi is
    the dimensionless competition ratio 4 alpha sigma^2 lam / gamma^2, None
    when gamma = 0 (role classification then falls back to the rate gap).
    quartic_roots holds the two decaying rates of the heterogeneous
    two-player infinite-horizon case when applicable.
    """

    theta_hat: float
    rho_hat: float
    theta_plus: float
    theta_minus: float
    rho_plus: float
    rho_minus: float
    kappa: float
    xi: Optional[float]
    system_matrix: np.ndarray
    quartic_roots: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "system_matrix", _freeze(self.system_matrix))

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "rho_hat": self.rho_hat,
            "theta_plus": self.theta_plus,
            "theta_minus": self.theta_minus,
            "rho_plus": self.rho_plus,
            "rho_minus": self.rho_minus,
            "kappa": self.kappa,
            "xi": self.xi,
            "quartic_roots": list(self.quartic_roots) if self.quartic_roots else None,
            "system_matrix": [list(map(float, row)) for row in self.system_matrix],
        }


def system_matrix(market: MarketParams, alphas) -> np.ndarray:
    """First-order coefficient matrix M of the equilibrium ODE system.

    The coupled second-order optimality conditions for n agents, written for
    Z = (X, dX/dt), take the form dZ/dt = M Z + f(t) with

        M = [[0, I], [(A - J A / (n+1)) / lam, (gamma/lam) (I - 2 J/(n+1))]]

    where A = sigma^2 diag(alpha_1..alpha_n) and J is the all-ones matrix.
    """
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    n = a.size
    A = market.sigma**2 * np.diag(a)
    J = np.ones((n, n))
    eye = np.eye(n)
    lower_left = (A - J @ A / (n + 1)) / market.lam
    lower_right = (market.gamma / market.lam) * (eye - 2.0 * J / (n + 1))
    top = np.hstack([np.zeros((n, n)), eye])
    bottom = np.hstack([lower_left, lower_right])
    return np.vstack([top, bottom])


# ---------------------------------------------------------------------------
# JSON problem I/O
# ---------------------------------------------------------------------------


def problem_to_dict(problem: Problem) -> dict:
    m = problem.market
    return {
        "market": {
            "lambda": m.lam,
            "gamma": m.gamma,
            "sigma": m.sigma,
            "s0": m.s0,
            "drift": m.drift.to_dict(),
        },
        "agents": [{"x0": a.x0, "alpha": a.alpha} for a in problem.agents],
        "horizon": problem.horizon.to_dict(),
    }


def problem_from_dict(d: dict) -> Problem:
    if not isinstance(d, dict):
        raise InvalidParam("config", "top level must be an object")
    try:
        md = d["market"]
        ad = d["agents"]
        hd = d["horizon"]
    except (KeyError, TypeError) as exc:
        raise InvalidParam("config", f"missing section: {exc}") from exc
    if not isinstance(md, dict):
        raise InvalidParam("market", "must be an object")
    if "lambda" not in md:
        raise InvalidParam("lambda", "missing")
    market = MarketParams(
        lam=md["lambda"],
        gamma=md.get("gamma", 0.0),
        sigma=md.get("sigma", 0.0),
        s0=md.get("s0", 0.0),
        drift=DriftSpec.from_dict(md["drift"]) if "drift" in md else DriftSpec.zero(),
    )
    if not isinstance(ad, list) or not ad:
        raise InvalidParam("agents", "must be a non-empty list")
    agents = []
    for entry in ad:
        if not isinstance(entry, dict) or "x0" not in entry:
            raise InvalidParam("agents", "each agent needs x0 (and alpha)")
        agents.append(AgentSpec(x0=entry["x0"], alpha=entry.get("alpha", 0.0)))
    horizon = Horizon.from_dict(hd)
    return validate_problem(market, agents, horizon)


def load_problem(path: str) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParam("config", f"invalid JSON: {exc}") from exc
    return problem_from_dict(data)


def dump_problem(problem: Problem, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
        fh.write("\n")
