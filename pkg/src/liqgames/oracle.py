"""Discrete-game oracle: equilibrium by best-response iteration.

Independent cross-check for the differential-equation solvers. Strategies
are piecewise-linear inventory paths on a uniform grid; each agent's
objective is the midpoint-rule discretization of the running payoff

    q (b + gamma s) - (alpha sigma^2 / 2) q^2 - lam p (s + p)

with q the agent's inventory, p its trading rate and s the competitors'
aggregate rate. No optimality condition from the continuous model enters:
the discrete objective is concave and quadratic in the interior node values,
so each best response is one symmetric tridiagonal solve, and a damped
Gauss-Seidel sweep over agents converges to the discrete Nash equilibrium.
Discretization error against the continuous equilibrium is O(1/N^2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import IndefiniteHessian, InvalidParam
from .model import GridStrategy, Problem

__all__ = ["DiscreteGame", "FixedPointReport", "iterate_nash", "compare"]


@dataclass(frozen=True)
class FixedPointReport:
    converged: bool
    sweeps: int
    max_update: float
    tol: float

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "sweeps": self.sweeps,
            "max_update": self.max_update,
            "tol": self.tol,
        }


class DiscreteGame:
    """Problem data discretized on a uniform grid with n_steps intervals.

    Boundary nodes are pinned to (x_i, 0); the Hessian of each agent's
    objective in the interior nodes is the constant tridiagonal matrix with
    diagonal -4 lam / dt - alpha sigma^2 dt / 2 and off-diagonal
    2 lam / dt - alpha sigma^2 dt / 4, so its negative is factored once per
    agent (banded Cholesky) and reused by every best response.
    """

    def __init__(self, problem: Problem, n_steps: int = 200):
        if not problem.horizon.is_finite:
            raise InvalidParam("horizon", "the discrete oracle needs a finite horizon")
        if n_steps < 8:
            raise InvalidParam("n_steps", "need at least 8 intervals")
        self.problem = problem
        self.n_steps = int(n_steps)
        self.grid = np.linspace(0.0, problem.T, self.n_steps + 1)
        self.dt = float(self.grid[1] - self.grid[0])
        mids = 0.5 * (self.grid[:-1] + self.grid[1:])
        self.b_mid = np.asarray(problem.market.drift(mids), dtype=float) * np.ones(
            self.n_steps
        )
        lam = problem.market.lam
        sig2 = problem.market.sigma**2
        self._off = np.empty(problem.n)  # Hessian off-diagonal per agent
        self._factors = []
        for i, alpha in enumerate(problem.alphas):
            off = 2.0 * lam / self.dt - alpha * sig2 * self.dt / 4.0
            diag = 4.0 * lam / self.dt + alpha * sig2 * self.dt / 2.0
            ab = np.zeros((2, self.n_steps - 1))
            ab[0, 1:] = -off
            ab[1, :] = diag
            try:
                self._factors.append(cholesky_banded(ab, lower=False))
            except np.linalg.LinAlgError as exc:
                raise IndefiniteHessian(
                    "discrete objective is not strictly concave"
                ) from exc
            self._off[i] = off

    def initial_paths(self) -> np.ndarray:
        """Straight-line liquidation for every agent, shape (n, n_steps+1)."""
        ramp = 1.0 - self.grid / self.grid[-1]
        return np.outer(self.problem.x0, ramp)

    def best_response(self, agent_index: int, paths: np.ndarray) -> np.ndarray:
        """Maximize agent agent_index's objective given the others' paths."""
        p = self.problem
        if not 0 <= agent_index < p.n:
            raise InvalidParam("agent_index", "out of range")
        rates = np.diff(paths, axis=1) / self.dt
        s = rates.sum(axis=0) - rates[agent_index]
        gamma = p.market.gamma
        lam = p.market.lam
        drive = self.b_mid + gamma * s
        g = 0.5 * self.dt * (drive[:-1] + drive[1:]) + lam * (s[1:] - s[:-1])
        rhs = g.copy()
        rhs[0] += self._off[agent_index] * p.x0[agent_index]
        interior = cho_solve_banded((self._factors[agent_index], False), rhs)
        out = np.empty(self.n_steps + 1)
        out[0] = p.x0[agent_index]
        out[1:-1] = interior
        out[-1] = 0.0
        return out

    def objective(self, agent_index: int, paths: np.ndarray) -> float:
        """Discrete mean-variance payoff of one agent (diagnostic)."""
        p = self.problem
        rates = np.diff(paths, axis=1) / self.dt
        s = rates.sum(axis=0) - rates[agent_index]
        q = 0.5 * (paths[agent_index, :-1] + paths[agent_index, 1:])
        rate = rates[agent_index]
        alpha = p.agents[agent_index].alpha
        sig2 = p.market.sigma**2
        run = (
            q * (self.b_mid + p.market.gamma * s)
            - 0.5 * alpha * sig2 * q**2
            - p.market.lam * rate * (s + rate)
        )
        return float(self.dt * np.sum(run))

    def strategies(self, paths: np.ndarray) -> list:
        snapped = paths.copy()
        snapped[:, -1] = 0.0
        return [GridStrategy(grid=self.grid, positions=row) for row in snapped]


def iterate_nash(
    game: DiscreteGame,
    initial_paths: Optional[np.ndarray] = None,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_sweeps: int = 10_000,
):
    """Damped Gauss-Seidel best-response iteration.

    Each sweep updates agents in order, mixing the new best response with
    weight damping into the current path. Stops when the largest node update
    in a sweep falls below tol * max(1, max |x0|). Returns (paths, report);
    a non-converged run is reported, not raised.
    """
    if not 0.0 < damping <= 1.0:
        raise InvalidParam("damping", "must lie in (0, 1]")
    paths = game.initial_paths() if initial_paths is None else np.array(initial_paths, dtype=float)
    if paths.shape != (game.problem.n, game.n_steps + 1):
        raise InvalidParam("initial_paths", "shape must be (n_agents, n_steps + 1)")
    scale = max(1.0, float(np.max(np.abs(game.problem.x0))))
    threshold = tol * scale
    last_update = np.inf
    for sweep in range(1, max_sweeps + 1):
        last_update = 0.0
        for i in range(game.problem.n):
            target = game.best_response(i, paths)
            step = damping * (target - paths[i])
            paths[i] += step
            last_update = max(last_update, float(np.max(np.abs(step))))
        if last_update <= threshold:
            return paths, FixedPointReport(True, sweep, last_update, tol)
    return paths, FixedPointReport(False, max_sweeps, last_update, tol)


def compare(game: DiscreteGame, paths: np.ndarray, strategies: Sequence) -> np.ndarray:
    """Per-agent sup-norm gap between oracle paths and reference strategies.

    Gaps are normalized by max(1, |x_i|); strategies are evaluated on the
    oracle's grid.
    """
    if len(strategies) != game.problem.n:
        raise InvalidParam("strategies", "one reference strategy per agent")
    gaps = np.empty(game.problem.n)
    for i, s in enumerate(strategies):
        ref = np.asarray(s.position(game.grid), dtype=float)
        denom = max(1.0, abs(game.problem.x0[i]))
        gaps[i] = float(np.max(np.abs(paths[i] - ref))) / denom
    return gaps
