"""Show how a flat trader's role flips with the impact cost ratio.

A trader holding zero inventory still trades in equilibrium whenever
alpha sigma^2 lambda != 2 gamma^2: below the threshold they front-run the
liquidating trader (sell first, buy back), above it they lean against the
flow and provide liquidity. Exactly at the threshold they stay flat.
"""
import numpy as np

from liqgames import analysis, closed_form
from liqgames.model import AgentSpec, Horizon, MarketParams, validate_problem


def describe(lam, gamma, alpha):
    market = MarketParams(lam=lam, gamma=gamma, sigma=1.0, s0=0.0)
    problem = validate_problem(market, (AgentSpec(1.0, alpha), AgentSpec(0.0, alpha)),
                               Horizon.infinite())
    strategies = closed_form.equal_alpha_infinite(market, problem.agents)
    role = analysis.classify_role(market, alpha)
    t = np.linspace(0.0, 6.0, 601)
    flat = strategies[1].position(t)
    peak = t[int(np.argmax(np.abs(flat)))]
    print(f"lambda={lam:<5g} margin={role.margin:+.4f}  role={role.role:<19s}"
          f" X_2(1)={strategies[1].position(1.0):+.5f}"
          f" peak |X_2| at t={peak:.2f}")


def main():
    alpha, gamma = 0.33, 0.16
    print(f"gamma={gamma}, alpha sigma^2={alpha}; threshold at "
          f"lambda = 2 gamma^2 / (alpha sigma^2) = {2 * gamma**2 / alpha:.4f}")
    for lam in (0.05, 0.10, 0.15, 0.16, 0.25, 0.50):
        describe(lam, gamma, alpha)

    # exactly on the threshold the flat agent's profile vanishes identically
    market = MarketParams(lam=1.0, gamma=1.0, sigma=1.0, s0=0.0)
    problem = validate_problem(market, (AgentSpec(1.0, 2.0), AgentSpec(0.0, 2.0)),
                               Horizon.infinite())
    strategies = closed_form.equal_alpha_infinite(market, problem.agents)
    sup = float(np.max(np.abs(strategies[1].position(np.linspace(0, 50, 5001)))))
    print(f"\nat the threshold (gamma=1, lambda=1, alpha sigma^2=2): "
          f"sup |X_2| = {sup:.1e}")


if __name__ == "__main__":
    main()
