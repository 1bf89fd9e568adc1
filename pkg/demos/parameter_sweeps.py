"""Sweep risk aversion and temporary impact; flag non-monotone responses.

The probe is the smaller trader's mid-horizon inventory. Against a larger
opposing trader it responds non-monotonically to both the common risk level
and the temporary impact coefficient, which is the behaviour worth seeing
in a table rather than a single summary number.
"""
import numpy as np

from liqgames import analysis
from liqgames.model import AgentSpec, Horizon, MarketParams, validate_problem


def sweep(problem, param, values, label):
    rows = analysis.parameter_scan(problem, param, values, probe=(0, 1.0))
    inc, dec = analysis.non_monotone([r.probe_value for r in rows])
    print(f"--- {label} ---")
    print(f"{param},probe_value,status")
    for r in rows:
        print(f"{r.value:.6g},{r.probe_value:.10g},{r.status}")
    print(f"rises: {inc}, falls: {dec}")
    print()


def main():
    market = MarketParams(lam=1.0, gamma=1.0, sigma=1.0, s0=0.0)
    agents = (AgentSpec(1.12, 0.8), AgentSpec(2.06, 0.8))
    problem = validate_problem(market, agents, Horizon.finite(2.0))
    sweep(problem, "alpha_sigma2", np.linspace(0.0, 3.0, 16),
          "risk aversion sweep, X_1(1)")

    market = MarketParams(lam=1.0, gamma=0.3, sigma=1.0, s0=0.0)
    agents = (AgentSpec(0.2, 1.0), AgentSpec(4.0, 1.0))
    problem = validate_problem(market, agents, Horizon.finite(2.0))
    values = np.concatenate([np.linspace(0.00625, 0.05, 8),
                             np.linspace(0.1, 1.5, 8)])
    sweep(problem, "lambda", values, "temporary impact sweep, X_1(1)")


if __name__ == "__main__":
    main()
