"""Event-triggered state estimation and control over lossy, delayed links.

Thin python surface over the C++ core: scenario construction/validation,
episode simulation, Monte-Carlo policy comparison, the finite-horizon
Riccati pass, and the tabulated value-of-information scheduler.
"""

from ._core import (
    __version__,
    Scenario,
    spacecraft_scenario,
    scenario_from_json,
    validate,
    run_episode,
    monte_carlo,
    solve_riccati,
    solve_dp,
)

__all__ = [
    "__version__",
    "Scenario",
    "spacecraft_scenario",
    "scenario_from_json",
    "validate",
    "run_episode",
    "monte_carlo",
    "solve_riccati",
    "solve_dp",
]
