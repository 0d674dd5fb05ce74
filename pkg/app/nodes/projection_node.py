from typing import Any, Dict

from app.physics.zeno_cycle import project_code
from app.utils.logger import logger


def projection_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """
    Three-photon projection onto the code space, costing one eta on the coherence.

    Conditional runs keep the renormalized state and charge the survival
    probability to ``cumulative``; sampled runs draw the outcome, and a
    failure ends the trajectory.

    Args:
        state: Cycle state with ``rho``, ``space``, ``eta`` and ``sample_projection``

    Returns:
        Updated state with ``rho``, ``survival``, ``cumulative`` and ``alive``
    """
    rng = state["rng"] if state.get("sample_projection") else None
    outcome = project_code(state["rho"], state["space"], state["eta"], rng)
    logger.debug(f"=== Projection Node: p={outcome.probability:.12f}, success={outcome.success} ===")

    if not outcome.success:
        return {**state, "survival": outcome.probability, "cumulative": 0.0, "alive": False}

    cumulative = state["cumulative"] * (1.0 if rng is not None else outcome.probability)
    return {**state, "rho": outcome.state, "survival": outcome.probability, "cumulative": cumulative}
