from typing import Any, Dict

import numpy as np

from app.physics.zeno_cycle import dephase_code, pump, pump_density
from app.utils.logger import logger


def pump_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """
    Initial optical pumping: maps the nu-qubit onto |gamma_1>, |gamma_2>.

    The first pump is ideal; repump imperfection is charged in repump_node.

    Args:
        state: Cycle state with ``qubit`` and ``space``

    Returns:
        Updated state with ``ideal`` (target vector) and ``rho``
    """
    space = state["space"]
    ideal = pump(state["qubit"], space)
    logger.debug("=== Pump Node ===")
    return {
        **state,
        "ideal": ideal,
        "rho": pump_density(state["qubit"], space, 1.0),
        "alive": True,
    }


def repump_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """Repump after projection; the CG mismatch costs one more eta on the coherence."""
    logger.debug("=== Repump Node ===")
    return {**state, "rho": dephase_code(np.asarray(state["rho"]), state["space"], state["eta"])}
