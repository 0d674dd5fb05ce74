from typing import Any, Dict

from app.physics.zeno_cycle import error_evolution
from app.utils.logger import logger


def error_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """
    Free evolution over one Zeno interval under H0 + sum_m f_m(t) E_m.

    Args:
        state: Cycle state with ``errors``, ``zeno_interval``, ``h0`` and ``rng``

    Returns:
        Updated state with the evolved ``rho``
    """
    logger.debug(f"=== Error Node (dt={state['zeno_interval']} ns) ===")
    rho = error_evolution(state["rho"], state["errors"], state["zeno_interval"], state["rng"], state.get("h0"))
    return {**state, "rho": rho}
