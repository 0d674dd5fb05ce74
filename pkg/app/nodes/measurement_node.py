from typing import Any, Dict

from app.physics.zeno_cycle import fidelity
from app.utils.logger import logger


def record_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """Append this cycle's fidelity row and advance the cycle counter."""
    cycle = state["cycle"] + 1
    alive = state.get("alive", True)
    row = {
        "cycle": cycle,
        "fidelity": fidelity(state["rho"], state["ideal"]) if alive else 0.0,
        "survival_prob": state.get("survival", 1.0),
        "cumulative_success": state["cumulative"] if alive else 0.0,
    }
    logger.debug(f"=== Record Node: cycle {cycle}, F={row['fidelity']:.12f} ===")
    return {**state, "cycle": cycle, "rows": state["rows"] + [row]}
