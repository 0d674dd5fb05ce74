from typing import Any, Dict

from app.utils.logger import logger


def _conjugate(unitary, rho):
    return unitary @ rho @ unitary.conj().T


def coding_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """Apply the coding unitary C built from the A/B pulse train."""
    logger.debug(f"=== Coding Node (cycle {state['cycle'] + 1}) ===")
    return {**state, "rho": _conjugate(state["coding"], state["rho"])}


def decoding_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """Run the reversed pulse train under -H_a, -H_b, i.e. apply C^-1."""
    logger.debug("=== Decoding Node ===")
    return {**state, "rho": _conjugate(state["decoding"], state["rho"])}
