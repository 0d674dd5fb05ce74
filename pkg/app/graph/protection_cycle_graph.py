from typing import Any, Dict, List, Optional, Sequence, Tuple, TypedDict

import numpy as np
from joblib import Parallel, delayed
from langgraph.graph import END, StateGraph

from app.nodes.control_node import coding_node, decoding_node
from app.nodes.error_node import error_node
from app.nodes.measurement_node import record_node
from app.nodes.preparation_node import pump_node, repump_node
from app.nodes.projection_node import projection_node
from app.physics.nonholonomic_control import (
    decode_sequence,
    optimize_timings,
    physical_propagator,
    sequence_propagator,
)
from app.physics.system_model import fine_structure_h0
from app.schemas.quantum_schema import Operator
from app.schemas.zeno_schema import (
    CycleConfig,
    ErrorModel,
    FidelityRow,
    FidelityTrace,
    LevelSpace,
    OptimizerSettings,
    PulseSequence,
)
from app.utils.errors import NonConvergenceError
from app.utils.logger import logger

# node visits per cycle, with margin for the entry nodes
STEPS_PER_CYCLE = 6
INVERSE_TOL = 1e-9


class CycleState(TypedDict, total=False):
    """State carried through one trajectory of protection cycles."""
    qubit: np.ndarray
    space: LevelSpace
    errors: ErrorModel
    coding: Optional[np.ndarray]
    decoding: Optional[np.ndarray]
    h0: Optional[np.ndarray]
    zeno_interval: float
    eta: float
    rng: np.random.Generator
    sample_projection: bool
    ideal: np.ndarray
    rho: np.ndarray
    cycle: int
    n_cycles: int
    survival: float
    cumulative: float
    alive: bool
    rows: List[Dict[str, Any]]


class ProtectionCycleGraph:
    """
    Stage graph of the Zeno protocol: pump -> code -> errors -> decode -> project -> repump.

    The unprotected baseline skips coding, decoding, projection and repump.
    """

    def __init__(self, protected: bool = True):
        self.protected = protected
        self.graph = self._build()

    def _build(self):
        """
        Build the cycle graph.

        Returns:
            The compiled graph
        """
        workflow = StateGraph(state_schema=CycleState)

        workflow.add_node("pump", pump_node)
        workflow.add_node("errors", error_node)
        workflow.add_node("record", record_node)

        def next_cycle(state: CycleState) -> str:
            """Loop while cycles remain and the trajectory survives."""
            if state.get("alive", True) and state["cycle"] < state["n_cycles"]:
                return "continue"
            return "end"

        if self.protected:
            workflow.add_node("code", coding_node)
            workflow.add_node("decode", decoding_node)
            workflow.add_node("project", projection_node)
            workflow.add_node("repump", repump_node)

            workflow.add_edge("pump", "code")
            workflow.add_edge("code", "errors")
            workflow.add_edge("errors", "decode")
            workflow.add_edge("decode", "project")
            workflow.add_conditional_edges(
                "project",
                lambda x: "repump" if x.get("alive", True) else "record",
                {"repump": "repump", "record": "record"}
            )
            workflow.add_edge("repump", "record")
            workflow.add_conditional_edges("record", next_cycle, {"continue": "code", "end": END})
        else:
            workflow.add_edge("pump", "errors")
            workflow.add_edge("errors", "record")
            workflow.add_conditional_edges("record", next_cycle, {"continue": "errors", "end": END})

        workflow.set_entry_point("pump")
        return workflow.compile()

    def process(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run every cycle of one trajectory.

        Args:
            state: Initial state with qubit, space, errors, propagators and rng

        Returns:
            Final state; ``rows`` holds one record per cycle
        """
        state = {"cycle": 0, "cumulative": 1.0, "survival": 1.0, "rows": [], **state}
        limit = STEPS_PER_CYCLE * state["n_cycles"] + 10
        result = self.graph.invoke(state, config={"recursion_limit": limit})

        # a failed projection ends the trajectory; later cycles count as lost
        rows = list(result["rows"])
        for cycle in range(len(rows) + 1, state["n_cycles"] + 1):
            rows.append({"cycle": cycle, "fidelity": 0.0, "survival_prob": 0.0, "cumulative_success": 0.0})
        return {**result, "rows": rows}


def _run_trajectory(index: int, base_state: Dict[str, Any], cfg: CycleConfig) -> List[Dict[str, Any]]:
    rng = np.random.default_rng([cfg.seed, index])
    graph = ProtectionCycleGraph(protected=cfg.protected)
    return graph.process({**base_state, "rng": rng})["rows"]


def _aggregate(all_rows: List[List[Dict[str, Any]]], cfg: CycleConfig) -> List[FidelityRow]:
    rows = []
    for cycle in range(cfg.n_cycles):
        entries = [trajectory[cycle] for trajectory in all_rows]
        weights = np.array([e["cumulative_success"] for e in entries])
        fidelities = np.array([e["fidelity"] for e in entries])
        weight = float(weights.sum())
        rows.append(FidelityRow(
            cycle=cycle + 1,
            fidelity=float(np.dot(weights, fidelities) / weight) if weight > 0 else 0.0,
            survival_prob=float(np.mean([e["survival_prob"] for e in entries])),
            cumulative_success=float(weights.mean()),
        ))
    return rows


def run_cycles(initial_qubit: Sequence[complex], seq: Optional[PulseSequence], Ha: Operator, Hb: Operator,
               cfg: CycleConfig, errors: ErrorModel, space: LevelSpace,
               optimizer: Optional[OptimizerSettings] = None,
               reversed_pair: Optional[Tuple[Operator, Operator]] = None,
               coding_errors: Optional[ErrorModel] = None) -> FidelityTrace:
    """
    Simulate protection cycles and record the recovered-qubit fidelity.

    Args:
        initial_qubit: Normalized (alpha, beta) on |nu_1>, |nu_2>
        seq: Coding sequence; searched for with ``optimizer`` when None
        Ha, Hb: Control Hamiltonians
        cfg: Cycle configuration
        errors: Error generators and coupling process
        space: Level space
        reversed_pair: Hamiltonians of the reversed fields used for decoding (default -H_a, -H_b)
        coding_errors: Generators the timing search targets (default ``errors``)

    Returns:
        FidelityTrace aggregated over ``cfg.n_trajectories`` trajectories

    Raises:
        NonConvergenceError: If no sequence was supplied and the search failed
    """
    coding = decoding = None
    if cfg.protected:
        if seq is None:
            seq, report = optimize_timings(Ha, Hb, coding_errors or errors, space, opts=optimizer)
            if not report.converged:
                raise NonConvergenceError(report.residual, report.tolerance, report.restarts)
        coding = sequence_propagator(seq, Ha, Hb).matrix
        decoding = physical_propagator(decode_sequence(seq), Ha, Hb, reversed_pair).matrix
        defect = float(np.linalg.norm(decoding @ coding - np.eye(space.dimension), 2))
        if defect > INVERSE_TOL:
            logger.warning(f"Decoding is not the inverse of coding (defect {defect:.2e})")

    base_state = {
        "qubit": np.asarray(initial_qubit, dtype=complex),
        "space": space,
        "errors": errors,
        "coding": coding,
        "decoding": decoding,
        "h0": fine_structure_h0(space, cfg.fine_structure).matrix,
        "zeno_interval": cfg.zeno_interval,
        "eta": cfg.eta,
        "sample_projection": cfg.sample_projection,
        "n_cycles": cfg.n_cycles,
    }
    mode = "protected" if cfg.protected else "unprotected"
    logger.info(f"Running {cfg.n_trajectories} {mode} trajectories of {cfg.n_cycles} cycles "
                f"at dt={cfg.zeno_interval} ns")
    all_rows = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_run_trajectory)(index, base_state, cfg) for index in range(cfg.n_trajectories)
    )
    return FidelityTrace(mode=mode, zeno_interval=cfg.zeno_interval,
                         n_trajectories=cfg.n_trajectories, rows=_aggregate(all_rows, cfg))


def sweep_zeno_intervals(intervals: Sequence[float], initial_qubit: Sequence[complex],
                         seq: Optional[PulseSequence], Ha: Operator, Hb: Operator, cfg: CycleConfig,
                         errors: ErrorModel, space: LevelSpace,
                         reversed_pair: Optional[Tuple[Operator, Operator]] = None) -> List[FidelityTrace]:
    """Run the same seeded configuration at each Zeno interval (common random numbers)."""
    return [
        run_cycles(initial_qubit, seq, Ha, Hb, cfg.model_copy(update={"zeno_interval": float(dt)}), errors, space,
                   reversed_pair=reversed_pair)
        for dt in intervals
    ]
