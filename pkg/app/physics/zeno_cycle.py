"""Stages of one Zeno protection cycle and the infidelity scaling fit.

States are carried either as vectors or as density matrices on the level
space; the eta dampings of projection and repump need the density form.
"""
import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np

from app.schemas.zeno_schema import ErrorModel, FidelityTrace, LevelSpace, ProjectionOutcome, ScalingFit

logger = logging.getLogger(__name__)

NORM_TOL = 1e-9
INFIDELITY_FLOOR = 1e-14
INFIDELITY_CEILING = 0.1

State = Union[np.ndarray, Sequence[complex]]


def _is_density(state: np.ndarray) -> bool:
    return state.ndim == 2


def _check_normalized(vector: np.ndarray, what: str) -> None:
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"{what} must be normalized, got norm {norm:.12f}")


def pump(qubit: State, space: LevelSpace) -> np.ndarray:
    """
    Ideal isometry alpha|nu_1> + beta|nu_2> -> alpha|gamma_1> + beta|gamma_2>.

    Raises:
        ValueError: If the qubit is not a normalized 2-vector
    """
    qubit = np.asarray(qubit, dtype=complex)
    if qubit.shape != (2,):
        raise ValueError(f"qubit must be a 2-vector, got shape {qubit.shape}")
    _check_normalized(qubit, "qubit")
    return space.code_isometry() @ qubit


def dephase_code(rho: np.ndarray, space: LevelSpace, eta: float) -> np.ndarray:
    """Multiply the gamma_1/gamma_2 coherence of a density matrix by eta."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    out = np.array(rho, dtype=complex)
    i, j = space.code_indices
    out[i, j] *= eta
    out[j, i] *= eta
    return out


def pump_density(qubit: State, space: LevelSpace, eta: float = 1.0) -> np.ndarray:
    """Pumped density matrix with its code coherence damped by eta."""
    psi = pump(qubit, space)
    return dephase_code(np.outer(psi, psi.conj()), space, eta)


def error_propagator(errors: ErrorModel, dt: float, rng: np.random.Generator,
                     h0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Propagator of H0 + sum_m f_m(t) E_m over one free-evolution window.

    f_m is piecewise constant on correlation_time slices, each value drawn
    uniformly from [-amplitude_m, amplitude_m]; the process restarts with
    every window.
    """
    if dt <= 0:
        raise ValueError(f"free-evolution time must be positive, got {dt}")
    dim = errors.generators[0].dim
    base = np.zeros((dim, dim), dtype=complex) if h0 is None else np.asarray(h0, dtype=complex)
    amplitudes = np.asarray(errors.amplitudes, dtype=float)
    stack = np.array([E.matrix for E in errors.generators])

    n_slices = max(1, math.ceil(dt / errors.correlation_time - 1e-12))
    total = np.eye(dim, dtype=complex)
    for k in range(n_slices):
        slice_dt = min(errors.correlation_time, dt - k * errors.correlation_time)
        f = rng.uniform(-amplitudes, amplitudes)
        hamiltonian = base + np.tensordot(f, stack, axes=1)
        values, vectors = np.linalg.eigh(hamiltonian)
        total = (vectors * np.exp(-1j * values * slice_dt)) @ vectors.conj().T @ total
    return total


def error_evolution(state: State, errors: ErrorModel, dt: float, rng: np.random.Generator,
                    h0: Optional[np.ndarray] = None) -> np.ndarray:
    """Evolve a vector or density matrix through one noisy free-evolution window."""
    state = np.asarray(state, dtype=complex)
    v = error_propagator(errors, dt, rng, h0)
    if _is_density(state):
        return v @ state @ v.conj().T
    return v @ state


def project_code(state: State, space: LevelSpace, eta: float = 1.0,
                 rng: Optional[np.random.Generator] = None) -> ProjectionOutcome:
    """
    Project onto the code space C = span{|gamma_1>, |gamma_2>}.

    With an rng the outcome is sampled with success probability ||P state||^2;
    without one the outcome is conditioned on success. A successful outcome
    carries the renormalized projected state with its code coherence damped
    by eta (a density matrix whenever eta < 1 or the input was one).
    """
    state = np.asarray(state, dtype=complex)
    projector = space.code_projector()
    if _is_density(state):
        projected = projector @ state @ projector
        probability = float(np.real(np.trace(projected)))
    else:
        projected = projector @ state
        probability = float(np.real(np.vdot(projected, projected)))
    probability = min(max(probability, 0.0), 1.0)

    success = rng.random() < probability if rng is not None else probability > 0
    if not success:
        return ProjectionOutcome(success=False, probability=probability, state=None)

    projected = projected / (probability if _is_density(state) else math.sqrt(probability))
    if eta < 1 or _is_density(state):
        rho = projected if _is_density(state) else np.outer(projected, projected.conj())
        projected = dephase_code(rho, space, eta)
    return ProjectionOutcome(success=True, probability=probability, state=projected)


def reduced_qubit(rho: np.ndarray, space: LevelSpace) -> np.ndarray:
    """2x2 block of a density matrix on the code states."""
    w = space.code_isometry()
    return w.conj().T @ rho @ w


def fidelity(state: State, ideal: np.ndarray) -> float:
    """<ideal|rho|ideal> for a density matrix, |<ideal|psi>|^2 for a vector."""
    state = np.asarray(state, dtype=complex)
    if _is_density(state):
        value = np.real(np.vdot(ideal, state @ ideal))
    else:
        value = abs(np.vdot(ideal, state)) ** 2
    return float(min(max(value, 0.0), 1.0))


def scaling_fit(traces: List[FidelityTrace]) -> ScalingFit:
    """
    Least-squares slope of log(1 - F) against log(zeno_interval).

    Args:
        traces: Final-cycle traces over a sweep of Zeno intervals, one mode

    Raises:
        ValueError: Fewer than 5 points, less than a decade of intervals,
            mixed modes, or any infidelity outside [1e-14, 0.1]
    """
    if len(traces) < 5:
        raise ValueError(f"scaling fit needs at least 5 intervals, got {len(traces)}")
    modes = {t.mode for t in traces}
    if len(modes) != 1:
        raise ValueError(f"cannot fit mixed modes {sorted(modes)}")
    intervals = np.array([t.zeno_interval for t in traces])
    if intervals.max() / intervals.min() < 10 * (1 - 1e-12):
        raise ValueError("Zeno intervals must span at least one decade")
    infidelities = np.array([t.final_infidelity for t in traces])
    if np.any(infidelities < INFIDELITY_FLOOR):
        raise ValueError(f"infidelity below the numerical floor {INFIDELITY_FLOOR:.0e}")
    if np.any(infidelities > INFIDELITY_CEILING):
        raise ValueError(f"infidelity above {INFIDELITY_CEILING}: not perturbative")

    x, y = np.log(intervals), np.log(infidelities)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residuals ** 2)) / total if total > 0 else 1.0
    fit = ScalingFit(mode=modes.pop(), exponent=float(slope), intercept=float(intercept),
                     r_squared=r_squared, residuals=[float(r) for r in residuals], n_points=len(traces))
    logger.info(f"Scaling fit ({fit.mode}): exponent {fit.exponent:.3f}, R^2 {fit.r_squared:.6f}")
    return fit
