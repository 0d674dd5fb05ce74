"""Non-holonomic control: alternating-Hamiltonian propagators and timing search.

A coding sequence alternates two fixed Hamiltonians H_a and H_b. The product
U = exp(-i H_n tau_n) ... exp(-i H_1 tau_1) is tuned through the timings so that
every decoded error U^-1 E_m U acts on the code space as a multiple of identity.
"""
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from app.schemas.quantum_schema import Operator
from app.schemas.zeno_schema import (
    CodingReport,
    ErrorModel,
    LevelSpace,
    OptimizerSettings,
    Pulse,
    PulseSequence,
)
from app.utils.errors import BasisMismatchError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-9


def _as_matrix(H: Union[Operator, np.ndarray]) -> np.ndarray:
    return H.matrix if isinstance(H, Operator) else np.asarray(H, dtype=complex)


def _hermitian_eig(H: Union[Operator, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    matrix = _as_matrix(H)
    asymmetry = float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))
    if asymmetry > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (asymmetry {asymmetry:.2e})")
    return np.linalg.eigh((matrix + matrix.conj().T) / 2)


def _exp_from_eig(values: np.ndarray, vectors: np.ndarray, tau: float) -> np.ndarray:
    return (vectors * np.exp(-1j * values * tau)) @ vectors.conj().T


def propagator(H: Union[Operator, np.ndarray], tau: float) -> Operator:
    """
    exp(-i H tau) through the eigendecomposition of H.

    Args:
        H: Hermitian Hamiltonian in rad/ns
        tau: Duration in ns

    Raises:
        ValueError: If H is not Hermitian to 1e-9
    """
    values, vectors = _hermitian_eig(H)
    basis = H.basis if isinstance(H, Operator) else "matrix"
    return Operator(matrix=_exp_from_eig(values, vectors, tau), basis=basis)


def _check_pair(Ha: Operator, Hb: Operator) -> None:
    if Ha.basis != Hb.basis:
        raise BasisMismatchError(f"H_a is written in {Ha.basis} but H_b in {Hb.basis}")


def sequence_propagator(seq: PulseSequence, Ha: Operator, Hb: Operator) -> Operator:
    """
    Ordered product of pulse propagators, last pulse leftmost.

    The sequence's ``negate_hamiltonians`` flag is ignored here; see
    ``physical_propagator``.
    """
    _check_pair(Ha, Hb)
    eig = {"A": _hermitian_eig(Ha), "B": _hermitian_eig(Hb)}
    total = np.eye(Ha.dim, dtype=complex)
    for pulse in seq.pulses:
        total = _exp_from_eig(*eig[pulse.tag], pulse.duration) @ total
    return Operator(matrix=total, basis=Ha.basis, name="sequence")


def physical_propagator(seq: PulseSequence, Ha: Operator, Hb: Operator,
                        reversed_pair: Optional[Tuple[Operator, Operator]] = None) -> Operator:
    """
    Sequence product under the fields the sequence asks for.

    A sequence flagged for reversed fields runs under ``reversed_pair``, the
    Hamiltonians built from the reversed B field and detunings, or under
    -H_a, -H_b when no pair is given.
    """
    if seq.negate_hamiltonians:
        if reversed_pair is not None:
            return sequence_propagator(seq, *reversed_pair)
        return sequence_propagator(seq, -Ha, -Hb)
    return sequence_propagator(seq, Ha, Hb)


def decode_sequence(seq: PulseSequence) -> PulseSequence:
    """
    Reverse a coding sequence for decoding.

    Pulses keep their Hamiltonian tags in reversed order and the result is
    flagged to run under -H_a, -H_b (B field and detunings reversed), so its
    physical propagator is exactly the adjoint of the coding product.
    """
    return PulseSequence(
        pulses=[Pulse(tag=p.tag, duration=p.duration) for p in reversed(seq.pulses)],
        negate_hamiltonians=not seq.negate_hamiltonians,
    )


def _decoded_blocks(U: np.ndarray, errors: Sequence[np.ndarray], w: np.ndarray) -> List[np.ndarray]:
    uw = U @ w
    return [uw.conj().T @ E @ uw for E in errors]


def _traceless(block: np.ndarray) -> np.ndarray:
    return block - np.trace(block) / block.shape[0] * np.eye(block.shape[0])


def coding_residual(U: Operator, errors: ErrorModel, space: LevelSpace) -> CodingReport:
    """
    Squared deviation of each decoded error block P U^-1 E_m U P from a multiple of identity.

    Args:
        U: Coding unitary
        errors: Error generators E_m
        space: Level space supplying the code states

    Returns:
        CodingReport with the residual sum and per-error Frobenius deviations
    """
    for E in errors.generators:
        if E.basis != U.basis:
            raise BasisMismatchError(f"error {E.name} is in {E.basis}, coding matrix in {U.basis}")
    blocks = _decoded_blocks(U.matrix, [E.matrix for E in errors.generators], space.code_isometry())
    norms = [float(np.linalg.norm(_traceless(block))) for block in blocks]
    return CodingReport(
        residual=float(sum(n * n for n in norms)),
        condition_matrix_norms=norms,
        error_labels=errors.labels,
        unitarity_defect=U.unitarity_defect(),
        coding_matrix=U,
    )


class CodingObjective:
    """Residual of the coding conditions as a function of the pulse timings."""

    def __init__(self, Ha: Operator, Hb: Operator, errors: ErrorModel, space: LevelSpace,
                 start: str = "A"):
        _check_pair(Ha, Hb)
        self.dim = Ha.dim
        self.eig = {"A": _hermitian_eig(Ha), "B": _hermitian_eig(Hb)}
        self.hamiltonians = {"A": Ha.matrix, "B": Hb.matrix}
        self.errors = [E.matrix for E in errors.generators]
        self.w = space.code_isometry()
        self.start = start

    def tags(self, n: int) -> List[str]:
        order = ("A", "B") if self.start == "A" else ("B", "A")
        return [order[i % 2] for i in range(n)]

    def residual_and_gradient(self, taus: np.ndarray) -> Tuple[float, np.ndarray]:
        """
        Residual R and dR/dtau_i.

        With R_i = P_i ... P_1 and Q = sum_m W D_m W^+ U^+ E_m,
        dR/dtau_i = 4 Re tr(Q U R_i^+ (-i H_i) R_i).
        """
        tags = self.tags(len(taus))
        partial = []
        total = np.eye(self.dim, dtype=complex)
        for tag, tau in zip(tags, taus):
            total = _exp_from_eig(*self.eig[tag], tau) @ total
            partial.append(total)

        uw = total @ self.w
        residual = 0.0
        q = np.zeros((self.dim, self.dim), dtype=complex)
        u_dag = total.conj().T
        for E in self.errors:
            deviation = _traceless(uw.conj().T @ E @ uw)
            residual += float(np.real(np.vdot(deviation, deviation)))
            q += self.w @ deviation @ self.w.conj().T @ u_dag @ E

        qu = q @ total
        gradient = np.empty(len(taus))
        for i, (tag, r_i) in enumerate(zip(tags, partial)):
            generator = r_i.conj().T @ self.hamiltonians[tag] @ r_i
            gradient[i] = 4.0 * np.real(-1j * np.sum(qu * generator.T))
        return residual, gradient

    def residual(self, taus: np.ndarray) -> float:
        return self.residual_and_gradient(taus)[0]


def _single_restart(objective: CodingObjective, settings: OptimizerSettings, index: int) -> dict:
    """One seeded local descent; L-BFGS-B with a Powell fallback on stalled line searches."""
    rng = np.random.default_rng([settings.seed, index])
    low, high = settings.bounds
    bounds = [(low, high)] * settings.n_pulses
    x0 = rng.uniform(low, high, size=settings.n_pulses)
    options = {"maxiter": settings.max_iterations, "ftol": 1e-16, "gtol": 1e-14}

    result = minimize(objective.residual_and_gradient, x0, jac=True, method="L-BFGS-B",
                      bounds=bounds, options=options)
    iterations = int(result.nit)
    if result.fun > settings.tolerance and not result.success:
        logger.debug(f"Restart {index}: L-BFGS-B stalled at {result.fun:.3e} ({result.message}), trying Powell")
        fallback = minimize(objective.residual, result.x, method="Powell", bounds=bounds,
                            options={"maxiter": settings.max_iterations, "xtol": 1e-10, "ftol": 1e-16})
        iterations += int(fallback.nit)
        polished = minimize(objective.residual_and_gradient, fallback.x, jac=True, method="L-BFGS-B",
                            bounds=bounds, options=options)
        iterations += int(polished.nit)
        if polished.fun < result.fun:
            result = polished

    taus = np.clip(result.x, low, high)
    residual = objective.residual(taus)
    logger.debug(f"Restart {index}: residual {residual:.3e} after {iterations} iterations")
    return {"index": index, "taus": taus, "residual": residual, "iterations": iterations,
            "converged": residual < settings.tolerance}


def optimize_timings(Ha: Operator, Hb: Operator, errors: ErrorModel, space: LevelSpace,
                     n_pulses: Optional[int] = None,
                     opts: Optional[OptimizerSettings] = None) -> Tuple[PulseSequence, CodingReport]:
    """
    Multi-start search for timings satisfying the coding conditions.

    Restarts are seeded by (opts.seed, restart index) and run in ordered
    batches of ``opts.n_jobs``. The lowest-index converged restart wins;
    without convergence the lowest residual wins, ties to the lower index.

    Returns:
        The timing sequence and its CodingReport; ``report.converged`` is
        False when no restart reached ``opts.tolerance``.
    """
    opts = opts or OptimizerSettings()
    if n_pulses is not None:
        opts = opts.model_copy(update={"n_pulses": n_pulses})
    objective = CodingObjective(Ha, Hb, errors, space)
    batch = max(1, opts.n_jobs)

    logger.info(f"Optimizing {opts.n_pulses} timings against {len(errors.generators)} errors "
                f"(tolerance {opts.tolerance:.1e}, up to {opts.max_restarts} restarts)")
    results: List[dict] = []
    with Parallel(n_jobs=opts.n_jobs) as parallel:
        for first in range(0, opts.max_restarts, batch):
            indices = range(first, min(first + batch, opts.max_restarts))
            results.extend(parallel(delayed(_single_restart)(objective, opts, i) for i in indices))
            if any(r["converged"] for r in results):
                break

    converged = [r for r in results if r["converged"]]
    if converged:
        best = min(converged, key=lambda r: r["index"])
    else:
        best = min(results, key=lambda r: (r["residual"], r["index"]))

    seq = PulseSequence.from_durations(list(best["taus"]))
    report = coding_residual(sequence_propagator(seq, Ha, Hb), errors, space)
    report = report.model_copy(update={
        "converged": report.residual < opts.tolerance,
        "tolerance": opts.tolerance,
        "restarts": len(results),
        "iterations": int(sum(r["iterations"] for r in results)),
    })
    if report.converged:
        logger.info(f"Converged at restart {best['index']}: residual {report.residual:.3e}")
    else:
        logger.warning(f"No restart converged after {len(results)} restarts; "
                       f"best residual {report.residual:.3e} > {opts.tolerance:.1e}")
    return seq, report
