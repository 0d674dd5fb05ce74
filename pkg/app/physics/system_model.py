"""Level space, control Hamiltonians and error generators of one Rydberg manifold.

Internal units: hbar = 1, time in ns, energies as angular frequencies in rad/ns,
magnetic fields in tesla, electric fields in V/m.
"""
import logging
from math import sqrt
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.physics.spin_algebra import (
    angular_momentum_ops,
    clebsch_gordan,
    couple_basis,
    coupled_labels,
    m_values,
)
from app.schemas.quantum_schema import BasisState, HalfInt, HalfIntLike, Operator
from app.schemas.zeno_schema import (
    ErrorModel,
    FieldConfig,
    FineStructure,
    HammingReport,
    LevelSpace,
    LaserFields,
)
from app.utils.units import BOHR_MAGNETON_RAD_PER_NS_PER_T

logger = logging.getLogger(__name__)

Axis = Literal["x", "y", "z"]
PulseType = Literal["A", "B"]

AXES = ("x", "y", "z")
ERROR_PAIRS = (("x", "y"), ("x", "z"), ("y", "z"))

# largest |delta| / omega_R for which the effective two-photon operator holds
MAX_DETUNING_FRACTION = 1e-2


def _default_code_states(L: HalfInt, S: HalfInt) -> List[Tuple[HalfInt, HalfInt]]:
    """Lowest multiplet with two or more states, skipping its stretched m=-J state when possible."""
    for J, _ in reversed(coupled_labels(L, S)):
        if J.twice_value + 1 < 2:
            continue
        ms = m_values(J)
        if len(ms) >= 3:
            return [(J, ms[1]), (J, ms[2])]
        return [(J, ms[0]), (J, ms[1])]
    raise ValueError(f"no multiplet with two states exists for L={L}, S={S}")


def build_space(L: HalfIntLike = 3, S: HalfIntLike = "1/2", n_errors: int = 6,
                code_states: Optional[Sequence[Tuple[HalfIntLike, HalfIntLike]]] = None,
                principal_n: int = 60) -> LevelSpace:
    """
    Build the coupled |J mJ> space of one nL manifold and locate the code pair.

    Args:
        L: Orbital angular momentum (3 for an f level)
        S: Electron spin
        n_errors: Number of error generators M for the ancilla bound A >= M+1
        code_states: Explicit (J, mJ) pairs for |gamma_1>, |gamma_2>
        principal_n: Principal quantum number carried in the labels

    Returns:
        LevelSpace with basis ordered J descending, mJ ascending

    Raises:
        ValueError: If a requested code state is not in the basis
    """
    L, S = HalfInt.of(L), HalfInt.of(S)
    labels = coupled_labels(L, S)
    basis = [BasisState(n=principal_n, L=L, S=S, J=J, mJ=M) for J, M in labels]

    if code_states is None:
        wanted = _default_code_states(L, S)
    else:
        wanted = [(HalfInt.of(J), HalfInt.of(M)) for J, M in code_states]
        if len(wanted) != 2:
            raise ValueError(f"exactly two code states are required, got {len(wanted)}")

    indices = []
    for J, M in wanted:
        try:
            indices.append(labels.index((J, M)))
        except ValueError:
            raise ValueError(f"code state |J={J}, mJ={M}> is not in the basis of L={L}, S={S}")
    if indices[0] == indices[1]:
        raise ValueError("code states must be distinct")

    ancilla = L.twice_value + 1
    hamming = HammingReport(ancilla_dim=ancilla, n_errors=n_errors, required=n_errors + 1,
                            passed=ancilla >= n_errors + 1)
    if not hamming.passed:
        logger.warning(f"Ancilla bound fails: A={ancilla} < M+1={n_errors + 1}")

    space = LevelSpace(L=L, S=S, basis=basis, code_indices=(indices[0], indices[1]),
                       coupling=couple_basis(L, S).matrix.real, hamming=hamming)
    logger.info(f"Built level space L={L}, S={S}: dimension {space.dimension}, "
                f"code states {[basis[i].label() for i in indices]}")
    return space


def orbital_ops(space: LevelSpace) -> Dict[str, np.ndarray]:
    """L_x, L_y, L_z lifted to the uncoupled product space."""
    ops = angular_momentum_ops(space.L)
    eye_s = np.eye(space.S.twice_value + 1)
    return {k: np.kron(getattr(ops, f"j{k}").matrix, eye_s) for k in AXES}


def spin_ops(space: LevelSpace) -> Dict[str, np.ndarray]:
    """S_x, S_y, S_z lifted to the uncoupled product space."""
    ops = angular_momentum_ops(space.S)
    eye_l = np.eye(space.L.twice_value + 1)
    return {k: np.kron(eye_l, getattr(ops, f"j{k}").matrix) for k in AXES}


def zeeman_hamiltonian(space: LevelSpace, b_field: Sequence[float]) -> Operator:
    """
    Zeeman term (mu_B/hbar) * sum_k B_k (L_k + 2 S_k) in rad/ns.

    Args:
        space: Level space
        b_field: Magnetic field (B_x, B_y, B_z) in tesla
    """
    if len(b_field) != 3:
        raise ValueError(f"b_field must have 3 components, got {len(b_field)}")
    orbital, spin = orbital_ops(space), spin_ops(space)
    total = sum(b * (orbital[k] + 2 * spin[k]) for k, b in zip(AXES, b_field))
    return space.to_coupled(BOHR_MAGNETON_RAD_PER_NS_PER_T * total, name="zeeman")


def rank2_orbital_matrix(L: HalfIntLike, q: int) -> np.ndarray:
    """<L m'|T^2_q|L m> = <L m; 2 q|L m'> with unit reduced element."""
    ms = m_values(L)
    dim = len(ms)
    matrix = np.zeros((dim, dim))
    for col, m in enumerate(ms):
        for row, mp in enumerate(ms):
            if mp.twice_value == m.twice_value + 2 * q:
                matrix[row, col] = clebsch_gordan(L, m, 2, q, L, mp)
    return matrix


def quadratic_orbital_matrix(L: HalfIntLike, k: Axis, l: Axis) -> np.ndarray:
    """
    r_k^2 - r_l^2 inside one orbital shell, up to the radial scale.

    Uses x^2 - y^2 = T2 + T-2 and 3z^2 - r^2 = sqrt(6) T0; the rank-0 part
    cancels in every difference.
    """
    if k == l:
        raise ValueError(f"quadratic position operator needs two different axes, got {k}, {l}")
    for axis in (k, l):
        if axis not in AXES:
            raise ValueError(f"unknown axis {axis!r}")
    t_pm2 = rank2_orbital_matrix(L, 2) + rank2_orbital_matrix(L, -2)
    t_0 = rank2_orbital_matrix(L, 0)
    squares = {
        # r_axis^2 with the rank-0 part dropped
        "x": t_pm2 / 2 - sqrt(6) / 6 * t_0,
        "y": -t_pm2 / 2 - sqrt(6) / 6 * t_0,
        "z": sqrt(6) / 3 * t_0,
    }
    return squares[k] - squares[l]


def quadratic_position_op(space: LevelSpace, k: Axis, l: Axis) -> Operator:
    """Electric quadrupole-type error r_k^2 - r_l^2, identity on spin."""
    eye_s = np.eye(space.S.twice_value + 1)
    orbital = quadratic_orbital_matrix(space.L, k, l)
    return space.to_coupled(np.kron(orbital, eye_s), name=f"r{k}2-r{l}2")


def intermediate_shell(L: HalfInt) -> HalfInt:
    """Orbital shell reached by one dipole step down (up for an s level)."""
    return L - 1 if L.twice_value >= 2 else L + 1


def _dipole_matrices(L: HalfInt, Lp: HalfInt) -> Dict[str, np.ndarray]:
    """Cartesian components of r from shell L to shell Lp, unit reduced element."""
    ms, mps = m_values(L), m_values(Lp)
    spherical = {}
    for q in (-1, 0, 1):
        matrix = np.zeros((len(mps), len(ms)), dtype=complex)
        for col, m in enumerate(ms):
            for row, mp in enumerate(mps):
                if mp.twice_value == m.twice_value + 2 * q:
                    matrix[row, col] = clebsch_gordan(L, m, 1, q, Lp, mp)
        spherical[q] = matrix
    return {
        "x": (spherical[-1] - spherical[1]) / sqrt(2),
        "y": 1j * (spherical[-1] + spherical[1]) / sqrt(2),
        "z": spherical[0],
    }


def _intermediate_projector(Lp: HalfInt, S: HalfInt, j: HalfInt) -> np.ndarray:
    """Projector onto the j fine-structure level of the intermediate shell (uncoupled basis)."""
    labels = coupled_labels(Lp, S)
    rows = [i for i, (J, _) in enumerate(labels) if J == j]
    if not rows:
        raise ValueError(f"intermediate shell L'={Lp} has no j={j} level")
    u = couple_basis(Lp, S).matrix.real[rows]
    return u.T @ u


def _laser_operator(space: LevelSpace, laser: LaserFields, projector_j: Optional[HalfInt]) -> np.ndarray:
    """(E* . r)(E . r) through the intermediate shell, as an uncoupled-basis matrix."""
    Lp = intermediate_shell(space.L)
    dipoles = _dipole_matrices(space.L, Lp)
    field = {"x": laser.e_x, "y": laser.e_y * np.exp(-1j * laser.phase_y), "z": 0.0}
    amplitude = sum(field[k] * dipoles[k] for k in AXES)
    eye_s = np.eye(space.S.twice_value + 1)
    lifted = np.kron(amplitude, eye_s)
    if projector_j is None:
        return lifted.conj().T @ lifted
    projector = _intermediate_projector(Lp, space.S, projector_j)
    return lifted.conj().T @ projector @ lifted


def raman_hamiltonian(space: LevelSpace, fields: FieldConfig, pulse_type: PulseType) -> Operator:
    """
    Effective second-order Raman operator of one pulse type.

    W = raman_scale (E*.r)(E.r) / delta + raman_scale_prime (E'*.r)(E'.r) / delta'

    Args:
        space: Level space
        fields: Field configuration; detunings in rad/ns
        pulse_type: "A" or "B"

    Raises:
        ValueError: On zero detuning or unknown pulse type
    """
    if fields.delta == 0 or fields.delta_prime == 0:
        raise ValueError("Raman detunings delta and delta_prime must be nonzero")
    if pulse_type not in ("A", "B"):
        raise ValueError(f"pulse type must be 'A' or 'B', got {pulse_type!r}")
    pulse = fields.pulse_a if pulse_type == "A" else fields.pulse_b
    for name, delta, omega in (("unprimed", fields.delta, fields.omega_r),
                               ("primed", fields.delta_prime, fields.omega_r_prime)):
        if abs(delta) > MAX_DETUNING_FRACTION * omega:
            logger.warning(f"Raman {name} laser: detuning {delta:.4g} rad/ns is not small against "
                           f"the laser frequency {omega:.4g} rad/ns")

    j_low = j_high = None
    if fields.resolve_intermediate_j:
        Lp = intermediate_shell(space.L)
        j_low, j_high = abs(Lp - space.S), Lp + space.S

    total = (
        fields.raman_scale * _laser_operator(space, pulse.unprimed, j_low) / fields.delta
        + fields.raman_scale_prime * _laser_operator(space, pulse.primed, j_high) / fields.delta_prime
    )
    total = (total + total.conj().T) / 2
    return space.to_coupled(total, name=f"raman_{pulse_type}")


def control_hamiltonians(space: LevelSpace, fields: FieldConfig) -> Tuple[Operator, Operator]:
    """H_a = W_Z + W_R,A and H_b = W_Z + W_R,B."""
    zeeman = zeeman_hamiltonian(space, fields.b_field)
    ha = (zeeman + raman_hamiltonian(space, fields, "A")).with_name("H_a")
    hb = (zeeman + raman_hamiltonian(space, fields, "B")).with_name("H_b")
    return ha, hb


def _normalized(op: Operator, name: str) -> Operator:
    norm = op.spectral_norm()
    if norm == 0:
        logger.warning(f"Error generator {name} vanishes on this space; kept as zero")
        return op.with_name(name)
    return op.scaled(1 / norm).with_name(name)


def error_generators(space: LevelSpace, amplitudes: Optional[Sequence[float]] = None,
                     correlation_time: float = 10.0, seed: int = 0,
                     intermultiplet: bool = True) -> ErrorModel:
    """
    Six unit-norm error generators: L_k + 2 S_k and r_k^2 - r_l^2.

    Args:
        space: Level space
        amplitudes: Coupling amplitudes in rad/ns (default all zero)
        correlation_time: Refresh interval of f_m(t) in ns
        seed: Seed of the coupling process
        intermultiplet: Keep the blocks between different J multiplets; when False
            the normalized generators are returned block-diagonal
    """
    orbital, spin = orbital_ops(space), spin_ops(space)
    generators = [_normalized(space.to_coupled(orbital[k] + 2 * spin[k]), f"mag_{k}") for k in AXES]
    generators += [_normalized(quadratic_position_op(space, k, l), f"elec_{k}{l}") for k, l in ERROR_PAIRS]
    if amplitudes is None:
        amplitudes = [0.0] * len(generators)
    errors = ErrorModel(generators=generators, amplitudes=list(amplitudes),
                        correlation_time=correlation_time, seed=seed)
    return errors if intermultiplet else narrow_spectrum_errors(errors, space)


def fine_structure_h0(space: LevelSpace, fs: FineStructure) -> Operator:
    """
    Diagonal H0: zero on the lowest multiplet, omega_f on the others.

    Returns the zero operator when the splitting is disabled or zero.
    """
    omega = fs.omega_f if fs.enabled else 0.0
    lowest = min(state.J for state in space.basis)
    diag = [0.0 if state.J == lowest else omega for state in space.basis]
    return Operator(matrix=np.diag(diag).astype(complex), basis=space.basis_label, name="h0")


def zero_intermultiplet(E: Operator, space: LevelSpace) -> Operator:
    """Copy of E with every block between different J multiplets set to zero."""
    if E.basis != space.basis_label or E.dim != space.dimension:
        raise ValueError(f"operator in {E.basis} does not act on {space.basis_label}")
    js = np.array([state.J.twice_value for state in space.basis])
    mask = js[:, None] == js[None, :]
    return Operator(matrix=np.where(mask, E.matrix, 0), basis=E.basis, name=E.name)


def narrow_spectrum_errors(errors: ErrorModel, space: LevelSpace) -> ErrorModel:
    """
    Block-diagonal errors seen by couplings that stay constant over a fine-structure period.

    Inter-multiplet elements rotate at omega_f under H0 and average out over each
    period, so the coding only has to act on what is left. Amplitudes, correlation
    time and seed are kept.
    """
    return errors.model_copy(update={"generators": [zero_intermultiplet(E, space) for E in errors.generators]})
