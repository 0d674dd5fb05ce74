import logging
from math import sqrt

import numpy as np
import pytest
from scipy.linalg import expm
from sympy.physics.wigner import gaunt

from app.physics.spin_algebra import angular_momentum_ops
from app.physics.system_model import (
    build_space,
    error_generators,
    fine_structure_h0,
    narrow_spectrum_errors,
    orbital_ops,
    quadratic_orbital_matrix,
    raman_hamiltonian,
    rank2_orbital_matrix,
    spin_ops,
    zeeman_hamiltonian,
    zero_intermultiplet,
)
from app.schemas.quantum_schema import HalfInt, Operator
from app.schemas.zeno_schema import FieldConfig, FineStructure, LaserFields, PulseFields
from app.utils.errors import BasisMismatchError
from app.utils.units import BOHR_MAGNETON_RAD_PER_NS_PER_T


def coupled_spin_ops(space):
    return {k: space.to_coupled(m, name=f"S{k}") for k, m in spin_ops(space).items()}


def test_rb60f_space_layout(rb60f_space):
    """14 coupled states, J=7/2 first, code pair at |5/2,-3/2>, |5/2,-1/2>."""
    assert rb60f_space.dimension == 14
    assert rb60f_space.basis[0].J == HalfInt.of("7/2")
    assert rb60f_space.basis[8].J == HalfInt.of("5/2")
    assert rb60f_space.code_indices == (9, 10)
    assert rb60f_space.basis[9].mJ == HalfInt.of("-3/2")
    assert rb60f_space.basis[10].mJ == HalfInt.of("-1/2")
    assert rb60f_space.basis[9].label() == "|J=5/2, mJ=-3/2>"
    assert rb60f_space.basis_label == "coupled(L=3,S=1/2)"
    assert rb60f_space.hamming.passed
    assert rb60f_space.hamming.ancilla_dim == 7
    assert rb60f_space.hamming.required == 7


def test_code_projector_is_rank_two(rb60f_space):
    projector = rb60f_space.code_projector()
    np.testing.assert_allclose(projector @ projector, projector)
    assert np.trace(projector).real == pytest.approx(2.0)


def test_hamming_bound_failure_warns(caplog):
    with caplog.at_level(logging.WARNING):
        space = build_space(3, "1/2", n_errors=7)
    assert not space.hamming.passed
    assert "Ancilla bound fails" in caplog.text


def test_explicit_code_states():
    space = build_space(3, "1/2", code_states=[("7/2", "1/2"), ("7/2", "3/2")])
    assert space.code_indices == (4, 5)


@pytest.mark.parametrize("code_states", [
    [("5/2", "-3/2"), ("9/2", "1/2")],
    [("5/2", "-3/2"), ("5/2", "-3/2")],
    [("5/2", "-3/2")],
])
def test_invalid_code_states_rejected(code_states):
    with pytest.raises(ValueError):
        build_space(3, "1/2", code_states=code_states)


def test_operator_basis_mismatch(rb60f_space, toy_problem):
    _, ha, _, _ = toy_problem
    zeeman = zeeman_hamiltonian(rb60f_space, (0.0, 0.0, 1e-3))
    with pytest.raises(BasisMismatchError):
        zeeman + Operator(matrix=np.eye(14), basis=ha.basis)
    with pytest.raises(BasisMismatchError):
        zeeman @ Operator(matrix=np.eye(14), basis="uncoupled")


def test_operator_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        Operator(matrix=np.zeros((2, 3)), basis="x")


def test_zeeman_spectral_norm(rb60f_space):
    """Largest |L + 2S| projection of an f electron is 3 + 1 = 4."""
    b = np.array([7e-3, 8.2e-3, -6.8e-3])
    zeeman = zeeman_hamiltonian(rb60f_space, b)
    assert zeeman.is_hermitian()
    expected = 4 * BOHR_MAGNETON_RAD_PER_NS_PER_T * np.linalg.norm(b)
    assert zeeman.spectral_norm() == pytest.approx(expected, rel=1e-12)


def test_zeeman_lande_factor(rb60f_space):
    """Inside J=5/2 the field along z acts as g mu_B B mJ with g = 6/7."""
    bz = 1e-2
    zeeman = zeeman_hamiltonian(rb60f_space, (0.0, 0.0, bz)).matrix
    block = rb60f_space.multiplets()[HalfInt.of("5/2")]
    for i in block:
        mj = float(rb60f_space.basis[i].mJ)
        assert zeeman[i, i].real == pytest.approx(6 / 7 * BOHR_MAGNETON_RAD_PER_NS_PER_T * bz * mj, rel=1e-12)


def test_zeeman_needs_three_components(rb60f_space):
    with pytest.raises(ValueError):
        zeeman_hamiltonian(rb60f_space, (1.0, 0.0))


def test_rank2_matrix_matches_gaunt():
    """<3 m'|T2_q|3 m> is proportional to the Gaunt integral with one constant for every q, m, m'."""
    ratios = []
    for q in range(-2, 3):
        matrix = rank2_orbital_matrix(3, q)
        for col, m in enumerate(range(-3, 4)):
            for row, mp in enumerate(range(-3, 4)):
                integral = float((-1) ** mp * gaunt(3, 2, 3, -mp, q, m))
                if abs(integral) < 1e-14:
                    assert abs(matrix[row, col]) < 1e-14
                else:
                    ratios.append(matrix[row, col] / integral)
    assert len(ratios) > 0
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)


def _p_shell_quadratic(k: int, l: int) -> np.ndarray:
    """r_k^2 - r_l^2 between Condon-Shortley p orbitals from their Cartesian form."""
    u = np.array([[1, -1j, 0], [0, 0, sqrt(2)], [-1, -1j, 0]]) / sqrt(2)
    d = np.zeros(3)
    d[k], d[l] = 2.0, -2.0
    return np.einsum("ai,i,bi->ab", u.conj(), d, u)


def test_quadratic_operators_match_cartesian_p_shell():
    """All three differences share one radial constant with the Cartesian construction."""
    pairs = {("x", "y"): (0, 1), ("x", "z"): (0, 2), ("y", "z"): (1, 2)}
    constants = []
    for (k, l), (i, j) in pairs.items():
        ours = quadratic_orbital_matrix(1, k, l)
        reference = _p_shell_quadratic(i, j)
        mask = np.abs(reference) > 1e-12
        np.testing.assert_allclose(ours[~mask], 0, atol=1e-12)
        constants.extend((ours[mask] / reference[mask]).tolist())
    np.testing.assert_allclose(np.real(constants), np.real(constants[0]), rtol=1e-12)
    np.testing.assert_allclose(np.imag(constants), 0, atol=1e-12)


def test_x2_minus_y2_flips_under_quarter_turn():
    lz = angular_momentum_ops(3).jz.matrix
    rotation = expm(-1j * np.pi / 2 * lz)
    op = quadratic_orbital_matrix(3, "x", "y")
    np.testing.assert_allclose(rotation.conj().T @ op @ rotation, -op, atol=1e-12)


def test_quadratic_rejects_bad_axes():
    with pytest.raises(ValueError):
        quadratic_orbital_matrix(3, "x", "x")
    with pytest.raises(ValueError):
        quadratic_orbital_matrix(3, "x", "w")


def test_error_generators_unit_norm(rb60f_errors):
    assert rb60f_errors.labels == ["mag_x", "mag_y", "mag_z", "elec_xy", "elec_xz", "elec_yz"]
    for generator in rb60f_errors.generators:
        assert generator.is_hermitian()
        assert generator.spectral_norm() == pytest.approx(1.0, rel=1e-12)
    assert rb60f_errors.amplitudes == [0.0] * 6


def test_magnetic_generators_commutator(rb60f_space, rb60f_errors):
    """[Lx+2Sx, Ly+2Sy] = i(Lz + 4Sz): the magnetic set is not closed under commutation."""
    orbital, spin = orbital_ops(rb60f_space), spin_ops(rb60f_space)
    mag_x, mag_y = rb60f_errors.generators[0].matrix, rb60f_errors.generators[1].matrix
    expected = rb60f_space.to_coupled(1j * (orbital["z"] + 4 * spin["z"]) / 16).matrix
    np.testing.assert_allclose(mag_x @ mag_y - mag_y @ mag_x, expected, atol=1e-12)
    mag_z = rb60f_errors.generators[2].matrix
    assert np.linalg.norm(expected - 1j * mag_z / 4) > 1e-3


def test_error_model_validation(rb60f_errors):
    with pytest.raises(ValueError):
        rb60f_errors.with_amplitudes([1e-3] * 5)
    with pytest.raises(ValueError):
        rb60f_errors.with_amplitudes([-1e-3] + [0.0] * 5)


def test_raman_operators_hermitian_and_spin_trivial(rb60f_space, rb60f_fields):
    spins = coupled_spin_ops(rb60f_space)
    for pulse in ("A", "B"):
        raman = raman_hamiltonian(rb60f_space, rb60f_fields, pulse)
        assert raman.is_hermitian()
        assert raman.spectral_norm() > 0
        for s in spins.values():
            commutator = raman.matrix @ s.matrix - s.matrix @ raman.matrix
            assert np.max(np.abs(commutator)) < 1e-9 * raman.spectral_norm()


def test_control_hamiltonians_differ(rb60f_hamiltonians):
    ha, hb = rb60f_hamiltonians
    assert ha.name == "H_a" and hb.name == "H_b"
    assert ha.is_hermitian() and hb.is_hermitian()
    assert np.linalg.norm(ha.matrix @ hb.matrix - hb.matrix @ ha.matrix) > 1e-6


def test_resolved_intermediate_levels_sum_to_full_shell(rb60f_space):
    """With matched lasers the j=3/2 and j=5/2 paths add up to the unresolved coupling."""
    laser = LaserFields(e_x=1e6, e_y=2e6, phase_y=0.4)
    pulse = PulseFields(unprimed=laser, primed=laser)
    common = dict(pulse_a=pulse, pulse_b=pulse, delta=2.0, delta_prime=2.0,
                  raman_scale=1e-12, raman_scale_prime=1e-12)
    unresolved = raman_hamiltonian(rb60f_space, FieldConfig(**common), "A").matrix
    resolved = raman_hamiltonian(rb60f_space, FieldConfig(resolve_intermediate_j=True, **common), "A").matrix
    np.testing.assert_allclose(2 * resolved, unresolved, atol=1e-12 * np.abs(unresolved).max())
    # resolving the intermediate fine structure breaks spin triviality
    sz = coupled_spin_ops(rb60f_space)["z"].matrix
    assert np.max(np.abs(resolved @ sz - sz @ resolved)) > 1e-6 * np.abs(resolved).max()


def test_zero_detuning_rejected(rb60f_space, rb60f_fields):
    with pytest.raises(ValueError):
        FieldConfig(delta=0.0)
    broken = rb60f_fields.model_copy(update={"delta_prime": 0.0})
    with pytest.raises(ValueError, match="nonzero"):
        raman_hamiltonian(rb60f_space, broken, "A")


def test_reversed_fields_negate_hamiltonians(rb60f_space, rb60f_fields):
    from app.physics.system_model import control_hamiltonians

    ha, hb = control_hamiltonians(rb60f_space, rb60f_fields)
    ra, rb = control_hamiltonians(rb60f_space, rb60f_fields.reversed_fields())
    np.testing.assert_allclose(ra.matrix, -ha.matrix, atol=1e-12 * ha.spectral_norm())
    np.testing.assert_allclose(rb.matrix, -hb.matrix, atol=1e-12 * hb.spectral_norm())


def test_fine_structure_h0(rb60f_space):
    fs = FineStructure(splitting_cm=2e-5, enabled=True)
    assert fs.tau_f == pytest.approx(1667.82, rel=1e-5)
    h0 = fine_structure_h0(rb60f_space, fs).matrix
    diag = np.diag(h0).real
    np.testing.assert_allclose(diag[:8], fs.omega_f)
    np.testing.assert_allclose(diag[8:], 0.0)
    assert fs.omega_f * fs.tau_f == pytest.approx(2 * np.pi, rel=1e-12)

    disabled = fine_structure_h0(rb60f_space, FineStructure(splitting_cm=2e-5, enabled=False))
    assert disabled.spectral_norm() == 0.0
    assert FineStructure(splitting_cm=0.0).tau_f == float("inf")


def test_zero_intermultiplet(rb60f_space, rb60f_errors):
    E = rb60f_errors.generators[0]
    blocked = zero_intermultiplet(E, rb60f_space).matrix
    np.testing.assert_allclose(blocked[:8, 8:], 0)
    np.testing.assert_allclose(blocked[8:, :8], 0)
    np.testing.assert_allclose(blocked[8:, 8:], E.matrix[8:, 8:])
    with pytest.raises(ValueError):
        zero_intermultiplet(Operator(matrix=np.eye(4), basis="other"), rb60f_space)


def test_zeeman_is_linear_in_the_field(rb60f_space):
    rng = np.random.default_rng(17)
    for _ in range(5):
        b1, b2 = rng.normal(scale=1e-2, size=(2, 3))
        c = rng.normal()
        combined = zeeman_hamiltonian(rb60f_space, b1 + c * b2).matrix
        separate = zeeman_hamiltonian(rb60f_space, b1).matrix + c * zeeman_hamiltonian(rb60f_space, b2).matrix
        np.testing.assert_allclose(combined, separate, atol=1e-12 * np.abs(separate).max())


def test_block_diagonal_error_generators(rb60f_space, rb60f_errors):
    narrow = error_generators(rb60f_space, intermultiplet=False)
    assert narrow.labels == rb60f_errors.labels
    for full, blocked in zip(rb60f_errors.generators, narrow.generators):
        np.testing.assert_allclose(blocked.matrix, zero_intermultiplet(full, rb60f_space).matrix)
        np.testing.assert_allclose(blocked.matrix[:8, 8:], 0)
        assert blocked.is_hermitian()
    # S_z mixes the two multiplets, so mag_z loses its off-diagonal blocks
    assert np.abs(rb60f_errors.generators[2].matrix[:8, 8:]).max() > 1e-3


def test_narrow_spectrum_errors_keep_the_coupling_process(rb60f_space, rb60f_errors):
    noisy = rb60f_errors.with_amplitudes([2e-3] * 6).model_copy(update={"correlation_time": 500.0, "seed": 4})
    narrow = narrow_spectrum_errors(noisy, rb60f_space)
    assert narrow.amplitudes == [2e-3] * 6
    assert narrow.correlation_time == 500.0
    assert narrow.seed == 4
    assert not narrow.generators[2].matrix[:8, 8:].any()
    assert noisy.generators[2].matrix[:8, 8:].any()


def test_large_raman_detuning_warns(rb60f_space, rb60f_fields, caplog):
    far = rb60f_fields.model_copy(update={"delta": 1e5})
    with caplog.at_level(logging.WARNING):
        raman_hamiltonian(rb60f_space, far, "A")
    assert "unprimed laser" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.WARNING):
        raman_hamiltonian(rb60f_space, rb60f_fields, "A")
    assert "detuning" not in caplog.text


def test_laser_frequencies_must_be_positive():
    with pytest.raises(ValueError):
        FieldConfig(omega_r=0.0)
    with pytest.raises(ValueError):
        FieldConfig(omega_r_prime=-1.0)
