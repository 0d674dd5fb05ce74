"""Three-photon projection kinetics and the coherence transfer efficiency.

Rate equations (i = 1, 2):
    d rho_gi_gi / dt = -G_i rho_gi_gi
    d rho_ni_ni / dt = +G_i rho_gi_gi
    d rho_g1_g2 / dt = -(G_1 + G_2)/2 rho_g1_g2
    d rho_n1_n2 / dt = sqrt(G_1 G_2) rho_g1_g2
Rates multiply populations, not their derivatives.
"""
import logging
import math
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from app.physics.spin_algebra import clebsch_gordan_exact
from app.schemas.kinetics_schema import DominanceReport, EtaReport, KineticsParams, KineticsState

logger = logging.getLogger(__name__)

# (j1, m1, j2, m2, J, M) of the CG factors along the two decay paths
PATH_GAMMA_1 = (
    ("3/2", "-1/2", 1, -1, "5/2", "-3/2"),
    ("3/2", "1/2", 1, -1, "3/2", "-1/2"),
    ("1/2", "-1/2", 1, 1, "3/2", "1/2"),
)
PATH_GAMMA_2 = (
    ("3/2", "1/2", 1, -1, "5/2", "-1/2"),
    ("3/2", "3/2", 1, -1, "3/2", "1/2"),
    ("1/2", "1/2", 1, 1, "3/2", "3/2"),
)

RTOL = 1e-10
ATOL = 1e-14


def _two_photon_admixture(p: KineticsParams) -> Tuple[float, float]:
    """|d E1 / Delta1|^2 and |d E2 / (Delta1 + Delta2)|^2."""
    first = (p.d_gamma_lambda * p.e1 / p.delta1) ** 2
    second = (p.d_lambda_mu * p.e2 / (p.delta1 + p.delta2)) ** 2
    return first, second


def three_photon_rate(p: KineticsParams) -> float:
    """
    Decay rate of the cavity-assisted three-photon transition gamma -> nu.

    Gamma = 2 pi (d E1 / Delta1)^2 (d E2 / (Delta1 + Delta2))^2 * cavity_enhancement * d_mu_nu^2
    """
    first, second = _two_photon_admixture(p)
    return 2 * math.pi * first * second * p.cavity_enhancement * p.d_mu_nu ** 2


def _path_weight(path) -> Fraction:
    weight = Fraction(1)
    for factors in path:
        weight *= abs(clebsch_gordan_exact(*factors))
    return weight


def cg_rate_ratio() -> Fraction:
    """Gamma_1 / Gamma_2 from the squared CG products of the two paths, exactly."""
    return _path_weight(PATH_GAMMA_1) / _path_weight(PATH_GAMMA_2)


def branch_rates(p: KineticsParams) -> Tuple[float, float]:
    """Gamma_1, Gamma_2: the three-photon rate weighted by each path's squared CG product."""
    base = three_photon_rate(p)
    return base * float(_path_weight(PATH_GAMMA_1)), base * float(_path_weight(PATH_GAMMA_2))


def transfer_efficiency(gamma1: float, gamma2: float) -> float:
    """
    eta = 2 sqrt(G1 G2) / (G1 + G2).

    Raises:
        ValueError: If either rate is not positive
    """
    if gamma1 <= 0 or gamma2 <= 0:
        raise ValueError(f"transfer efficiency needs positive rates, got {gamma1}, {gamma2}")
    return 2 * math.sqrt(gamma1 * gamma2) / (gamma1 + gamma2)


def eta_report(p: KineticsParams) -> EtaReport:
    ratio = cg_rate_ratio()
    gamma1, gamma2 = branch_rates(p)
    eta = transfer_efficiency(float(ratio), 1.0)
    return EtaReport(rate_ratio=f"{ratio.numerator}/{ratio.denominator}", rate_ratio_float=float(ratio),
                     eta=eta, error_probability=1 - eta, gamma_1=gamma1, gamma_2=gamma2)


def _check_rates(gamma1: float, gamma2: float) -> None:
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError(f"decay rates must be non-negative, got {gamma1}, {gamma2}")


def rate_ode_closed_form(gamma1: float, gamma2: float, rho0: KineticsState, t: float) -> KineticsState:
    """Exact solution of the rate equations at time t."""
    _check_rates(gamma1, gamma2)
    decay1, decay2 = math.exp(-gamma1 * t), math.exp(-gamma2 * t)
    mean = (gamma1 + gamma2) / 2
    if mean > 0:
        transferred = math.sqrt(gamma1 * gamma2) * -math.expm1(-mean * t) / mean
    else:
        transferred = 0.0
    return KineticsState(
        rho_g1g1=rho0.rho_g1g1 * decay1,
        rho_g2g2=rho0.rho_g2g2 * decay2,
        rho_n1n1=rho0.rho_n1n1 + rho0.rho_g1g1 * -math.expm1(-gamma1 * t),
        rho_n2n2=rho0.rho_n2n2 + rho0.rho_g2g2 * -math.expm1(-gamma2 * t),
        rho_g1g2=rho0.rho_g1g2 * math.exp(-mean * t),
        rho_n1n2=rho0.rho_n1n2 + rho0.rho_g1g2 * transferred,
    )


def _pack(state: KineticsState) -> np.ndarray:
    return np.array([state.rho_g1g1, state.rho_g2g2, state.rho_n1n1, state.rho_n2n2,
                     state.rho_g1g2.real, state.rho_g1g2.imag, state.rho_n1n2.real, state.rho_n1n2.imag])


def _unpack(y: np.ndarray) -> KineticsState:
    # populations are clipped to [0, 1]; a decayed branch can land a few atol below zero
    p = np.clip(y[:4], 0.0, 1.0)
    return KineticsState(rho_g1g1=p[0], rho_g2g2=p[1], rho_n1n1=p[2], rho_n2n2=p[3],
                         rho_g1g2=complex(y[4], y[5]), rho_n1n2=complex(y[6], y[7]))


def _rhs(gamma1: float, gamma2: float):
    mean = (gamma1 + gamma2) / 2
    root = math.sqrt(gamma1 * gamma2)

    def rhs(_t, y):
        return np.array([
            -gamma1 * y[0],
            -gamma2 * y[1],
            gamma1 * y[0],
            gamma2 * y[1],
            -mean * y[4],
            -mean * y[5],
            root * y[4],
            root * y[5],
        ])
    return rhs


def kinetics_time_series(gamma1: float, gamma2: float, rho0: KineticsState,
                         times: Sequence[float]) -> List[KineticsState]:
    """Integrate the rate equations and sample them at ``times`` (ascending, ns)."""
    _check_rates(gamma1, gamma2)
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return []
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("sample times must be non-negative and ascending")
    if times[-1] == 0:
        return [rho0 for _ in times]
    # steps stay inside the real stability interval of the fastest branch
    fastest = max(gamma1, gamma2)
    max_step = 1.0 / fastest if fastest > 0 else np.inf
    solution = solve_ivp(_rhs(gamma1, gamma2), (0.0, float(times[-1])), _pack(rho0), method="DOP853",
                         t_eval=times, rtol=RTOL, atol=ATOL, max_step=max_step)
    if not solution.success:
        raise RuntimeError(f"rate equation integration failed: {solution.message}")
    return [_unpack(solution.y[:, k]) for k in range(solution.y.shape[1])]


def rate_ode_solve(gamma1: float, gamma2: float, rho0: KineticsState, t: float) -> KineticsState:
    """
    Integrate the projection rate equations from 0 to t.

    Args:
        gamma1, gamma2: Branch rates in 1/ns
        rho0: Initial state
        t: Final time in ns

    Returns:
        KineticsState at t
    """
    return kinetics_time_series(gamma1, gamma2, rho0, [t])[-1]


def rate_dominance_check(p: KineticsParams, threshold: float = 10.0) -> DominanceReport:
    """
    Compare the three-photon rate with the competing decay channels.

    Margins (each passes above ``threshold``):
        cavity_dominance: Gamma / (admixture * gamma_5p), the inverse pi-branch ratio
        lifetime_60f: Gamma * tau_60f
        lifetime_5d: Gamma / (|d E1 / Delta1|^2 / tau_5d)
        lifetime_5p: Gamma / (admixture / tau_5p)
    """
    gamma = three_photon_rate(p)
    first, second = _two_photon_admixture(p)
    admixture = first * second

    def ratio(numerator: float, denominator: float) -> float:
        if denominator == 0:
            return math.inf if numerator > 0 else 0.0
        return numerator / denominator

    pi_branch = ratio(admixture * p.gamma_5p, gamma)
    margins = {
        "cavity_dominance": ratio(gamma, admixture * p.gamma_5p),
        "lifetime_60f": gamma * p.tau_60f,
        "lifetime_5d": ratio(gamma, first / p.tau_5d),
        "lifetime_5p": ratio(gamma, admixture / p.tau_5p),
    }
    passed = {name: value > threshold for name, value in margins.items()}
    failing = [name for name, ok in passed.items() if not ok]
    if failing:
        logger.warning(f"Rate dominance below {threshold} for: {', '.join(failing)}")
    return DominanceReport(gamma=gamma, pi_branch_ratio=pi_branch, margins=margins,
                           passed=passed, threshold=threshold)
