"""Angular-momentum algebra: Clebsch-Gordan coefficients, j-operators, coupled bases.

All phases follow the Condon-Shortley convention. Operator bases list m
ascending from -j to +j.
"""
import logging
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.schemas.quantum_schema import HalfInt, HalfIntLike, Operator

logger = logging.getLogger(__name__)


class AngularMomentumOps(BaseModel):
    """Matrices of J_x, J_y, J_z, J_+, J_- for one j."""
    model_config = ConfigDict(frozen=True)

    j: HalfInt
    jx: Operator
    jy: Operator
    jz: Operator
    jplus: Operator
    jminus: Operator

    @property
    def dim(self) -> int:
        return self.j.twice_value + 1


def _validate_pair(j: HalfInt, m: HalfInt, name: str) -> None:
    if j.twice_value < 0:
        raise ValueError(f"{name}: angular momentum j={j} must be non-negative")
    if (j.twice_value - m.twice_value) % 2:
        raise ValueError(f"{name}: m={m} and j={j} have mismatched half-integer parity")
    if abs(m.twice_value) > j.twice_value:
        raise ValueError(f"{name}: |m|={abs(m)} exceeds j={j}")


@lru_cache(maxsize=None)
def _cg_signed_square(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> Fraction:
    """Racah formula on doubled quantum numbers; returns sign * CG^2 exactly."""
    if tM != tm1 + tm2:
        return Fraction(0)
    if tJ < abs(tj1 - tj2) or tJ > tj1 + tj2 or (tj1 + tj2 + tJ) % 2:
        return Fraction(0)

    def f(twice: int) -> int:
        return factorial(twice // 2)

    prefactor = Fraction(
        (tJ + 1) * f(tJ + tj1 - tj2) * f(tJ - tj1 + tj2) * f(tj1 + tj2 - tJ)
        * f(tj1 + tm1) * f(tj1 - tm1) * f(tj2 + tm2) * f(tj2 - tm2)
        * f(tJ + tM) * f(tJ - tM),
        f(tj1 + tj2 + tJ + 2),
    )

    # k runs over integers keeping every factorial argument non-negative
    k_min = max(0, (tj2 - tJ - tm1) // 2, (tj1 - tJ + tm2) // 2)
    k_max = min((tj1 + tj2 - tJ) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        denominator = (
            factorial(k)
            * f(tj1 + tj2 - tJ - 2 * k)
            * f(tj1 - tm1 - 2 * k)
            * f(tj2 + tm2 - 2 * k)
            * f(tJ - tj2 + tm1 + 2 * k)
            * f(tJ - tj1 - tm2 + 2 * k)
        )
        total += Fraction((-1) ** k, denominator)

    square = prefactor * total * total
    return square if total >= 0 else -square


def clebsch_gordan_exact(j1: HalfIntLike, m1: HalfIntLike, j2: HalfIntLike, m2: HalfIntLike,
                         J: HalfIntLike, M: HalfIntLike) -> Fraction:
    """
    Signed square <j1 m1; j2 m2 | J M>^2 as an exact rational.

    The sign of the returned Fraction is the sign of the coefficient.

    Raises:
        ValueError: On parity mismatch, |m| > j or negative j
    """
    j1, m1, j2, m2, J, M = (HalfInt.of(x) for x in (j1, m1, j2, m2, J, M))
    _validate_pair(j1, m1, "j1/m1")
    _validate_pair(j2, m2, "j2/m2")
    _validate_pair(J, M, "J/M")
    return _cg_signed_square(j1.twice_value, m1.twice_value, j2.twice_value,
                             m2.twice_value, J.twice_value, M.twice_value)


def clebsch_gordan(j1: HalfIntLike, m1: HalfIntLike, j2: HalfIntLike, m2: HalfIntLike,
                   J: HalfIntLike, M: HalfIntLike) -> float:
    """
    Condon-Shortley Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.

    Args:
        j1, m1: First angular momentum and projection
        j2, m2: Second angular momentum and projection
        J, M: Coupled angular momentum and projection

    Returns:
        The coefficient; 0.0 when M != m1 + m2 or the triangle rule fails

    Raises:
        ValueError: On parity mismatch, |m| > j or negative j
    """
    signed = clebsch_gordan_exact(j1, m1, j2, m2, J, M)
    magnitude = sqrt(abs(signed.numerator)) / sqrt(signed.denominator)
    return magnitude if signed >= 0 else -magnitude


def m_values(j: HalfIntLike) -> List[HalfInt]:
    """Projections -j..+j in ascending order."""
    j = HalfInt.of(j)
    return [HalfInt(twice_value=tm) for tm in range(-j.twice_value, j.twice_value + 1, 2)]


def angular_momentum_ops(j: HalfIntLike, basis: str = None) -> AngularMomentumOps:
    """
    Build J_x, J_y, J_z and the ladder operators for angular momentum j.

    Args:
        j: Angular momentum quantum number
        basis: Basis label carried by the operators (default ``"j=<j>"``)

    Returns:
        AngularMomentumOps in the ascending-m basis
    """
    j = HalfInt.of(j)
    if j.twice_value < 0:
        raise ValueError(f"angular momentum j={j} must be non-negative")
    label = basis or f"j={j}"
    jj = float(j)
    ms = [float(m) for m in m_values(j)]
    dim = len(ms)

    jplus = np.zeros((dim, dim), dtype=complex)
    for i, m in enumerate(ms[:-1]):
        jplus[i + 1, i] = np.sqrt(jj * (jj + 1) - m * (m + 1))
    jminus = jplus.T.copy()

    return AngularMomentumOps(
        j=j,
        jx=Operator(matrix=(jplus + jminus) / 2, basis=label, name="jx"),
        jy=Operator(matrix=(jplus - jminus) / 2j, basis=label, name="jy"),
        jz=Operator(matrix=np.diag(ms).astype(complex), basis=label, name="jz"),
        jplus=Operator(matrix=jplus, basis=label, name="jplus"),
        jminus=Operator(matrix=jminus, basis=label, name="jminus"),
    )


def coupled_labels(L: HalfIntLike, S: HalfIntLike) -> List[Tuple[HalfInt, HalfInt]]:
    """(J, M) pairs with J descending from L+S to |L-S|, M ascending."""
    L, S = HalfInt.of(L), HalfInt.of(S)
    labels = []
    for tJ in range(L.twice_value + S.twice_value, abs(L.twice_value - S.twice_value) - 1, -2):
        J = HalfInt(twice_value=tJ)
        labels.extend((J, M) for M in m_values(J))
    return labels


def uncoupled_labels(L: HalfIntLike, S: HalfIntLike) -> List[Tuple[HalfInt, HalfInt]]:
    """(m_L, m_S) pairs with m_L slow and m_S fast, both ascending."""
    return [(mL, mS) for mL in m_values(L) for mS in m_values(S)]


def couple_basis(L: HalfIntLike, S: HalfIntLike) -> Operator:
    """
    Change of basis from uncoupled |m_L>|m_S> to coupled |J M>.

    Rows are coupled states, columns uncoupled states; an uncoupled operator
    O maps to the coupled basis as ``U @ O @ U.T``.

    Returns:
        Real orthogonal matrix of Clebsch-Gordan coefficients
    """
    L, S = HalfInt.of(L), HalfInt.of(S)
    rows = coupled_labels(L, S)
    cols = uncoupled_labels(L, S)
    matrix = np.zeros((len(rows), len(cols)), dtype=complex)
    for r, (J, M) in enumerate(rows):
        for c, (mL, mS) in enumerate(cols):
            if mL.twice_value + mS.twice_value == M.twice_value:
                matrix[r, c] = clebsch_gordan(L, mL, S, mS, J, M)
    logger.debug(f"Built coupling matrix for L={L}, S={S} ({len(rows)} states)")
    return Operator(matrix=matrix, basis=f"uncoupled->coupled(L={L},S={S})", name="couple_basis")
