from fractions import Fraction
from functools import total_ordering
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.utils.errors import BasisMismatchError

HalfIntLike = Union["HalfInt", int, float, Fraction, str]


@total_ordering
class HalfInt(BaseModel):
    """Exact j or m quantum number, stored as 2j."""
    model_config = ConfigDict(frozen=True)

    twice_value: int = Field(..., description="Twice the quantum number")

    @classmethod
    def of(cls, value: HalfIntLike) -> "HalfInt":
        """
        Build a HalfInt from an int, float, Fraction, "p/q" string or HalfInt.

        Raises:
            ValueError: If the value is not a multiple of 1/2
        """
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, str):
            value = Fraction(value.strip())
        twice = Fraction(value) * 2
        if twice.denominator != 1:
            raise ValueError(f"{value} is not a multiple of 1/2")
        return cls(twice_value=int(twice))

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __float__(self) -> float:
        return self.twice_value / 2

    def __add__(self, other: HalfIntLike) -> "HalfInt":
        return HalfInt(twice_value=self.twice_value + HalfInt.of(other).twice_value)

    def __radd__(self, other: HalfIntLike) -> "HalfInt":
        return self.__add__(other)

    def __sub__(self, other: HalfIntLike) -> "HalfInt":
        return HalfInt(twice_value=self.twice_value - HalfInt.of(other).twice_value)

    def __neg__(self) -> "HalfInt":
        return HalfInt(twice_value=-self.twice_value)

    def __abs__(self) -> "HalfInt":
        return HalfInt(twice_value=abs(self.twice_value))

    def __lt__(self, other: HalfIntLike) -> bool:
        return self.twice_value < HalfInt.of(other).twice_value

    def __eq__(self, other: object) -> bool:
        try:
            return self.twice_value == HalfInt.of(other).twice_value
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash(("HalfInt", self.twice_value))

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"

    def __repr__(self) -> str:
        return f"HalfInt({self})"


class BasisState(BaseModel):
    """Label of one coupled basis vector |n L S J mJ>."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(60, description="Principal quantum number")
    L: HalfInt
    S: HalfInt
    J: HalfInt
    mJ: HalfInt

    def label(self) -> str:
        return f"|J={self.J}, mJ={self.mJ}>"


class Operator(BaseModel):
    """Dense complex matrix tagged with the basis it is written in."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    basis: str = Field(..., description="Label of the ordered basis, e.g. 'coupled(L=3,S=1/2)'")
    name: Optional[str] = None

    @field_validator("matrix", mode="before")
    @classmethod
    def _square_complex(cls, value):
        matrix = np.asarray(value, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {matrix.shape}")
        return matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _check_basis(self, other: "Operator") -> None:
        if other.basis != self.basis:
            raise BasisMismatchError(f"cannot combine operator in {self.basis} with operator in {other.basis}")

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_basis(other)
        return Operator(matrix=self.matrix @ other.matrix, basis=self.basis)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_basis(other)
        return Operator(matrix=self.matrix + other.matrix, basis=self.basis)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_basis(other)
        return Operator(matrix=self.matrix - other.matrix, basis=self.basis)

    def __neg__(self) -> "Operator":
        return Operator(matrix=-self.matrix, basis=self.basis, name=self.name)

    def scaled(self, factor: complex) -> "Operator":
        return Operator(matrix=factor * self.matrix, basis=self.basis, name=self.name)

    def dagger(self) -> "Operator":
        return Operator(matrix=self.matrix.conj().T, basis=self.basis)

    def with_name(self, name: str) -> "Operator":
        return Operator(matrix=self.matrix, basis=self.basis, name=name)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_defect() < tol

    def unitarity_defect(self) -> float:
        eye = np.eye(self.dim)
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - eye), initial=0.0))

    def spectral_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2)) if self.dim else 0.0

    def to_pairs(self) -> List[List[List[float]]]:
        """Complex entries as [re, im] pairs for JSON output."""
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix]
