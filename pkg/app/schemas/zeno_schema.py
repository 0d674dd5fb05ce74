import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.quantum_schema import BasisState, HalfInt, Operator
from app.utils.units import EV_TO_RAD_PER_NS, SPEED_OF_LIGHT_CM_PER_NS, wavenumber_to_rad_per_ns


class HammingReport(BaseModel):
    """Ancilla bound A >= M + 1."""
    ancilla_dim: int
    n_errors: int
    required: int
    passed: bool


class LevelSpace(BaseModel):
    """Coupled basis of one nL manifold with the two code states marked."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    L: HalfInt
    S: HalfInt
    basis: List[BasisState]
    code_indices: Tuple[int, int]
    coupling: np.ndarray = Field(..., description="Uncoupled -> coupled change of basis")
    hamming: HammingReport

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def basis_label(self) -> str:
        return f"coupled(L={self.L},S={self.S})"

    def multiplets(self) -> Dict[HalfInt, List[int]]:
        groups: Dict[HalfInt, List[int]] = {}
        for i, state in enumerate(self.basis):
            groups.setdefault(state.J, []).append(i)
        return groups

    def to_coupled(self, uncoupled: np.ndarray, name: Optional[str] = None) -> Operator:
        u = self.coupling
        return Operator(matrix=u @ uncoupled @ u.T, basis=self.basis_label, name=name)

    def code_isometry(self) -> np.ndarray:
        """Columns |gamma_1>, |gamma_2> as a dimension x 2 matrix."""
        w = np.zeros((self.dimension, 2), dtype=complex)
        w[self.code_indices[0], 0] = 1.0
        w[self.code_indices[1], 1] = 1.0
        return w

    def code_projector(self) -> np.ndarray:
        w = self.code_isometry()
        return w @ w.conj().T


class LaserFields(BaseModel):
    """Complex amplitude (E_x, E_y e^{-i phi_y}, 0) of one laser, V/m."""
    e_x: float = 0.0
    e_y: float = 0.0
    phase_y: float = Field(0.0, description="Phase of E_y in radians")


class PulseFields(BaseModel):
    """Unprimed and primed lasers of one pulse type."""
    unprimed: LaserFields = Field(default_factory=LaserFields)
    primed: LaserFields = Field(default_factory=LaserFields)


class FieldConfig(BaseModel):
    """Static B field plus the two Raman laser pairs of the A and B pulses."""
    b_field: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    pulse_a: PulseFields = Field(default_factory=PulseFields)
    pulse_b: PulseFields = Field(default_factory=PulseFields)
    omega_r: float = Field(0.986324 * EV_TO_RAD_PER_NS, gt=0, description="Unprimed laser frequency, rad/ns")
    omega_r_prime: float = Field(0.986676 * EV_TO_RAD_PER_NS, gt=0, description="Primed laser frequency, rad/ns")
    delta: float = Field(-1e-5 * EV_TO_RAD_PER_NS, description="Unprimed detuning, rad/ns")
    delta_prime: float = Field(1e-5 * EV_TO_RAD_PER_NS, description="Primed detuning, rad/ns")
    raman_scale: float = Field(1.0e-12, description="Radial factor of the unprimed laser, (rad/ns)^2 per (V/m)^2")
    raman_scale_prime: float = Field(0.5e-12, description="Radial factor of the primed laser, (rad/ns)^2 per (V/m)^2")
    resolve_intermediate_j: bool = False

    @field_validator("delta", "delta_prime")
    @classmethod
    def _nonzero_detuning(cls, value: float) -> float:
        if value == 0:
            raise ValueError("Raman detuning must be nonzero")
        return value

    @classmethod
    def rb60f_values(cls) -> "FieldConfig":
        """Field values of the published 60f coding sequence."""
        laser_a = LaserFields(e_x=8.5e5, e_y=5.2e6, phase_y=2.3)
        laser_b = LaserFields(e_x=-5.2e6, e_y=8.5e5, phase_y=2.3)
        return cls(
            b_field=(7e-3, 8.2e-3, -6.8e-3),
            pulse_a=PulseFields(unprimed=laser_a, primed=laser_a),
            pulse_b=PulseFields(unprimed=laser_b, primed=laser_b),
        )

    def reversed_fields(self) -> "FieldConfig":
        """Fields realizing -H_a, -H_b: B and both detunings flipped."""
        return self.model_copy(update={
            "b_field": tuple(-b for b in self.b_field),
            "delta": -self.delta,
            "delta_prime": -self.delta_prime,
        })


class FineStructure(BaseModel):
    """Splitting between the two J multiplets of the manifold."""
    splitting_cm: float = Field(2e-5, ge=0, description="Splitting in cm^-1")
    enabled: bool = False
    narrow_spectrum: bool = Field(False, description="Search coding timings against the block-diagonal errors")

    @property
    def tau_f(self) -> float:
        """Period 1/(c * splitting) in ns; inf for zero splitting."""
        if self.splitting_cm == 0:
            return math.inf
        return 1.0 / (SPEED_OF_LIGHT_CM_PER_NS * self.splitting_cm)

    @property
    def omega_f(self) -> float:
        return wavenumber_to_rad_per_ns(self.splitting_cm)


class ErrorModel(BaseModel):
    """Error generators with the piecewise-constant coupling process f_m(t)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    generators: List[Operator]
    amplitudes: List[float] = Field(..., description="Half-width of f_m, rad/ns")
    correlation_time: float = Field(10.0, gt=0, description="Refresh interval of f_m, ns")
    seed: int = 0

    @model_validator(mode="after")
    def _matching_lengths(self) -> "ErrorModel":
        if len(self.amplitudes) != len(self.generators):
            raise ValueError(f"{len(self.amplitudes)} amplitudes given for {len(self.generators)} generators")
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("error amplitudes must be non-negative")
        return self

    @property
    def labels(self) -> List[str]:
        return [g.name or f"E{i + 1}" for i, g in enumerate(self.generators)]

    def with_amplitudes(self, amplitudes: List[float]) -> "ErrorModel":
        return ErrorModel(generators=self.generators, amplitudes=list(amplitudes),
                          correlation_time=self.correlation_time, seed=self.seed)


class Pulse(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: Literal["A", "B"]
    duration: float = Field(..., gt=0, description="Duration in ns")


class PulseSequence(BaseModel):
    """Alternating A/B pulses; the last pulse acts last."""
    pulses: List[Pulse] = Field(default_factory=list)
    negate_hamiltonians: bool = False

    @model_validator(mode="after")
    def _alternating(self) -> "PulseSequence":
        for previous, current in zip(self.pulses, self.pulses[1:]):
            if previous.tag == current.tag:
                raise ValueError("pulse tags must alternate between A and B")
        if self.pulses and not self.negate_hamiltonians and self.pulses[0].tag != "A":
            raise ValueError("a coding sequence must start with an A pulse")
        return self

    @classmethod
    def from_durations(cls, durations: List[float], start: Literal["A", "B"] = "A",
                       negate_hamiltonians: bool = False) -> "PulseSequence":
        tags = ("A", "B") if start == "A" else ("B", "A")
        pulses = [Pulse(tag=tags[i % 2], duration=float(t)) for i, t in enumerate(durations)]
        return cls(pulses=pulses, negate_hamiltonians=negate_hamiltonians)

    @property
    def durations(self) -> List[float]:
        return [p.duration for p in self.pulses]

    @property
    def total_duration(self) -> float:
        return float(sum(self.durations))

    def __len__(self) -> int:
        return len(self.pulses)


class OptimizerSettings(BaseModel):
    n_pulses: int = Field(34, ge=1)
    tolerance: float = Field(1e-6, gt=0)
    bounds: Tuple[float, float] = (1.0, 10.0)
    max_restarts: int = Field(500, ge=1)
    max_iterations: int = Field(5000, ge=1)
    seed: int = 0
    n_jobs: int = 1

    @field_validator("bounds")
    @classmethod
    def _ordered_bounds(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not 0 < value[0] < value[1]:
            raise ValueError(f"timing bounds must satisfy 0 < low < high, got {value}")
        return value


class CodingReport(BaseModel):
    """Deviation of the decoded errors from multiples of identity on the code space."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    residual: float = Field(..., ge=0)
    condition_matrix_norms: List[float]
    error_labels: List[str] = Field(default_factory=list)
    unitarity_defect: float
    coding_matrix: Operator
    converged: bool = True
    tolerance: Optional[float] = None
    restarts: int = 0
    iterations: int = 0

    def summary(self) -> dict:
        return {
            "residual": self.residual,
            "condition_matrix_norms": self.condition_matrix_norms,
            "error_labels": self.error_labels,
            "unitarity_defect": self.unitarity_defect,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "restarts": self.restarts,
            "iterations": self.iterations,
        }


class CycleConfig(BaseModel):
    zeno_interval: float = Field(..., gt=0, description="Free-evolution time per cycle, ns")
    n_cycles: int = Field(1, ge=1)
    eta: float = Field(1.0, gt=0, le=1, description="Coherence transfer efficiency")
    fine_structure: FineStructure = Field(default_factory=lambda: FineStructure(enabled=False))
    seed: int = 0
    protected: bool = True
    n_trajectories: int = Field(1, ge=1)
    sample_projection: bool = False
    n_jobs: int = 1


class FidelityRow(BaseModel):
    cycle: int
    fidelity: float = Field(..., ge=0, le=1 + 1e-9)
    survival_prob: float = Field(..., ge=0, le=1 + 1e-9)
    cumulative_success: float = Field(..., ge=0, le=1 + 1e-9)


class FidelityTrace(BaseModel):
    mode: Literal["protected", "unprotected"]
    zeno_interval: float
    n_trajectories: int = 1
    rows: List[FidelityRow] = Field(default_factory=list)

    @property
    def final_fidelity(self) -> float:
        return self.rows[-1].fidelity if self.rows else 1.0

    @property
    def final_infidelity(self) -> float:
        return 1.0 - self.final_fidelity

    @property
    def final_loss(self) -> float:
        """1 - F * P_success: infidelity counting failed projections as losses."""
        if not self.rows:
            return 0.0
        last = self.rows[-1]
        return 1.0 - last.fidelity * last.cumulative_success


class ProjectionOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    success: bool
    probability: float = Field(..., ge=0, le=1 + 1e-9)
    state: Optional[np.ndarray] = None


class ScalingFit(BaseModel):
    mode: str
    exponent: float
    intercept: float
    r_squared: float
    residuals: List[float]
    n_points: int
