from typing import Dict

from pydantic import BaseModel, Field, model_validator

POSITIVITY_TOL = 1e-9


class KineticsParams(BaseModel):
    """Inputs of the three-photon rate; rates in 1/ns, detunings in rad/ns."""
    d_gamma_lambda: float = 1.0
    d_lambda_mu: float = 1.0
    d_mu_nu: float = 1.0
    e1: float = 1.0
    e2: float = 1.0
    delta1: float = 1.0
    delta2: float = 0.0
    cavity_enhancement: float = Field(1.0, ge=1.0, description="Direction-averaged cavity mode-density factor")
    gamma_5p: float = Field(1.0 / 26.2, ge=0, description="Decay rate of the 5p branch, 1/ns")
    tau_60f: float = Field(1.15e5, gt=0, description="60f lifetime, ns")
    tau_5d: float = Field(240.0, gt=0, description="5d lifetime, ns")
    tau_5p: float = Field(26.2, gt=0, description="5p lifetime, ns")

    @model_validator(mode="after")
    def _nonzero_detunings(self) -> "KineticsParams":
        if self.delta1 == 0:
            raise ValueError("detuning delta1 must be nonzero")
        if self.delta1 + self.delta2 == 0:
            raise ValueError("detuning sum delta1 + delta2 must be nonzero")
        return self


class KineticsState(BaseModel):
    """Populations and coherences of the gamma (60f) and nu (5s) doublets."""
    rho_g1g1: float = Field(..., ge=-POSITIVITY_TOL, le=1 + POSITIVITY_TOL)
    rho_g2g2: float = Field(..., ge=-POSITIVITY_TOL, le=1 + POSITIVITY_TOL)
    rho_n1n1: float = Field(0.0, ge=-POSITIVITY_TOL, le=1 + POSITIVITY_TOL)
    rho_n2n2: float = Field(0.0, ge=-POSITIVITY_TOL, le=1 + POSITIVITY_TOL)
    rho_g1g2: complex = 0j
    rho_n1n2: complex = 0j

    @model_validator(mode="after")
    def _physical(self) -> "KineticsState":
        if self.population() > 1 + POSITIVITY_TOL:
            raise ValueError(f"populations sum to {self.population()} > 1")
        if abs(self.rho_g1g2) ** 2 > self.rho_g1g1 * self.rho_g2g2 + POSITIVITY_TOL:
            raise ValueError("gamma coherence violates positivity")
        return self

    @classmethod
    def from_qubit(cls, alpha: complex, beta: complex) -> "KineticsState":
        """Pure superposition alpha|gamma_1> + beta|gamma_2>."""
        return cls(rho_g1g1=abs(alpha) ** 2, rho_g2g2=abs(beta) ** 2, rho_g1g2=alpha * complex(beta).conjugate())

    def population(self) -> float:
        return self.rho_g1g1 + self.rho_g2g2 + self.rho_n1n1 + self.rho_n2n2

    def as_row(self) -> Dict[str, float]:
        return {
            "rho_g1g1": self.rho_g1g1,
            "rho_g2g2": self.rho_g2g2,
            "rho_n1n1": self.rho_n1n1,
            "rho_n2n2": self.rho_n2n2,
            "rho_g1g2_re": self.rho_g1g2.real,
            "rho_g1g2_im": self.rho_g1g2.imag,
            "rho_n1n2_re": self.rho_n1n2.real,
            "rho_n1n2_im": self.rho_n1n2.imag,
        }


class DominanceReport(BaseModel):
    """Margins of the rate conditions; each passes above ``threshold``."""
    gamma: float
    pi_branch_ratio: float
    margins: Dict[str, float]
    passed: Dict[str, bool]
    threshold: float

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


class EtaReport(BaseModel):
    rate_ratio: str = Field(..., description="Exact Gamma_1/Gamma_2 as p/q")
    rate_ratio_float: float
    eta: float
    error_probability: float
    gamma_1: float
    gamma_2: float
