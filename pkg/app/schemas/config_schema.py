"""Run configuration file: JSON with unit-annotated physical values."""
import json
from pathlib import Path
from typing import Annotated, List, Optional, Tuple, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError

from app.schemas.kinetics_schema import KineticsParams
from app.schemas.zeno_schema import (
    CycleConfig,
    FieldConfig,
    FineStructure,
    LaserFields,
    OptimizerSettings,
    PulseFields,
)
from app.utils.errors import ConfigError
from app.utils.units import EV_TO_RAD_PER_NS, parse_quantity


def _quantity(dimension: str):
    return BeforeValidator(lambda value: parse_quantity(value, dimension))


Tesla = Annotated[float, _quantity("magnetic_field")]
VoltPerMeter = Annotated[float, _quantity("electric_field")]
Radian = Annotated[float, _quantity("phase")]
AngularFrequency = Annotated[float, _quantity("energy")]
Wavenumber = Annotated[float, _quantity("wavenumber")]
Nanoseconds = Annotated[float, _quantity("time")]
Rate = Annotated[float, _quantity("rate")]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemSection(_Strict):
    L: Union[int, str] = 3
    S: Union[int, str] = "1/2"
    n_errors: int = Field(6, ge=1)
    code_states: Optional[List[Tuple[Union[int, str], Union[int, str]]]] = None
    principal_n: int = 60


class LaserSection(_Strict):
    e_x: VoltPerMeter = 0.0
    e_y: VoltPerMeter = 0.0
    phase_y: Radian = 0.0


class PulseSection(_Strict):
    unprimed: LaserSection = Field(default_factory=LaserSection)
    primed: LaserSection = Field(default_factory=LaserSection)


class FieldsSection(_Strict):
    b_field: Tuple[Tesla, Tesla, Tesla] = (0.0, 0.0, 0.0)
    pulse_a: PulseSection = Field(default_factory=PulseSection)
    pulse_b: PulseSection = Field(default_factory=PulseSection)
    omega_r: AngularFrequency = 0.986324 * EV_TO_RAD_PER_NS
    omega_r_prime: AngularFrequency = 0.986676 * EV_TO_RAD_PER_NS
    delta: AngularFrequency = -1e-5 * EV_TO_RAD_PER_NS
    delta_prime: AngularFrequency = 1e-5 * EV_TO_RAD_PER_NS
    raman_scale: float = 1.0e-12
    raman_scale_prime: float = 0.5e-12
    resolve_intermediate_j: bool = False


class FineStructureSection(_Strict):
    splitting: Wavenumber = 2e-5
    enabled: bool = False
    narrow_spectrum: bool = False


class ErrorsSection(_Strict):
    amplitudes: List[AngularFrequency] = Field(default_factory=lambda: [0.0] * 6)
    correlation_time: Nanoseconds = 10.0


class OptimizerSection(_Strict):
    n_pulses: int = Field(34, ge=1)
    tolerance: float = Field(1e-6, gt=0)
    bounds: Tuple[Nanoseconds, Nanoseconds] = (1.0, 10.0)
    max_restarts: int = Field(500, ge=1)
    max_iterations: int = Field(5000, ge=1)
    n_jobs: Optional[int] = None


class CycleSection(_Strict):
    zeno_interval: Nanoseconds = 5.0
    n_cycles: int = Field(10, ge=1)
    eta: Union[float, str] = Field(1.0, description="Number in (0, 1] or 'kinetics' for the CG value")
    n_trajectories: int = Field(1, ge=1)
    sample_projection: bool = False
    initial_qubit: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.7071067811865476, 0.0), (0.7071067811865476, 0.0)],
        description="(re, im) amplitudes on |nu_1>, |nu_2>",
    )
    sweep_intervals: List[Nanoseconds] = Field(default_factory=list)
    n_jobs: Optional[int] = None


class KineticsSection(_Strict):
    d_gamma_lambda: float = 1.0
    d_lambda_mu: float = 1.0
    d_mu_nu: float = 1.0
    e1: float = 1.0
    e2: float = 1.0
    delta1: AngularFrequency = 1.0
    delta2: AngularFrequency = 0.0
    cavity_enhancement: float = 1.0
    gamma_5p: Rate = 1.0 / 26.2
    tau_60f: Nanoseconds = 1.15e5
    tau_5d: Nanoseconds = 240.0
    tau_5p: Nanoseconds = 26.2
    dominance_threshold: float = 10.0
    n_samples: int = Field(201, ge=2)


class RunConfig(_Strict):
    """Top-level run configuration; physical values carry units in the file."""
    seed: int = 0
    output_dir: str = "results"
    system: SystemSection = Field(default_factory=SystemSection)
    fields: FieldsSection = Field(default_factory=FieldsSection)
    fine_structure: FineStructureSection = Field(default_factory=FineStructureSection)
    errors: ErrorsSection = Field(default_factory=ErrorsSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    cycle: CycleSection = Field(default_factory=CycleSection)
    kinetics: KineticsSection = Field(default_factory=KineticsSection)
    timings: Optional[List[float]] = Field(None, description="Coding timings in ns")

    def field_config(self) -> FieldConfig:
        f = self.fields

        def pulse(section: PulseSection) -> PulseFields:
            return PulseFields(unprimed=LaserFields(**section.unprimed.model_dump()),
                               primed=LaserFields(**section.primed.model_dump()))

        return FieldConfig(
            b_field=f.b_field, pulse_a=pulse(f.pulse_a), pulse_b=pulse(f.pulse_b),
            omega_r=f.omega_r, omega_r_prime=f.omega_r_prime, delta=f.delta, delta_prime=f.delta_prime,
            raman_scale=f.raman_scale, raman_scale_prime=f.raman_scale_prime,
            resolve_intermediate_j=f.resolve_intermediate_j,
        )

    def fine_structure_config(self) -> FineStructure:
        fs = self.fine_structure
        return FineStructure(splitting_cm=fs.splitting, enabled=fs.enabled, narrow_spectrum=fs.narrow_spectrum)

    def optimizer_settings(self, n_jobs: int = 1) -> OptimizerSettings:
        o = self.optimizer
        return OptimizerSettings(n_pulses=o.n_pulses, tolerance=o.tolerance, bounds=o.bounds,
                                 max_restarts=o.max_restarts, max_iterations=o.max_iterations,
                                 seed=self.seed, n_jobs=o.n_jobs or n_jobs)

    def cycle_config(self, eta: float, protected: bool, n_jobs: int = 1) -> CycleConfig:
        c = self.cycle
        return CycleConfig(zeno_interval=c.zeno_interval, n_cycles=c.n_cycles, eta=eta,
                           fine_structure=self.fine_structure_config(), seed=self.seed, protected=protected,
                           n_trajectories=c.n_trajectories, sample_projection=c.sample_projection,
                           n_jobs=c.n_jobs or n_jobs)

    def initial_qubit(self) -> List[complex]:
        return [complex(re, im) for re, im in self.cycle.initial_qubit]

    def kinetics_params(self) -> KineticsParams:
        k = self.kinetics.model_dump(exclude={"dominance_threshold", "n_samples"})
        return KineticsParams(**k)


def _line_of(text: str, loc: Tuple) -> Optional[int]:
    """Line of the innermost key of ``loc`` found by walking the keys in order."""
    position, found = 0, None
    for key in loc:
        if not isinstance(key, str):
            continue
        index = text.find(f'"{key}"', position)
        if index < 0:
            break
        position, found = index, text.count("\n", 0, index) + 1
    return found


def parse_run_config(text: str) -> RunConfig:
    """
    Validate configuration text.

    Raises:
        ConfigError: With one ``line N: path: message`` entry per problem
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"line {e.lineno}: {e.msg}"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        messages = []
        for error in e.errors():
            path = ".".join(str(part) for part in error["loc"]) or "<root>"
            line = _line_of(text, error["loc"])
            where = f"line {line}: " if line else ""
            messages.append(f"{where}{path}: {error['msg']}")
        raise ConfigError(messages)


def load_run_config(path: Path) -> RunConfig:
    """Read and validate a configuration file; OSError propagates unchanged."""
    return parse_run_config(Path(path).read_text())
