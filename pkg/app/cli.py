"""Command line: model | optimize | verify | simulate | project."""
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import typer
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from app.graph.protection_cycle_graph import run_cycles, sweep_zeno_intervals
from app.physics.nonholonomic_control import coding_residual, optimize_timings, sequence_propagator
from app.physics.projection_kinetics import (
    branch_rates,
    eta_report,
    kinetics_time_series,
    rate_dominance_check,
)
from app.physics.system_model import (
    build_space,
    control_hamiltonians,
    error_generators,
    fine_structure_h0,
    narrow_spectrum_errors,
    raman_hamiltonian,
    zeeman_hamiltonian,
)
from app.physics.zeno_cycle import scaling_fit
from app.schemas.config_schema import RunConfig, load_run_config
from app.schemas.kinetics_schema import KineticsState
from app.schemas.quantum_schema import Operator
from app.schemas.zeno_schema import ErrorModel, LevelSpace, PulseSequence
from app.utils.errors import ConfigError, NonConvergenceError
from app.utils.io import read_timings, write_csv, write_json, write_metadata
from app.utils.logger import logger, use_rich_handler

load_dotenv()

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_CONFIG = 3
EXIT_IO = 4

TRACE_HEADER = ["cycle", "fidelity", "survival_prob", "cumulative_success"]
KINETICS_HEADER = ["t", "rho_g1g1", "rho_g2g2", "rho_n1n1", "rho_n2n2",
                   "rho_g1g2_re", "rho_g1g2_im", "rho_n1n2_re", "rho_n1n2_im"]

app = typer.Typer(help="Zeno coherence protection of a Rydberg spin qubit.", add_completion=False)
console = Console()

ConfigOption = typer.Option(None, "--config", help="Run configuration JSON (default: $ZENO_CONFIG)")
SeedOption = typer.Option(None, "--seed", help="Master seed, overrides the config")
OutOption = typer.Option(None, "--out", help="Output directory, overrides the config")


class _Run:
    """Resolved configuration plus the level space and error model it implies."""

    def __init__(self, config: Optional[Path], seed: Optional[int], out: Optional[Path]):
        path = config or os.getenv("ZENO_CONFIG")
        self.config_path = path
        self.cfg = load_run_config(Path(path)) if path else RunConfig()
        if seed is not None:
            self.cfg = self.cfg.model_copy(update={"seed": seed})
        self.out = Path(out or self.cfg.output_dir)
        self.n_jobs = int(os.getenv("ZENO_N_JOBS", "1"))

        system = self.cfg.system
        self.space: LevelSpace = build_space(system.L, system.S, n_errors=system.n_errors,
                                             code_states=system.code_states, principal_n=system.principal_n)
        self.fields = self.cfg.field_config()
        amplitudes = self.cfg.errors.amplitudes
        base = error_generators(self.space, correlation_time=self.cfg.errors.correlation_time, seed=self.cfg.seed)
        if len(amplitudes) != len(base.generators):
            raise ConfigError([f"errors.amplitudes: expected {len(base.generators)} values, got {len(amplitudes)}"])
        self.errors: ErrorModel = base.with_amplitudes(amplitudes)
        fs = self.cfg.fine_structure
        if fs.narrow_spectrum and not fs.enabled:
            logger.warning("fine_structure.narrow_spectrum is set but the splitting is disabled")
        # the timing search targets these; the dynamics always use the full generators
        self.coding_errors: ErrorModel = (
            narrow_spectrum_errors(self.errors, self.space) if fs.narrow_spectrum else self.errors
        )

    def hamiltonians(self) -> Tuple[Operator, Operator]:
        return control_hamiltonians(self.space, self.fields)

    def reversed_hamiltonians(self) -> Tuple[Operator, Operator]:
        """H_a, H_b under the reversed B field and detunings, used for decoding."""
        return control_hamiltonians(self.space, self.fields.reversed_fields())


def _guard(command: str, body) -> None:
    """Run a command body and map failures onto exit codes."""
    use_rich_handler(os.getenv("ZENO_LOG_LEVEL", "INFO"))
    try:
        body()
    except ConfigError as e:
        for message in e.messages:
            console.print(f"[red]config error[/red] {escape(message)}")
        raise typer.Exit(code=EXIT_CONFIG)
    except NonConvergenceError as e:
        console.print(f"[yellow]{escape(str(e))}[/yellow]")
        raise typer.Exit(code=EXIT_NONCONVERGENCE)
    except (ValidationError, ValueError) as e:
        console.print(f"[red]invalid input[/red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_CONFIG)
    except OSError as e:
        console.print(f"[red]I/O error[/red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_IO)
    logger.info(f"{command} finished")


def _operator_entry(op) -> Dict[str, Any]:
    return {
        "matrix": op.to_pairs(),
        "hermitian": op.is_hermitian(),
        "hermiticity_defect": op.hermiticity_defect(),
        "spectral_norm": op.spectral_norm(),
    }


def _report_table(title: str, report) -> Table:
    table = Table(title=title)
    table.add_column("error")
    table.add_column("||P C^-1 E C P - c I||_F", justify="right")
    for label, norm in zip(report.error_labels, report.condition_matrix_norms):
        table.add_row(label, f"{norm:.3e}")
    table.add_row("[bold]residual[/bold]", f"{report.residual:.3e}")
    return table


def _load_sequence(run: _Run, timings: Optional[Path]) -> Optional[PulseSequence]:
    values: Optional[List[float]] = read_timings(timings) if timings else run.cfg.timings
    if values is None:
        return None
    if not values:
        raise ConfigError(["timings: the sequence is empty"])
    expected = run.cfg.optimizer.n_pulses
    if len(values) != expected:
        raise ConfigError([f"timings: expected {expected} durations (optimizer.n_pulses), got {len(values)}"])
    return PulseSequence.from_durations(values)


@app.command()
def model(config: Optional[Path] = ConfigOption, seed: Optional[int] = SeedOption,
          out: Optional[Path] = OutOption):
    """Dump the Zeeman, Raman, H0 and error matrices with Hermiticity diagnostics."""
    def body():
        run = _Run(config, seed, out)
        space = run.space
        operators = {
            "zeeman": zeeman_hamiltonian(space, run.fields.b_field),
            "raman_A": raman_hamiltonian(space, run.fields, "A"),
            "raman_B": raman_hamiltonian(space, run.fields, "B"),
            "h0": fine_structure_h0(space, run.cfg.fine_structure_config()),
        }
        operators.update({label: E for label, E in zip(run.errors.labels, run.errors.generators)})
        write_json(run.out / "operators.json", {
            "basis": [state.label() for state in space.basis],
            "code_indices": list(space.code_indices),
            "hamming": space.hamming.model_dump(),
            "operators": {name: _operator_entry(op) for name, op in operators.items()},
        })
        write_metadata(run.out, "model", run.cfg.seed, run.config_path)

        table = Table(title=f"Operators on {space.basis_label} (dim {space.dimension})")
        table.add_column("operator")
        table.add_column("hermitian")
        table.add_column("spectral norm", justify="right")
        for name, op in operators.items():
            table.add_row(name, str(op.is_hermitian()), f"{op.spectral_norm():.6g}")
        console.print(table)
    _guard("model", body)


@app.command()
def optimize(config: Optional[Path] = ConfigOption, seed: Optional[int] = SeedOption,
             out: Optional[Path] = OutOption):
    """Search coding timings; exits 2 when no restart reaches the tolerance."""
    def body():
        run = _Run(config, seed, out)
        ha, hb = run.hamiltonians()
        with console.status("Optimizing coding timings"):
            seq, report = optimize_timings(ha, hb, run.coding_errors, run.space,
                                           opts=run.cfg.optimizer_settings(run.n_jobs))
        write_json(run.out / "timings.json", {"timings_ns": seq.durations, "tags": [p.tag for p in seq.pulses]})
        write_json(run.out / "coding_report.json", report.summary())
        write_metadata(run.out, "optimize", run.cfg.seed, run.config_path)
        console.print(_report_table("Coding conditions", report))
        if not report.converged:
            raise NonConvergenceError(report.residual, report.tolerance, report.restarts)
    _guard("optimize", body)


@app.command()
def verify(config: Optional[Path] = ConfigOption, seed: Optional[int] = SeedOption,
           out: Optional[Path] = OutOption,
           timings: Optional[Path] = typer.Option(None, "--timings", help="Timings JSON to check")):
    """Evaluate the coding conditions for supplied timings."""
    def body():
        run = _Run(config, seed, out)
        seq = _load_sequence(run, timings)
        if seq is None:
            raise ConfigError(["timings: supply --timings or a 'timings' entry in the config"])
        ha, hb = run.hamiltonians()
        report = coding_residual(sequence_propagator(seq, ha, hb), run.coding_errors, run.space)
        write_json(run.out / "verify_report.json", {"timings_ns": seq.durations, **report.summary()})
        write_metadata(run.out, "verify", run.cfg.seed, run.config_path)
        console.print(_report_table("Coding conditions (supplied timings)", report))
    _guard("verify", body)


def _resolve_eta(run: _Run) -> float:
    eta = run.cfg.cycle.eta
    if isinstance(eta, str):
        if eta != "kinetics":
            raise ConfigError([f"cycle.eta: expected a number or 'kinetics', got {eta!r}"])
        return eta_report(run.cfg.kinetics_params()).eta
    if not 0 < eta <= 1:
        raise ConfigError([f"cycle.eta: must lie in (0, 1], got {eta}"])
    return float(eta)


def _sweep_summary(traces) -> Dict[str, Any]:
    summary: Dict[str, Any] = {
        "zeno_interval_ns": [t.zeno_interval for t in traces],
        "final_fidelity": [t.final_fidelity for t in traces],
        "final_cumulative_success": [t.rows[-1].cumulative_success for t in traces],
    }
    try:
        summary["fit"] = scaling_fit(traces).model_dump()
    except ValueError as e:
        summary["fit"] = None
        summary["fit_error"] = str(e)
    return summary


@app.command()
def simulate(config: Optional[Path] = ConfigOption, seed: Optional[int] = SeedOption,
             out: Optional[Path] = OutOption,
             timings: Optional[Path] = typer.Option(None, "--timings", help="Coding timings JSON")):
    """Run protected and unprotected cycles; sweep the Zeno interval when configured."""
    def body():
        run = _Run(config, seed, out)
        ha, hb = run.hamiltonians()
        reversed_pair = run.reversed_hamiltonians()
        tolerance = run.cfg.optimizer.tolerance
        seq = _load_sequence(run, timings)
        if seq is None:
            with console.status("Optimizing coding timings"):
                seq, report = optimize_timings(ha, hb, run.coding_errors, run.space,
                                               opts=run.cfg.optimizer_settings(run.n_jobs))
            if not report.converged:
                raise NonConvergenceError(report.residual, report.tolerance, report.restarts)
        else:
            report = coding_residual(sequence_propagator(seq, ha, hb), run.coding_errors, run.space)
        conditions_met = report.residual <= tolerance
        if not conditions_met:
            logger.warning(f"Coding residual {report.residual:.3e} exceeds optimizer.tolerance {tolerance:.1e}; "
                           f"the protected mode runs with unmet correction conditions")
        eta = _resolve_eta(run)
        qubit = run.cfg.initial_qubit()

        sweep: Dict[str, Any] = {
            "eta": eta,
            "coding": {"residual": report.residual, "tolerance": tolerance, "conditions_met": conditions_met},
            "modes": {},
        }
        table = Table(title=f"Protection cycles (eta={eta:.6f})",
                      caption=f"coding residual {report.residual:.3e} (tolerance {tolerance:.1e})")
        table.add_column("mode")
        table.add_column("final fidelity", justify="right")
        table.add_column("cumulative success", justify="right")
        for protected in (True, False):
            cycle_cfg = run.cfg.cycle_config(eta if protected else 1.0, protected, run.n_jobs)
            trace = run_cycles(qubit, seq, ha, hb, cycle_cfg, run.errors, run.space, reversed_pair=reversed_pair)
            write_csv(run.out / f"trace_{trace.mode}.csv", TRACE_HEADER, [r.model_dump() for r in trace.rows])
            table.add_row(trace.mode, f"{trace.final_fidelity:.12f}", f"{trace.rows[-1].cumulative_success:.6f}")
            if run.cfg.cycle.sweep_intervals:
                traces = sweep_zeno_intervals(run.cfg.cycle.sweep_intervals, qubit, seq, ha, hb,
                                              cycle_cfg, run.errors, run.space, reversed_pair=reversed_pair)
                sweep["modes"][trace.mode] = _sweep_summary(traces)
        if run.cfg.cycle.sweep_intervals:
            write_json(run.out / "sweep.json", sweep)
        write_metadata(run.out, "simulate", run.cfg.seed, run.config_path)
        console.print(table)
    _guard("simulate", body)


@app.command()
def project(config: Optional[Path] = ConfigOption, seed: Optional[int] = SeedOption,
            out: Optional[Path] = OutOption):
    """Integrate the projection kinetics and report eta and the rate margins."""
    def body():
        run = _Run(config, seed, out)
        params = run.cfg.kinetics_params()
        gamma1, gamma2 = branch_rates(params)
        if min(gamma1, gamma2) <= 0:
            raise ConfigError(["kinetics: both branch rates must be positive"])
        horizon = 10.0 / min(gamma1, gamma2)
        times = np.linspace(0.0, horizon, run.cfg.kinetics.n_samples)
        alpha, beta = run.cfg.initial_qubit()
        norm = np.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        rho0 = KineticsState.from_qubit(alpha / norm, beta / norm)
        series = kinetics_time_series(gamma1, gamma2, rho0, times)
        write_csv(run.out / "kinetics.csv", KINETICS_HEADER,
                  [{"t": float(t), **state.as_row()} for t, state in zip(times, series)])

        eta = eta_report(params)
        dominance = rate_dominance_check(params, run.cfg.kinetics.dominance_threshold)
        write_json(run.out / "eta_report.json", {**eta.model_dump(), "dominance": dominance.model_dump()})
        write_metadata(run.out, "project", run.cfg.seed, run.config_path)

        table = Table(title="Projection kinetics")
        table.add_column("quantity")
        table.add_column("value", justify="right")
        table.add_row("Gamma_1/Gamma_2", eta.rate_ratio)
        table.add_row("eta", f"{eta.eta:.10f}")
        table.add_row("1 - eta", f"{eta.error_probability:.6f}")
        for name, value in dominance.margins.items():
            mark = "ok" if dominance.passed[name] else "LOW"
            table.add_row(name, f"{value:.4g} ({mark})")
        console.print(table)
    _guard("project", body)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
